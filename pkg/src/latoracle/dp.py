"""Backend selection for the shortest-path kernel.

Prefers the compiled Cython kernel and falls back to the pure-Python one
when the extension is unavailable. LATORACLE_BACKEND=pure forces the
fallback. Both backends return bit-identical results.
"""

from __future__ import annotations

import os

from . import _dp_py

_FORCED = os.environ.get("LATORACLE_BACKEND", "").strip().lower()

if _FORCED == "pure":
    _impl = _dp_py
    BACKEND = "pure"
else:
    try:
        from . import _dp_cy as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        if _FORCED == "cython":
            raise ImportError(
                "LATORACLE_BACKEND=cython but the compiled kernel is not built"
            ) from None
        _impl = _dp_py
        BACKEND = "pure"

solve = _impl.solve


def backends() -> dict[str, object]:
    """Name -> solve callable for every importable backend."""
    out: dict[str, object] = {"pure": _dp_py.solve}
    try:
        from . import _dp_cy  # type: ignore[attr-defined]

        out["cython"] = _dp_cy.solve
    except ImportError:
        pass
    return out
