"""Interned token symbols shared by lattices, references and policies."""

from __future__ import annotations

from typing import Iterable

# Sentinel id for "start of sequence" bigram context. It has no surface
# form, is never returned by intern() and never labels an edge.
BOS = 0


class SymbolTable:
    """Bijective mapping between surface tokens and integer ids >= 1."""

    def __init__(self) -> None:
        self._strings: list[str | None] = [None]  # slot 0 reserved for BOS
        self._ids: dict[str, int] = {}

    def __len__(self) -> int:
        """Number of interned tokens (the BOS sentinel is not counted)."""
        return len(self._strings) - 1

    def __contains__(self, token: str) -> bool:
        return token in self._ids

    def intern(self, token: str) -> int:
        if not token:
            raise ValueError("cannot intern an empty token")
        tid = self._ids.get(token)
        if tid is None:
            tid = len(self._strings)
            self._strings.append(token)
            self._ids[token] = tid
        return tid

    def intern_all(self, tokens: Iterable[str]) -> tuple[int, ...]:
        return tuple(self.intern(t) for t in tokens)

    def lookup(self, token: str) -> int | None:
        """Id of an already-interned token, or None."""
        return self._ids.get(token)

    def text(self, tid: int) -> str:
        if tid == BOS:
            return "<bos>"
        if not 0 < tid < len(self._strings):
            raise KeyError(f"unknown token id {tid}")
        return self._strings[tid]  # type: ignore[return-value]

    def render(self, ids: Iterable[int]) -> str:
        """Space-joined surface form of a token id sequence."""
        return " ".join(self.text(i) for i in ids)

    @property
    def max_id(self) -> int:
        return len(self._strings) - 1
