"""Grid search over the linear-cost weights (p, r_decay).

Each dev example supplies a lattice, a reference, and a prefix source
sequence; per example a prefix fraction is drawn once (seeded) and the
same cut is reused for every grid cell so cells stay comparable. Cell
score is corpus BLEU of the oracle continuations.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Sequence

from .lattice import ExpandedLattice, Lattice
from .metrics import ThetaParams, corpus_bleu
from .oracle import NoPathError, continue_prefix, prepare_lattice


@dataclass(frozen=True)
class GridSpec:
    p_values: tuple[float, ...]
    r_values: tuple[float, ...]
    prefix_fractions: tuple[float, ...] = (0.0, 0.2, 0.4, 0.6, 0.8)

    def __post_init__(self) -> None:
        if not self.p_values or not self.r_values:
            raise ValueError("empty grid")
        for v in (*self.p_values, *self.r_values):
            if not 0.0 < v < 1.0:
                raise ValueError(f"grid values must be in (0, 1), got {v}")
        for f in self.prefix_fractions:
            if not 0.0 <= f <= 1.0:
                raise ValueError(f"prefix fractions must be in [0, 1], got {f}")
        # scan order is ascending so score ties resolve to the smallest
        # (p, r) pair no matter how the grid was written down
        object.__setattr__(self, "p_values", tuple(sorted(self.p_values)))
        object.__setattr__(self, "r_values", tuple(sorted(self.r_values)))


@dataclass(frozen=True)
class GridCell:
    p: float
    r: float
    corpus_bleu: float
    skipped: int


@dataclass
class GridResult:
    best_p: float
    best_r: float
    cells: list[GridCell] = field(default_factory=list)


def grid_search(
    dev: Sequence[tuple[Lattice | ExpandedLattice, Sequence[int], Sequence[int]]],
    grid: GridSpec,
    seed: int,
    max_n: int = 4,
) -> GridResult:
    """Exhaustive (p, r) scan; ties prefer smaller p, then smaller r.

    Dev rows are (lattice, reference, prefix_source); the prefix fed to
    the oracle is prefix_source cut at a per-example fraction sampled
    once from grid.prefix_fractions. Examples whose continuation fails
    are skipped and counted per cell.
    """
    if not dev:
        raise ValueError("empty dev set")
    rng = random.Random(seed)
    prepared = []
    for lat, ref, base in dev:
        frac = grid.prefix_fractions[rng.randrange(len(grid.prefix_fractions))]
        cut = round(frac * len(base))
        prepared.append((prepare_lattice(lat), tuple(ref), tuple(base[:cut])))

    result = GridResult(best_p=grid.p_values[0], best_r=grid.r_values[0])
    best_score = -1.0
    for p in grid.p_values:
        for r in grid.r_values:
            theta = ThetaParams(p, r)
            pairs = []
            skipped = 0
            for exp, ref, prefix in prepared:
                try:
                    res = continue_prefix(exp, prefix, ref, theta, max_n)
                except NoPathError:
                    skipped += 1
                    continue
                pairs.append((res.full_hyp, ref))
            score = corpus_bleu(pairs, max_n) if pairs else 0.0
            result.cells.append(GridCell(p, r, score, skipped))
            if score > best_score:
                best_score = score
                result.best_p, result.best_r = p, r
    return result


def grid_csv(result: GridResult, prefix_source: str) -> str:
    """Fixed-schema CSV: p, r, prefix_source, corpus_bleu."""
    lines = ["p,r,prefix_source,corpus_bleu"]
    for c in result.cells:
        lines.append(f"{c.p!r},{c.r!r},{prefix_source},{c.corpus_bleu!r}")
    return "\n".join(lines) + "\n"
