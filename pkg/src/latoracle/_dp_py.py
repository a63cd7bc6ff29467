"""Pure-Python shortest-path kernel (fallback backend).

Single-source shortest path on a topologically numbered DAG stored in
CSR form. Ties are broken by path length (shorter by default, longer
with prefer_longer, used for prefix matching), then by the
lexicographically smaller edge-index sequence. Edge indices follow the
order edges appear in the lattice, so the winner is unique and does not
depend on how token labels happen to be numbered.
"""

from __future__ import annotations


def _better(a, b, prefer_longer):
    # a, b = (cost, length, edge path); cost ties compare bit-exactly.
    if a[0] != b[0]:
        return a[0] < b[0]
    if a[1] != b[1]:
        return a[1] > b[1] if prefer_longer else a[1] < b[1]
    return a[2] < b[2]


def solve(out_start, eto, elabel, ecost, finals, from_state, prefer_longer=False):
    """Best path from `from_state` to any state with finals[s] != 0.

    Returns (end_state, cost, tokens, states) or None when no final is
    reachable. Arrays: out_start[S+1] CSR offsets of edges grouped by
    source state, eto/elabel[E], ecost[E], finals[S].
    """
    n = len(out_start) - 1
    starts = out_start.tolist() if hasattr(out_start, "tolist") else list(out_start)
    to = eto.tolist() if hasattr(eto, "tolist") else list(eto)
    lab = elabel.tolist() if hasattr(elabel, "tolist") else list(elabel)
    cost = ecost.tolist() if hasattr(ecost, "tolist") else list(ecost)
    fin = finals.tolist() if hasattr(finals, "tolist") else list(finals)

    best: list[tuple[float, int, tuple[int, ...]] | None] = [None] * n
    best[from_state] = (0.0, 0, ())
    for u in range(from_state, n):
        bu = best[u]
        if bu is None:
            continue
        cu, lu, eu = bu
        for k in range(starts[u], starts[u + 1]):
            v = to[k]
            cand = (cu + cost[k], lu + 1, eu + (k,))
            bv = best[v]
            if bv is None or _better(cand, bv, prefer_longer):
                best[v] = cand

    end = -1
    winner: tuple[float, int, tuple[int, ...]] | None = None
    for s in range(from_state, n):
        if fin[s] and best[s] is not None:
            # Distinct paths have distinct edge sequences, so the
            # strict comparison never sees a full tie.
            if winner is None or _better(best[s], winner, prefer_longer):
                winner = best[s]
                end = s
    if winner is None:
        return None

    path = winner[2]
    tokens = tuple(lab[e] for e in path)
    states = (from_state,) + tuple(to[e] for e in path)
    return end, winner[0], tokens, states
