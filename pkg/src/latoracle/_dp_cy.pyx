# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled shortest-path kernel.

Two phases: a numeric min-cost sweep over the DAG, then tie resolution
(path length, lexicographically smaller edge-index sequence) restricted
to the tight-edge subgraph. Tight edges satisfy
dist[u] + cost == dist[v] exactly, which is safe because both sides are
produced by the same left-to-right accumulations. Edge indices follow
lattice order, so the winner does not depend on label numbering.
Results are bit-identical to the pure backend.
"""

from libc.float cimport DBL_MAX


def solve(int[::1] out_start, int[::1] eto, int[::1] elabel,
          double[::1] ecost, unsigned char[::1] finals, int from_state,
          bint prefer_longer=False):
    """See latoracle._dp_py.solve; same contract and tie-breaking."""
    cdef int n = out_start.shape[0] - 1
    cdef int u, v, k, end
    cdef double c, best_total
    cdef double[::1] dist
    import numpy as np
    dist_arr = np.full(n, DBL_MAX, dtype=np.float64)
    dist = dist_arr
    dist[from_state] = 0.0

    for u in range(from_state, n):
        if dist[u] == DBL_MAX:
            continue
        for k in range(out_start[u], out_start[u + 1]):
            v = eto[k]
            c = dist[u] + ecost[k]
            if c < dist[v]:
                dist[v] = c

    best_total = DBL_MAX
    for u in range(from_state, n):
        if finals[u] and dist[u] < best_total:
            best_total = dist[u]
    if best_total == DBL_MAX:
        return None

    # Tie resolution on the tight subgraph; edge-index tuples stay
    # Python objects but only edges on some min-cost path are visited.
    plen_arr = np.full(n, -1, dtype=np.int32)
    cdef int[::1] plen = plen_arr
    pedg = [None] * n
    plen[from_state] = 0
    pedg[from_state] = ()
    cdef int cand_len
    cdef bint take
    for u in range(from_state, n):
        if plen[u] < 0 or dist[u] == DBL_MAX:
            continue
        for k in range(out_start[u], out_start[u + 1]):
            v = eto[k]
            if dist[u] + ecost[k] != dist[v]:
                continue
            cand_len = plen[u] + 1
            cand_edg = pedg[u] + (k,)
            if plen[v] < 0:
                take = True
            elif cand_len != plen[v]:
                take = cand_len > plen[v] if prefer_longer else cand_len < plen[v]
            else:
                take = cand_edg < pedg[v]
            if take:
                plen[v] = cand_len
                pedg[v] = cand_edg
    end = -1
    for u in range(from_state, n):
        if finals[u] and plen[u] >= 0 and dist[u] == best_total:
            if end < 0:
                take = True
            elif plen[u] != plen[end]:
                take = plen[u] > plen[end] if prefer_longer else plen[u] < plen[end]
            else:
                take = pedg[u] < pedg[end]
            if take:
                end = u
    if end < 0:
        return None

    tokens = []
    states = [from_state]
    for e in pedg[end]:
        tokens.append(elabel[e])
        states.append(eto[e])
    return end, best_total, tuple(tokens), tuple(states)
