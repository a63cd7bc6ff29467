"""Lattice oracle: best and prefix-constrained best hypotheses under the
linearized n-gram cost.

decode_oracle finds the in-lattice hypothesis with minimal linear cost
against a reference. continue_prefix handles a forced prefix in two
steps: (1) re-weight the lattice against the prefix itself, make every
state final and take the shortest path, which locates the in-lattice
path best matching the prefix and its end state; (2) re-weight against
the true reference, restrict to edges reachable from that end state and
take the shortest path from there. The first continuation edge scores
its boundary bigram against the last token of the *given* prefix, not
the matched one. Cost ties prefer the longer path in step 1 and the
shorter one everywhere else.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import dp
from .lattice import ExpandedLattice, Lattice, expand_bigram_context, split_phrases
from .metrics import NGramIndex, ThetaParams, sentence_bleu
from .symbols import BOS, SymbolTable

log = logging.getLogger("latoracle.oracle")


class NoPathError(RuntimeError):
    """No complete path satisfies the constraints."""


@dataclass(frozen=True)
class OraclePath:
    tokens: tuple[int, ...]
    linear_cost: float
    end_state: int


@dataclass(frozen=True)
class OracleResult:
    """Continuation of a (possibly empty) prefix.

    full_hyp = prefix + continuation; exact_bleu is sentence BLEU of
    full_hyp; reward_to_go = BLEU(full_hyp) - BLEU(prefix); linear_cost
    is the linear cost of the continuation path, boundary bigram
    included. matched_end_state is diagnostic: the expanded-lattice
    state where the matched prefix ended.
    """

    matched_prefix: tuple[int, ...]
    continuation: tuple[int, ...]
    full_hyp: tuple[int, ...]
    exact_bleu: float
    linear_cost: float
    reward_to_go: float
    matched_end_state: int = 0


class WeightedLattice:
    """Expanded lattice plus per-edge oracle costs for one reference."""

    def __init__(
        self,
        exp: ExpandedLattice,
        oracle_cost: np.ndarray,
        theta: ThetaParams,
        index: NGramIndex,
    ):
        self.exp = exp
        self.oracle_cost = oracle_cost
        self.theta = theta
        self.index = index


def prepare_lattice(lat: Lattice | ExpandedLattice) -> ExpandedLattice:
    """Split phrases and expand bigram contexts (idempotent)."""
    if isinstance(lat, ExpandedLattice):
        return lat
    return expand_bigram_context(split_phrases(lat))


def reweight(exp: ExpandedLattice, index: NGramIndex, theta: ThetaParams) -> WeightedLattice:
    """Edge cost = theta0 + theta1*[unigram in ref] + theta2*[bigram
    (source-state context, label) in ref]. Model costs are retained on
    the expanded lattice and untouched."""
    if theta.order != 2:
        raise ValueError("lattice reweighting is defined for order-2 costs")
    th = theta.theta
    labels = exp.elabel.astype(np.int64)
    ctx = exp.ctx.astype(np.int64)[exp.efrom]
    uni = np.isin(labels, index.unigram_array)
    stride = int(max(labels.max(initial=0), ctx.max(initial=0), index.max_token)) + 1
    keys = ctx * stride + labels
    bi = np.isin(keys, index.bigram_key_array(stride))
    cost = th[0] + th[1] * uni + th[2] * bi
    return WeightedLattice(exp, np.ascontiguousarray(cost, dtype=np.float64), theta, index)


def _solve(
    exp: ExpandedLattice,
    cost: np.ndarray,
    from_state: int,
    finals_mask: np.ndarray,
    prefer_longer: bool = False,
) -> tuple[int, float, tuple[int, ...], tuple[int, ...]] | None:
    return dp.solve(
        exp.out_start, exp.eto, exp.elabel, cost, finals_mask, from_state, prefer_longer
    )


def shortest_path(w: WeightedLattice, from_state: int = 0) -> OraclePath:
    """Minimal-cost path from `from_state` to any final state. Ties go to
    the shorter path, then the lexicographically smaller token sequence."""
    hit = _solve(w.exp, w.oracle_cost, from_state, w.exp.finals_mask)
    if hit is None:
        raise NoPathError(f"no final state reachable from state {from_state}")
    end, cost, tokens, _states = hit
    return OraclePath(tokens=tokens, linear_cost=cost, end_state=end)


def decode_oracle(
    lat: Lattice | ExpandedLattice,
    ref: Sequence[int],
    theta: ThetaParams,
    max_n: int = 4,
) -> OracleResult:
    """Best in-lattice hypothesis against `ref` (empty-prefix oracle)."""
    exp = prepare_lattice(lat)
    ref = tuple(ref)
    w = reweight(exp, NGramIndex(ref, max_order=theta.order), theta)
    path = shortest_path(w)
    bleu = sentence_bleu(path.tokens, ref, max_n)
    return OracleResult(
        matched_prefix=(),
        continuation=path.tokens,
        full_hyp=path.tokens,
        exact_bleu=bleu,
        linear_cost=path.linear_cost,
        reward_to_go=bleu,
        matched_end_state=exp.start,
    )


def continue_prefix(
    lat: Lattice | ExpandedLattice,
    prefix: Sequence[int],
    ref: Sequence[int],
    theta: ThetaParams,
    max_n: int = 4,
) -> OracleResult:
    """Best continuation of a forced prefix (see module docstring).

    The prefix itself is kept verbatim in full_hyp even when it is not a
    lattice path; only its in-lattice match decides where continuation
    starts. An empty prefix reduces exactly to decode_oracle.
    """
    prefix = tuple(prefix)
    ref = tuple(ref)
    if not prefix:
        return decode_oracle(lat, ref, theta, max_n)
    exp = prepare_lattice(lat)

    # Step 1: match the prefix in-lattice. Every state is final and the
    # prefix plays the reference role. Cost ties go to the LONGER match
    # here (a one-token match costs exactly 0 at p=0.25 and would
    # otherwise lose to the empty path).
    w1 = reweight(exp, NGramIndex(prefix, max_order=theta.order), theta)
    all_final = np.ones(exp.num_states, dtype=np.uint8)
    hit = _solve(exp, w1.oracle_cost, exp.start, all_final, prefer_longer=True)
    assert hit is not None  # the empty path is always admissible
    matched_end, _mcost, matched, matched_states = hit

    # Step 2: continue toward the true reference from the matched end
    # state. The first edge out of it scores its bigram against the last
    # token of the given prefix.
    w2 = reweight(exp, NGramIndex(ref, max_order=theta.order), theta)
    for start_state in _ancestors_last_first(matched_states):
        cost2 = _junction_costs(exp, w2, start_state, prefix[-1])
        cont = _solve(exp, cost2, start_state, exp.finals_mask)
        if cont is not None:
            if start_state != matched_end:
                log.debug("fell back from state %d to ancestor %d", matched_end, start_state)
            break
    else:
        raise NoPathError("no final state reachable from the matched prefix")
    _end, ccost, ctokens, _cstates = cont

    full = prefix + ctokens
    bleu_full = sentence_bleu(full, ref, max_n)
    bleu_prefix = sentence_bleu(prefix, ref, max_n)
    return OracleResult(
        matched_prefix=matched,
        continuation=ctokens,
        full_hyp=full,
        exact_bleu=bleu_full,
        linear_cost=ccost,
        reward_to_go=bleu_full - bleu_prefix,
        matched_end_state=start_state,
    )


def _ancestors_last_first(states: tuple[int, ...]) -> tuple[int, ...]:
    return tuple(reversed(states))


def _junction_costs(
    exp: ExpandedLattice, w: WeightedLattice, state: int, last_prefix_token: int
) -> np.ndarray:
    """Replace the bigram context of `state`'s out-edges with the given
    prefix token. Acyclicity guarantees those edges are only usable as
    the first step of a path starting at `state`."""
    lo, hi = int(exp.out_start[state]), int(exp.out_start[state + 1])
    if lo == hi or exp.ctx[state] == last_prefix_token:
        return w.oracle_cost
    th = w.theta.theta
    cost = w.oracle_cost.copy()
    # Recompute exactly as reweight() does so ties stay bit-identical.
    for k in range(lo, hi):
        label = int(exp.elabel[k])
        uni = (label,) in w.index.presence[0]
        bi = (last_prefix_token, label) in w.index.presence[1]
        cost[k] = th[0] + th[1] * uni + th[2] * bi
    return cost


def reward_to_go(
    prefix: Sequence[int],
    action: int,
    continuation: Sequence[int],
    ref: Sequence[int] | NGramIndex,
    max_n: int = 4,
) -> float:
    """BLEU(prefix + action + continuation) - BLEU(prefix + action)."""
    base = tuple(prefix) + (action,)
    return sentence_bleu(base + tuple(continuation), ref, max_n) - sentence_bleu(
        base, ref, max_n
    )


def best_model_path(lat: Lattice) -> OraclePath:
    """Minimal model-cost path (the decoder's own best hypothesis)."""
    single = split_phrases(lat)
    num = single.num_states
    out_start = np.zeros(num + 1, dtype=np.int32)
    efrom = np.fromiter((e.src for e in single.edges), dtype=np.int32, count=single.num_edges)
    eto = np.fromiter((e.dst for e in single.edges), dtype=np.int32, count=single.num_edges)
    elabel = np.fromiter(
        (e.labels[0] for e in single.edges), dtype=np.int32, count=single.num_edges
    )
    ecost = np.fromiter((e.cost for e in single.edges), dtype=np.float64, count=single.num_edges)
    np.add.at(out_start, efrom + 1, 1)
    np.cumsum(out_start, out=out_start)
    finals = np.zeros(num, dtype=np.uint8)
    for s in single.finals:
        finals[s] = 1
    hit = dp.solve(out_start, eto, elabel, ecost, finals, 0)
    if hit is None:
        raise NoPathError("lattice has no complete path")
    end, cost, tokens, _ = hit
    return OraclePath(tokens=tokens, linear_cost=cost, end_state=end)


# ---------------------------------------------------------------------------
# Batch mode


def _continue_one(args) -> OracleResult:
    exp, prefix, ref, theta, max_n = args
    return continue_prefix(exp, prefix, ref, theta, max_n)


def continue_batch(
    lattices: Sequence[Lattice | ExpandedLattice],
    refs: Sequence[Sequence[int]],
    prefixes: Sequence[Sequence[int]],
    theta: ThetaParams,
    jobs: int = 1,
    max_n: int = 4,
) -> list[OracleResult]:
    """continue_prefix over parallel lists; output order follows input
    order regardless of `jobs`."""
    if not (len(lattices) == len(refs) == len(prefixes)):
        raise ValueError(
            f"parallel inputs differ in length: {len(lattices)} lattices, "
            f"{len(refs)} references, {len(prefixes)} prefixes"
        )
    prepared = [prepare_lattice(lat) for lat in lattices]
    tasks = [
        (exp, tuple(p), tuple(r), theta, max_n)
        for exp, p, r in zip(prepared, prefixes, refs)
    ]
    if jobs <= 1 or len(tasks) < 2:
        return [_continue_one(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_continue_one, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))


def format_tsv(results: Iterable[OracleResult], symbols: SymbolTable) -> str:
    """Fixed-schema TSV: matched_prefix, continuation, linear_cost,
    exact_bleu, reward_to_go. Token fields are space-joined surfaces."""
    lines = ["matched_prefix\tcontinuation\tlinear_cost\texact_bleu\treward_to_go"]
    for r in results:
        lines.append(
            "\t".join(
                (
                    symbols.render(r.matched_prefix),
                    symbols.render(r.continuation),
                    repr(float(r.linear_cost)),
                    repr(float(r.exact_bleu)),
                    repr(float(r.reward_to_go)),
                )
            )
        )
    return "\n".join(lines) + "\n"
