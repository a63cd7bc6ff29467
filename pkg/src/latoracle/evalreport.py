"""Evaluation reports: training curves, (b, beta) sweeps, oracle
benchmarks and teacher-forced perplexity by position.

Every report renders to a fixed-schema CSV; all corpus scores are
recomputable from the persisted per-sentence records.
"""

from __future__ import annotations

import math
import random
import statistics
import time
from dataclasses import dataclass
from typing import Sequence

from .il import (
    ExplorationStrategy,
    TabularPolicy,
    TaskExample,
    TaskInstance,
    TrainLog,
    roll_in,
    select_action,
)
from .lattice import EmptyLatticeError, PruneSpec, prune
from .metrics import ThetaParams, gleu, sentence_bleu, suffix_metric
from .oracle import NoPathError, continue_prefix, prepare_lattice


# ---------------------------------------------------------------------------
# Training curves


def curve_rows(log: TrainLog) -> list[tuple]:
    """Per-iteration rows (iteration, b_s, b_o, b_oe, ratio_o_over_s);
    ratio_o_over_s is the mean of the training gate indicator."""
    return [
        (it.iteration, it.b_s, it.b_o, it.b_oe, it.ratio_o_over_s)
        for it in log.iterations
    ]


def curves_csv(log: TrainLog) -> str:
    lines = ["iteration,b_s,b_o,b_oe,ratio_o_over_s"]
    for row in curve_rows(log):
        lines.append(",".join([str(row[0])] + [repr(float(v)) for v in row[1:]]))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# (b, beta) sweep


@dataclass(frozen=True)
class SweepRow:
    b: float
    beta: float
    s_bleu: float
    s_gleu: float
    bleu: float
    gleu: float
    skipped: int


def sweep_table(
    task: TaskInstance,
    corpus: Sequence[TaskExample],
    policy: TabularPolicy,
    theta: ThetaParams,
    b_values: Sequence[float],
    beta_values: Sequence[float],
    seed: int,
    max_n: int = 4,
) -> list[SweepRow]:
    """Suffix and full metrics of oracle continuations per (b, beta).

    Per example: student roll-in, uniform position, one Mixture(beta)
    action, oracle continuation on the b-pruned lattice. Scores are
    sentence-level corpus means x100. Per-example RNG streams depend
    only on (seed, example), so rows with different beta are paired.
    """
    rows = []
    for b in b_values:
        pruned: list[tuple[TaskExample, object] | None] = []
        for ex in corpus:
            try:
                pruned.append((ex, prepare_lattice(prune(ex.lattice, PruneSpec(b)))))
            except EmptyLatticeError:
                pruned.append(None)
        for beta in beta_values:
            strategy = ExplorationStrategy.mixture(beta)
            s_bleu_sum = s_gleu_sum = bleu_sum = gleu_sum = 0.0
            count = 0
            skipped = 0
            for i, item in enumerate(pruned):
                if item is None:
                    skipped += 1
                    continue
                ex, exp = item
                rng = random.Random(seed * 1_000_003 + i)
                y = roll_in(policy, ex.source, task.stop_token(ex.source))
                t = rng.randint(1, len(y))
                prefix = y[: t - 1]
                action = select_action(
                    strategy, policy.q_values(ex.source, prefix), policy.vocab, rng
                )
                base = prefix + (action,)
                try:
                    res = continue_prefix(exp, base, ex.reference, theta, max_n)
                except NoPathError:
                    skipped += 1
                    continue
                s_bleu_sum += suffix_metric(base, res.full_hyp, ex.reference, "bleu", max_n)
                s_gleu_sum += suffix_metric(base, res.full_hyp, ex.reference, "gleu", max_n)
                bleu_sum += res.exact_bleu
                gleu_sum += gleu(res.full_hyp, ex.reference, max_n)
                count += 1
            scale = 100.0 / max(count, 1)
            rows.append(
                SweepRow(
                    b=b,
                    beta=beta,
                    s_bleu=s_bleu_sum * scale,
                    s_gleu=s_gleu_sum * scale,
                    bleu=bleu_sum * scale,
                    gleu=gleu_sum * scale,
                    skipped=skipped,
                )
            )
    return rows


def sweep_csv(rows: Sequence[SweepRow]) -> str:
    lines = ["b,beta,s_bleu,s_gleu,bleu,gleu"]
    for r in rows:
        lines.append(
            ",".join(
                repr(float(v)) for v in (r.b, r.beta, r.s_bleu, r.s_gleu, r.bleu, r.gleu)
            )
        )
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Oracle benchmark


@dataclass(frozen=True)
class BenchRecord:
    b: float
    mean_continuation_time: float  # seconds per continuation, median over repeats
    peak_lattice_memory: int  # bytes, serialized arrays + DP table estimate
    states: int
    edges: int
    skipped: int


def bench_oracle(
    task: TaskInstance,
    corpus: Sequence[TaskExample],
    theta: ThetaParams,
    b_values: Sequence[float],
    seed: int,
    repeats: int = 5,
    max_n: int = 4,
) -> list[BenchRecord]:
    """Continuation cost per pruning level.

    Prefixes are reference cuts at seeded fractions, fixed across b so
    only the lattice changes. Time is the median over `repeats` full
    passes; memory is the per-b peak of the expanded-lattice proxy.
    """
    if repeats < 3:
        raise ValueError("need at least 3 repeats for a stable median")
    rng = random.Random(seed)
    fractions = [rng.choice((0.0, 0.2, 0.4, 0.6, 0.8)) for _ in corpus]
    prefixes = [
        ex.reference[: round(f * len(ex.reference))] for ex, f in zip(corpus, fractions)
    ]

    records = []
    for b in b_values:
        jobs = []
        peak = 0
        states = 0
        edges = 0
        skipped = 0
        for ex, prefix in zip(corpus, prefixes):
            try:
                exp = prepare_lattice(prune(ex.lattice, PruneSpec(b)))
            except EmptyLatticeError:
                skipped += 1
                continue
            peak = max(peak, exp.memory_proxy())
            states += exp.num_states
            edges += exp.num_edges
            jobs.append((exp, prefix, ex.reference))
        if not jobs:
            raise EmptyLatticeError(f"every lattice became empty at b={b}")
        times = []
        for _ in range(repeats):
            t0 = time.perf_counter()
            for exp, prefix, ref in jobs:
                try:
                    continue_prefix(exp, prefix, ref, theta, max_n)
                except NoPathError:
                    pass
            times.append(time.perf_counter() - t0)
        records.append(
            BenchRecord(
                b=b,
                mean_continuation_time=statistics.median(times) / len(jobs),
                peak_lattice_memory=peak,
                states=states,
                edges=edges,
                skipped=skipped,
            )
        )
    return records


def bench_csv(records: Sequence[BenchRecord]) -> str:
    lines = ["b,mean_continuation_time,peak_lattice_memory,states,edges"]
    for r in records:
        lines.append(
            ",".join(
                (
                    repr(float(r.b)),
                    repr(float(r.mean_continuation_time)),
                    str(r.peak_lattice_memory),
                    str(r.states),
                    str(r.edges),
                )
            )
        )
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Teacher-forced perplexity by position


@dataclass(frozen=True)
class PplRow:
    position: int
    mean_perplexity: float
    variance: float
    samples: int
    low_sample: bool  # fewer than 5 sentences reach this position


def perplexity_by_position(
    policy: TabularPolicy,
    corpus: Sequence[TaskExample],
    max_position: int | None = None,
) -> list[PplRow]:
    """Per-position teacher-forced perplexity of the reference token.

    mean_perplexity = exp(mean NLL) across sentences reaching the
    position; variance is the across-sentence variance of per-token
    perplexities exp(nll).
    """
    if max_position is None:
        max_position = max(len(ex.reference) for ex in corpus)
    rows = []
    for t in range(max_position):
        nlls = []
        for ex in corpus:
            if t >= len(ex.reference):
                continue
            probs = policy.probabilities(ex.source, ex.reference[:t])
            p = float(probs[policy.index[ex.reference[t]]])
            nlls.append(-math.log(max(p, 1e-300)))
        if not nlls:
            break
        ppls = [math.exp(v) for v in nlls]
        mean = sum(ppls) / len(ppls)
        rows.append(
            PplRow(
                position=t,
                mean_perplexity=math.exp(sum(nlls) / len(nlls)),
                variance=sum((v - mean) ** 2 for v in ppls) / len(ppls),
                samples=len(nlls),
                low_sample=len(nlls) < 5,
            )
        )
    return rows


def ppl_csv(rows: Sequence[PplRow]) -> str:
    lines = ["position,mean_perplexity,variance,samples,low_sample"]
    for r in rows:
        lines.append(
            ",".join(
                (
                    str(r.position),
                    repr(float(r.mean_perplexity)),
                    repr(float(r.variance)),
                    str(r.samples),
                    str(int(r.low_sample)),
                )
            )
        )
    return "\n".join(lines) + "\n"
