"""Desk-scale imitation learning against the lattice oracle.

A synthetic token-substitution task provides (source, reference,
lattice) triples; a tabular student predicts target tokens from the
aligned source token and the last emitted token. Behavioral cloning
gives the warm start; aggrevate_train then rolls the student in,
explores one action per sentence, asks the oracle for the best
continuation and regresses calibrated Q scores onto the observed
suffix reward, gated by whether the oracle actually beat the student's
own roll-in.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .lattice import Edge, Lattice
from .metrics import NGramIndex, ThetaParams, corpus_bleu, sentence_bleu
from .oracle import NoPathError, OracleResult, continue_prefix, decode_oracle, prepare_lattice
from .symbols import BOS, SymbolTable


# ---------------------------------------------------------------------------
# Synthetic task


@dataclass(frozen=True)
class SyntheticTask:
    """Bijective token-substitution task with controllable corruption.

    noise_rate: per-position probability that the reference deviates
    from the substitution of the source token (an unpredictable token,
    fixed per example). coverage: probability that each position's
    candidate set contains the reference token. candidates: lattice
    candidates per position.

    source_branching: when set, sources are random walks over a sparse
    successor graph (that many successors per token) instead of i.i.d.
    draws, and the last vocabulary entry becomes a terminal token that
    ends every source. Sparse transitions leave most contexts unseen at
    training time, which is what makes compounding roll-in errors
    visible; the terminal token gives roll-ins an unambiguous stop
    symbol (noise never produces or removes it).
    """

    source_vocab: int = 10
    target_vocab: int = 10
    noise_rate: float = 0.0
    coverage: float = 1.0
    candidates: int = 3
    min_len: int = 5
    max_len: int = 9
    source_branching: int | None = None

    def __post_init__(self) -> None:
        if self.source_vocab != self.target_vocab:
            raise ValueError("substitution is bijective: vocab sizes must match")
        if not 0.0 <= self.noise_rate < 1.0:
            raise ValueError("noise_rate must be in [0, 1)")
        if not 0.0 <= self.coverage <= 1.0:
            raise ValueError("coverage must be in [0, 1]")
        if self.candidates < 1:
            raise ValueError("need at least one candidate per position")
        if not 1 <= self.min_len <= self.max_len:
            raise ValueError("invalid length range")
        if self.source_branching is not None:
            if not 1 <= self.source_branching <= self.source_vocab - 1:
                raise ValueError("source_branching must be in [1, source_vocab - 1]")
            if self.min_len < 2:
                raise ValueError("branching sources need min_len >= 2 (walk plus terminal)")


@dataclass(frozen=True)
class TaskExample:
    source: tuple[int, ...]
    reference: tuple[int, ...]
    lattice: Lattice


@dataclass
class TaskInstance:
    """A generated corpus plus the shared vocabulary and substitution."""

    cfg: SyntheticTask
    symbols: SymbolTable
    source_ids: tuple[int, ...]
    target_ids: tuple[int, ...]
    substitution: dict[int, int]
    examples: list[TaskExample]

    def stop_token(self, source: Sequence[int]) -> int:
        """Roll-ins stop after emitting the substitution of the final
        source token."""
        return self.substitution[source[-1]]

    def clean_reference(self, source: Sequence[int]) -> tuple[int, ...]:
        """The noise-free translation: the substitution of each source
        token."""
        return tuple(self.substitution[s] for s in source)


def generate_task(cfg: SyntheticTask, n: int, seed: int) -> TaskInstance:
    """Generate `n` (source, reference, lattice) examples.

    The reference is the token-wise substitution of the source, with
    each position independently replaced by a random other target token
    with probability cfg.noise_rate. Lattices are position-wise
    candidate sets (cfg.candidates distinct tokens; the reference token
    is included with probability cfg.coverage) with mildly
    reference-correlated model costs.

    With cfg.source_branching set, each source is a random walk over a
    fixed sparse successor graph followed by the terminal token, and
    noise never touches the terminal's substitution, so the stop symbol
    stays reliable.
    """
    rng = random.Random(seed)
    symbols = SymbolTable()
    source_ids = symbols.intern_all(f"s{i}" for i in range(cfg.source_vocab))
    target_ids = symbols.intern_all(f"t{i}" for i in range(cfg.target_vocab))
    subst = dict(zip(source_ids, rng.sample(target_ids, len(target_ids))))

    markov = cfg.source_branching is not None
    if markov:
        regular = source_ids[:-1]
        terminal = source_ids[-1]
        successors = {s: rng.sample(regular, cfg.source_branching) for s in regular}
        protected = {subst[terminal]}
    else:
        protected = set()

    examples = []
    for _ in range(n):
        length = rng.randint(cfg.min_len, cfg.max_len)
        if markov:
            walk = [rng.choice(regular)]
            for _ in range(length - 2):
                walk.append(rng.choice(successors[walk[-1]]))
            source = tuple(walk) + (terminal,)
        else:
            source = tuple(rng.choice(source_ids) for _ in range(length))
        reference = []
        for s in source:
            tok = subst[s]
            if cfg.noise_rate and tok not in protected and rng.random() < cfg.noise_rate:
                tok = rng.choice(
                    [t for t in target_ids if t != subst[s] and t not in protected]
                )
            reference.append(tok)
        reference = tuple(reference)

        edges = []
        for i, ref_tok in enumerate(reference):
            include_ref = cfg.coverage >= 1.0 or rng.random() < cfg.coverage
            slot: list[int] = [ref_tok] if include_ref else []
            pool = [t for t in target_ids if t not in slot and (include_ref or t != ref_tok)]
            slot.extend(rng.sample(pool, min(cfg.candidates - len(slot), len(pool))))
            for tok in slot:
                lo, hi = (0.2, 1.2) if tok == ref_tok else (0.5, 2.0)
                edges.append(Edge(i, i + 1, (tok,), rng.uniform(lo, hi)))
        examples.append(
            TaskExample(source, reference, Lattice(length + 1, edges, {length}))
        )
    return TaskInstance(cfg, symbols, source_ids, target_ids, subst, examples)


# ---------------------------------------------------------------------------
# Student policy


class TabularPolicy:
    """Q table over (aligned source token, last emitted token) contexts.

    Rows are vectors over the target vocabulary (ascending token id).
    Unseen contexts read as zero rows, so their argmax is the first
    vocabulary token.
    """

    def __init__(self, vocab: Sequence[int]):
        self.vocab = tuple(sorted(vocab))
        self.index = {t: i for i, t in enumerate(self.vocab)}
        self.table: dict[tuple[int, int], np.ndarray] = {}
        self._zero = np.zeros(len(self.vocab))

    def context(self, source: Sequence[int], prefix: Sequence[int]) -> tuple[int, int]:
        pos = min(len(prefix), len(source) - 1)
        return source[pos], prefix[-1] if prefix else BOS

    def q_values(self, source: Sequence[int], prefix: Sequence[int]) -> np.ndarray:
        """Q row for the next position; treat as read-only."""
        return self.table.get(self.context(source, prefix), self._zero)

    def probabilities(self, source: Sequence[int], prefix: Sequence[int]) -> np.ndarray:
        q = self.q_values(source, prefix)
        z = np.exp(q - q.max())
        return z / z.sum()

    def greedy(self, source: Sequence[int], prefix: Sequence[int]) -> int:
        return self.vocab[int(np.argmax(self.q_values(source, prefix)))]

    def _row(self, key: tuple[int, int]) -> np.ndarray:
        row = self.table.get(key)
        if row is None:
            row = self.table[key] = np.zeros(len(self.vocab))
        return row

    def nll_step(self, source: Sequence[int], prefix: Sequence[int], gold: int, lr: float) -> float:
        """One SGD step on -log softmax(Q)[gold]; returns the NLL before
        the update."""
        key = self.context(source, prefix)
        row = self._row(key)
        z = np.exp(row - row.max())
        prob = z / z.sum()
        g = self.index[gold]
        nll = -math.log(max(prob[g], 1e-300))
        grad = prob.copy()
        grad[g] -= 1.0
        row -= lr * grad
        return nll

    def q_step(self, source: Sequence[int], prefix: Sequence[int], action: int, grad: float, lr: float) -> None:
        """Gradient step on one action's Q value."""
        key = self.context(source, prefix)
        self._row(key)[self.index[action]] -= lr * grad

    def clone(self) -> "TabularPolicy":
        dup = TabularPolicy(self.vocab)
        dup.table = {k: v.copy() for k, v in self.table.items()}
        return dup


def roll_in(
    policy: TabularPolicy,
    source: Sequence[int],
    stop_token: int,
    max_len: int | None = None,
) -> tuple[int, ...]:
    """Greedy decode until the stop token is emitted or 2*|source| steps."""
    if max_len is None:
        max_len = 2 * len(source)
    out: list[int] = []
    while len(out) < max_len:
        tok = policy.greedy(source, out)
        out.append(tok)
        if tok == stop_token:
            break
    return tuple(out)


def behavioral_cloning(
    policy: TabularPolicy,
    corpus: Sequence[TaskExample],
    epochs: int,
    lr: float = 0.5,
) -> list[float]:
    """Teacher-forced NLL training in corpus order; returns the mean NLL
    per epoch (measured before each step). Zero epochs = no-op."""
    history = []
    for _ in range(epochs):
        total = 0.0
        count = 0
        for ex in corpus:
            for t in range(len(ex.reference)):
                total += policy.nll_step(ex.source, ex.reference[:t], ex.reference[t], lr)
                count += 1
        history.append(total / max(count, 1))
    return history


# ---------------------------------------------------------------------------
# Exploration and calibration


@dataclass(frozen=True)
class ExplorationStrategy:
    """Uniform, StudentArgmax, or Mixture(beta) = Uniform with
    probability beta, else StudentArgmax."""

    kind: str
    beta: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("uniform", "argmax", "mixture"):
            raise ValueError(f"unknown exploration kind {self.kind!r}")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must be in [0, 1]")

    @classmethod
    def uniform(cls) -> "ExplorationStrategy":
        return cls("uniform", 1.0)

    @classmethod
    def argmax(cls) -> "ExplorationStrategy":
        return cls("argmax", 0.0)

    @classmethod
    def mixture(cls, beta: float) -> "ExplorationStrategy":
        return cls("mixture", beta)


def select_action(
    strategy: ExplorationStrategy,
    q_row: np.ndarray,
    vocab: Sequence[int],
    rng: random.Random,
) -> int:
    """One exploratory action (a token id). Argmax ties go to the lowest
    vocabulary index."""
    if strategy.kind == "uniform" or (
        strategy.kind == "mixture" and rng.random() < strategy.beta
    ):
        return vocab[rng.randrange(len(vocab))]
    return vocab[int(np.argmax(q_row))]


@dataclass(frozen=True)
class SigmoidCalibration:
    """Maps raw Q to (0, 1) via sigmoid(scale * (q - offset))."""

    scale: float
    offset: float

    def value(self, q: float) -> float:
        return 1.0 / (1.0 + math.exp(-self.scale * (q - self.offset)))


def sigmoid_calibrate(q_min: float, q_max: float) -> SigmoidCalibration:
    """Calibration sending q_min to 0.05 and q_max to 0.95. Degenerate
    ranges fall back to scale 1 around q_min."""
    if q_max < q_min:
        raise ValueError("q_max must be >= q_min")
    if q_max == q_min:
        return SigmoidCalibration(scale=1.0, offset=q_min)
    return SigmoidCalibration(
        scale=2.0 * math.log(19.0) / (q_max - q_min),
        offset=(q_min + q_max) / 2.0,
    )


def squared_loss(q: float, delta: float, gate: bool, calib: SigmoidCalibration) -> tuple[float, float]:
    """Gated squared loss between calibrated Q and the suffix reward.

    Returns (loss, d_loss/d_q); both are 0 when the gate is closed.
    """
    if not gate:
        return 0.0, 0.0
    s = calib.value(q)
    err = s - delta
    return err * err, 2.0 * err * s * (1.0 - s) * calib.scale


# ---------------------------------------------------------------------------
# AggreVaTe training loop


@dataclass
class IterationStats:
    iteration: int
    b_s: float
    b_o: float
    b_oe: float
    ratio_o_over_s: float
    loss: float
    skipped: int


@dataclass
class SentenceStats:
    iteration: int
    example: int
    b_s: float
    b_o: float
    b_oe: float
    indicator: int


@dataclass
class TrainLog:
    iterations: list[IterationStats] = field(default_factory=list)
    sentences: list[SentenceStats] = field(default_factory=list)
    calibration: SigmoidCalibration | None = None


def make_oracle(
    task: TaskInstance, theta: ThetaParams, max_n: int = 4
) -> Callable[[TaskExample, tuple[int, ...]], OracleResult]:
    """Continuation oracle with cached expanded lattices."""
    cache: dict[int, object] = {}

    def call(ex: TaskExample, prefix: tuple[int, ...]) -> OracleResult:
        exp = cache.get(id(ex.lattice))
        if exp is None:
            exp = cache[id(ex.lattice)] = prepare_lattice(ex.lattice)
        return continue_prefix(exp, prefix, ex.reference, theta, max_n)

    return call


def aggrevate_train(
    policy: TabularPolicy,
    task: TaskInstance,
    corpus: Sequence[TaskExample],
    theta: ThetaParams,
    iterations: int,
    strategy: ExplorationStrategy,
    seed: int,
    lr: float = 5.0,
    calibration: SigmoidCalibration | None = None,
    per_step_updates: bool = False,
    oracle: Callable[[TaskExample, tuple[int, ...]], OracleResult] | None = None,
    max_n: int = 4,
) -> TrainLog:
    """Train `policy` in place for `iterations` outer iterations.

    Per iteration and example: roll the student in, pick a position
    uniformly, take one exploratory action, ask the oracle for the best
    continuation of roll-in-prefix+action, and record the suffix reward.
    The collected batch then drives SGD on the gated squared loss (or
    immediately, with per_step_updates). Calibration, unless supplied,
    is fit to the Q values observed in the first iteration and frozen.
    """
    rng = random.Random(seed)
    log = TrainLog(calibration=calibration)
    oracle_fn = oracle if oracle is not None else make_oracle(task, theta, max_n)

    # The from-scratch oracle baseline per example is training-invariant.
    b_o_cache: dict[int, float] = {}

    def b_o_of(i: int, ex: TaskExample) -> float:
        if i not in b_o_cache:
            try:
                b_o_cache[i] = decode_oracle(ex.lattice, ex.reference, theta, max_n).exact_bleu
            except NoPathError:
                b_o_cache[i] = 0.0
        return b_o_cache[i]

    for j in range(1, iterations + 1):
        batch = []
        skipped = 0
        calib_ready = log.calibration is not None
        for i, ex in enumerate(corpus):
            y = roll_in(policy, ex.source, task.stop_token(ex.source))
            t = rng.randint(1, len(y))
            prefix = y[: t - 1]
            q_row = policy.q_values(ex.source, prefix)
            action = select_action(strategy, q_row, policy.vocab, rng)
            try:
                res = oracle_fn(ex, prefix + (action,))
            except NoPathError:
                skipped += 1
                continue
            ref_index = NGramIndex(ex.reference, max_n)
            b_s = sentence_bleu(y, ref_index, max_n)
            b_oe = res.exact_bleu
            gate = b_oe > b_s
            q_a = float(q_row[policy.index[action]])
            batch.append((i, ex, prefix, action, res.reward_to_go, gate, q_a, b_s, b_oe))
            if per_step_updates and calib_ready:
                loss, grad = squared_loss(q_a, res.reward_to_go, gate, log.calibration)
                policy.q_step(ex.source, prefix, action, grad, lr)

        if log.calibration is None:
            qs = [rec[6] for rec in batch] or [0.0]
            log.calibration = sigmoid_calibrate(min(qs), max(qs))

        # Per-step updates during the calibration iteration are deferred
        # to here (the calibration only becomes available afterwards).
        apply_here = not per_step_updates or not calib_ready
        loss_total = 0.0
        for i, ex, prefix, action, delta, gate, q_a, b_s, b_oe in batch:
            if apply_here:
                q_now = float(policy.q_values(ex.source, prefix)[policy.index[action]])
                loss, grad = squared_loss(q_now, delta, gate, log.calibration)
                policy.q_step(ex.source, prefix, action, grad, lr)
            else:
                loss, _ = squared_loss(q_a, delta, gate, log.calibration)
            loss_total += loss
            log.sentences.append(
                SentenceStats(j, i, b_s, b_o_of(i, ex), b_oe, int(gate))
            )

        count = max(len(batch), 1)
        log.iterations.append(
            IterationStats(
                iteration=j,
                b_s=sum(r[7] for r in batch) / count,
                b_o=sum(b_o_of(r[0], r[1]) for r in batch) / count,
                b_oe=sum(r[8] for r in batch) / count,
                ratio_o_over_s=sum(int(r[5]) for r in batch) / count,
                loss=loss_total / count,
                skipped=skipped,
            )
        )
    return log


def heldout_bleu(
    policy: TabularPolicy,
    task: TaskInstance,
    corpus: Sequence[TaskExample],
    max_n: int = 4,
    clean_refs: bool = False,
) -> float:
    """Corpus BLEU of greedy roll-ins against the references.

    clean_refs scores against the noise-free substitution of each
    source instead of the (possibly noised) stored reference: noise is
    unpredictable by construction, so it only adds a constant floor and
    variance to evaluation.
    """
    pairs = [
        (
            roll_in(policy, ex.source, task.stop_token(ex.source)),
            task.clean_reference(ex.source) if clean_refs else ex.reference,
        )
        for ex in corpus
    ]
    return corpus_bleu(pairs, max_n)
