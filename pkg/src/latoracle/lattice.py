"""Acyclic token lattices: ingestion, normalization, expansion, pruning.

Input formats are the Moses phrase-lattice text format (one
parenthesized lattice per line) and an equivalent JSON object per line.
Lattices are canonicalized on construction: dead states are trimmed,
states are renumbered topologically with the start state at 0, and every
surviving state lies on some start-to-final path.
"""

from __future__ import annotations

import ast
import heapq
import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .symbols import BOS, SymbolTable


class LatticeError(ValueError):
    """Malformed or structurally invalid lattice input."""


class EmptyLatticeError(LatticeError):
    """No complete start-to-final path remains."""


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    labels: tuple[int, ...]  # one or more token ids, never BOS
    cost: float  # model cost (negative log-probability)


@dataclass(frozen=True)
class PruneSpec:
    """Posterior-style pruning threshold, 0 < b <= 1 (larger prunes more)."""

    b: float

    def __post_init__(self) -> None:
        if not 0.0 < self.b <= 1.0:
            raise ValueError(f"prune parameter b must be in (0, 1], got {self.b}")


class Lattice:
    """Canonical acyclic lattice.

    States are topologically numbered (every edge goes from a smaller to
    a larger id), the start state is 0 and every state is both reachable
    from the start and co-reachable to some final state.
    """

    def __init__(self, num_states: int, edges: Iterable[Edge], finals: Iterable[int]):
        canon = _canonicalize(num_states, tuple(edges), frozenset(finals))
        self.num_states, self.edges, self.finals = canon
        self.start = 0
        self._out: list[list[Edge]] | None = None

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def out_edges(self, state: int) -> list[Edge]:
        if self._out is None:
            out: list[list[Edge]] = [[] for _ in range(self.num_states)]
            for e in self.edges:
                out[e.src].append(e)
            self._out = out
        return self._out[state]

    def is_single_token(self) -> bool:
        return all(len(e.labels) == 1 for e in self.edges)

    def __repr__(self) -> str:
        return (
            f"Lattice(states={self.num_states}, edges={self.num_edges}, "
            f"finals={sorted(self.finals)})"
        )


def _canonicalize(
    num_states: int, edges: tuple[Edge, ...], finals: frozenset[int]
) -> tuple[int, tuple[Edge, ...], frozenset[int]]:
    if num_states < 1:
        raise LatticeError("lattice needs at least one state")
    if not finals:
        raise LatticeError("lattice declares no final state")
    for s in finals:
        if not 0 <= s < num_states:
            raise LatticeError(f"final state {s} out of range")
    for e in edges:
        if not (0 <= e.src < num_states and 0 <= e.dst < num_states):
            raise LatticeError(f"edge endpoint out of range: {e}")
        if e.src == e.dst:
            raise LatticeError(f"self-loop at state {e.src}")
        if not e.labels:
            raise LatticeError("edge with empty label sequence")
        if any(t == BOS for t in e.labels):
            raise LatticeError("BOS sentinel used as an edge label")
        if not math.isfinite(e.cost):
            raise LatticeError(f"non-finite edge cost {e.cost}")

    fwd: list[list[int]] = [[] for _ in range(num_states)]
    bwd: list[list[int]] = [[] for _ in range(num_states)]
    for e in edges:
        fwd[e.src].append(e.dst)
        bwd[e.dst].append(e.src)

    reach = _closure({0}, fwd)
    coreach = _closure(set(finals), bwd)
    keep = reach & coreach
    if 0 not in keep:
        raise EmptyLatticeError("no complete path from the start state")

    kept_edges = tuple(e for e in edges if e.src in keep and e.dst in keep)
    kept_finals = finals & keep

    # Stable topological renumbering (Kahn with a min-heap); the start
    # state is the only kept state without predecessors, so it maps to 0.
    indeg = {s: 0 for s in keep}
    adj: dict[int, list[int]] = {s: [] for s in keep}
    for e in kept_edges:
        indeg[e.dst] += 1
        adj[e.src].append(e.dst)
    ready = [s for s in sorted(keep) if indeg[s] == 0]
    heapq.heapify(ready)
    order: dict[int, int] = {}
    while ready:
        s = heapq.heappop(ready)
        order[s] = len(order)
        for t in adj[s]:
            indeg[t] -= 1
            if indeg[t] == 0:
                heapq.heappush(ready, t)
    if len(order) != len(keep):
        raise LatticeError("lattice contains a cycle")

    # Stable sort by source state only: prune and the DP sweeps need a
    # topological edge order, but within a state the input order is
    # kept. Token ids must never act as a sort key anywhere; they are
    # an interning artifact, and ordering by them would let unrelated
    # input leak into tie-breaking.
    renum = tuple(
        sorted(
            (Edge(order[e.src], order[e.dst], e.labels, e.cost) for e in kept_edges),
            key=lambda e: e.src,
        )
    )
    return len(keep), renum, frozenset(order[s] for s in kept_finals)


def _closure(seed: set[int], adj: list[list[int]]) -> set[int]:
    seen = set(seed)
    stack = list(seed)
    while stack:
        for t in adj[stack.pop()]:
            if t not in seen:
                seen.add(t)
                stack.append(t)
    return seen


# ---------------------------------------------------------------------------
# Parsing


def parse_plf(text: str, symbols: SymbolTable) -> Lattice:
    """Parse one Moses phrase-lattice line.

    The line is a parenthesized tuple of nodes; node i holds edges
    (label, cost, offset) leading to node i+offset. There is one state
    per node plus a single final state after the last node.
    """
    try:
        data = ast.literal_eval(text.strip())
    except (ValueError, SyntaxError) as exc:
        raise LatticeError(f"malformed lattice syntax: {exc}") from None
    if not isinstance(data, (tuple, list)):
        raise LatticeError("lattice must be a sequence of nodes")
    if len(data) == 0:
        raise LatticeError("lattice has zero nodes")

    num_nodes = len(data)
    edges: list[Edge] = []
    for i, node in enumerate(data):
        if not isinstance(node, (tuple, list)):
            raise LatticeError(f"node {i} is not a sequence of edges")
        if len(node) == 0:
            raise LatticeError(f"node {i} has no outgoing edges")
        for arc in node:
            if not (isinstance(arc, (tuple, list)) and len(arc) == 3):
                raise LatticeError(f"node {i}: edge must be (label, cost, offset)")
            label, cost, offset = arc
            if not isinstance(label, str) or not label.split():
                raise LatticeError(f"node {i}: edge label must be a non-empty string")
            if isinstance(cost, bool) or not isinstance(cost, (int, float)):
                raise LatticeError(f"node {i}: edge cost must be a number")
            if not math.isfinite(float(cost)):
                raise LatticeError(f"node {i}: non-finite edge cost")
            if isinstance(offset, bool) or not isinstance(offset, int) or offset < 1:
                raise LatticeError(f"node {i}: offset must be an integer >= 1")
            if i + offset > num_nodes:
                raise LatticeError(f"node {i}: offset {offset} points beyond the last node")
            labels = symbols.intern_all(label.split())
            edges.append(Edge(i, i + offset, labels, float(cost)))
    return Lattice(num_nodes + 1, edges, {num_nodes})


def parse_json(obj: str | dict, symbols: SymbolTable) -> Lattice:
    """Parse the JSON mirror format.

    {"states": N, "finals": [...], "edges": [{"from": i, "to": j,
    "labels": ["a", ...], "cost": x}, ...]}
    """
    if isinstance(obj, str):
        try:
            obj = json.loads(obj)
        except json.JSONDecodeError as exc:
            raise LatticeError(f"malformed lattice JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise LatticeError("lattice JSON must be an object")
    try:
        num_states = int(obj["states"])
        finals = [int(s) for s in obj["finals"]]
        raw_edges = obj["edges"]
    except (KeyError, TypeError, ValueError) as exc:
        raise LatticeError(f"lattice JSON missing or invalid field: {exc}") from None
    edges = []
    for k, e in enumerate(raw_edges):
        try:
            labels = symbols.intern_all(str(w) for w in e["labels"])
            edges.append(Edge(int(e["from"]), int(e["to"]), labels, float(e["cost"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise LatticeError(f"edge {k}: {exc}") from None
    return Lattice(num_states, edges, finals)


def load_lattices(path: str, symbols: SymbolTable) -> list[Lattice]:
    """Load one lattice per line; *.json/*.jsonl selects the JSON format.

    Errors are re-raised with the 1-based line number.
    """
    is_json = path.endswith((".json", ".jsonl"))
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                out.append(parse_json(line, symbols) if is_json else parse_plf(line, symbols))
            except LatticeError as exc:
                raise LatticeError(f"{path}:{lineno}: {exc}") from None
    if not out:
        raise LatticeError(f"{path}: no lattices found")
    return out


# ---------------------------------------------------------------------------
# Transformations


def split_phrases(lat: Lattice) -> Lattice:
    """Split multi-token edge labels into chains of single-token edges.

    The model cost stays on the first edge of each chain; intermediate
    edges cost 0. The token-sequence/cost multiset of complete paths is
    preserved. Single-token lattices are returned unchanged.
    """
    if lat.is_single_token():
        return lat
    edges: list[Edge] = []
    next_state = lat.num_states
    for e in lat.edges:
        if len(e.labels) == 1:
            edges.append(e)
            continue
        prev = e.src
        for k, tok in enumerate(e.labels):
            last = k == len(e.labels) - 1
            nxt = e.dst if last else next_state
            if not last:
                next_state += 1
            edges.append(Edge(prev, nxt, (tok,), e.cost if k == 0 else 0.0))
            prev = nxt
    return Lattice(next_state, edges, lat.finals)


class ExpandedLattice:
    """Single-token lattice with one bigram context token per state.

    States are split per distinct incoming label so that each state
    carries the label of every path reaching it; the start state carries
    the BOS sentinel. Stored as flat arrays grouped by source state
    (CSR) for the shortest-path kernels.
    """

    def __init__(
        self,
        num_states: int,
        ctx: np.ndarray,
        efrom: np.ndarray,
        eto: np.ndarray,
        elabel: np.ndarray,
        ecost: np.ndarray,
        finals: frozenset[int],
    ):
        self.num_states = num_states
        self.start = 0
        self.ctx = ctx
        self.efrom = efrom
        self.eto = eto
        self.elabel = elabel
        self.ecost = ecost
        self.finals = finals
        self.finals_mask = np.zeros(num_states, dtype=np.uint8)
        for s in finals:
            self.finals_mask[s] = 1
        self.out_start = np.zeros(num_states + 1, dtype=np.int32)
        np.add.at(self.out_start, efrom + 1, 1)
        np.cumsum(self.out_start, out=self.out_start)
        if len(efrom) and not np.all(efrom[:-1] <= efrom[1:]):
            raise AssertionError("expanded edges must be grouped by source state")

    @property
    def num_edges(self) -> int:
        return len(self.efrom)

    def memory_proxy(self) -> int:
        """Byte estimate: serialized arrays plus one DP table row per state."""
        edge_bytes = self.num_edges * (3 * 4 + 8)  # from/to/label int32 + cost float64
        state_bytes = self.num_states * (4 + 1)  # ctx int32 + final flag
        dp_bytes = self.num_states * (8 + 4 + 4)  # cost, length, backpointer
        return edge_bytes + state_bytes + dp_bytes

    def __repr__(self) -> str:
        return f"ExpandedLattice(states={self.num_states}, edges={self.num_edges})"


def expand_bigram_context(lat: Lattice) -> ExpandedLattice:
    """Split states per distinct incoming label and attach context tokens.

    Requires a single-token lattice. Complete paths (token sequences and
    costs) are preserved; the state count grows by at most a factor of
    the maximum number of distinct incoming labels.
    """
    if not lat.is_single_token():
        raise LatticeError("expand_bigram_context requires a single-token lattice")

    # dict, not set: clones must enumerate in first-encounter edge
    # order, never in token-id order
    in_labels: list[dict[int, None]] = [{} for _ in range(lat.num_states)]
    for e in lat.edges:
        in_labels[e.dst].setdefault(e.labels[0])

    # Clone ids are assigned state-by-state in the original topological
    # order, so clone numbering is topological as well.
    clone_id: dict[tuple[int, int], int] = {(0, BOS): 0}
    clones_of: list[list[tuple[int, int]]] = [[] for _ in range(lat.num_states)]
    clones_of[0] = [(0, BOS)]
    ctx_list = [BOS]
    for s in range(1, lat.num_states):
        for lab in in_labels[s]:
            clone_id[(s, lab)] = len(ctx_list)
            clones_of[s].append((s, lab))
            ctx_list.append(lab)

    efrom: list[int] = []
    eto: list[int] = []
    elabel: list[int] = []
    ecost: list[float] = []
    for s in range(lat.num_states):
        for key in clones_of[s]:
            cid = clone_id[key]
            for e in lat.out_edges(s):
                efrom.append(cid)
                eto.append(clone_id[(e.dst, e.labels[0])])
                elabel.append(e.labels[0])
                ecost.append(e.cost)

    finals = frozenset(clone_id[key] for f in lat.finals for key in clones_of[f])
    return ExpandedLattice(
        num_states=len(ctx_list),
        ctx=np.asarray(ctx_list, dtype=np.int32),
        efrom=np.asarray(efrom, dtype=np.int32),
        eto=np.asarray(eto, dtype=np.int32),
        elabel=np.asarray(elabel, dtype=np.int32),
        ecost=np.asarray(ecost, dtype=np.float64),
        finals=finals,
    )


def prune(lat: Lattice, spec: PruneSpec) -> Lattice:
    """Keep edges whose best through-path cost is within -ln(b) of the
    best complete path cost (model costs), then trim.

    b=1 keeps only best-path edges (up to ties); smaller b keeps more.
    Raises EmptyLatticeError when nothing survives.
    """
    n = lat.num_states
    fwd = np.full(n, math.inf)
    bwd = np.full(n, math.inf)
    fwd[0] = 0.0
    for e in lat.edges:  # edges sorted by src: a forward topological sweep
        c = fwd[e.src] + e.cost
        if c < fwd[e.dst]:
            fwd[e.dst] = c
    for f in lat.finals:
        bwd[f] = 0.0
    for e in reversed(lat.edges):
        c = e.cost + bwd[e.dst]
        if c < bwd[e.src]:
            bwd[e.src] = c
    best = min(fwd[f] for f in lat.finals)
    if not math.isfinite(best):
        raise EmptyLatticeError("lattice has no complete path")
    # 1e-9 slack: forward+backward sums may differ from the pure-forward
    # best total by rounding, and b=1 must keep best-path edges.
    threshold = best - math.log(spec.b) + 1e-9
    kept = [e for e in lat.edges if fwd[e.src] + e.cost + bwd[e.dst] <= threshold]
    try:
        return Lattice(lat.num_states, kept, lat.finals)
    except EmptyLatticeError:
        raise EmptyLatticeError("empty lattice after pruning") from None


def to_json(lat: Lattice, symbols: SymbolTable) -> str:
    """Serialize to the JSON mirror format (one line, sorted keys)."""
    obj = {
        "states": lat.num_states,
        "finals": sorted(lat.finals),
        "edges": [
            {
                "from": e.src,
                "to": e.dst,
                "labels": [symbols.text(t) for t in e.labels],
                "cost": e.cost,
            }
            for e in lat.edges
        ],
    }
    return json.dumps(obj, sort_keys=True)


def chain_lattice(
    tokens: Sequence[int], costs: Sequence[float] | None = None
) -> Lattice:
    """Single-path lattice spelling out one token sequence."""
    if costs is None:
        costs = [0.0] * len(tokens)
    edges = [Edge(i, i + 1, (t,), float(c)) for i, (t, c) in enumerate(zip(tokens, costs))]
    return Lattice(len(tokens) + 1, edges, {len(tokens)})
