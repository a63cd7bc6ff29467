"""Lattice parsing, canonicalization, splitting, expansion, pruning."""

import math
from collections import Counter

import pytest

from bruteforce import expanded_paths, lattice_paths, random_lattice
from latoracle.lattice import (
    Edge,
    EmptyLatticeError,
    Lattice,
    LatticeError,
    PruneSpec,
    chain_lattice,
    expand_bigram_context,
    load_lattices,
    parse_json,
    parse_plf,
    prune,
    split_phrases,
    to_json,
)
from latoracle.symbols import BOS, SymbolTable

import random


PLF_DIAMOND = "((('a', 0.5, 1), ('b', 1.0, 2),), (('c', 0.25, 1),),)"


# ---------------------------------------------------------------------------
# construction and canonicalization


def test_constructor_validation():
    with pytest.raises(LatticeError):
        Lattice(0, [], {0})
    with pytest.raises(LatticeError):
        Lattice(2, [Edge(0, 1, (1,), 0.0)], set())
    with pytest.raises(LatticeError):
        Lattice(2, [Edge(0, 1, (1,), 0.0)], {5})
    with pytest.raises(LatticeError):
        Lattice(2, [Edge(0, 5, (1,), 0.0)], {1})
    with pytest.raises(LatticeError):
        Lattice(2, [Edge(1, 1, (1,), 0.0)], {1})
    with pytest.raises(LatticeError):
        Lattice(2, [Edge(0, 1, (), 0.0)], {1})
    with pytest.raises(LatticeError):
        Lattice(2, [Edge(0, 1, (BOS,), 0.0)], {1})
    with pytest.raises(LatticeError):
        Lattice(2, [Edge(0, 1, (1,), math.inf)], {1})


def test_cycle_rejected():
    edges = [Edge(0, 1, (1,), 0.0), Edge(1, 2, (2,), 0.0), Edge(2, 1, (3,), 0.0)]
    with pytest.raises(LatticeError, match="cycle"):
        Lattice(3, edges, {2})


def test_no_complete_path_rejected():
    # the only edge leaves the start but never reaches the final state
    with pytest.raises(EmptyLatticeError):
        Lattice(3, [Edge(0, 1, (1,), 0.0)], {2})


def test_unreachable_states_trimmed():
    # state 2 dangles (no path to the final); it must disappear
    edges = [Edge(0, 1, (1,), 0.0), Edge(0, 2, (2,), 0.0)]
    lat = Lattice(3, edges, {1})
    assert lat.num_states == 2
    assert lat.num_edges == 1
    assert lat.finals == frozenset({1})


def test_renumbering_is_topological():
    # feed states in a scrambled order; canonical ids must satisfy
    # src < dst for every edge
    edges = [Edge(0, 2, (1,), 0.0), Edge(2, 1, (2,), 0.0)]
    lat = Lattice(3, edges, {1})
    assert all(e.src < e.dst for e in lat.edges)
    assert lat.finals == frozenset({2})


def test_chain_lattice():
    lat = chain_lattice((5, 6, 7), (0.1, 0.2, 0.3))
    assert lat.num_states == 4
    assert [(p, c) for p, c, _ in lattice_paths(lat)] == [((5, 6, 7), pytest.approx(0.6))]


# ---------------------------------------------------------------------------
# PLF parsing


def test_plf_diamond():
    sym = SymbolTable()
    lat = parse_plf(PLF_DIAMOND, sym)
    paths = {p for p, _, _ in lattice_paths(lat)}
    a, b, c = sym.intern("a"), sym.intern("b"), sym.intern("c")
    assert paths == {(a, c), (b,)}


def test_plf_multiword_label_becomes_multi_token_edge():
    sym = SymbolTable()
    lat = parse_plf("((('x y', 1.0, 1),),)", sym)
    assert lat.edges[0].labels == (sym.intern("x"), sym.intern("y"))


@pytest.mark.parametrize(
    "text",
    [
        "not a lattice",
        "()",
        "((),)",  # node without edges
        "((('a', 0.5),),)",  # missing offset
        "((('a', 'x', 1),),)",  # non-numeric cost
        "((('a', 0.5, 0),),)",  # offset < 1
        "((('a', 0.5, 5),),)",  # offset beyond last node
        "(((42, 0.5, 1),),)",  # non-string label
        "((('', 0.5, 1),),)",  # empty label
        "((('a', float('inf'), 1),),)",  # literal_eval rejects expressions
    ],
)
def test_plf_malformed(text):
    with pytest.raises(LatticeError):
        parse_plf(text, SymbolTable())


# ---------------------------------------------------------------------------
# JSON mirror format


def test_json_roundtrip():
    sym = SymbolTable()
    lat = parse_plf(PLF_DIAMOND, sym)
    back = parse_json(to_json(lat, sym), sym)
    assert back.num_states == lat.num_states
    assert back.edges == lat.edges
    assert back.finals == lat.finals


@pytest.mark.parametrize(
    "text",
    [
        "{bad json",
        "[1, 2]",
        '{"states": 2, "edges": []}',  # finals missing
        '{"states": 2, "finals": [1], "edges": [{"from": 0, "to": 1}]}',
    ],
)
def test_json_malformed(text):
    with pytest.raises(LatticeError):
        parse_json(text, SymbolTable())


def test_load_lattices_reports_line_numbers(tmp_path):
    path = tmp_path / "lat.plf"
    path.write_text(PLF_DIAMOND + "\n\nnot a lattice\n", encoding="utf-8")
    with pytest.raises(LatticeError, match=r"lat\.plf:3"):
        load_lattices(str(path), SymbolTable())


def test_load_lattices_json_by_extension(tmp_path):
    sym = SymbolTable()
    lat = parse_plf(PLF_DIAMOND, sym)
    path = tmp_path / "lat.jsonl"
    path.write_text(to_json(lat, sym) + "\n" + to_json(lat, sym) + "\n", encoding="utf-8")
    assert len(load_lattices(str(path), sym)) == 2


def test_load_lattices_empty_file(tmp_path):
    path = tmp_path / "lat.plf"
    path.write_text("\n\n", encoding="utf-8")
    with pytest.raises(LatticeError, match="no lattices"):
        load_lattices(str(path), SymbolTable())


# ---------------------------------------------------------------------------
# phrase splitting


def test_split_phrases_paths_preserved():
    rng = random.Random(7)
    for _ in range(50):
        lat = random_lattice(rng, multi_token=True)
        split = split_phrases(lat)
        assert split.is_single_token()
        before = Counter((p, round(c, 12)) for p, c, _ in lattice_paths(lat))
        after = Counter((p, round(c, 12)) for p, c, _ in lattice_paths(split))
        assert before == after


def test_split_phrases_noop_on_single_token():
    lat = chain_lattice((1, 2))
    assert split_phrases(lat) is lat


# ---------------------------------------------------------------------------
# bigram-context expansion


def test_expand_paths_preserved():
    rng = random.Random(11)
    for _ in range(50):
        lat = split_phrases(random_lattice(rng, multi_token=True))
        exp = expand_bigram_context(lat)
        before = Counter((p, round(c, 12)) for p, c, _ in lattice_paths(lat))
        after = Counter(
            (p, round(c, 12)) for p, _, c, _ in expanded_paths(exp, exp.start, any_end=False)
        )
        assert before == after


def test_expand_state_context_is_incoming_label():
    rng = random.Random(13)
    for _ in range(30):
        lat = split_phrases(random_lattice(rng))
        exp = expand_bigram_context(lat)
        assert exp.ctx[exp.start] == BOS
        # along every path, the end state's context token must equal
        # the last token consumed
        for tokens, end, *_ in expanded_paths(exp, exp.start, any_end=True):
            expected = tokens[-1] if tokens else BOS
            assert exp.ctx[end] == expected


def test_expand_rejects_multi_token():
    lat = Lattice(2, [Edge(0, 1, (1, 2), 0.0)], {1})
    with pytest.raises(LatticeError):
        expand_bigram_context(lat)


def test_expand_clone_numbering_topological():
    rng = random.Random(17)
    for _ in range(30):
        exp = expand_bigram_context(split_phrases(random_lattice(rng)))
        assert all(int(f) < int(t) for f, t in zip(exp.efrom, exp.eto))


# ---------------------------------------------------------------------------
# pruning


def two_path_lattice(extra: float) -> Lattice:
    return Lattice(
        2,
        [Edge(0, 1, (1,), 0.0), Edge(0, 1, (2,), extra)],
        {1},
    )


def test_prune_spec_validation():
    with pytest.raises(ValueError):
        PruneSpec(0.0)
    with pytest.raises(ValueError):
        PruneSpec(1.5)
    PruneSpec(1.0)


def test_prune_two_paths():
    lat = two_path_lattice(math.log(2.0))
    # b = 0.9: allowance -ln(0.9) ~ 0.105 < ln 2, the dearer edge goes
    assert prune(lat, PruneSpec(0.9)).num_edges == 1
    # b = 0.1: allowance ~ 2.30 > ln 2, both stay
    assert prune(lat, PruneSpec(0.1)).num_edges == 2
    # b = 0.5: allowance ln 2 exactly; the slack keeps the boundary edge
    assert prune(lat, PruneSpec(0.5)).num_edges == 2


def test_prune_b1_keeps_best_path():
    lat = two_path_lattice(0.7)
    pruned = prune(lat, PruneSpec(1.0))
    assert pruned.num_edges == 1
    assert pruned.edges[0].labels == (1,)


def test_prune_monotone_in_b():
    rng = random.Random(23)
    bs = [0.1 * i for i in range(1, 10)]
    for _ in range(25):
        lat = random_lattice(rng)
        sizes = []
        for b in bs:
            try:
                sizes.append(prune(lat, PruneSpec(b)).num_edges)
            except EmptyLatticeError:
                sizes.append(0)
        assert sizes == sorted(sizes, reverse=True)


def test_prune_keeps_path_property():
    # whatever survives still reaches a final state (canonicalization
    # would raise otherwise)
    rng = random.Random(29)
    for _ in range(25):
        lat = random_lattice(rng)
        pruned = prune(lat, PruneSpec(0.7))
        assert any(end in pruned.finals for _, _, end in lattice_paths(pruned))
