#!/usr/bin/env python3
"""Regenerate the shared differential fixtures under fixtures/diff/.

Deterministic: rerunning this script must reproduce the committed
files byte for byte. The lattices are forward-offset phrase lattices
with occasional multi-word labels and skip edges; each reference
follows a random complete path with light corruption so continuations
stay non-trivial; prefixes mix empty lines, clean reference cuts,
corrupted cuts and out-of-vocabulary junk.
"""

import random
from pathlib import Path

COUNT = 100
VOCAB = [
    "the", "a", "cat", "dog", "bird", "runs", "sat", "on", "mat",
    "tree", "fast", "slow", "red", "blue", "now", "then",
]
JUNK = ["zzz", "qqq", "w0"]


def make_lattice(rng: random.Random) -> list[list[tuple[str, float, int]]]:
    n = rng.randint(3, 12)
    nodes = []
    for i in range(n):
        edges = []
        for _ in range(rng.randint(1, 3)):
            label = rng.choice(VOCAB)
            if rng.random() < 0.15:
                label += " " + rng.choice(VOCAB)
            cost = round(rng.uniform(0.0, 2.0), 3)
            offset = rng.randint(1, min(3, n - i))
            edges.append((label, cost, offset))
        nodes.append(edges)
    return nodes


def walk(rng: random.Random, nodes) -> list[str]:
    toks: list[str] = []
    i = 0
    while i < len(nodes):
        label, _, offset = rng.choice(nodes[i])
        toks.extend(label.split())
        i += offset
    return toks


def make_reference(rng: random.Random, nodes) -> list[str]:
    ref = walk(rng, nodes)
    if rng.random() < 0.3:
        ref[rng.randrange(len(ref))] = rng.choice(VOCAB)
    if rng.random() < 0.2:
        ref.append(rng.choice(VOCAB))
    return ref


def make_prefix(rng: random.Random, ref: list[str]) -> list[str]:
    roll = rng.random()
    if roll < 0.25:
        return []
    cut = ref[: rng.randint(1, len(ref))]
    if roll < 0.65:
        return cut
    if roll < 0.90:
        cut[rng.randrange(len(cut))] = rng.choice(VOCAB)
        return cut
    return [rng.choice(JUNK) for _ in range(rng.randint(1, 3))]


def main() -> None:
    rng = random.Random(7)
    out = Path(__file__).resolve().parent.parent / "fixtures" / "diff"
    out.mkdir(parents=True, exist_ok=True)
    lats, refs, pfxs = [], [], []
    for _ in range(COUNT):
        nodes = make_lattice(rng)
        lats.append(repr(tuple(tuple(e) for e in nodes)))
        ref = make_reference(rng, nodes)
        refs.append(" ".join(ref))
        pfxs.append(" ".join(make_prefix(rng, ref)))
    (out / "lattices.plf").write_text("\n".join(lats) + "\n", encoding="utf-8")
    (out / "refs.txt").write_text("\n".join(refs) + "\n", encoding="utf-8")
    (out / "prefixes.txt").write_text("\n".join(pfxs) + "\n", encoding="utf-8")
    print(f"wrote {COUNT} fixtures to {out}")


if __name__ == "__main__":
    main()
