"""Lattice BLEU oracle toolkit.

Decodes the best (or best prefix-constrained) hypothesis inside a
translation lattice under a linearized bigram BLEU cost, with lattice
pruning, parameter grid tuning and a small synthetic imitation-learning
harness on top.
"""

from .lattice import (
    EmptyLatticeError,
    ExpandedLattice,
    Lattice,
    LatticeError,
    PruneSpec,
    expand_bigram_context,
    load_lattices,
    parse_json,
    parse_plf,
    prune,
    split_phrases,
)
from .metrics import (
    NGramIndex,
    ThetaParams,
    corpus_bleu,
    gleu,
    linear_bleu_cost,
    sentence_bleu,
    suffix_metric,
)
from .oracle import (
    NoPathError,
    OraclePath,
    OracleResult,
    WeightedLattice,
    best_model_path,
    continue_batch,
    continue_prefix,
    decode_oracle,
    prepare_lattice,
    reward_to_go,
    reweight,
    shortest_path,
)
from .symbols import BOS, SymbolTable

__version__ = "0.1.0"

__all__ = [
    "BOS",
    "EmptyLatticeError",
    "ExpandedLattice",
    "Lattice",
    "LatticeError",
    "NGramIndex",
    "NoPathError",
    "OraclePath",
    "OracleResult",
    "PruneSpec",
    "SymbolTable",
    "ThetaParams",
    "WeightedLattice",
    "best_model_path",
    "continue_batch",
    "continue_prefix",
    "corpus_bleu",
    "decode_oracle",
    "expand_bigram_context",
    "gleu",
    "linear_bleu_cost",
    "load_lattices",
    "parse_json",
    "parse_plf",
    "prepare_lattice",
    "prune",
    "reward_to_go",
    "reweight",
    "sentence_bleu",
    "shortest_path",
    "split_phrases",
    "suffix_metric",
    "__version__",
]
