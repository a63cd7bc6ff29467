"""Command-line interface.

One binary with subcommands decode | continue | tune | simulate | sweep
| bench | ppl. Exit codes: 0 success, 1 input error, 2 internal error.
Every run prints a resolved-config header to stderr for provenance;
stdout and output files carry only the declared payload and are
byte-deterministic for a fixed seed. ORACLE_LOG sets the log level;
outputs never overwrite existing files unless --force is given.
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import os
import sys
import traceback
from pathlib import Path
from typing import Sequence

from . import __version__
from .evalreport import (
    bench_csv,
    bench_oracle,
    curves_csv,
    perplexity_by_position,
    ppl_csv,
    sweep_csv,
    sweep_table,
)
from .il import (
    ExplorationStrategy,
    SyntheticTask,
    TabularPolicy,
    aggrevate_train,
    behavioral_cloning,
    generate_task,
    heldout_bleu,
)
from .lattice import LatticeError, load_lattices
from .metrics import ThetaParams
from .oracle import NoPathError, continue_batch, format_tsv
from .symbols import SymbolTable
from .tuner import GridSpec, grid_csv, grid_search

log = logging.getLogger("latoracle.cli")


class InputError(ValueError):
    """User-facing input problem (exit code 1)."""


# ---------------------------------------------------------------------------
# Experiment configuration

DEFAULT_CONFIG = {
    "seed": None,
    "theta": {"p": 0.25, "r": 0.5},
    "task": {
        "source_vocab": 25,
        "target_vocab": 25,
        "noise_rate": 0.3,
        "coverage": 1.0,
        "candidates": 3,
        "min_len": 9,
        "max_len": 13,
        "source_branching": 3,
    },
    "corpus": {"train": 400, "heldout": 600},
    # bc.subset: examples given to the warm start; the full train split
    # still feeds aggrevate_train, so the interaction budget exceeds
    # the demonstration budget.
    "bc": {"subset": 50, "epochs": 1, "lr": 0.3},
    "il": {"iterations": 20, "beta": 0.5, "lr": 0.3, "per_step": False},
    "eval": {"clean_refs": True},
    "sweep": {
        "b_values": [0.1, 0.5, 0.9],
        "beta_values": [0.1, 0.5],
    },
    "bench": {
        "b_values": [round(0.1 * i, 1) for i in range(1, 10)],
        "repeats": 5,
        "examples": 40,
        "task": {
            "source_vocab": 12,
            "target_vocab": 12,
            "noise_rate": 0.0,
            "coverage": 1.0,
            "candidates": 8,
            "min_len": 10,
            "max_len": 12,
        },
    },
    "ppl": {"max_position": None},
}


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def load_config(args: argparse.Namespace) -> dict:
    # deep copy: resolved configs get mutated (seed, --set) and must
    # never write through to the module-level defaults
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    path = getattr(args, "config", None)
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                cfg = _merge(cfg, json.load(fh))
        except FileNotFoundError:
            raise InputError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: invalid JSON: {exc}") from None
    for spec in getattr(args, "set", None) or []:
        if "=" not in spec:
            raise InputError(f"--set expects key=value, got {spec!r}")
        key, _, raw = spec.partition("=")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = cfg = dict(cfg)
        parts = key.split(".")
        for part in parts[:-1]:
            child = node.get(part)
            if not isinstance(child, dict):
                raise InputError(f"--set: unknown config section {key!r}")
            child = dict(child)
            node[part] = child
            node = child
        node[parts[-1]] = value
    if getattr(args, "seed", None) is not None:
        cfg["seed"] = args.seed
    return cfg


def _require_seed(cfg: dict) -> int:
    seed = cfg.get("seed")
    if seed is None:
        raise InputError("a seed is required (--seed or config field 'seed')")
    return int(seed)


def _task_config(section: dict) -> SyntheticTask:
    try:
        return SyntheticTask(**section)
    except (TypeError, ValueError) as exc:
        raise InputError(f"invalid task config: {exc}") from None


def _theta(cfg: dict, args: argparse.Namespace) -> ThetaParams:
    p = getattr(args, "p", None)
    r = getattr(args, "r", None)
    sec = cfg.get("theta", {})
    try:
        return ThetaParams(
            p if p is not None else sec.get("p", 0.25),
            r if r is not None else sec.get("r", 0.5),
        )
    except ValueError as exc:
        raise InputError(str(exc)) from None


# ---------------------------------------------------------------------------
# I/O helpers


def _read_token_lines(path: str, allow_empty: bool) -> list[list[str]]:
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise InputError(str(exc)) from None
    rows = []
    for lineno, line in enumerate(lines, start=1):
        toks = line.split()
        if not toks and not allow_empty:
            raise InputError(f"{path}:{lineno}: empty sequence not allowed")
        rows.append(toks)
    return rows


def _emit(text: str, out: str | None, force: bool) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    path = Path(out)
    if path.exists() and not force:
        raise InputError(f"refusing to overwrite {out} (use --force)")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _header(cmd: str, resolved: dict) -> None:
    print(f"# latoracle {cmd} config={json.dumps(resolved, sort_keys=True)}", file=sys.stderr)


# ---------------------------------------------------------------------------
# Subcommands


def cmd_decode(args: argparse.Namespace) -> int:
    return _run_continuation(args, with_prefixes=False)


def cmd_continue(args: argparse.Namespace) -> int:
    return _run_continuation(args, with_prefixes=True)


def _run_continuation(args: argparse.Namespace, with_prefixes: bool) -> int:
    symbols = SymbolTable()
    lattices = load_lattices(args.lattices, symbols)
    name = "continue" if with_prefixes else "decode"
    if args.parse_only:
        _header(name, {"lattices": args.lattices, "parse_only": True})
        sys.stdout.write(f"parsed {len(lattices)} lattices\n")
        return 0
    if not args.refs:
        raise InputError("--refs is required")
    if with_prefixes and not args.prefixes:
        raise InputError("--prefixes is required")
    theta = ThetaParams(args.p, args.r)
    _header(
        name,
        {
            "lattices": args.lattices,
            "refs": args.refs,
            "prefixes": args.prefixes if with_prefixes else None,
            "p": theta.p,
            "r": theta.r_decay,
            "jobs": args.jobs,
        },
    )
    refs_text = _read_token_lines(args.refs, allow_empty=False)
    if len(refs_text) != len(lattices):
        raise InputError(
            f"{args.refs}: {len(refs_text)} references for {len(lattices)} lattices"
        )
    refs = [symbols.intern_all(r) for r in refs_text]
    if with_prefixes:
        pfx_text = _read_token_lines(args.prefixes, allow_empty=True)
        if len(pfx_text) != len(lattices):
            raise InputError(
                f"{args.prefixes}: {len(pfx_text)} prefixes for {len(lattices)} lattices"
            )
        prefixes = [symbols.intern_all(p) for p in pfx_text]
    else:
        prefixes = [() for _ in lattices]
    results = continue_batch(lattices, refs, prefixes, theta, jobs=args.jobs)
    _emit(format_tsv(results, symbols), args.out, args.force)
    return 0


def cmd_tune(args: argparse.Namespace) -> int:
    cfg = load_config(args)
    seed = _require_seed(cfg)
    symbols = SymbolTable()
    lattices = load_lattices(args.lattices, symbols)
    refs = [symbols.intern_all(r) for r in _read_token_lines(args.refs, allow_empty=False)]
    if len(refs) != len(lattices):
        raise InputError(f"{args.refs}: {len(refs)} references for {len(lattices)} lattices")
    if args.prefix_source == "reference":
        bases = refs
        source_name = "reference"
    else:
        bases = [
            symbols.intern_all(r)
            for r in _read_token_lines(args.prefix_source, allow_empty=True)
        ]
        if len(bases) != len(lattices):
            raise InputError(
                f"{args.prefix_source}: {len(bases)} prefix sources for {len(lattices)} lattices"
            )
        source_name = "imperfect"
    grid = GridSpec(
        p_values=tuple(args.p_values),
        r_values=tuple(args.r_values),
        prefix_fractions=tuple(args.fractions),
    )
    _header(
        "tune",
        {
            "lattices": args.lattices,
            "refs": args.refs,
            "prefix_source": args.prefix_source,
            "p_values": list(grid.p_values),
            "r_values": list(grid.r_values),
            "fractions": list(grid.prefix_fractions),
            "seed": seed,
        },
    )
    result = grid_search(list(zip(lattices, refs, bases)), grid, seed)
    log.info("best cell: p=%s r=%s", result.best_p, result.best_r)
    _emit(grid_csv(result, source_name), args.out, args.force)
    return 0


def _build_corpora(cfg: dict, seed: int):
    task_cfg = _task_config(cfg["task"])
    n_train = int(cfg["corpus"]["train"])
    n_heldout = int(cfg["corpus"]["heldout"])
    task = generate_task(task_cfg, n_train + n_heldout, seed)
    return task, task.examples[:n_train], task.examples[n_train:]


def _warm_start(task, train, cfg: dict) -> TabularPolicy:
    policy = TabularPolicy(task.target_ids)
    subset = cfg["bc"].get("subset")
    demos = train if subset is None else train[: int(subset)]
    behavioral_cloning(policy, demos, int(cfg["bc"]["epochs"]), float(cfg["bc"]["lr"]))
    return policy


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = load_config(args)
    seed = _require_seed(cfg)
    theta = _theta(cfg, args)
    resolved = _merge(cfg, {"seed": seed, "theta": {"p": theta.p, "r": theta.r_decay}})
    _header("simulate", resolved)
    outdir = Path(args.out)
    curves_path = outdir / "curves.csv"
    summary_path = outdir / "summary.json"
    for path in (curves_path, summary_path):
        if path.exists() and not args.force:
            raise InputError(f"refusing to overwrite {path} (use --force)")

    task, train, heldout = _build_corpora(cfg, seed)
    clean = bool(cfg.get("eval", {}).get("clean_refs", False))
    policy = _warm_start(task, train, cfg)
    bc_bleu = heldout_bleu(policy, task, heldout, clean_refs=clean)
    log.info("behavioral cloning held-out BLEU: %.4f", bc_bleu)

    il_cfg = cfg["il"]
    trained = policy.clone()
    trainlog = aggrevate_train(
        trained,
        task,
        train,
        theta,
        iterations=int(il_cfg["iterations"]),
        strategy=ExplorationStrategy.mixture(float(il_cfg["beta"])),
        seed=seed,
        lr=float(il_cfg["lr"]),
        per_step_updates=bool(il_cfg["per_step"]),
    )
    il_bleu = heldout_bleu(trained, task, heldout, clean_refs=clean)
    log.info("aggrevate held-out BLEU: %.4f", il_bleu)

    outdir.mkdir(parents=True, exist_ok=True)
    curves_path.write_text(curves_csv(trainlog), encoding="utf-8")
    summary = {
        "bc_heldout_bleu": bc_bleu,
        "il_heldout_bleu": il_bleu,
        "iterations": int(il_cfg["iterations"]),
        "skipped": sum(it.skipped for it in trainlog.iterations),
    }
    summary_text = json.dumps(summary, sort_keys=True) + "\n"
    summary_path.write_text(summary_text, encoding="utf-8")
    sys.stdout.write(summary_text)
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = load_config(args)
    seed = _require_seed(cfg)
    theta = _theta(cfg, args)
    _header("sweep", _merge(cfg, {"seed": seed}))
    task, train, _heldout = _build_corpora(cfg, seed)
    policy = _warm_start(task, train, cfg)
    rows = sweep_table(
        task,
        train,
        policy,
        theta,
        b_values=[float(b) for b in cfg["sweep"]["b_values"]],
        beta_values=[float(b) for b in cfg["sweep"]["beta_values"]],
        seed=seed,
    )
    _emit(sweep_csv(rows), args.out, args.force)
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    cfg = load_config(args)
    seed = _require_seed(cfg)
    theta = _theta(cfg, args)
    bench_cfg = cfg["bench"]
    _header("bench", _merge(cfg, {"seed": seed}))
    task = generate_task(_task_config(bench_cfg["task"]), int(bench_cfg["examples"]), seed)
    records = bench_oracle(
        task,
        task.examples,
        theta,
        b_values=[float(b) for b in bench_cfg["b_values"]],
        seed=seed,
        repeats=int(args.repeats if args.repeats is not None else bench_cfg["repeats"]),
    )
    _emit(bench_csv(records), args.out, args.force)
    return 0


def cmd_ppl(args: argparse.Namespace) -> int:
    cfg = load_config(args)
    seed = _require_seed(cfg)
    _header("ppl", _merge(cfg, {"seed": seed}))
    task, train, heldout = _build_corpora(cfg, seed)
    policy = _warm_start(task, train, cfg)
    max_pos = cfg["ppl"]["max_position"]
    if args.max_position is not None:
        max_pos = args.max_position
    rows = perplexity_by_position(policy, heldout, max_pos)
    _emit(ppl_csv(rows), args.out, args.force)
    return 0


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="latoracle",
        description="Prefix-constrained BLEU oracle over translation lattices",
    )
    parser.add_argument("--version", action="version", version=f"latoracle {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser, seeded: bool) -> None:
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--force", action="store_true", help="allow overwriting --out")
        if seeded:
            p.add_argument("--seed", type=int, help="RNG seed (required unless in config)")
            p.add_argument("--config", help="experiment config JSON")
            p.add_argument(
                "--set",
                action="append",
                metavar="KEY=VALUE",
                help="override a config field, e.g. --set il.beta=0.1",
            )

    def add_theta(p: argparse.ArgumentParser, default: bool) -> None:
        p.add_argument(
            "--p",
            type=float,
            default=0.25 if default else None,
            help="linear-cost precision weight",
        )
        p.add_argument(
            "--r",
            type=float,
            default=0.5 if default else None,
            help="linear-cost order decay",
        )

    for name, fn, with_prefixes in (
        ("decode", cmd_decode, False),
        ("continue", cmd_continue, True),
    ):
        p = sub.add_parser(name, help=f"{name} hypotheses inside lattices")
        p.add_argument("--lattices", required=True, help="PLF or JSON lattices, one per line")
        p.add_argument("--refs", help="references, one per line")
        if with_prefixes:
            p.add_argument("--prefixes", help="forced prefixes, one per line (may be empty)")
        add_theta(p, default=True)
        p.add_argument("--jobs", type=int, default=os.cpu_count() or 1, help="parallel oracle calls")
        p.add_argument(
            "--parse-only",
            action="store_true",
            help="only parse and validate the lattice file, then exit",
        )
        add_common(p, seeded=False)
        p.set_defaults(func=fn)

    p = sub.add_parser("tune", help="grid-search linear-cost weights")
    p.add_argument("--lattices", required=True)
    p.add_argument("--refs", required=True)
    p.add_argument(
        "--prefix-source",
        default="reference",
        help="'reference' or a path to imperfect translations",
    )
    p.add_argument("--p-values", type=float, nargs="+", default=_default_grid())
    p.add_argument("--r-values", type=float, nargs="+", default=_default_grid())
    p.add_argument(
        "--fractions", type=float, nargs="+", default=[0.0, 0.2, 0.4, 0.6, 0.8]
    )
    add_common(p, seeded=True)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("simulate", help="behavioral cloning + aggrevate on the synthetic task")
    add_theta(p, default=False)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--force", action="store_true")
    p.add_argument("--seed", type=int)
    p.add_argument("--config", help="experiment config JSON")
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="(b, beta) sweep of oracle continuation quality")
    add_theta(p, default=False)
    add_common(p, seeded=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bench", help="oracle time/memory benchmark per pruning level")
    add_theta(p, default=False)
    p.add_argument("--repeats", type=int, help="timing repeats (median)")
    add_common(p, seeded=True)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("ppl", help="teacher-forced perplexity by position")
    p.add_argument("--max-position", type=int)
    add_common(p, seeded=True)
    p.set_defaults(func=cmd_ppl)

    return parser


def _default_grid() -> list[float]:
    return [round(0.1 + 0.05 * i, 2) for i in range(18)]


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(
        stream=sys.stderr,
        level=os.environ.get("ORACLE_LOG", "WARNING").upper(),
        format="%(name)s %(levelname)s %(message)s",
    )
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except (InputError, LatticeError, NoPathError) as exc:
        print(f"latoracle: error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"latoracle: error: {exc}", file=sys.stderr)
        return 1
    except BrokenPipeError:
        return 0
    except Exception:
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
