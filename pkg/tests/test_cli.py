"""End-to-end command-line behavior: exit codes, output schemas, the
overwrite guard and byte determinism of seeded runs."""

import json
import subprocess
import sys

import pytest

from latoracle.cli import main

PLF_FORK = "((('a', 0.5, 1), ('b', 1.0, 2),), (('c', 0.4, 1),),)"
PLF_CHAIN = "((('a', 0.1, 1),), (('b', 0.2, 1),), (('c', 0.3, 1),),)"

# expected TSV fields, derived by hand with theta = (1, -1, -2):
# fork decode: path (a, c) costs 2 - 2*1 - 1*2 = -2, path (b) costs 1.
# chain decode: 3 - 3*1 - 2*2 = -4.
# continue "a b" on the chain: continuation (c) costs 1 - 1 - 2 = -2 via
# the junction bigram (b, c); reward 1 - exp(-0.5) since BLEU(a b) has
# smoothed precisions 1 and brevity exp(1 - 3/2).
DECODE_TSV = (
    "matched_prefix\tcontinuation\tlinear_cost\texact_bleu\treward_to_go\n"
    "\ta c\t-2.0\t1.0\t1.0\n"
    "\ta b c\t-4.0\t1.0\t1.0\n"
)
CONTINUE_TSV = (
    "matched_prefix\tcontinuation\tlinear_cost\texact_bleu\treward_to_go\n"
    "\ta c\t-2.0\t1.0\t1.0\n"
    "a b\tc\t-2.0\t1.0\t0.3934693402873666\n"
)

SMALL_SIM = [
    "--set", "corpus.train=30",
    "--set", "corpus.heldout=20",
    "--set", "bc.subset=10",
    "--set", "il.iterations=2",
]


@pytest.fixture
def inputs(tmp_path):
    lat = tmp_path / "lattices.plf"
    lat.write_text(PLF_FORK + "\n" + PLF_CHAIN + "\n", encoding="utf-8")
    refs = tmp_path / "refs.txt"
    refs.write_text("a c\na b c\n", encoding="utf-8")
    pfx = tmp_path / "prefixes.txt"
    pfx.write_text("\na b\n", encoding="utf-8")
    return {"lattices": str(lat), "refs": str(refs), "prefixes": str(pfx)}


# ---------------------------------------------------------------------------
# decode / continue


def test_decode_golden_tsv(inputs, capsys):
    rc = main(["decode", "--lattices", inputs["lattices"], "--refs", inputs["refs"]])
    assert rc == 0
    assert capsys.readouterr().out == DECODE_TSV


def test_continue_golden_tsv(inputs, capsys):
    rc = main(
        [
            "continue",
            "--lattices", inputs["lattices"],
            "--refs", inputs["refs"],
            "--prefixes", inputs["prefixes"],
        ]
    )
    assert rc == 0
    assert capsys.readouterr().out == CONTINUE_TSV


def test_parse_only_skips_refs(inputs, capsys):
    rc = main(["decode", "--lattices", inputs["lattices"], "--parse-only"])
    assert rc == 0
    assert capsys.readouterr().out == "parsed 2 lattices\n"


def test_resolved_config_header_on_stderr(inputs, capsys):
    main(["decode", "--lattices", inputs["lattices"], "--refs", inputs["refs"]])
    err = capsys.readouterr().err
    line = err.splitlines()[0]
    assert line.startswith("# latoracle decode config=")
    resolved = json.loads(line.split("config=", 1)[1])
    assert resolved["p"] == 0.25 and resolved["r"] == 0.5


def test_missing_refs_is_input_error(inputs, capsys):
    rc = main(["decode", "--lattices", inputs["lattices"]])
    assert rc == 1
    assert "latoracle: error:" in capsys.readouterr().err


def test_missing_prefixes_is_input_error(inputs, capsys):
    rc = main(["continue", "--lattices", inputs["lattices"], "--refs", inputs["refs"]])
    assert rc == 1
    assert "--prefixes" in capsys.readouterr().err


def test_ref_count_mismatch_is_input_error(inputs, tmp_path, capsys):
    short = tmp_path / "short.txt"
    short.write_text("a c\n", encoding="utf-8")
    rc = main(["decode", "--lattices", inputs["lattices"], "--refs", str(short)])
    assert rc == 1
    assert "1 references for 2 lattices" in capsys.readouterr().err


def test_malformed_lattice_reports_line(tmp_path, capsys):
    bad = tmp_path / "bad.plf"
    bad.write_text(PLF_FORK + "\n((('a', 0.5),),)\n", encoding="utf-8")
    rc = main(["decode", "--lattices", str(bad), "--parse-only"])
    assert rc == 1
    assert f"{bad}:2" in capsys.readouterr().err


def test_missing_lattice_file_is_input_error(tmp_path, capsys):
    rc = main(["decode", "--lattices", str(tmp_path / "nope.plf"), "--parse-only"])
    assert rc == 1
    assert "error" in capsys.readouterr().err


def test_out_overwrite_guard(inputs, tmp_path, capsys):
    out = tmp_path / "res.tsv"
    argv = [
        "decode",
        "--lattices", inputs["lattices"],
        "--refs", inputs["refs"],
        "--out", str(out),
    ]
    assert main(argv) == 0
    assert out.read_text(encoding="utf-8") == DECODE_TSV
    assert capsys.readouterr().out == ""  # payload went to the file

    assert main(argv) == 1
    assert "refusing to overwrite" in capsys.readouterr().err
    assert main(argv + ["--force"]) == 0
    assert out.read_text(encoding="utf-8") == DECODE_TSV


# ---------------------------------------------------------------------------
# config plumbing


def test_seed_required_for_seeded_commands(capsys):
    rc = main(["sweep"])
    assert rc == 1
    assert "seed" in capsys.readouterr().err


def test_seeded_run_does_not_pollute_defaults(capsys):
    # resolved configs are copies; a seeded run must not implant its
    # seed into the module-level defaults for later calls
    argv = [
        "ppl", "--seed", "8", "--max-position", "1",
        "--set", "corpus.train=5",
        "--set", "corpus.heldout=5",
        "--set", "bc.subset=5",
    ]
    assert main(argv) == 0
    capsys.readouterr()
    assert main(["sweep"]) == 1
    assert "seed" in capsys.readouterr().err


def test_config_file_not_found(capsys):
    rc = main(["ppl", "--seed", "1", "--config", "/nonexistent/cfg.json"])
    assert rc == 1
    assert "config file not found" in capsys.readouterr().err


def test_config_file_invalid_json(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text("{broken", encoding="utf-8")
    rc = main(["ppl", "--seed", "1", "--config", str(cfg)])
    assert rc == 1
    assert "invalid JSON" in capsys.readouterr().err


def test_set_without_equals_rejected(capsys):
    rc = main(["ppl", "--seed", "1", "--set", "il.beta"])
    assert rc == 1
    assert "key=value" in capsys.readouterr().err


def test_set_unknown_section_rejected(capsys):
    rc = main(["ppl", "--seed", "1", "--set", "nosuch.key=1"])
    assert rc == 1
    assert "unknown config section" in capsys.readouterr().err


def test_internal_errors_exit_2(inputs, monkeypatch, capsys):
    import latoracle.cli as cli

    monkeypatch.setattr(cli, "continue_batch", lambda *a, **k: 1 / 0)
    rc = main(["decode", "--lattices", inputs["lattices"], "--refs", inputs["refs"]])
    assert rc == 2
    assert "ZeroDivisionError" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# seeded experiment commands


def test_simulate_outputs_and_determinism(tmp_path, capsys):
    outs = []
    for name in ("run_a", "run_b"):
        outdir = tmp_path / name
        rc = main(["simulate", "--seed", "7", "--out", str(outdir)] + SMALL_SIM)
        assert rc == 0
        curves = (outdir / "curves.csv").read_bytes()
        summary = (outdir / "summary.json").read_bytes()
        assert curves.startswith(b"iteration,b_s,b_o,b_oe,ratio_o_over_s\n")
        assert len(curves.splitlines()) == 3  # header + 2 iterations
        payload = json.loads(summary)
        assert set(payload) == {
            "bc_heldout_bleu",
            "il_heldout_bleu",
            "iterations",
            "skipped",
        }
        assert payload["iterations"] == 2
        # stdout mirrors summary.json
        assert capsys.readouterr().out.encode() == summary
        outs.append((curves, summary))
    assert outs[0] == outs[1]


def test_simulate_overwrite_guard(tmp_path, capsys):
    outdir = tmp_path / "sim"
    argv = ["simulate", "--seed", "3", "--out", str(outdir)] + SMALL_SIM
    assert main(argv) == 0
    capsys.readouterr()
    assert main(argv) == 1
    assert "refusing to overwrite" in capsys.readouterr().err
    assert main(argv + ["--force"]) == 0


def test_sweep_stdout_deterministic(capsys):
    argv = [
        "sweep",
        "--seed", "5",
        "--set", "corpus.train=20",
        "--set", "corpus.heldout=5",
        "--set", "bc.subset=10",
        "--set", "sweep.b_values=[0.5,1.0]",
        "--set", "sweep.beta_values=[0.5]",
    ]
    assert main(argv) == 0
    first = capsys.readouterr().out
    assert main(argv) == 0
    second = capsys.readouterr().out
    assert first == second
    lines = first.splitlines()
    assert lines[0] == "b,beta,s_bleu,s_gleu,bleu,gleu"
    assert len(lines) == 3


def test_bench_csv_on_stdout(capsys):
    argv = [
        "bench",
        "--seed", "2",
        "--repeats", "3",
        "--set", "bench.examples=5",
        "--set", "bench.b_values=[0.5,1.0]",
    ]
    assert main(argv) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "b,mean_continuation_time,peak_lattice_memory,states,edges"
    assert len(lines) == 3
    assert [float(l.split(",")[0]) for l in lines[1:]] == [0.5, 1.0]


def test_ppl_csv_on_stdout(capsys):
    argv = [
        "ppl",
        "--seed", "4",
        "--max-position", "3",
        "--set", "corpus.train=20",
        "--set", "corpus.heldout=10",
        "--set", "bc.subset=10",
    ]
    assert main(argv) == 0
    first = capsys.readouterr().out
    lines = first.splitlines()
    assert lines[0] == "position,mean_perplexity,variance,samples,low_sample"
    assert len(lines) == 4
    assert main(argv) == 0
    assert capsys.readouterr().out == first


def test_tune_csv_and_determinism(inputs, tmp_path, capsys):
    argv = [
        "tune",
        "--lattices", inputs["lattices"],
        "--refs", inputs["refs"],
        "--p-values", "0.25", "0.5",
        "--r-values", "0.5",
        "--fractions", "0.0", "0.4",
        "--seed", "9",
    ]
    assert main(argv) == 0
    first = capsys.readouterr().out
    lines = first.splitlines()
    assert lines[0] == "p,r,prefix_source,corpus_bleu"
    assert len(lines) == 3
    assert all(l.split(",")[2] == "reference" for l in lines[1:])
    assert main(argv) == 0
    assert capsys.readouterr().out == first


def test_version_via_console_script():
    proc = subprocess.run(
        [sys.executable, "-m", "latoracle", "--version"],
        capture_output=True,
        text=True,
        timeout=60,
    )
    assert proc.returncode == 0
    assert proc.stdout.startswith("latoracle ")
