import csv
import glob
import json
import os

import pytest

from .commands import (
    EXIT_ACCEPTED,
    EXIT_REJECTED,
    EXIT_TRANSPORT,
    BenchProofSize,
    BenchSoundness,
    ChainFork,
    ChainGen,
    Gas,
    ParamsSolve,
    ProveNi,
    ProverServe,
    Verify,
    VerifyNi,
)
from .logger import read_log
from .verifier import CSV_FIELDS

FAST = ["--engine", "mock-sha"]
PARAMS = ["--L", "5", "--lam", "10"]


def run(command, argv):
    return command(command.parse_args(argv)).run()


@pytest.fixture(scope="module")
def honest_dir(tmp_path_factory):
    out_dir = str(tmp_path_factory.mktemp("honest"))
    assert run(ChainGen, ["--out-dir", out_dir, "--blocks", "200", "--seed", "3"] + FAST) == 0
    return out_dir


@pytest.fixture(scope="module")
def fork_dir(tmp_path_factory, honest_dir):
    out_dir = str(tmp_path_factory.mktemp("fork"))
    argv = [
        "--chain-dir",
        honest_dir,
        "--out-dir",
        out_dir,
        "--fork-height",
        "150",
        "--budget-blocks",
        "0",
        "--validity-ratio",
        "0",
        "--seed",
        "4",
    ]
    assert run(ChainFork, argv) == 0
    return out_dir


def manifest_digest_line(out: str) -> str:
    lines = [x for x in out.splitlines() if x.startswith("manifest digest: ")]
    assert len(lines) == 1
    return lines[0]


def test_chain_gen_deterministic(tmp_path, capsys):
    digests = []
    for i in range(2):
        argv = ["--out-dir", str(tmp_path / f"run{i}"), "--blocks", "200", "--seed", "7"]
        assert run(ChainGen, argv + FAST + ["--upgrades", "60,140"]) == 0
        digests.append(manifest_digest_line(capsys.readouterr().out))
    assert digests[0] == digests[1]
    with open(tmp_path / "run0" / "manifest.json") as f:
        assert len(json.load(f)["branches"]) == 3
    assert glob.glob(str(tmp_path / "run0" / "run_info_*.json"))


@pytest.mark.parametrize(
    "argv",
    [
        ["--upgrades", "140,60"],
        ["--upgrades", "0"],
        ["--upgrades", "x"],
        ["--engine", "nope"],
        ["--schedule", "nope"],
        [],
    ],
)
def test_chain_gen_parse_errors(tmp_path, argv):
    if argv:
        argv = ["--out-dir", str(tmp_path)] + argv
    with pytest.raises(SystemExit):
        ChainGen.parse_args(argv)


def test_chain_gen_too_few_blocks(tmp_path):
    argv = ["--out-dir", str(tmp_path), "--blocks", "100", "--upgrades", "150", "--seed", "1"]
    assert run(ChainGen, argv + FAST) == 1


def test_config_defaults(tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"blocks": 50, "engine": "mock-sha", "out-dir": "x"}))
    args = ChainGen.parse_args(["--config", str(config), "--blocks", "60"])
    assert args.blocks == 60
    assert args.engine == "mock-sha"
    assert args.out_dir == "x"

    config.write_text(json.dumps({"blocks": 50, "colour": "red"}))
    with pytest.raises(SystemExit):
        ChainGen.parse_args(["--config", str(config), "--out-dir", "x"])


def test_run_info_is_a_config(honest_dir):
    (path,) = glob.glob(os.path.join(honest_dir, "run_info_*.json"))
    with open(path) as f:
        info = json.load(f)
    assert info["seed"] == 3
    args = ChainGen.parse_args(["--config", path])
    assert args.blocks == 200
    assert args.seed == 3
    assert args.engine == "mock-sha"


def test_seed_drawn_when_missing(capsys):
    cmd = ChainGen(ChainGen.parse_args(["--out-dir", "x"]))
    assert isinstance(cmd.args.seed, int)
    assert f"using seed {cmd.args.seed}" in capsys.readouterr().out


def test_prover_serve_environment(monkeypatch):
    monkeypatch.setenv("FLYCLIENT_CHAIN_DIR", "/chains/a")
    monkeypatch.setenv("FLYCLIENT_LISTEN", "0.0.0.0:9000")
    monkeypatch.setenv("FLYCLIENT_REPRESENTATION", "json")
    args = ProverServe.parse_args([])
    assert args.chain_dir == "/chains/a"
    assert args.listen == "0.0.0.0:9000"
    assert args.representation == "json"
    args = ProverServe.parse_args(["--listen", "127.0.0.1:1234", "--chain-dir", "/chains/b"])
    assert (args.chain_dir, args.listen) == ("/chains/b", "127.0.0.1:1234")
    with pytest.raises(SystemExit):
        ProverServe.parse_args(["--listen", "nope"])
    monkeypatch.setenv("FLYCLIENT_REPRESENTATION", "xml")
    with pytest.raises(SystemExit):
        ProverServe.parse_args([])


def read_csv(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def test_params_solve_worked_example(tmp_path, capsys):
    out = str(tmp_path / "params.csv")
    params_out = str(tmp_path / "params.json")
    argv = ["--n-a", "50", "--n", "3000000", "--lam", "50", "--mode", "interactive"]
    assert run(ParamsSolve, argv + ["--csv", out, "--params-out", params_out]) == 0
    (row,) = read_csv(out)
    assert abs(float(row["c"]) - 0.25) < 0.01
    assert abs(int(row["total"]) - 423) <= 1
    assert int(row["proof_bytes"]) == int(row["total"]) * 1487
    with open(params_out) as f:
        params = json.load(f)
    assert params["n_det"] == int(row["L"])
    assert params["n_prob"] == int(row["n_prob"])
    assert "interactive" in capsys.readouterr().out


def test_params_solve_zero_lambda(tmp_path):
    out = str(tmp_path / "params.csv")
    argv = ["--n-a", "50", "--n", "100000", "--lam", "0", "--mode", "interactive"]
    assert run(ParamsSolve, argv + ["--csv", out]) == 0
    (row,) = read_csv(out)
    assert int(row["n_prob"]) == 0
    assert int(row["total"]) == int(row["L"])


def test_params_solve_sweep(tmp_path, capsys):
    out = str(tmp_path / "params.csv")
    argv = ["--n-a", "10,20,50,100,200", "--n", "3000000", "--lam", "50", "--savings"]
    assert run(ParamsSolve, argv + ["--csv", out]) == 0
    rows = read_csv(out)
    assert len(rows) == 10
    for mode in ["interactive", "non-interactive"]:
        totals = [int(r["total"]) for r in rows if r["mode"] == mode]
        assert totals == sorted(totals)
    assert "saving" in capsys.readouterr().out


def test_params_solve_budget(tmp_path):
    out = str(tmp_path / "params.csv")
    argv = ["--w-a", "45000", "--d-tilde", "900", "--n", "3000000", "--mode", "interactive"]
    assert run(ParamsSolve, argv + ["--csv", out]) == 0
    (row,) = read_csv(out)
    assert float(row["n_a"]) == 50
    assert abs(float(row["budget"]) - 20833.33) < 0.5


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["--n-a", "5", "--w-a", "5"],
        ["--n-a", ""],
        ["--n-a", "5,x"],
        ["--n-a", "5", "--params-out", "p.json"],
    ],
)
def test_params_solve_parse_errors(argv):
    with pytest.raises(SystemExit):
        ParamsSolve.parse_args(argv)


def test_params_solve_domain_error(capsys):
    assert run(ParamsSolve, ["--n-a", "5000", "--n", "1000"]) == 1
    assert "block budget" in capsys.readouterr().err


def test_verify_honest(honest_dir, tmp_path, capsys):
    transcript = str(tmp_path / "transcript.csv")
    log = str(tmp_path / "log.txt")
    argv = ["--chain-dir", honest_dir, "--seed", "1", "--transcript-csv", transcript]
    assert run(Verify, argv + PARAMS + ["--log", log]) == EXIT_ACCEPTED
    assert "accepted" in capsys.readouterr().out
    rows = read_csv(transcript)
    assert list(rows[0]) == CSV_FIELDS
    assert rows[0]["kind"] == "info"
    assert sum(r["kind"] == "header" for r in rows) >= 5

    argv = ["--chain-dir", honest_dir, "--seed", "1", "--proof-style", "cumulative"]
    assert run(Verify, argv + PARAMS) == EXIT_ACCEPTED


def test_verify_fork(honest_dir, fork_dir, capsys):
    assert run(Verify, ["--chain-dir", fork_dir, "--seed", "1"] + PARAMS) == EXIT_REJECTED
    argv = ["--chain-dir", fork_dir, "--chain-dir", honest_dir, "--seed", "1"]
    assert run(Verify, argv + PARAMS) == EXIT_ACCEPTED
    out = capsys.readouterr().out
    assert f"{fork_dir}: rejected" in out
    assert f"accepted {honest_dir}" in out


def test_verify_dead_endpoint(honest_dir):
    argv = ["--prover", "http://127.0.0.1:9/", "--rules", honest_dir, "--timeout", "5"]
    assert run(Verify, argv + PARAMS) == EXIT_TRANSPORT
    assert run(Verify, argv + PARAMS + ["--n", "200"]) == EXIT_TRANSPORT


def test_verify_option_mismatch(honest_dir, capsys):
    argv = ["--chain-dir", honest_dir, "--format", "distilled", "--proof-style", "cumulative"]
    assert run(Verify, argv + PARAMS) == EXIT_REJECTED
    assert "distilled" in capsys.readouterr().err


@pytest.mark.parametrize(
    "argv",
    [
        PARAMS,
        ["--prover", "http://x/"] + PARAMS,
        ["--chain-dir", "x"],
        ["--chain-dir", "x", "--params", "p.json"] + PARAMS,
        ["--chain-dir", "x", "--format", "distilled"] + PARAMS,
        ["--chain-dir", "x", "--variant", "nope"] + PARAMS,
    ],
)
def test_verify_parse_errors(argv):
    with pytest.raises(SystemExit):
        Verify.parse_args(argv)


@pytest.mark.parametrize("representation", ["binary", "json", "zipped"])
def test_prove_and_verify_ni(honest_dir, tmp_path, representation):
    proof = str(tmp_path / "proof.bin")
    argv = ["--chain-dir", honest_dir, "--out", proof, "--representation", representation]
    assert run(ProveNi, argv + PARAMS) == 0
    assert run(VerifyNi, ["--proof", proof, "--rules", honest_dir] + PARAMS) == 0

    with open(proof, "rb") as f:
        data = f.read()
    assert run(Gas, ["--proof", proof]) == 0

    truncated = str(tmp_path / "truncated.bin")
    with open(truncated, "wb") as f:
        f.write(data[: len(data) // 2])
    assert run(VerifyNi, ["--proof", truncated, "--rules", honest_dir] + PARAMS) == 1


def test_verify_ni_other_chain(honest_dir, fork_dir, tmp_path, capsys):
    proof = str(tmp_path / "proof.bin")
    assert run(ProveNi, ["--chain-dir", honest_dir, "--out", proof] + PARAMS) == 0
    assert run(VerifyNi, ["--proof", proof, "--rules", fork_dir] + PARAMS) == 1
    assert "another chain manifest" in capsys.readouterr().out
    rules = str(tmp_path / "rules.json")
    with open(os.path.join(honest_dir, "manifest.json")) as f:
        manifest = json.load(f)
    with open(rules, "w") as f:
        json.dump(manifest["rules"], f)
    assert run(VerifyNi, ["--proof", proof, "--rules", rules] + PARAMS) == 0
    other = ["--proof", proof, "--rules", rules, "--L", "6", "--lam", "10"]
    assert run(VerifyNi, other) == 1


def test_prove_ni_fork_fails(fork_dir, tmp_path):
    proof = str(tmp_path / "proof.bin")
    assert run(ProveNi, ["--chain-dir", fork_dir, "--out", proof] + PARAMS) == 1
    assert os.path.exists(proof)
    assert run(VerifyNi, ["--proof", proof, "--rules", fork_dir] + PARAMS) == 1


def test_prove_ni_rejects_cache_less():
    with pytest.raises(SystemExit):
        ProveNi.parse_args(["--chain-dir", "x", "--out", "y", "--variant", "cache-less"] + PARAMS)


def test_gas(capsys):
    assert run(Gas, ["--bytes", str(int(1.2 * 2**20))]) == 0
    out = capsys.readouterr().out
    assert "gas: 50331640 (approximate" in out
    assert "cost: 13.21 USD" in out
    with pytest.raises(SystemExit):
        Gas.parse_args(["--bytes", "3", "--proof", "x"])
    with pytest.raises(SystemExit):
        Gas.parse_args([])


def test_bench_proof_size(tmp_path):
    out_dir = str(tmp_path / "bench")
    argv = [
        "--out-dir",
        out_dir,
        "--blocks",
        "100,200",
        "--reps",
        "3",
        "--variants",
        "reference,cache-less,fixed-difficulty",
        "--non-interactive",
        "--seed",
        "5",
    ]
    assert run(BenchProofSize, argv + FAST + PARAMS) == 0
    rows = read_csv(os.path.join(out_dir, "proof_sizes.csv"))
    interactive = {
        (r["blocks"], r["representation"], r["variant"], r["proof_style"]): float(r["mean"])
        for r in rows
        if r["mode"] == "interactive"
    }
    assert len(interactive) == 2 * 3 * 3 * 2
    for (blocks, rep, variant, style), mean in interactive.items():
        if rep != "binary":
            continue
        if variant == "reference":
            assert mean <= interactive[(blocks, rep, "cache-less", style)]
        if style == "cumulative":
            assert mean <= interactive[(blocks, rep, variant, "per-sample")]
    for r in rows:
        assert float(r["ci_low"]) <= float(r["mean"]) <= float(r["ci_high"])
        assert int(r["reps"]) == (3 if r["mode"] == "interactive" else 1)
    assert any(r["mode"] == "non-interactive" for r in rows)

    with open(os.path.join(out_dir, "log.txt")) as f:
        log = f.read()
    assert "log fit reference/per-sample/normal" in log
    entries = list(read_log(os.path.join(out_dir, "log.txt")))
    assert len(entries) == 2 * 3 * 2 * 3
    assert all(set(kv) == {"blocks", "json", "binary", "zipped"} for _, kv in entries)


def test_bench_proof_size_skips_distilled(tmp_path):
    out_dir = str(tmp_path / "bench")
    argv = ["--out-dir", out_dir, "--blocks", "80", "--reps", "2", "--formats", "normal,distilled"]
    assert run(BenchProofSize, argv + FAST + PARAMS + ["--seed", "1"]) == 0
    rows = read_csv(os.path.join(out_dir, "proof_sizes.csv"))
    assert rows and all(r["format"] == "normal" for r in rows)


def test_bench_proof_size_fails_on_rejection(fork_dir, tmp_path, capsys):
    out_dir = str(tmp_path / "bench")
    argv = ["--out-dir", out_dir, "--chain-dir", fork_dir, "--reps", "2", "--seed", "1"]
    assert run(BenchProofSize, argv + PARAMS + ["--non-interactive"]) == EXIT_REJECTED
    err = capsys.readouterr().err
    assert "reference/per-sample/normal rep 0 rejected" in err
    assert "non-interactive blocks=" in err
    assert read_csv(os.path.join(out_dir, "proof_sizes.csv")) == []


@pytest.mark.parametrize(
    "argv",
    [
        ["--blocks", "100"],
        ["--out-dir", "x"],
        ["--out-dir", "x", "--blocks", "100", "--variants", "nope"],
        ["--out-dir", "x", "--blocks", "100", "--reps", "0"],
    ],
)
def test_bench_proof_size_parse_errors(argv):
    with pytest.raises(SystemExit):
        BenchProofSize.parse_args(argv + PARAMS)


def test_bench_soundness(tmp_path):
    out_dir = str(tmp_path / "soundness")
    argv = ["--out-dir", out_dir, "--blocks", "300", "--forks", "2", "--trials", "20"]
    assert run(BenchSoundness, argv + FAST + ["--L", "10", "--seed", "2"]) == 0
    (row,) = read_csv(os.path.join(out_dir, "soundness.csv"))
    assert int(row["trials"]) == 20
    assert int(row["accepted"]) == 0
    assert float(row["rate"]) <= float(row["bound"])
