"""Problem ingestion, deterministic serialization, and the batch CLI."""

import json
import os
import subprocess
import sys

import numpy as np
import pytest

from conebellman import InputError, InvalidProblem, cli
from conebellman.io import (
    dumps_deterministic,
    load_problem,
    parse_problem,
    write_solution,
)

LQR_SCALAR = {
    "type": "lqr",
    "A": [[1.0]],
    "B": [[1.0]],
    "Q": [[1.0]],
    "R": [[1.0]],
}

LDP_SINGLE = {
    "type": "ldp",
    "Pbar": [[0.5, 0.0], [0.5, 1.0]],
    "s": [1.0, 0.0],
    "goals": [1],
}

GRAPH = {
    "type": "ssp-graph",
    "nodes": 4,
    "goal": 3,
    "edges": [
        {"from": 0, "to": [1, 2], "cost": 1.0, "prob": [0.6, 0.4]},
        {"from": 1, "to": 3, "cost": 0.5},
        {"from": 2, "to": 3, "cost": 2.0},
    ],
    "s": [0.1, 0.1, 0.1, 0.0],
}

SSP_RAW = {
    "type": "ssp",
    "A": [[1.0]],
    "B": [[-1.0]],
    "s": [1.0],
    "r": [2.0],
    "blocks": [1],
    "E": [[1.0]],
}


def write_json(tmp_path, name, obj):
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return str(path)


# ---------------------------------------------------------------------------
# parsing


def test_parse_all_problem_kinds():
    assert parse_problem(SSP_RAW).kind == "ssp"
    assert parse_problem(LQR_SCALAR).kind == "lqr"
    assert parse_problem(LDP_SINGLE).kind == "ldp"
    g = parse_problem(GRAPH)
    assert g.kind == "ssp-graph"
    assert g.graph is not None and g.compiled is not None


def test_parse_rejects_unknown_type_and_extras():
    with pytest.raises(InvalidProblem):
        parse_problem({"type": "mdp"})
    bad = dict(LQR_SCALAR)
    bad["extra"] = 1
    with pytest.raises(InvalidProblem):
        parse_problem(bad)


def test_parse_reports_missing_field():
    bad = {k: v for k, v in LQR_SCALAR.items() if k != "Q"}
    with pytest.raises(InvalidProblem, match="Q"):
        parse_problem(bad)


def test_parse_rejects_ragged_matrix():
    bad = dict(LQR_SCALAR)
    bad["A"] = [[1.0], [2.0, 3.0]]
    with pytest.raises(InvalidProblem):
        parse_problem(bad)


def test_graph_single_target_defaults_to_probability_one():
    parsed = parse_problem(GRAPH)
    e = parsed.graph.edges[1]
    assert e.targets == (3,)
    assert e.probs == (1.0,)


def test_load_problem_errors(tmp_path):
    with pytest.raises(InputError):
        load_problem(str(tmp_path / "missing.json"))
    mangled = tmp_path / "broken.json"
    mangled.write_text('{"type": "lqr",\n  "A": [[1.0]\n}')
    with pytest.raises(InvalidProblem, match="line"):
        load_problem(str(mangled))


# ---------------------------------------------------------------------------
# deterministic serialization


def test_dump_uses_17_significant_digits():
    text = dumps_deterministic({"x": 1.0 / 3.0})
    assert text == '{"x": 0.33333333333333331}'


def test_dump_distinguishes_bool_from_int():
    assert dumps_deterministic({"a": True, "b": 1}) == '{"a": true, "b": 1}'


def test_dump_handles_arrays_and_nesting():
    text = dumps_deterministic({"m": np.array([[1.5, 2.0]]), "t": (1, 2)})
    assert text == '{"m": [[1.5, 2]], "t": [1, 2]}'


def test_dump_rejects_non_finite():
    with pytest.raises(ValueError):
        dumps_deterministic({"x": float("nan")})
    with pytest.raises(ValueError):
        dumps_deterministic({"x": float("inf")})


def test_dump_is_reproducible():
    obj = {"lambda": [0.1 + 0.2, 1e-300, 123456789.123456789]}
    assert dumps_deterministic(obj) == dumps_deterministic(obj)


def test_written_solution_round_trips(tmp_path):
    path = str(tmp_path / "solution.json")
    write_solution(path, {"lambda": [1.0 / 3.0], "iterations": 5})
    raw = open(path).read()
    assert raw.endswith("\n")
    parsed = json.loads(raw)
    assert parsed["lambda"][0] == 1.0 / 3.0  # 17 digits round-trip exactly


# ---------------------------------------------------------------------------
# CLI: solve


def test_solve_writes_solution_and_trace(tmp_path, capsys):
    prob = write_json(tmp_path, "p.json", LQR_SCALAR)
    out = str(tmp_path / "out")
    code = cli.main(["solve", prob, "--trace", "--out", out])
    assert code == 0
    sol = json.loads(open(os.path.join(out, "solution.json")).read())
    assert sol["type"] == "lqr"
    assert sol["lambda"][0][0] == pytest.approx((1 + 5**0.5) / 2, abs=1e-9)
    lines = open(os.path.join(out, "trace.csv")).read().splitlines()
    assert lines[0] == "iter,residual,elapsed_ns"
    assert len(lines) > 2
    assert "converged" in capsys.readouterr().out


def test_solve_is_byte_deterministic(tmp_path):
    prob = write_json(tmp_path, "p.json", GRAPH)
    a, b = str(tmp_path / "a"), str(tmp_path / "b")
    assert cli.main(["solve", prob, "--out", a]) == 0
    assert cli.main(["solve", prob, "--out", b]) == 0
    assert (
        open(os.path.join(a, "solution.json"), "rb").read()
        == open(os.path.join(b, "solution.json"), "rb").read()
    )


def test_solve_honors_gauss_seidel_schedule(tmp_path):
    prob = write_json(tmp_path, "p.json", LDP_SINGLE)
    out = str(tmp_path / "gs")
    code = cli.main(["solve", prob, "--schedule", "gauss-seidel", "--out", out])
    assert code == 0


def test_solve_unstabilizable_exits_2(tmp_path):
    prob = write_json(
        tmp_path,
        "bad.json",
        {"type": "lqr", "A": [[2.0]], "B": [[0.0]], "Q": [[1.0]], "R": [[1.0]]},
    )
    assert cli.main(["solve", prob, "--out", str(tmp_path)]) == 2


def test_solve_invalid_json_exits_3(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["solve", str(bad), "--out", str(tmp_path)]) == 3


def test_solve_missing_file_exits_3(tmp_path):
    assert cli.main(["solve", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == 3


def test_unknown_flag_exits_3(tmp_path):
    prob = write_json(tmp_path, "p.json", LQR_SCALAR)
    with pytest.raises(SystemExit) as exc:
        cli.main(["solve", prob, "--frobnicate"])
    assert exc.value.code == 3


# ---------------------------------------------------------------------------
# CLI: verify


def test_verify_lqr_passes(tmp_path, capsys):
    prob = write_json(tmp_path, "p.json", LQR_SCALAR)
    assert cli.main(["verify", prob]) == 0
    out = capsys.readouterr().out
    assert "all checks passed" in out
    assert "ok" in out


def test_verify_graph_passes(tmp_path):
    prob = write_json(tmp_path, "p.json", GRAPH)
    assert cli.main(["verify", prob]) == 0


def test_verify_ldp_with_rollout_passes(tmp_path, capsys):
    prob = write_json(tmp_path, "p.json", LDP_SINGLE)
    assert cli.main(["verify", prob, "--trials", "2000", "--seed", "0"]) == 0
    assert "rollout" in capsys.readouterr().out


def test_verify_failure_exits_4(tmp_path, monkeypatch, capsys):
    # force a disagreement between solver and oracle to exercise the
    # failure path end to end
    from conebellman import cli as cli_mod

    prob = write_json(tmp_path, "p.json", LQR_SCALAR)
    monkeypatch.setattr(
        cli_mod, "naive_dare", lambda p, tol=1e-12, max_iter=100_000: np.array([[9.0]])
    )
    assert cli_mod.main(["verify", prob]) == 4
    assert "FAIL" in capsys.readouterr().out


# ---------------------------------------------------------------------------
# CLI: bench


def test_bench_emits_csv(capsys):
    assert cli.main(["bench", "--class", "lqr", "--sizes", "2,3", "--seed", "1"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "class,n,iters,wall_ns,residual"
    assert len(lines) == 3
    for row in lines[1:]:
        klass, n, iters, wall, residual = row.split(",")
        assert klass == "lqr"
        assert int(n) in (2, 3)
        assert int(iters) > 0
        assert int(wall) > 0
        assert float(residual) < 1e-8


def test_bench_rejects_bad_sizes():
    assert cli.main(["bench", "--class", "ssp", "--sizes", ""]) == 3
    assert cli.main(["bench", "--class", "ssp", "--sizes", "1"]) == 3
    assert cli.main(["bench", "--class", "ssp", "--sizes", "a,b"]) == 3


def test_bench_requires_known_class():
    with pytest.raises(SystemExit) as exc:
        cli.main(["bench", "--class", "qp", "--sizes", "2"])
    assert exc.value.code == 3


# ---------------------------------------------------------------------------
# logging environment variable


def test_invalid_log_level_warns_on_stderr(tmp_path):
    prob = write_json(tmp_path, "p.json", LQR_SCALAR)
    env = dict(os.environ, CONEBELLMAN_LOG="chatty")
    res = subprocess.run(
        [sys.executable, "-m", "conebellman.cli", "solve", prob, "--out", str(tmp_path)],
        capture_output=True,
        text=True,
        env=env,
    )
    assert res.returncode == 0
    assert "CONEBELLMAN_LOG" in res.stderr


def test_debug_log_level_traces_iterations(tmp_path):
    prob = write_json(tmp_path, "p.json", LQR_SCALAR)
    env = dict(os.environ, CONEBELLMAN_LOG="debug")
    res = subprocess.run(
        [sys.executable, "-m", "conebellman.cli", "solve", prob, "--out", str(tmp_path)],
        capture_output=True,
        text=True,
        env=env,
    )
    assert res.returncode == 0
    assert "residual" in res.stderr
