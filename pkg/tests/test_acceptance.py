"""End-to-end acceptance checks, one test per release criterion.

Each test prints a single summary line; run with ``pytest -v`` to get the
per-criterion pass/fail report.
"""

import json
import os
import time

import numpy as np
import pytest

from conebellman import (
    LqrProblem,
    SolveConfig,
    bellman_update,
    cli,
    closed_loop_successors,
    compile_graph,
    cost_of_gain,
    reduce,
    solve_ldp,
    solve_lqr,
    solve_ssp,
    spectral_radius,
)
from conebellman.generators import (
    random_chain_graph,
    random_ldp,
    random_lqr,
    random_ssp_graph,
)
from conebellman.oracles import (
    dijkstra,
    ldp_logsumexp_vi,
    ldp_rollout,
    naive_dare,
    ssp_value_iteration,
)

GOLDEN = (1.0 + np.sqrt(5.0)) / 2.0


def _graph_instances():
    dets = [
        random_chain_graph(10 + 2 * k, seed=200 + k)
        if k % 2
        else random_ssp_graph(10 + 2 * k, seed=200 + k)
        for k in range(20)
    ]
    stochs = [random_ssp_graph(10 + 2 * k, seed=300 + k, stochastic=True) for k in range(20)]
    return dets, stochs


def test_criterion_1_scalar_fixed_point_is_golden_ratio():
    p = LqrProblem(A=[[1.0]], B=[[1.0]], Q=[[1.0]], R=[[1.0]])
    cfg = SolveConfig(tol=1e-13)
    for _ in range(5):  # warm caches before timing
        solve_lqr(p, cfg)
    runs = []
    for _ in range(25):  # min over repeats filters scheduler noise
        t0 = time.perf_counter()
        sol = solve_lqr(p, cfg)
        runs.append(time.perf_counter() - t0)
    best_ms = 1e3 * min(runs)

    lam_err = abs(sol.lam[0, 0] - GOLDEN)
    k_err = abs(sol.K[0, 0] - (-GOLDEN / (1.0 + GOLDEN)))
    oracle_err = abs(naive_dare(p, tol=1e-14)[0, 0] - GOLDEN)
    assert lam_err < 1e-12
    assert k_err < 1e-12
    assert oracle_err < 1e-12
    assert best_ms < 1.0
    print(
        f"criterion 1 PASS: lam err {lam_err:.2e}, K err {k_err:.2e}, "
        f"oracle err {oracle_err:.2e}, best solve {best_ms:.3f} ms"
    )


def test_criterion_2_lqr_cross_path_agreement():
    t0 = time.perf_counter()
    worst_gap = worst_residual = worst_rho = 0.0
    perturbations = 0
    for k in range(50):
        n = 2 + k % 9
        m = 1 + (k % n)
        p = random_lqr(n, m, seed=100 + k)
        sol = solve_lqr(p)
        oracle = naive_dare(p, tol=1e-13)
        worst_gap = max(worst_gap, float(np.max(np.abs(sol.lam - oracle))))
        worst_residual = max(worst_residual, sol.dare_residual)
        worst_rho = max(worst_rho, sol.rho_closed_loop)

        rng = np.random.default_rng(1000 + k)
        y = rng.standard_normal(n)
        x0 = np.outer(y, y)
        base = cost_of_gain(p, sol.K, x0)
        while perturbations < 2 * (k + 1):
            Kp = sol.K + rng.standard_normal(sol.K.shape) * 0.05
            if spectral_radius(p.A + p.B @ Kp) >= 1.0:
                continue
            assert cost_of_gain(p, Kp, x0) >= base - 1e-8
            perturbations += 1
    elapsed = time.perf_counter() - t0

    assert worst_gap <= 1e-9
    assert worst_rho < 1.0
    assert worst_residual < 1e-9
    assert perturbations == 100
    assert elapsed < 5.0
    print(
        f"criterion 2 PASS: 50 systems, oracle gap {worst_gap:.2e}, "
        f"residual {worst_residual:.2e}, rho {worst_rho:.3f}, "
        f"100 perturbations never better, {elapsed:.2f} s"
    )


def test_criterion_3_ssp_matches_dijkstra_and_value_iteration():
    t0 = time.perf_counter()
    dets, stochs = _graph_instances()

    worst_det = 0.0
    for g in dets:
        comp = compile_graph(g)
        sol = solve_ssp(comp.problem)
        d = dijkstra(g)
        worst_det = max(
            worst_det, float(np.max(np.abs(sol.lam - d[list(comp.node_of_state)])))
        )
        for node, edge_idx in closed_loop_successors(g, comp, sol.K).items():
            e = g.edges[edge_idx]
            via = g.s[node] + e.cost + sum(
                pr * d[t] for pr, t in zip(e.probs, e.targets)
            )
            assert abs(via - d[node]) <= 1e-12

    worst_sto = 0.0
    for g in stochs:
        p = compile_graph(g).problem
        sol = solve_ssp(p)
        vi = ssp_value_iteration(p, iters=50_000, tol=1e-14)
        worst_sto = max(worst_sto, float(np.max(np.abs(sol.lam - vi))))
    elapsed = time.perf_counter() - t0

    assert worst_det <= 1e-12
    assert worst_sto <= 1e-10
    assert elapsed < 2.0
    print(
        f"criterion 3 PASS: 20 graphs vs dijkstra gap {worst_det:.2e} with "
        f"shortest-path gains, 20 stochastic vs VI gap {worst_sto:.2e}, "
        f"{elapsed:.2f} s"
    )


def test_criterion_4_ssp_iterates_are_monotone():
    dets, stochs = _graph_instances()
    checked = 0
    for g in dets + stochs:
        p = compile_graph(g).problem
        lam = np.zeros(p.n)
        for _ in range(500):
            nxt, _ = bellman_update(p, lam)
            assert np.all(nxt >= lam - 1e-14)
            if np.array_equal(nxt, lam):
                break
            lam = nxt
        checked += 1
    assert checked == 40
    print(f"criterion 4 PASS: nondecreasing iterates on all {checked} instances")


def test_criterion_5_ldp_pipeline_consistency():
    t0 = time.perf_counter()
    worst_affine = worst_vi = worst_bellman = 0.0
    for k in range(50):
        n = 5 + k % 46
        p = random_ldp(n + 1, seed=500 + k)
        r = reduce(p)
        sol = solve_ldp(p)

        G = np.exp(-r.s_r)
        affine = float(np.max(np.abs(sol.z - G * (r.Pbar_r.T @ sol.z + r.pbar_g))))
        worst_affine = max(worst_affine, affine)

        vi = ldp_logsumexp_vi(r, iters=200_000, tol=1e-13)
        worst_vi = max(worst_vi, float(np.max(np.abs(sol.lam - vi))))
        worst_bellman = max(worst_bellman, sol.bellman_residual)

        assert np.array_equal(sol.Pstar > 0.0, r.Pbar_r > 0.0)

        rng = np.random.default_rng(2000 + k)
        from conebellman import kl_stage_cost

        for _ in range(100):
            W = np.where(r.Pbar_r > 0.0, rng.uniform(0.05, 1.0, r.Pbar_r.shape), 0.0)
            gw = np.where(r.pbar_g > 0.0, rng.uniform(0.05, 1.0, r.n_r), 0.0)
            P = W / (W.sum(axis=0) + gw)
            assert np.all(kl_stage_cost(r, P) - r.s_r >= -1e-12)
    elapsed = time.perf_counter() - t0

    assert worst_affine < 1e-12
    assert worst_vi < 1e-8
    assert worst_bellman < 1e-9
    assert elapsed < 5.0
    print(
        f"criterion 5 PASS: 50 instances, affine residual {worst_affine:.2e}, "
        f"VI gap {worst_vi:.2e}, bellman residual {worst_bellman:.2e}, "
        f"sparsity preserved, 5000 feasible policies dominated, {elapsed:.2f} s"
    )


def test_criterion_6_ldp_monte_carlo():
    t0 = time.perf_counter()
    from conebellman import LdpProblem

    p = LdpProblem(Pbar=[[0.5, 0.0], [0.5, 1.0]], s=[1.0, 0.0], goals=(1,))
    r = reduce(p)
    sol = solve_ldp(p)
    # scalar fixed point: z = 0.5 e^{-1} / (1 - 0.5 e^{-1}), lam = -log z
    exact = -np.log(0.5 * np.exp(-1.0) / (1.0 - 0.5 * np.exp(-1.0)))
    assert abs(sol.lam[0] - exact) < 1e-12
    assert abs(sol.lam[0] - 1.489928) < 1e-4  # quoted to printed precision

    stats = ldp_rollout(r, sol.Pstar, 0, horizon=1000, trials=100_000, seed=7)
    gap = abs(stats.mean_cost - sol.lam[0])
    elapsed = time.perf_counter() - t0
    assert gap <= 3.0 * stats.std_error
    assert stats.truncated_fraction < 0.01
    assert elapsed < 3.0
    print(
        f"criterion 6 PASS: lam {sol.lam[0]:.6f}, rollout gap {gap:.4f} <= "
        f"3 x {stats.std_error:.4f}, {elapsed:.2f} s"
    )


def test_criterion_7_divergence_is_reported(tmp_path):
    codes = {}

    unstable = tmp_path / "unstable_lqr.json"
    unstable.write_text(
        json.dumps(
            {"type": "lqr", "A": [[2.0]], "B": [[0.0]], "Q": [[1.0]], "R": [[1.0]]}
        )
    )
    codes["lqr"] = cli.main(["solve", str(unstable), "--out", str(tmp_path / "a")])

    stranded_ssp = tmp_path / "stranded_ssp.json"
    stranded_ssp.write_text(
        json.dumps(
            {
                "type": "ssp-graph",
                "nodes": 3,
                "goal": 2,
                "edges": [
                    {"from": 0, "to": 1, "cost": 1.0},
                    {"from": 1, "to": 0, "cost": 1.0},
                ],
                "s": [0.5, 0.5, 0.0],
            }
        )
    )
    codes["ssp"] = cli.main(
        ["solve", str(stranded_ssp), "--max-iter", "2000", "--out", str(tmp_path / "b")]
    )

    stranded_ldp = tmp_path / "stranded_ldp.json"
    stranded_ldp.write_text(
        json.dumps(
            {
                "type": "ldp",
                "Pbar": [[1.0, 0.0], [0.0, 1.0]],
                "s": [1.0, 0.0],
                "goals": [1],
            }
        )
    )
    codes["ldp"] = cli.main(["solve", str(stranded_ldp), "--out", str(tmp_path / "c")])

    assert codes["lqr"] == 2
    assert codes["ssp"] == 2
    assert codes["ldp"] == 3
    for sub in ("a", "b", "c"):
        assert not os.path.exists(tmp_path / sub / "solution.json")
    print(
        "criterion 7 PASS: unstabilizable lqr -> exit 2, unreachable ssp -> "
        "exit 2, unreachable ldp -> exit 3, no solution files written"
    )


def test_criterion_8_deterministic_artifacts(tmp_path):
    prob = tmp_path / "graph.json"
    prob.write_text(
        json.dumps(
            {
                "type": "ssp-graph",
                "nodes": 6,
                "goal": 5,
                "edges": [
                    {"from": 0, "to": [1, 2], "cost": 1.0, "prob": [0.7, 0.3]},
                    {"from": 1, "to": 3, "cost": 0.5},
                    {"from": 2, "to": [3, 4], "cost": 0.25, "prob": [0.5, 0.5]},
                    {"from": 3, "to": 5, "cost": 2.0},
                    {"from": 4, "to": 5, "cost": 1.0},
                    {"from": 4, "to": 3, "cost": 0.125},
                ],
                "s": [0.01, 0.01, 0.01, 0.01, 0.01, 0.0],
            }
        )
    )
    lqr = tmp_path / "lqr.json"
    lqr.write_text(
        json.dumps(
            {
                "type": "lqr",
                "A": [[0.9, 0.1], [0.0, 0.8]],
                "B": [[1.0], [0.5]],
                "Q": [[1.0, 0.0], [0.0, 1.0]],
                "R": [[1.0]],
            }
        )
    )
    for name in ("graph", "lqr"):
        src = tmp_path / f"{name}.json"
        outs = []
        for run in ("x", "y"):
            out = tmp_path / f"{name}_{run}"
            assert cli.main(["solve", str(src), "--trace", "--out", str(out)]) == 0
            outs.append(out)
        sol_a = (outs[0] / "solution.json").read_bytes()
        sol_b = (outs[1] / "solution.json").read_bytes()
        assert sol_a == sol_b
        rows_a = [
            line.split(",")[:2]
            for line in (outs[0] / "trace.csv").read_text().splitlines()
        ]
        rows_b = [
            line.split(",")[:2]
            for line in (outs[1] / "trace.csv").read_text().splitlines()
        ]
        assert rows_a == rows_b
    print(
        "criterion 8 PASS: repeated solves byte-identical solution.json and "
        "bitwise-identical residual traces (orthant and semidefinite cones)"
    )
