"""Independent brute-force oracles used to cross-check the solvers."""

import numpy as np
import pytest

from conebellman import (
    BadSeedConfig,
    Diverged,
    GraphEdge,
    GraphSsp,
    InvalidProblem,
    LdpProblem,
    LqrProblem,
    MaxIterExceeded,
    ReducedLdp,
    ShapeMismatch,
    SingularInnerMatrix,
    SspProblem,
    UnreachableNode,
    gauss_jordan_inverse,
    reduce,
    solve_ldp,
)
from conebellman.oracles import (
    dijkstra,
    ldp_logsumexp_vi,
    ldp_rollout,
    naive_dare,
    ssp_value_iteration,
)

GOLDEN = (1.0 + np.sqrt(5.0)) / 2.0


def chain_graph():
    # binary-exact costs so hand-computed distances compare bitwise
    return GraphSsp(
        n_nodes=3,
        goals=(2,),
        edges=(
            GraphEdge(0, (1,), 1.0, (1.0,)),
            GraphEdge(1, (2,), 2.0, (1.0,)),
        ),
        s=[0.25, 0.25, 0.0],
    )


# ---------------------------------------------------------------------------
# value iteration


def test_value_iteration_single_state():
    p = SspProblem(
        A=[[1.0]], B=[[-1.0]], s=[1.0], r=[2.0], block_sizes=(1,), E=[[1.0]]
    )
    lam = ssp_value_iteration(p, iters=10_000, tol=1e-14)
    assert lam[0] == pytest.approx(3.0, abs=1e-12)


def test_value_iteration_respects_iteration_budget():
    p = SspProblem(
        A=[[0.5]], B=[[0.0]], s=[1.0], r=[1.0], block_sizes=(1,), E=[[1.0]]
    )
    lam = ssp_value_iteration(p, iters=2)
    # two sweeps from zero: 1, then 1.5
    assert lam[0] == pytest.approx(1.5)


# ---------------------------------------------------------------------------
# dijkstra


def test_dijkstra_chain_distances():
    np.testing.assert_array_equal(dijkstra(chain_graph()), [3.5, 2.25, 0.0])


def test_dijkstra_goal_distance_is_zero():
    d = dijkstra(chain_graph())
    assert d[2] == 0.0


def test_dijkstra_picks_cheaper_route():
    g = GraphSsp(
        n_nodes=3,
        goals=(2,),
        edges=(
            GraphEdge(0, (2,), 5.0, (1.0,)),
            GraphEdge(0, (1,), 1.0, (1.0,)),
            GraphEdge(1, (2,), 1.0, (1.0,)),
        ),
        s=[0.1, 0.1, 0.0],
    )
    d = dijkstra(g)
    # via node 1: 0.1 + 1 + (0.1 + 1) beats the direct 0.1 + 5
    assert d[0] == pytest.approx(2.2)


def test_dijkstra_unreachable_node():
    g = GraphSsp(
        n_nodes=3,
        goals=(2,),
        edges=(GraphEdge(0, (2,), 1.0, (1.0,)),),  # node 1 has no edges
        s=[0.1, 0.1, 0.0],
    )
    with pytest.raises(UnreachableNode):
        dijkstra(g)


def test_dijkstra_rejects_stochastic_edges():
    g = GraphSsp(
        n_nodes=3,
        goals=(2,),
        edges=(GraphEdge(0, (1, 2), 1.0, (0.5, 0.5)),
               GraphEdge(1, (2,), 1.0, (1.0,))),
        s=[0.1, 0.1, 0.0],
    )
    with pytest.raises(InvalidProblem):
        dijkstra(g)


# ---------------------------------------------------------------------------
# dense inverse


def test_inverse_of_known_matrix():
    S = np.array([[4.0, 7.0], [2.0, 6.0]])
    np.testing.assert_allclose(
        gauss_jordan_inverse(S), [[0.6, -0.7], [-0.2, 0.4]], atol=1e-14
    )


@pytest.mark.parametrize("seed", range(8))
def test_inverse_matches_numpy(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 9))
    S = rng.standard_normal((n, n)) + n * np.eye(n)
    np.testing.assert_allclose(
        gauss_jordan_inverse(S), np.linalg.inv(S), atol=1e-10
    )


def test_inverse_rejects_singular():
    with pytest.raises(SingularInnerMatrix):
        gauss_jordan_inverse(np.array([[1.0, 2.0], [2.0, 4.0]]))


def test_inverse_rejects_non_square():
    with pytest.raises(ShapeMismatch):
        gauss_jordan_inverse(np.zeros((2, 3)))


# ---------------------------------------------------------------------------
# plain Riccati iteration


def test_plain_dare_scalar_golden_ratio():
    p = LqrProblem(A=[[1.0]], B=[[1.0]], Q=[[1.0]], R=[[1.0]])
    lam = naive_dare(p, tol=1e-14)
    assert lam[0, 0] == pytest.approx(GOLDEN, abs=1e-12)


def test_plain_dare_without_inputs_solves_lyapunov():
    p = LqrProblem(A=[[0.5]], B=[[0.0]], Q=[[1.0]], R=[[1.0]])
    lam = naive_dare(p, tol=1e-14)
    assert lam[0, 0] == pytest.approx(4.0 / 3.0, abs=1e-12)


def test_plain_dare_detects_unstabilizable_system():
    p = LqrProblem(A=[[2.0]], B=[[0.0]], Q=[[1.0]], R=[[1.0]])
    with pytest.raises(Diverged):
        naive_dare(p)


def test_plain_dare_iteration_budget():
    p = LqrProblem(A=[[0.99]], B=[[0.0]], Q=[[1.0]], R=[[1.0]])
    with pytest.raises(MaxIterExceeded):
        naive_dare(p, tol=1e-14, max_iter=3)


# ---------------------------------------------------------------------------
# log-sum-exp value iteration


def test_logsumexp_vi_single_state():
    r = reduce(LdpProblem(Pbar=[[0.5, 0.0], [0.5, 1.0]], s=[1.0, 0.0], goals=(1,)))
    lam = ldp_logsumexp_vi(r, iters=100_000, tol=1e-14)
    assert lam[0] == pytest.approx(1.48988012564475, abs=1e-12)


def test_logsumexp_vi_immediate_absorption():
    r = ReducedLdp(Pbar_r=[[0.0]], pbar_g=[1.0], s_r=[0.7])
    lam = ldp_logsumexp_vi(r, iters=10, tol=0.0)
    assert lam[0] == pytest.approx(0.7, abs=1e-15)


# ---------------------------------------------------------------------------
# Monte Carlo rollout


def single_state_solution():
    p = LdpProblem(Pbar=[[0.5, 0.0], [0.5, 1.0]], s=[1.0, 0.0], goals=(1,))
    return reduce(p), solve_ldp(p)


def test_rollout_is_deterministic_in_the_seed():
    r, sol = single_state_solution()
    a = ldp_rollout(r, sol.Pstar, 0, horizon=1000, trials=500, seed=42)
    b = ldp_rollout(r, sol.Pstar, 0, horizon=1000, trials=500, seed=42)
    assert a == b
    # trial t draws from stream seed + t, so nearby seeds share most streams;
    # a distant seed gives a fully independent batch
    c = ldp_rollout(r, sol.Pstar, 0, horizon=1000, trials=500, seed=9000)
    assert c.mean_cost != a.mean_cost


def test_rollout_frozen_statistics():
    r, sol = single_state_solution()
    stats = ldp_rollout(r, sol.Pstar, 0, horizon=1000, trials=2000, seed=0)
    assert stats.trials == 2000
    assert stats.mean_cost == pytest.approx(1.4936496017143044, abs=1e-12)
    assert stats.std_error == pytest.approx(0.014575575907262234, abs=1e-12)
    assert stats.truncated_fraction == 0.0
    # the estimate brackets the analytic value at three standard errors
    assert abs(stats.mean_cost - sol.lam[0]) <= 3.0 * stats.std_error


def test_rollout_immediate_absorption_hits_stage_cost():
    r = ReducedLdp(Pbar_r=[[0.0]], pbar_g=[1.0], s_r=[0.7])
    stats = ldp_rollout(r, np.array([[0.0]]), 0, horizon=10, trials=50, seed=1)
    # every trial absorbs after one step, paying exactly one stage cost;
    # only the mean's accumulation order leaves any float noise
    assert stats.mean_cost == pytest.approx(0.7, abs=1e-14)
    assert stats.std_error < 1e-15
    assert stats.truncated_fraction == 0.0


def test_rollout_single_trial_has_no_spread():
    r, sol = single_state_solution()
    stats = ldp_rollout(r, sol.Pstar, 0, horizon=1000, trials=1, seed=3)
    assert stats.std_error == 0.0


def test_rollout_seed_validation():
    r, sol = single_state_solution()
    with pytest.raises(BadSeedConfig):
        ldp_rollout(r, sol.Pstar, 0, horizon=10, trials=1, seed=-1)
    with pytest.raises(BadSeedConfig):
        ldp_rollout(r, sol.Pstar, 0, horizon=10, trials=1, seed=1.5)


def test_rollout_argument_validation():
    r, sol = single_state_solution()
    with pytest.raises(InvalidProblem):
        ldp_rollout(r, sol.Pstar, 0, horizon=10, trials=0, seed=0)
    with pytest.raises(InvalidProblem):
        ldp_rollout(r, sol.Pstar, 0, horizon=0, trials=1, seed=0)
    with pytest.raises(InvalidProblem):
        ldp_rollout(r, sol.Pstar, 5, horizon=10, trials=1, seed=0)
