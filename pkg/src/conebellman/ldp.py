"""KL-control (linearly solvable) Markov decision problems.

States evolve by a column-stochastic matrix P̄ (column i = distribution of
the next state given the current state i).  The controller may reshape each
column into any distribution absolutely continuous w.r.t. it, paying the
state cost s plus the KL divergence of the reshaped column from the
original.  Goal states are absorbing and free.

Removing the goal rows/columns leaves a substochastic reduced system where
the Bellman equation decomposes per column.  Under z = exp(-lam) the
minimized equation collapses to the affine system

    z = G (P̄_r^T z + p̄_g),        G = diag(exp(-s_r)),

solved directly by Gaussian elimination (with a monotone fixed-point
fallback), after which the optimal controlled transitions have the closed
form  p_i* = p̄_i ∘ z / (p̄_i^T z + (p̄_g)_i).
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .cones import ConeTag, ValueObject
from .engine import (
    BlockProblem,
    ConvergenceTrace,
    SolveConfig,
    fixed_point_solve,
    spectral_radius,
)
from .errors import (
    CertificationError,
    GoalNotAbsorbing,
    GoalUnreachable,
    InvalidProblem,
    NoGoal,
    ShapeMismatch,
    SingularSystem,
    SupportViolation,
)

_STOCHASTIC_TOL = 1e-12


def _frozen(a, dtype=float) -> np.ndarray:
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class LdpProblem:
    """Full-system model: column-stochastic P̄, stage cost s, goal set.

    Column i of Pbar is the transition distribution FROM state i.  Goal
    semantics (absorbing, zero cost, reachable) are checked by `reduce`,
    which is the only road to a solvable reduced system.
    """

    Pbar: np.ndarray
    s: np.ndarray
    goals: tuple[int, ...]

    def __post_init__(self):
        P = np.asarray(self.Pbar, dtype=float)
        s = np.asarray(self.s, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise ShapeMismatch(f"Pbar must be square, got {P.shape}")
        n = P.shape[0]
        if s.shape != (n,):
            raise ShapeMismatch(f"s must have length {n}, got {s.shape}")
        if P.size and float(P.min()) < -_STOCHASTIC_TOL:
            raise InvalidProblem("Pbar entries must be nonnegative")
        P = np.maximum(P, 0.0)
        colsums = P.sum(axis=0)
        if np.any(np.abs(colsums - 1.0) > _STOCHASTIC_TOL):
            worst = int(np.argmax(np.abs(colsums - 1.0)))
            raise InvalidProblem(
                f"column {worst} of Pbar sums to {float(colsums[worst])!r}, not 1"
            )
        if np.any(s < 0):
            raise InvalidProblem("stage cost s must be nonnegative")
        goals = tuple(sorted(set(int(g) for g in self.goals)))
        if goals and (goals[0] < 0 or goals[-1] >= n):
            raise InvalidProblem(f"goal ids must lie in [0, {n}), got {goals}")
        object.__setattr__(self, "Pbar", _frozen(P))
        object.__setattr__(self, "s", _frozen(s))
        object.__setattr__(self, "goals", goals)

    @property
    def n(self) -> int:
        return self.Pbar.shape[0]


@dataclass(frozen=True)
class ReducedLdp:
    """Goal-free substochastic system: Pbar_r, goal-mass vector, positive cost.

    Column i of Pbar_r plus (pbar_g)_i must sum to one: the missing mass is
    exactly what flows into the (removed) goal states.
    """

    Pbar_r: np.ndarray
    pbar_g: np.ndarray
    s_r: np.ndarray

    def __post_init__(self):
        P = np.asarray(self.Pbar_r, dtype=float)
        g = np.asarray(self.pbar_g, dtype=float)
        s = np.asarray(self.s_r, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise ShapeMismatch(f"Pbar_r must be square, got {P.shape}")
        n = P.shape[0]
        if g.shape != (n,) or s.shape != (n,):
            raise ShapeMismatch(
                f"pbar_g and s_r must have length {n}, got {g.shape} and {s.shape}"
            )
        if (P.size and float(P.min()) < 0.0) or np.any(g < 0):
            raise InvalidProblem("reduced transitions must be nonnegative")
        if np.any(np.abs(P.sum(axis=0) + g - 1.0) > _STOCHASTIC_TOL):
            raise InvalidProblem(
                "each column of Pbar_r plus its goal mass must sum to 1"
            )
        if np.any(s < 0):
            raise InvalidProblem("reduced stage cost must be nonnegative")
        object.__setattr__(self, "Pbar_r", _frozen(P))
        object.__setattr__(self, "pbar_g", _frozen(g))
        object.__setattr__(self, "s_r", _frozen(s))

    @property
    def n_r(self) -> int:
        return self.Pbar_r.shape[0]


@dataclass
class LdpSolution:
    z: np.ndarray
    lam: np.ndarray
    Pstar: np.ndarray
    trace: ConvergenceTrace
    bellman_residual: float


def reduce(p: LdpProblem) -> ReducedLdp:
    """Delete goal rows/columns, aggregating per-state goal-transition mass.

    Checks the goal semantics: the set is non-empty, every goal is absorbing
    with zero cost, non-goal costs are strictly positive, and every non-goal
    state can reach some goal through the support of P̄.
    """
    if not p.goals:
        raise NoGoal("the goal set is empty")
    goalset = set(p.goals)
    for g in p.goals:
        if p.s[g] != 0.0:
            raise GoalNotAbsorbing(f"goal state {g} has nonzero cost {p.s[g]!r}")
        leak = sum(p.Pbar[j, g] for j in range(p.n) if j != g)
        if leak > _STOCHASTIC_TOL:
            raise GoalNotAbsorbing(
                f"goal state {g} leaks probability {leak!r} to other states"
            )
    nongoal = [x for x in range(p.n) if x not in goalset]
    if any(p.s[x] <= 0.0 for x in nongoal):
        bad = next(x for x in nongoal if p.s[x] <= 0.0)
        raise InvalidProblem(f"non-goal state {bad} must have strictly positive cost")

    # reverse reachability over the support graph (edge i -> j iff Pbar[j, i] > 0)
    reached = set(goalset)
    frontier = list(goalset)
    while frontier:
        j = frontier.pop()
        for i in range(p.n):
            if i not in reached and p.Pbar[j, i] > 0.0:
                reached.add(i)
                frontier.append(i)
    stuck = [x for x in nongoal if x not in reached]
    if stuck:
        raise GoalUnreachable(f"states {stuck} cannot reach any goal under Pbar")

    idx = np.array(nongoal, dtype=int)
    Pbar_r = p.Pbar[np.ix_(idx, idx)] if nongoal else np.zeros((0, 0))
    pbar_g = (
        p.Pbar[np.array(sorted(goalset), dtype=int)][:, idx].sum(axis=0)
        if nongoal
        else np.zeros(0)
    )
    return ReducedLdp(Pbar_r=Pbar_r, pbar_g=pbar_g, s_r=p.s[idx])


class _DesirabilityBlocks(BlockProblem):
    """Fallback fixed-point form z <- G(P̄_r^T z + p̄_g), one block per state.

    Each block's minimizer is the optimal transition column implied by the
    current iterate; the update map is affine and monotone, so iterates from
    z0 = 0 increase toward the solution.
    """

    def __init__(self, r: ReducedLdp):
        self.r = r
        self.g = np.exp(-r.s_r)
        self.cone = ConeTag.orthant(r.n_r)
        self.n_blocks = r.n_r

    def block_update(self, i: int, z: ValueObject):
        v = z.data
        col = self.r.Pbar_r[:, i]
        push = col @ v + self.r.pbar_g[i]
        contribution = np.zeros(self.r.n_r)
        contribution[i] = self.g[i] * push
        minimizer = (col * v) / push if push > 0.0 else np.array(col)
        return contribution, minimizer


def solve_desirability(
    r: ReducedLdp, cfg: SolveConfig | None = None
) -> tuple[np.ndarray, np.ndarray, ConvergenceTrace]:
    """Solve z = G(P̄_r^T z + p̄_g); return (z, lam, trace) with lam = -log z.

    Primary route is the direct linear solve of (I - G P̄_r^T) z = G p̄_g;
    if that fails or leaves a residual at or above tol, the affine map is
    iterated from z0 = 0 instead.  Certifies the contraction condition
    rho(G P̄_r^T) < 1, the final residual below tol, and z in (0, 1].
    """
    cfg = cfg or SolveConfig()
    t0 = time.perf_counter_ns()
    g = np.exp(-r.s_r)
    GP = g[:, None] * r.Pbar_r.T
    rho = spectral_radius(GP)
    if rho >= 1.0:
        raise SingularSystem(
            f"rho(G Pbar_r^T) = {rho:.6f} >= 1: zero-cost recurrent mass "
            "never reaches the goal"
        )

    def affine_residual(z: np.ndarray) -> float:
        if z.size == 0:
            return 0.0
        return float(np.max(np.abs(z - (GP @ z + g * r.pbar_g))))

    z = None
    trace = None
    try:
        cand = np.linalg.solve(np.eye(r.n_r) - GP, g * r.pbar_g)
        if affine_residual(cand) < cfg.tol:
            z = cand
            trace = ConvergenceTrace()
            trace.append(0, affine_residual(cand), time.perf_counter_ns() - t0)
    except np.linalg.LinAlgError:
        z = None
    if z is None:
        # iterate to stationarity below tol (the engine certifies 10x its tol)
        inner = SolveConfig(
            tol=cfg.tol / 10.0,
            max_iter=cfg.max_iter,
            schedule=cfg.schedule,
            divergence_cap=cfg.divergence_cap,
        )
        blocks = _DesirabilityBlocks(r)
        result = fixed_point_solve(blocks, ValueObject.zeros(blocks.cone), inner)
        z = np.array(result.value.data)
        trace = result.trace

    residual = affine_residual(z)
    if residual >= cfg.tol:
        raise CertificationError(
            f"desirability residual {residual:.3e} >= tol {cfg.tol:.3e}"
        )
    if z.size and float(z.min()) <= 0.0:
        raise CertificationError("desirability has non-positive entries")
    if z.size and float(z.max()) > 1.0 + 1e-12:
        raise CertificationError(
            f"desirability exceeds 1 (max {float(z.max())!r}); costs must be >= 0"
        )
    z = np.minimum(z, 1.0)
    lam = -np.log(z)
    return z, lam, trace


def optimal_policy(r: ReducedLdp, lam: np.ndarray) -> np.ndarray:
    """Closed-form minimizing transitions: p_i* = p̄_i ∘ z / (p̄_i^T z + (p̄_g)_i).

    Zeros of p̄_i stay exactly zero, and each column's implied goal mass
    1 - 1^T p_i* is nonnegative because the goal term sits in the denominator.
    """
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (r.n_r,):
        raise ShapeMismatch(f"lam must have length {r.n_r}, got {lam.shape}")
    if lam.size and not np.all(np.isfinite(lam)):
        raise InvalidProblem("lam must be finite")
    z = np.exp(-lam)
    W = r.Pbar_r * z[:, None]
    denom = W.sum(axis=0) + r.pbar_g
    return W / denom[None, :] if r.n_r else W


def kl_stage_cost(r: ReducedLdp, P: np.ndarray) -> np.ndarray:
    """Per-state cost of running controlled transitions P instead of P̄_r.

    h_i = s_i + sum_j P_ji log(P_ji / P̄_ji) + g_i log(g_i / (p̄_g)_i), where
    g_i = 1 - 1^T p_i is the controlled goal mass; 0 log 0 terms are zero.
    Columns must stay inside the support of P̄_r (anything else has infinite
    KL cost), and states with zero goal mass in P̄_r must keep zero goal mass.
    """
    P = np.asarray(P, dtype=float)
    if P.shape != (r.n_r, r.n_r):
        raise ShapeMismatch(f"P must be {r.n_r} x {r.n_r}, got {P.shape}")
    if P.size and float(P.min()) < -_STOCHASTIC_TOL:
        raise InvalidProblem("P entries must be nonnegative")
    P = np.maximum(P, 0.0)
    if np.any((P > 0.0) & (r.Pbar_r == 0.0)):
        raise SupportViolation(
            "P places mass where Pbar_r has none (infinite divergence)"
        )
    goal_mass = 1.0 - P.sum(axis=0)
    if np.any(goal_mass < -_STOCHASTIC_TOL):
        raise InvalidProblem("columns of P must be substochastic")
    off_support_goal = (r.pbar_g == 0.0) & (np.abs(goal_mass) > _STOCHASTIC_TOL)
    if np.any(off_support_goal):
        bad = int(np.argmax(off_support_goal))
        raise SupportViolation(
            f"column {bad} sends mass {goal_mass[bad]!r} to the goal but "
            "Pbar_r gives that state no goal transition"
        )

    safe_pbar = np.where(r.Pbar_r > 0.0, r.Pbar_r, 1.0)
    ratio = np.where(P > 0.0, P / safe_pbar, 1.0)
    kl = (np.where(P > 0.0, P * np.log(ratio), 0.0)).sum(axis=0)
    gm = np.maximum(goal_mass, 0.0)
    safe_goal = np.where(r.pbar_g > 0.0, r.pbar_g, 1.0)
    pi = np.where(gm > 0.0, gm * np.log(np.where(gm > 0.0, gm, 1.0) / safe_goal), 0.0)
    return r.s_r + kl + pi


def verify_bellman(r: ReducedLdp, lam: np.ndarray, Pstar: np.ndarray) -> float:
    """Sup-norm defect of (lam, Pstar) in lam = h(Pstar) + Pstar^T lam."""
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (r.n_r,):
        raise ShapeMismatch(f"lam must have length {r.n_r}, got {lam.shape}")
    h = kl_stage_cost(r, Pstar)
    if r.n_r == 0:
        return 0.0
    return float(np.max(np.abs(lam - (h + np.asarray(Pstar).T @ lam))))


def solve_ldp(p: LdpProblem, cfg: SolveConfig | None = None) -> LdpSolution:
    """Full pipeline: reduce, solve desirability, recover policy, certify.

    The returned lam/z/Pstar are indexed by non-goal states in ascending
    original order (the order `reduce` uses).
    """
    cfg = cfg or SolveConfig()
    r = reduce(p)
    z, lam, trace = solve_desirability(r, cfg)
    Pstar = optimal_policy(r, lam)
    residual = verify_bellman(r, lam, Pstar)
    if residual >= 10.0 * cfg.tol:
        raise CertificationError(
            f"Bellman residual {residual:.3e} >= {10.0 * cfg.tol:.3e}"
        )
    return LdpSolution(z=z, lam=lam, Pstar=Pstar, trace=trace, bellman_residual=residual)
