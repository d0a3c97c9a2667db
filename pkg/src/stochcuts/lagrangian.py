"""Lagrangian cut separation via a cutting-plane game on the multiplier box.

For a target (one scenario or one cluster) with system  T x + W y >= h  and
K = {x in X, A x = b, y >= 0, T x + W y >= h}, the inner problem

    Qbar(pi, pi0) = min { pi.x + pi0 * d.y : (x, y) in K }

is an exact MIP.  Separation maximizes  Qbar(pi, pi0) - pi.x_hat - pi0 *
theta_hat  over the box ||pi||_inf <= box, 0 <= pi0 <= 1: an outer LP keeps
a pool of inner minimizers and proposes multipliers, the inner MIP certifies
them.  Every certified value is a true lower bound on the separation
optimum, so the returned cut is valid regardless of how early the loop
stops.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .lp import LpModel, solve_lp, EQ, GE, LE, OPTIMAL as LP_OPTIMAL
from .mip import MipModel, solve_mip, MIP_OPTIMAL, MIP_INFEASIBLE
from .model import (Cut, theta_weights, CONTINUOUS,
                    KIND_LAGRANGIAN, KIND_PBLAGC)
from .partition import aggregate

SEP_GAP_TOL = 1e-6         # outer-minus-certified convergence tolerance
SEP_VIOLATION_TOL = 1e-6   # certified violation needed to emit a cut

VIOLATED = "violated_cut_found"
NO_VIOLATED = "no_violated_cut"
BUDGET = "budget_exceeded"


@dataclass(frozen=True)
class SeparationTarget:
    """What the multiplier prices: one scenario or one aggregated cluster."""

    kind: str              # "scenario" | "cluster"
    members: tuple
    technology: np.ndarray
    rhs: np.ndarray
    weights: np.ndarray    # theta aggregation weights over all scenarios


def scenario_target(instance, s):
    sc = instance.scenarios[s]
    w = np.zeros(instance.n_scenarios)
    w[s] = 1.0
    return SeparationTarget("scenario", (s,), sc.technology, sc.rhs, w)


def cluster_target(instance, cluster):
    agg = aggregate(instance, cluster)
    return SeparationTarget("cluster", agg.cluster, agg.technology, agg.rhs,
                            theta_weights(instance, agg.cluster))


@dataclass
class SeparationOutcome:
    status: str
    pi: np.ndarray = None
    pi0: float = None
    violation: float = None   # certified separation value at (pi, pi0)
    cut: Cut = None
    inner_calls: int = 0


def inner_model(instance, target, pi, pi0):
    """The MIP behind Qbar: variables x then y, K's constraints verbatim."""
    n1, n2 = instance.n1, instance.n2
    c = np.concatenate([np.asarray(pi, dtype=float),
                        float(pi0) * instance.second_stage_cost])
    rows = np.hstack([target.technology, instance.recourse])
    senses = [GE] * instance.m2
    rhs = target.rhs
    if instance.m1:
        rows = np.vstack([np.hstack([instance.first_stage_matrix,
                                     np.zeros((instance.m1, n2))]), rows])
        senses = [EQ] * instance.m1 + senses
        rhs = np.concatenate([instance.first_stage_rhs, target.rhs])
    xlb, xub = instance.x_bounds()
    lb = np.concatenate([xlb, np.zeros(n2)])
    ub = np.concatenate([xub, np.full(n2, np.inf)])
    lp = LpModel.make(c, rows, senses, rhs, lb, ub)
    integer = np.zeros(n1 + n2, dtype=bool)
    integer[:n1] = [m != CONTINUOUS for m in instance.integrality]
    return MipModel(lp, integer)


def evaluate_inner(instance, target, pi, pi0, deadline=None):
    """Exact Qbar(pi, pi0) with a minimizer (x, y); None value on deadline."""
    res = solve_mip(inner_model(instance, target, pi, pi0), deadline=deadline)
    if res.status == MIP_INFEASIBLE:
        raise ValueError(f"target {target.members}: K is empty")
    if res.status != MIP_OPTIMAL:
        return None, None, None
    n1 = instance.n1
    return float(res.objective), res.x[:n1].copy(), res.x[n1:].copy()


def _outer_lp(n1, pool, xhat, theta_hat, box):
    # variables: pi (n1, in [-box, box]), pi0 in [0, 1], eta free; max eta
    nvar = n1 + 2
    c = np.zeros(nvar)
    c[n1 + 1] = -1.0
    rows = np.zeros((len(pool), nvar))
    rhs = np.zeros(len(pool))
    for i, (xj, dyj) in enumerate(pool):
        rows[i, :n1] = -(xj - xhat)
        rows[i, n1] = -(dyj - theta_hat)
        rows[i, n1 + 1] = 1.0
    lb = np.concatenate([np.full(n1, -float(box)), [0.0, -np.inf]])
    ub = np.concatenate([np.full(n1, float(box)), [1.0, np.inf]])
    return LpModel.make(c, rows, (LE,) * len(pool), rhs, lb, ub)


def make_lagrangian_cut(instance, target, pi, pi0, inner_value):
    """pi.x + pi0 * theta_target >= Qbar(pi, pi0), with theta_target spelled
    out over the per-scenario block via the target's weights."""
    kind = KIND_LAGRANGIAN if target.kind == "scenario" else KIND_PBLAGC
    return Cut(kind, np.asarray(pi, dtype=float),
               float(pi0) * target.weights, float(inner_value),
               origin=target.members)


def separate(instance, target, xhat, theta_hat, budget=50, box=1.0,
             deadline=None):
    """Search the multiplier box for a cut violated at (x_hat, theta_hat).

    theta_hat is the scalar value of the target's (possibly aggregated)
    epigraph variable at the master solution.  At most `budget` inner MIPs
    are spent; the pool is seeded at (pi, pi0) = (0, 1), whose certificate
    is exactly the Benders-closure gap of the target.
    """
    n1 = instance.n1
    d = instance.second_stage_cost
    xhat = np.asarray(xhat, dtype=float)
    theta_hat = float(theta_hat)

    calls = 0
    pool = []
    best = None   # (L, pi, pi0, Qbar)

    def certify(pi, pi0):
        nonlocal calls, best
        val, x, y = evaluate_inner(instance, target, pi, pi0, deadline)
        calls += 1
        if val is None:
            return False
        pool.append((x, float(d @ y)))
        level = val - float(pi @ xhat) - pi0 * theta_hat
        if best is None or level > best[0]:
            best = (level, np.asarray(pi, dtype=float).copy(), pi0, val)
        return True

    converged = False
    if certify(np.zeros(n1), 1.0):
        while calls < budget:
            if deadline is not None and time.monotonic() > deadline:
                break
            outer = solve_lp(_outer_lp(n1, pool, xhat, theta_hat, box))
            if outer.status != LP_OPTIMAL:
                raise RuntimeError("separation outer LP must be solvable")
            eta = -outer.objective
            if eta - best[0] <= SEP_GAP_TOL * (1.0 + abs(best[0])):
                converged = True
                break
            pi = outer.x[:n1]
            pi0 = float(np.clip(outer.x[n1], 0.0, 1.0))
            if not certify(pi, pi0):
                break
        else:
            converged = False

    if best is not None and best[0] > SEP_VIOLATION_TOL * (1.0 + abs(theta_hat)):
        level, pi, pi0, qbar = best
        cut = make_lagrangian_cut(instance, target, pi, pi0, qbar)
        return SeparationOutcome(VIOLATED, pi, pi0, level, cut, calls)
    if converged and best is not None:
        return SeparationOutcome(NO_VIOLATED, best[1], best[2], best[0],
                                 None, calls)
    if best is None:
        return SeparationOutcome(BUDGET, None, None, None, None, calls)
    return SeparationOutcome(BUDGET, best[1], best[2], best[0], None, calls)
