"""Benders machinery: recourse subproblems, optimality/feasibility cuts,
their partition-aggregated counterparts, and the shared master problem.

The master keeps one epigraph variable theta_s per scenario no matter which
partition is active; aggregated cuts are stored against the probability
weights of their cluster, so they stay valid verbatim after refinements.
"""

from __future__ import annotations

import numpy as np

from .lp import (LpModel, solve_lp, EQ, GE, OPTIMAL as LP_OPTIMAL,
                 INFEASIBLE as LP_INFEASIBLE, UNBOUNDED as LP_UNBOUNDED)
from .mip import MipModel, solve_mip, MIP_OPTIMAL
from .model import (Cut, theta_weights, CONTINUOUS,
                    KIND_BENDERS, KIND_PBBENC, KIND_FEASIBILITY)

CUT_VIOLATION_TOL = 1e-6   # relative slack below which a cut counts as violated
DEDUP_TOL = 1e-9           # coefficientwise match after max-abs normalization


class MasterInfeasibleError(RuntimeError):
    """The cut pool (or the first-stage system itself) admits no x."""


class SubproblemResult:
    """Value/duals of one recourse LP, or a Farkas ray when infeasible."""

    def __init__(self, target, value=None, duals=None, feasible=True,
                 farkas=None):
        self.target = target
        self.value = value
        self.duals = duals
        self.feasible = feasible
        self.farkas = farkas


def _recourse_lp(instance, technology, rhs, xhat):
    resid = rhs - technology @ xhat
    return LpModel.make(instance.second_stage_cost, instance.recourse,
                        (GE,) * instance.m2, resid)


def solve_scenario_subproblem(instance, s, xhat):
    """min d.y  s.t.  W y >= h_s - T_s x_hat,  y >= 0."""
    sc = instance.scenarios[s]
    res = solve_lp(_recourse_lp(instance, sc.technology, sc.rhs, xhat))
    if res.status == LP_INFEASIBLE:
        return SubproblemResult(s, feasible=False, farkas=res.farkas)
    if res.status == LP_UNBOUNDED:
        raise ValueError(f"scenario {s}: recourse unbounded below")
    return SubproblemResult(s, value=res.objective, duals=res.duals)


def solve_cluster_subproblem(instance, agg, xhat):
    """Same LP on the cluster's probability-averaged technology and rhs."""
    res = solve_lp(_recourse_lp(instance, agg.technology, agg.rhs, xhat))
    if res.status == LP_INFEASIBLE:
        return SubproblemResult(agg.cluster, feasible=False, farkas=res.farkas)
    if res.status == LP_UNBOUNDED:
        raise ValueError(f"cluster {agg.cluster}: recourse unbounded below")
    return SubproblemResult(agg.cluster, value=res.objective, duals=res.duals)


def make_benders_cut(instance, s, result):
    """theta_s >= dual.(h_s - T_s x), rearranged onto the master's left side."""
    sc = instance.scenarios[s]
    lam = result.duals
    coeffs = sc.technology.T @ lam
    theta = np.zeros(instance.n_scenarios)
    theta[s] = 1.0
    return Cut(KIND_BENDERS, coeffs, theta, float(lam @ sc.rhs),
               origin=(s,), gen_dual=lam)


def make_pbbenc(instance, agg, result):
    """Aggregated Benders cut over theta_P = sum of weighted theta_s."""
    lam = result.duals
    coeffs = agg.technology.T @ lam
    theta = theta_weights(instance, agg.cluster)
    return Cut(KIND_PBBENC, coeffs, theta, float(lam @ agg.rhs),
               origin=agg.cluster, gen_dual=lam)


def make_feasibility_cut(instance, technology, rhs, result):
    """From a Farkas ray sigma >= 0 with sigma.W <= 0: sigma.(h - T x) <= 0."""
    ray = result.farkas
    coeffs = technology.T @ ray
    theta = np.zeros(instance.n_scenarios)
    origin = result.target if isinstance(result.target, tuple) else (result.target,)
    return Cut(KIND_FEASIBILITY, coeffs, theta, float(ray @ rhs),
               origin=origin, gen_dual=ray)


def compute_theta_lower_bounds(instance):
    """L_s = min d.y over W y >= h_s - T_s x with x anywhere in its relaxed
    box; keeps the master bounded before any cut mentions theta_s."""
    n1, n2 = instance.n1, instance.n2
    xlb, xub = instance.x_bounds()
    out = np.zeros(instance.n_scenarios)
    for s, sc in enumerate(instance.scenarios):
        c = np.concatenate([np.zeros(n1), instance.second_stage_cost])
        rows = np.hstack([sc.technology, instance.recourse])
        senses = [GE] * instance.m2
        rhs = sc.rhs
        if instance.m1:
            rows = np.vstack([np.hstack([instance.first_stage_matrix,
                                         np.zeros((instance.m1, n2))]), rows])
            senses = [EQ] * instance.m1 + senses
            rhs = np.concatenate([instance.first_stage_rhs, sc.rhs])
        lb = np.concatenate([xlb, np.zeros(n2)])
        ub = np.concatenate([xub, np.full(n2, np.inf)])
        res = solve_lp(LpModel.make(c, rows, senses, rhs, lb, ub))
        if res.status == LP_INFEASIBLE:
            raise ValueError(f"scenario {s}: infeasible for every first stage")
        if res.status == LP_UNBOUNDED:
            raise ValueError(f"scenario {s}: recourse value unbounded below")
        out[s] = res.objective
    return out


class MasterState:
    """Instance + cut pool + the best lower bound produced so far."""

    def __init__(self, instance):
        self.instance = instance
        self.cuts = []
        self.theta_lb = compute_theta_lower_bounds(instance)
        self.z_lb = -np.inf
        self.x_hat = None
        self.theta_hat = None

    def add_cut(self, cut):
        """Append unless a pool cut matches coefficientwise after max-abs
        normalization; returns True if the pool grew."""
        stacked = np.concatenate([cut.x_coeffs, cut.theta_coeffs, [cut.rhs]])
        scale = float(np.abs(stacked).max(initial=0.0))
        if scale <= 0.0:
            return False
        stacked = stacked / scale
        for other in self.cuts:
            o = np.concatenate([other.x_coeffs, other.theta_coeffs, [other.rhs]])
            oscale = float(np.abs(o).max(initial=0.0))
            if oscale <= 0.0:
                continue
            if float(np.abs(o / oscale - stacked).max()) <= DEDUP_TOL:
                return False
        self.cuts.append(cut)
        return True

    def cut_counts(self):
        out = {}
        for c in self.cuts:
            out[c.kind] = out.get(c.kind, 0) + 1
        return out


def build_master_model(state, relax_integrality=True):
    instance = state.instance
    n1, ns = instance.n1, instance.n_scenarios
    nvar = n1 + ns
    c = np.concatenate([instance.first_stage_cost, instance.probabilities])
    nrows = instance.m1 + len(state.cuts)
    rows = np.zeros((nrows, nvar))
    rhs = np.zeros(nrows)
    senses = [EQ] * instance.m1 + [GE] * len(state.cuts)
    rows[:instance.m1, :n1] = instance.first_stage_matrix
    rhs[:instance.m1] = instance.first_stage_rhs
    for i, cut in enumerate(state.cuts):
        r = instance.m1 + i
        rows[r, :n1] = cut.x_coeffs
        rows[r, n1:] = cut.theta_coeffs
        rhs[r] = cut.rhs
    xlb, xub = instance.x_bounds()
    lb = np.concatenate([xlb, state.theta_lb])
    ub = np.full(nvar, np.inf)
    ub[:n1] = xub
    lp = LpModel.make(c, rows, senses, rhs, lb, ub)
    if relax_integrality:
        return lp
    integer = np.zeros(nvar, dtype=bool)
    integer[:n1] = [m != CONTINUOUS for m in instance.integrality]
    return MipModel(lp, integer)


def solve_master(state, relax_integrality=True, deadline=None):
    """Solve the current master; updates and returns (x, theta, z_lb).

    With integrality relaxed the optimum is a valid global lower bound and
    is folded into state.z_lb (monotone under a growing pool).
    """
    model = build_master_model(state, relax_integrality)
    if relax_integrality:
        res = solve_lp(model)
        if res.status == LP_INFEASIBLE:
            raise MasterInfeasibleError("master problem infeasible")
        if res.status == LP_UNBOUNDED:
            raise ValueError("master problem unbounded; theta bounds missing?")
        obj, x = res.objective, res.x
    else:
        res = solve_mip(model, deadline=deadline)
        if res.status != MIP_OPTIMAL:
            raise MasterInfeasibleError(f"integer master ended {res.status}")
        obj, x = res.objective, res.x
    n1 = state.instance.n1
    state.x_hat = x[:n1].copy()
    state.theta_hat = x[n1:].copy()
    if relax_integrality:
        if obj < state.z_lb - 1e-6 * (1.0 + abs(obj)):
            raise RuntimeError("master lower bound regressed beyond tolerance")
        state.z_lb = max(state.z_lb, float(obj))
    return state.x_hat, state.theta_hat, float(obj)
