"""End-to-end algorithm drivers with uniform tracing.

Four solvers share the master/cut machinery:

  run_benders   multi-cut Benders on the LP relaxation (classic closure),
  run_bdd       Benders saturation plus per-scenario Lagrangian cut rounds,
  run_alg1      adaptive partition loop on exact partition MIPs (gap-driven),
  run_apblagc   adaptive partition-based Lagrangian cuts: cluster Benders
                saturation, cluster-level Lagrangian rounds, dual-guided
                refinement with a progress-based outer stop.

All bounds are recorded in a RunTrace whose numeric content is
deterministic for a fixed instance and config; only wall-clock fields vary
between repeat runs.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass

import numpy as np

from .benders import (MasterState, solve_master, solve_scenario_subproblem,
                      solve_cluster_subproblem, make_benders_cut, make_pbbenc,
                      make_feasibility_cut, CUT_VIOLATION_TOL)
from .lagrangian import separate, scenario_target, cluster_target, VIOLATED
from .mip import solve_mip, MIP_OPTIMAL, MIP_BUDGET
from .model import CONTINUOUS, KIND_PBLAGC, theta_weights
from .partition import (single_cluster, aggregate, refine, delta_schedule,
                        build_partition_extensive)

EVENT_KINDS = ("benders_round", "lagrangian_round", "refinement", "termination")

REASON_CONVERGED = "converged"
REASON_SATURATED = "saturated"
REASON_STALLED = "stalled"
REASON_OUTER_STOP = "outer_stop"
REASON_EXHAUSTED = "refinement_exhausted"
REASON_TIME_LIMIT = "time_limit"


@dataclass
class RunConfig:
    algorithm: str = "apblagc"
    kappa1: float = 0.2              # outer-stop progress fraction
    delta_coefficient: float = 2.0   # refinement threshold = coeff / n^2
    stall_window: int = 5            # rounds measured by the stall rule
    stall_fraction: float = 0.05     # ... against this share of partition progress
    time_limit: float = 3600.0
    separation_budget: int = 50      # inner MIPs per target per round
    multiplier_box: float = 1.0
    epsilon: float = 1e-6            # relative gap target for run_alg1
    seed: int = 0
    saturate: bool = False           # ignore the stall rule; stop only when no cut exists
    final_mip_master: bool = False   # solve the integer master once at the end

    def __post_init__(self):
        if not 0.0 < self.kappa1 < 1.0:
            raise ValueError("kappa1 must lie in (0, 1)")
        if self.delta_coefficient <= 0:
            raise ValueError("delta_coefficient must be positive")
        if self.stall_window < 1:
            raise ValueError("stall_window must be at least 1")
        if not 0.0 < self.stall_fraction < 1.0:
            raise ValueError("stall_fraction must lie in (0, 1)")
        if self.time_limit <= 0:
            raise ValueError("time_limit must be positive")
        if self.separation_budget < 1:
            raise ValueError("separation_budget must be at least 1")
        if self.multiplier_box <= 0:
            raise ValueError("multiplier_box must be positive")
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")


@dataclass
class TraceEvent:
    seconds: float
    kind: str
    z_lb: float
    z_ub: float          # None when the algorithm tracks no upper bound
    cuts: dict           # cumulative cut counts by kind
    n_clusters: int
    refinements: int


class RunTrace:
    def __init__(self, instance_name, algorithm, n_scenarios):
        self.instance_name = instance_name
        self.algorithm = algorithm
        self.n_scenarios = n_scenarios
        self.events = []
        self.termination_reason = None
        self.cuts = []               # the master's cut pool at termination
        self.final_partition = None  # set by the partition-based drivers
        self.t0 = time.monotonic()

    def record(self, kind, z_lb, z_ub=None, cuts=None, n_clusters=1,
               refinements=0):
        if kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {kind!r}")
        z_lb = float(z_lb)
        if self.events:
            prev = self.events[-1].z_lb
            if z_lb < prev - 1e-6 * (1.0 + abs(z_lb)):
                raise RuntimeError("lower bound regressed between events")
            z_lb = max(z_lb, prev)   # monotone by theory; clamp float noise
        self.events.append(TraceEvent(time.monotonic() - self.t0, kind, z_lb,
                                      None if z_ub is None else float(z_ub),
                                      dict(cuts or {}), int(n_clusters),
                                      int(refinements)))

    def finish(self, reason):
        self.termination_reason = reason
        if self.events:
            last = self.events[-1]
            self.record("termination", last.z_lb, last.z_ub, last.cuts,
                        last.n_clusters, last.refinements)

    @property
    def final_lower_bound(self):
        return self.events[-1].z_lb if self.events else -np.inf

    @property
    def final_upper_bound(self):
        for ev in reversed(self.events):
            if ev.z_ub is not None:
                return ev.z_ub
        return None

    @property
    def n_refinements(self):
        return self.events[-1].refinements if self.events else 0

    @property
    def final_n_clusters(self):
        return self.events[-1].n_clusters if self.events else 0

    def cut_counts(self):
        return dict(self.events[-1].cuts) if self.events else {}


def _stalled(lb, window, fraction):
    """Progress of the last `window` rounds under `fraction` of the total
    progress recorded for the current partition (with a tiny absolute slack
    so a flat tail counts as stalled)."""
    if len(lb) < window + 1:
        return False
    recent = lb[-1] - lb[-1 - window]
    total = lb[-1] - lb[0]
    return recent <= fraction * total + 1e-9


def _outer_stop(lb_k, lb0_first, kappa1):
    """Stop refining once this partition's own progress fell under kappa1
    times the progress since the very first recorded bound."""
    progress = lb_k[-1] - lb_k[0]
    total = lb_k[-1] - lb0_first
    return progress <= kappa1 * total + 1e-9


def _scenario_benders_round(instance, state, x, theta):
    """Generate violated scenario-level optimality/feasibility cuts at x."""
    added = 0
    for s in range(instance.n_scenarios):
        res = solve_scenario_subproblem(instance, s, x)
        if not res.feasible:
            sc = instance.scenarios[s]
            if state.add_cut(make_feasibility_cut(instance, sc.technology,
                                                  sc.rhs, res)):
                added += 1
        elif res.value > theta[s] + CUT_VIOLATION_TOL * (1.0 + abs(theta[s])):
            if state.add_cut(make_benders_cut(instance, s, res)):
                added += 1
    return added


def _cluster_benders_round(instance, state, aggs, weights, x, theta):
    added = 0
    for agg, w in zip(aggs, weights):
        res = solve_cluster_subproblem(instance, agg, x)
        if not res.feasible:
            if state.add_cut(make_feasibility_cut(instance, agg.technology,
                                                  agg.rhs, res)):
                added += 1
        else:
            t_p = float(w @ theta)
            if res.value > t_p + CUT_VIOLATION_TOL * (1.0 + abs(t_p)):
                if state.add_cut(make_pbbenc(instance, agg, res)):
                    added += 1
    return added


def _scenario_duals(instance, x):
    """Duals (or normalized Farkas rays) of every scenario subproblem at x;
    the clustering signal for refinement."""
    duals = {}
    for s in range(instance.n_scenarios):
        res = solve_scenario_subproblem(instance, s, x)
        if res.feasible:
            duals[s] = res.duals
        else:
            ray = res.farkas
            scale = float(np.abs(ray).max(initial=0.0))
            duals[s] = ray / scale if scale > 0 else ray
    return duals


def run_benders(instance, config=None):
    """Classic multi-cut Benders on the LP relaxation; converges to the
    optimum of the LP-relaxed extensive form."""
    config = config or RunConfig(algorithm="benders")
    trace = RunTrace(instance.name, "benders", instance.n_scenarios)
    deadline = trace.t0 + config.time_limit
    state = MasterState(instance)
    ns = instance.n_scenarios
    reason = REASON_CONVERGED
    while True:
        if time.monotonic() > deadline:
            reason = REASON_TIME_LIMIT
            break
        x, theta, z = solve_master(state)
        added = _scenario_benders_round(instance, state, x, theta)
        trace.record("benders_round", z, cuts=state.cut_counts(),
                     n_clusters=ns)
        if added == 0:
            break
    trace.cuts = state.cuts
    trace.finish(reason)
    return trace


def run_bdd(instance, config=None):
    """Benders saturation followed by per-scenario Lagrangian cut rounds;
    the lower bound climbs toward the scenario-level Lagrangian dual."""
    config = config or RunConfig(algorithm="bdd")
    trace = RunTrace(instance.name, "bdd", instance.n_scenarios)
    deadline = trace.t0 + config.time_limit
    state = MasterState(instance)
    ns = instance.n_scenarios
    lb = []
    reason = None
    x, theta, z = solve_master(state)
    trace.record("benders_round", z, cuts=state.cut_counts(), n_clusters=ns)
    while reason is None:
        while True:
            if time.monotonic() > deadline:
                reason = REASON_TIME_LIMIT
                break
            added = _scenario_benders_round(instance, state, x, theta)
            if added == 0:
                break
            x, theta, z = solve_master(state)
            trace.record("benders_round", z, cuts=state.cut_counts(),
                         n_clusters=ns)
        if reason is not None:
            break
        found = 0
        for s in range(ns):
            out = separate(instance, scenario_target(instance, s), x,
                           float(theta[s]), budget=config.separation_budget,
                           box=config.multiplier_box, deadline=deadline)
            if out.status == VIOLATED and state.add_cut(out.cut):
                found += 1
        x, theta, z = solve_master(state)
        lb.append(z)
        trace.record("lagrangian_round", z, cuts=state.cut_counts(),
                     n_clusters=ns)
        if found == 0:
            reason = REASON_SATURATED
        elif time.monotonic() > deadline:
            reason = REASON_TIME_LIMIT
        elif not config.saturate and _stalled(lb, config.stall_window,
                                              config.stall_fraction):
            reason = REASON_STALLED
    trace.cuts = state.cuts
    trace.finish(reason)
    return trace


def run_alg1(instance, config=None):
    """Adaptive partition loop: solve the exact partition MIP, evaluate the
    true expected recourse at its first stage, refine by scenario duals
    until the relative gap closes."""
    config = config or RunConfig(algorithm="alg1")
    trace = RunTrace(instance.name, "alg1", instance.n_scenarios)
    deadline = trace.t0 + config.time_limit
    partition = single_cluster(instance.n_scenarios)
    n1 = instance.n1
    marked = np.array([m != CONTINUOUS for m in instance.integrality])
    p = instance.probabilities
    z_ub = np.inf
    n_ref = 0
    reason = None
    while reason is None:
        res = solve_mip(build_partition_extensive(instance, partition),
                        deadline=deadline)
        if res.status == MIP_BUDGET:
            reason = REASON_TIME_LIMIT
            break
        if res.status != MIP_OPTIMAL:
            raise ValueError("partition problem infeasible")
        z_n = res.objective
        x = res.x[:n1].copy()
        x[marked] = np.round(x[marked])
        duals = {}
        expected = 0.0
        feasible = True
        for s in range(instance.n_scenarios):
            sub = solve_scenario_subproblem(instance, s, x)
            if sub.feasible:
                duals[s] = sub.duals
                expected += p[s] * sub.value
            else:
                feasible = False
                ray = sub.farkas
                scale = float(np.abs(ray).max(initial=0.0))
                duals[s] = ray / scale if scale > 0 else ray
        if feasible:
            z_ub = min(z_ub, float(instance.first_stage_cost @ x) + expected)
        trace.record("benders_round", z_n,
                     z_ub=None if not np.isfinite(z_ub) else z_ub,
                     n_clusters=partition.size, refinements=n_ref)
        gap = np.inf
        if np.isfinite(z_ub):
            gap = (z_ub - z_n) / max(abs(z_ub), 1e-12)
        if gap <= config.epsilon:
            reason = REASON_CONVERGED
            break
        if time.monotonic() > deadline:
            reason = REASON_TIME_LIMIT
            break
        delta = delta_schedule(n_ref + 1, config.delta_coefficient)
        newp = refine(partition, duals, delta)
        if newp.size == partition.size:
            newp = refine(partition, duals, delta / 2.0)
        if newp.size == partition.size:
            reason = REASON_EXHAUSTED
            break
        partition = newp
        n_ref += 1
        trace.record("refinement", z_n,
                     z_ub=None if not np.isfinite(z_ub) else z_ub,
                     n_clusters=partition.size, refinements=n_ref)
    trace.final_partition = partition
    trace.finish(reason)
    return trace


def run_apblagc(instance, config=None):
    """Adaptive partition-based Lagrangian cuts.

    Work at the coarsest partition until aggregated Benders and Lagrangian
    cuts stop paying (the stall rule), then either stop outright -- when
    this partition's progress fell under kappa1 times the total progress --
    or refine along scenario duals and repeat.
    """
    config = config or RunConfig(algorithm="apblagc")
    trace = RunTrace(instance.name, "apblagc", instance.n_scenarios)
    deadline = trace.t0 + config.time_limit
    state = MasterState(instance)
    partition = single_cluster(instance.n_scenarios)
    aggs = [aggregate(instance, c) for c in partition.clusters]
    weights = [theta_weights(instance, c) for c in partition.clusters]
    k = 0
    lb_k = []
    lb0_first = None
    n_ref = 0
    reason = None
    x, theta, z = solve_master(state)
    trace.record("benders_round", z, cuts=state.cut_counts(),
                 n_clusters=partition.size, refinements=n_ref)
    while reason is None:
        # saturate aggregated Benders cuts at the current partition
        while True:
            if time.monotonic() > deadline:
                reason = REASON_TIME_LIMIT
                break
            added = _cluster_benders_round(instance, state, aggs, weights,
                                           x, theta)
            if added == 0:
                break
            x, theta, z = solve_master(state)
            trace.record("benders_round", z, cuts=state.cut_counts(),
                         n_clusters=partition.size, refinements=n_ref)
        if reason is not None:
            break
        # one Lagrangian separation pass over the clusters
        found = 0
        for agg, w in zip(aggs, weights):
            tgt = cluster_target(instance, agg.cluster)
            out = separate(instance, tgt, x, float(w @ theta),
                           budget=config.separation_budget,
                           box=config.multiplier_box, deadline=deadline)
            if out.status == VIOLATED and state.add_cut(out.cut):
                found += 1
        x, theta, z = solve_master(state)
        lb_k.append(z)
        if lb0_first is None:
            lb0_first = lb_k[0]
        trace.record("lagrangian_round", z, cuts=state.cut_counts(),
                     n_clusters=partition.size, refinements=n_ref)
        if time.monotonic() > deadline:
            reason = REASON_TIME_LIMIT
            break
        stalled = (found == 0) if config.saturate else \
            (found == 0 or _stalled(lb_k, config.stall_window,
                                    config.stall_fraction))
        if not stalled:
            continue
        if _outer_stop(lb_k, lb0_first, config.kappa1):
            reason = REASON_OUTER_STOP
            break
        duals = _scenario_duals(instance, x)
        delta = delta_schedule(k + 1, config.delta_coefficient)
        newp = refine(partition, duals, delta)
        if newp.size == partition.size:
            newp = refine(partition, duals, delta / 2.0)
        if newp.size == partition.size:
            reason = REASON_EXHAUSTED
            break
        partition = newp
        aggs = [aggregate(instance, c) for c in partition.clusters]
        weights = [theta_weights(instance, c) for c in partition.clusters]
        k += 1
        lb_k = []
        n_ref += 1
        trace.record("refinement", z, cuts=state.cut_counts(),
                     n_clusters=partition.size, refinements=n_ref)
    if config.final_mip_master and reason != REASON_TIME_LIMIT:
        _, _, z_int = solve_master(state, relax_integrality=False,
                                   deadline=deadline)
        trace.record("lagrangian_round", z_int, cuts=state.cut_counts(),
                     n_clusters=partition.size, refinements=n_ref)
    trace.cuts = state.cuts
    trace.final_partition = partition
    trace.finish(reason)
    return trace


def run(instance, config):
    """Dispatch on config.algorithm."""
    table = {"benders": run_benders, "bdd": run_bdd, "alg1": run_alg1,
             "apblagc": run_apblagc}
    if config.algorithm not in table:
        raise ValueError(f"unknown algorithm {config.algorithm!r}; "
                         f"choose from {sorted(table)}")
    return table[config.algorithm](instance, config)


TRACE_FORMAT_TAG = "stochcuts-trace-v1"
TRACE_COLUMNS = ("run", "algorithm", "instance", "scenarios", "event",
                 "kind", "seconds", "z_lb", "z_ub", "ccut", "fcut",
                 "n_clusters", "refinements")


def cut_split(counts):
    """(aggregated Lagrangian cuts, everything else) from a per-kind dict."""
    ccut = int(counts.get(KIND_PBLAGC, 0))
    fcut = int(sum(v for k, v in counts.items() if k != KIND_PBLAGC))
    return ccut, fcut


def write_trace_csv(trace, fh):
    """One row per event under a versioned header; numeric fields use repr
    so a reread is exact."""
    fh.write(TRACE_FORMAT_TAG + "\n")
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(TRACE_COLUMNS)
    run_id = f"{trace.instance_name}:{trace.algorithm}"
    for i, ev in enumerate(trace.events):
        ccut, fcut = cut_split(ev.cuts)
        writer.writerow([run_id, trace.algorithm, trace.instance_name,
                         trace.n_scenarios, i, ev.kind, repr(ev.seconds),
                         repr(ev.z_lb),
                         "" if ev.z_ub is None else repr(ev.z_ub),
                         ccut, fcut, ev.n_clusters, ev.refinements])


def read_trace_csv(fh):
    """Rows as dicts with numeric fields parsed; rejects unknown schemas."""
    tag = fh.readline().strip()
    if tag != TRACE_FORMAT_TAG:
        raise ValueError(f"unknown trace schema {tag!r}; "
                         f"expected {TRACE_FORMAT_TAG!r}")
    reader = csv.reader(fh)
    header = next(reader, None)
    if header is None or tuple(header) != TRACE_COLUMNS:
        raise ValueError("trace header does not match the v1 column list")
    rows = []
    for rec in reader:
        if not rec:
            continue
        if len(rec) != len(TRACE_COLUMNS):
            raise ValueError(f"trace row has {len(rec)} fields, "
                             f"expected {len(TRACE_COLUMNS)}")
        row = dict(zip(TRACE_COLUMNS, rec))
        row["scenarios"] = int(row["scenarios"])
        row["event"] = int(row["event"])
        row["seconds"] = float(row["seconds"])
        row["z_lb"] = float(row["z_lb"])
        row["z_ub"] = None if row["z_ub"] == "" else float(row["z_ub"])
        for key in ("ccut", "fcut", "n_clusters", "refinements"):
            row[key] = int(row[key])
        rows.append(row)
    return rows
