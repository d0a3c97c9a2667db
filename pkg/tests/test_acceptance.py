"""Acceptance gate: ten checks covering the solver stack end to end.

Each test prints one PASS/FAIL line. The corpus of live runs (instances,
traces, cut pools) is built once and shared; everything is deterministic,
so the numbers below are stable across machines up to wall-clock columns.
"""

import io
import itertools
import time

import numpy as np
import pytest

from stochcuts.lp import LpModel, solve_lp, OPTIMAL, INFEASIBLE, UNBOUNDED, GE, LE, EQ
from stochcuts.mip import MipModel, solve_mip, enumerate_binary, MIP_OPTIMAL, MIP_INFEASIBLE
from stochcuts.model import build_extensive, theta_weights, KIND_PBBENC
from stochcuts.partition import Partition, single_cluster, singletons
from stochcuts.benders import solve_scenario_subproblem
from stochcuts.drivers import (RunConfig, run_benders, run_bdd, run_apblagc,
                               write_trace_csv, read_trace_csv,
                               REASON_TIME_LIMIT)
from stochcuts.instance_io import builtin, GeneratorConfig, generate_sslp
from stochcuts.verify import (feasible_first_stage_points, check_dim1_no_gap,
                              check_refinement_monotone)


def _line(num, name, ok, detail=""):
    tag = "PASS" if ok else "FAIL"
    print(f"{tag}  criterion-{num:02d}  {name}  {detail}".rstrip())
    return ok


@pytest.fixture(scope="module")
def corpus():
    """24 small server-location instances with live benders/bdd/apblagc
    traces; n1 <= 4 and |S| <= 8 keep brute-force validation exact."""
    items = []
    for seed in range(24):
        cfg = GeneratorConfig(sites=2 + seed % 3, clients=4,
                              scenarios=5 + seed % 4, seed=seed)
        inst = generate_sslp(cfg)
        run_cfg = dict(separation_budget=4, stall_window=2,
                       stall_fraction=0.3, time_limit=60.0)
        items.append({
            "instance": inst,
            "benders": run_benders(inst, RunConfig(algorithm="benders",
                                                   **run_cfg)),
            "bdd": run_bdd(inst, RunConfig(algorithm="bdd", **run_cfg)),
            "apblagc": run_apblagc(inst, RunConfig(algorithm="apblagc",
                                                   **run_cfg)),
        })
    return items


def test_criterion_01_thm1_discrimination():
    inst = builtin("thm1")
    t0 = time.monotonic()
    benders = run_benders(inst).final_lower_bound
    bdd = run_bdd(inst, RunConfig(algorithm="bdd",
                                  saturate=True)).final_lower_bound
    apb = run_apblagc(inst).final_lower_bound
    opt = solve_mip(build_extensive(inst)).objective
    elapsed = time.monotonic() - t0
    ok = (abs(benders - 0.0) <= 1e-6 and abs(bdd - 0.0) <= 1e-6
          and abs(apb - 0.5) <= 1e-6 and abs(opt - 0.5) <= 1e-6
          and elapsed < 5.0)
    assert _line(1, "thm1-discrimination", ok,
                 f"benders={benders:.2e} bdd={bdd:.2e} apblagc={apb:.6f} "
                 f"opt={opt:.6f} ({elapsed:.2f}s)")


def test_criterion_02_cut_validity_sweep(corpus):
    t0 = time.monotonic()
    checked = 0
    kinds = set()
    worst = np.inf
    for item in corpus:
        inst = item["instance"]
        points = feasible_first_stage_points(inst)
        cuts = []
        for alg in ("benders", "bdd", "apblagc"):
            cuts.extend(item[alg].cuts)
        for cut in cuts:
            kinds.add(cut.kind)
            for x, values in points:
                slack = float(cut.x_coeffs @ x) \
                    + float(cut.theta_coeffs @ values) - cut.rhs
                worst = min(worst, slack)
            checked += 1
    elapsed = time.monotonic() - t0
    ok = (len(corpus) >= 20 and worst >= -1e-6 and elapsed < 600.0)
    assert _line(2, "cut-validity-sweep", ok,
                 f"{checked} cuts over {len(corpus)} instances, kinds="
                 f"{'/'.join(sorted(kinds))}, worst slack={worst:.3e} "
                 f"({elapsed:.1f}s)")


def test_criterion_03_pbbenc_combination_identity(corpus):
    triples = 0
    worst = 0.0
    for item in corpus:
        inst = item["instance"]
        p = inst.probabilities
        for cut in item["apblagc"].cuts:
            if cut.kind != KIND_PBBENC or cut.gen_dual is None:
                continue
            lam = cut.gen_dual
            cluster = cut.origin
            w = theta_weights(inst, cluster)
            x_comb = np.zeros(inst.n1)
            rhs_comb = 0.0
            for s in cluster:
                sc = inst.scenarios[s]
                x_comb += w[s] * (sc.technology.T @ lam)
                rhs_comb += w[s] * float(lam @ sc.rhs)
            err = max(float(np.abs(cut.x_coeffs - x_comb).max(initial=0.0)),
                      float(np.abs(cut.theta_coeffs - w).max(initial=0.0)),
                      abs(cut.rhs - rhs_comb))
            worst = max(worst, err)
            triples += 1
    ok = triples >= 200 and worst <= 1e-9
    assert _line(3, "pbbenc-combination-identity", ok,
                 f"{triples} triples, worst coefficient error={worst:.3e}")


def test_criterion_04_dim1_no_lagrangian_gap():
    t0 = time.monotonic()
    failures = []
    worst = 0.0
    for seed in range(20):
        report = check_dim1_no_gap(builtin(f"dim1-random-{seed}"))
        worst = max(worst, report.worst or 0.0)
        if not report.passed:
            failures.append(seed)
    elapsed = time.monotonic() - t0
    ok = not failures
    assert _line(4, "dim1-no-lagrangian-gap", ok,
                 f"20 instances, worst gap={worst:.3e} ({elapsed:.1f}s)"
                 + (f" failures={failures}" if failures else ""))


def _halving_chain(n_scenarios):
    chain = [single_cluster(n_scenarios)]
    while chain[-1].size < n_scenarios:
        prev = chain[-1]
        groups = []
        split_done = False
        for cluster in prev.clusters:
            if not split_done and len(cluster) > 1:
                mid = len(cluster) // 2
                groups.append(cluster[:mid])
                groups.append(cluster[mid:])
                split_done = True
            else:
                groups.append(cluster)
        chain.append(Partition.make(groups, generation=prev.generation + 1))
    return chain


def test_criterion_05_refinement_monotone_chains():
    t0 = time.monotonic()
    failures = []
    worst = np.inf
    for seed in range(10):
        cfg = GeneratorConfig(sites=3, clients=3, scenarios=4 + seed % 3,
                              seed=100 + seed)
        inst = generate_sslp(cfg)
        chain = _halving_chain(inst.n_scenarios)
        report = check_refinement_monotone(inst, chain)
        worst = min(worst, report.worst)
        if not report.passed:
            failures.append(seed)
    elapsed = time.monotonic() - t0
    ok = not failures
    assert _line(5, "refinement-monotone-chains", ok,
                 f"10 chains to singletons, worst step={worst:.3e} "
                 f"({elapsed:.1f}s)"
                 + (f" failures={failures}" if failures else ""))


def test_criterion_06_benders_equals_extensive_lp(corpus):
    worst = 0.0
    count = 0
    for inst, trace in (
        [(item["instance"], item["benders"]) for item in corpus]
        + [(builtin("thm1"), run_benders(builtin("thm1")))]
        + [(builtin("refinement-example"),
            run_benders(builtin("refinement-example")))]
        + [(builtin(f"dim1-random-{s}"),
            run_benders(builtin(f"dim1-random-{s}"))) for s in range(6)]
    ):
        relax = solve_lp(build_extensive(inst).lp)
        assert relax.status == OPTIMAL
        worst = max(worst, abs(trace.final_lower_bound - relax.objective))
        count += 1
    ok = worst <= 1e-6
    assert _line(6, "benders-equals-extensive-lp", ok,
                 f"{count} instances, worst deviation={worst:.3e}")


def _random_binary_mip(rng):
    p1 = int(rng.integers(3, 9))
    if rng.uniform() < 0.05:
        p1 = 10    # exercise the enumeration cap boundary
    n = p1 + int(rng.integers(0, 4))
    m = int(rng.integers(1, 7))
    a = rng.integers(-4, 5, size=(m, n)).astype(float)
    senses = [(GE, LE, EQ)[rng.integers(0, 3)] for _ in range(m)]
    x0 = np.concatenate([rng.integers(0, 2, size=p1).astype(float),
                         rng.uniform(0.0, 2.0, size=n - p1)])
    slack = rng.uniform(0.0, 1.0, size=m)
    b = a @ x0
    for i, s in enumerate(senses):
        if s == GE:
            b[i] -= slack[i]
        elif s == LE:
            b[i] += slack[i]
    if rng.uniform() < 0.15:
        a = np.vstack([a, a[:1]])
        senses = senses + ([GE] if senses[0] == LE else [LE])
        b = np.append(b, b[0] + (2.0 if senses[-1] == GE else -2.0))
    c = rng.integers(-5, 6, size=n).astype(float)
    lb = np.zeros(n)
    ub = np.concatenate([np.ones(p1), rng.uniform(2.0, 6.0, size=n - p1)])
    lp = LpModel.make(c, a, senses, b, lb, ub)
    integer = np.zeros(n, dtype=bool)
    integer[:p1] = True
    return MipModel(lp, integer)


def test_criterion_07_mip_matches_enumeration_oracle():
    rng = np.random.default_rng(20260816)
    t0 = time.monotonic()
    solved = 0
    infeasible = 0
    worst = 0.0
    trials = 0
    while solved < 50 and trials < 120:
        trials += 1
        model = _random_binary_mip(rng)
        res = solve_mip(model)
        table = enumerate_binary(model, cap=1024)
        if res.status == MIP_OPTIMAL:
            assert table, "oracle found no assignment where search found one"
            worst = max(worst, abs(res.objective - table[0][1]))
            solved += 1
        else:
            assert res.status == MIP_INFEASIBLE
            assert not table, "search missed a feasible assignment"
            infeasible += 1
    elapsed = time.monotonic() - t0
    ok = solved >= 50 and worst <= 1e-9
    assert _line(7, "mip-matches-enumeration-oracle", ok,
                 f"{solved} optimal + {infeasible} infeasible models, "
                 f"worst gap={worst:.3e} ({elapsed:.1f}s)")


def _random_lp(rng, contradict):
    n = int(rng.integers(2, 41))
    m = int(rng.integers(1, 13))
    a = rng.integers(-4, 5, size=(m, n)).astype(float)
    senses = [(GE, LE, EQ)[rng.integers(0, 3)] for _ in range(m)]
    x0 = rng.uniform(0.0, 2.0, size=n)
    slack = rng.uniform(0.0, 1.0, size=m)
    b = a @ x0
    for i, s in enumerate(senses):
        if s == GE:
            b[i] -= slack[i]
        elif s == LE:
            b[i] += slack[i]
    if contradict:
        a = np.vstack([a, a[:1]])
        senses = senses + ([GE] if senses[0] == LE else [LE])
        b = np.append(b, b[0] + (2.0 if senses[-1] == GE else -2.0))
    c = rng.integers(-5, 6, size=n).astype(float)
    ub = np.where(rng.uniform(size=n) < 0.5,
                  rng.uniform(2.0, 6.0, size=n), np.inf)
    return LpModel.make(c, a, senses, b, np.zeros(n), ub)


def test_criterion_08_lp_core_soundness():
    rng = np.random.default_rng(42)
    t0 = time.monotonic()
    optimal = 0
    infeasible = 0
    worst_gap = 0.0
    trials = 0
    while (optimal < 500 or infeasible < 100) and trials < 2000:
        trials += 1
        model = _random_lp(rng, contradict=trials % 3 == 0)
        res = solve_lp(model)
        if res.status == OPTIMAL:
            dual_obj = float(res.duals @ model.b)
            rc = res.reduced_costs
            for j in range(len(model.lb)):
                if rc[j] > 0 and np.isfinite(model.lb[j]):
                    dual_obj += rc[j] * model.lb[j]
                elif rc[j] < 0 and np.isfinite(model.ub[j]):
                    dual_obj += rc[j] * model.ub[j]
            gap = abs(dual_obj - res.objective) / (1.0 + abs(res.objective))
            worst_gap = max(worst_gap, gap)
            assert gap <= 1e-7
            optimal += 1
        elif res.status == INFEASIBLE:
            y = res.farkas
            for i, sense in enumerate(model.senses):
                if sense == GE:
                    assert y[i] >= -1e-9
                elif sense == LE:
                    assert y[i] <= 1e-9
            z = model.A.T @ y
            sup = 0.0
            for j, zj in enumerate(z):
                if zj > 1e-12:
                    assert np.isfinite(model.ub[j])
                    sup += zj * model.ub[j]
                elif zj < -1e-12:
                    sup += zj * model.lb[j]
            assert float(y @ model.b) > sup + 1e-9
            infeasible += 1
        else:
            assert res.status == UNBOUNDED
    elapsed = time.monotonic() - t0
    ok = optimal >= 500 and infeasible >= 100 and worst_gap <= 1e-7
    assert _line(8, "lp-core-soundness", ok,
                 f"{optimal} optimal (worst duality gap={worst_gap:.3e}), "
                 f"{infeasible} Farkas-certified infeasible ({elapsed:.1f}s)")


def test_criterion_09_trace_invariants(corpus):
    # every emitted trace round-trips through CSV with monotone bounds
    for item in corpus:
        for alg in ("benders", "bdd", "apblagc"):
            buf = io.StringIO()
            write_trace_csv(item[alg], buf)
            rows = read_trace_csv(io.StringIO(buf.getvalue()))
            lbs = [r["z_lb"] for r in rows]
            secs = [r["seconds"] for r in rows]
            assert all(b >= a for a, b in zip(lbs, lbs[1:]))
            assert all(b >= a for a, b in zip(secs, secs[1:]))

    # the 50-scenario desk instance finishes inside the limit with at
    # least one aggregated Lagrangian round
    inst = generate_sslp(GeneratorConfig(sites=10, clients=10, scenarios=50,
                                         seed=0))
    t0 = time.monotonic()
    trace = run_apblagc(inst, RunConfig(algorithm="apblagc",
                                        separation_budget=3, stall_window=2,
                                        stall_fraction=0.1, time_limit=120.0))
    elapsed = time.monotonic() - t0
    buf = io.StringIO()
    write_trace_csv(trace, buf)
    rows = read_trace_csv(io.StringIO(buf.getvalue()))
    lag_rounds = sum(1 for r in rows if r["kind"] == "lagrangian_round")
    n_clusters = trace.final_n_clusters
    ok = (elapsed <= 120.0 and trace.termination_reason != REASON_TIME_LIMIT
          and lag_rounds >= 1 and len(rows) == len(trace.events)
          and n_clusters <= 50)
    assert _line(9, "trace-invariants", ok,
                 f"72 corpus traces monotone; desk |S|=50 run: {elapsed:.1f}s, "
                 f"{lag_rounds} lagrangian rounds, final clusters "
                 f"{n_clusters}/50, reason {trace.termination_reason}")


def test_criterion_10_determinism(corpus):
    inst = corpus[0]["instance"]
    cfg = RunConfig(algorithm="apblagc", separation_budget=4, stall_window=2,
                    stall_fraction=0.3, time_limit=60.0)

    def frozen_rows(trace):
        buf = io.StringIO()
        write_trace_csv(trace, buf)
        rows = read_trace_csv(io.StringIO(buf.getvalue()))
        for r in rows:
            r["seconds"] = 0.0
        return rows

    a = frozen_rows(run_apblagc(inst, cfg))
    b = frozen_rows(run_apblagc(inst, cfg))
    thm = builtin("thm1")
    c = frozen_rows(run_benders(thm))
    d = frozen_rows(run_benders(thm))
    ok = a == b and c == d
    assert _line(10, "determinism", ok,
                 f"apblagc on {inst.name} and benders on thm1 repeat "
                 f"bit-identically modulo wall clock ({len(a)} + {len(c)} rows)")
