import numpy as np
import pytest

from stochcuts.model import (Instance, Scenario, Cut, BINARY,
                             KIND_BENDERS, KIND_PBBENC, KIND_FEASIBILITY,
                             theta_weights)
from stochcuts.partition import aggregate, single_cluster
from stochcuts.benders import (solve_scenario_subproblem,
                               solve_cluster_subproblem, make_benders_cut,
                               make_pbbenc, make_feasibility_cut,
                               compute_theta_lower_bounds, MasterState,
                               solve_master, MasterInfeasibleError,
                               SubproblemResult)


def test_scenario_subproblem_values(thm1):
    # scenario 0 rows: y >= x1 - x2 and y >= x2 - x1
    at_origin = solve_scenario_subproblem(thm1, 0, np.zeros(2))
    assert at_origin.feasible and at_origin.value == pytest.approx(0.0)
    split = solve_scenario_subproblem(thm1, 0, np.array([1.0, 0.0]))
    assert split.value == pytest.approx(1.0)
    assert split.duals == pytest.approx([1.0, 0.0])
    # scenario 1 rows: y >= 1 - x1 - x2 and y >= x1 + x2 - 1
    s1 = solve_scenario_subproblem(thm1, 1, np.zeros(2))
    assert s1.value == pytest.approx(1.0)
    assert s1.duals == pytest.approx([1.0, 0.0])


def test_cluster_subproblem_matches_aggregate(thm1):
    agg = aggregate(thm1, (0, 1))
    res = solve_cluster_subproblem(thm1, agg, np.zeros(2))
    # averaged rows: y >= x2 - 0 + 0.5 and y >= -x2 - 0.5 at x = 0
    assert res.feasible and res.value == pytest.approx(0.5)
    assert res.duals == pytest.approx([1.0, 0.0])
    assert res.target == (0, 1)


def test_make_benders_cut(thm1):
    res = solve_scenario_subproblem(thm1, 1, np.zeros(2))
    cut = make_benders_cut(thm1, 1, res)
    assert cut.kind == KIND_BENDERS
    assert cut.x_coeffs == pytest.approx([1.0, 1.0])
    assert cut.theta_coeffs == pytest.approx([0.0, 1.0])
    assert cut.rhs == pytest.approx(1.0)
    # tight at the generating point with theta = subproblem value
    assert cut.slack(np.zeros(2), [0.0, res.value]) == pytest.approx(0.0)


def test_make_pbbenc(thm1):
    agg = aggregate(thm1, (0, 1))
    res = solve_cluster_subproblem(thm1, agg, np.zeros(2))
    cut = make_pbbenc(thm1, agg, res)
    assert cut.kind == KIND_PBBENC
    assert cut.x_coeffs == pytest.approx([0.0, 1.0])
    assert cut.theta_coeffs == pytest.approx([0.5, 0.5])
    assert cut.rhs == pytest.approx(0.5)
    assert cut.origin == (0, 1)


def test_pbbenc_is_weighted_scenario_combination(small_sslp, rng):
    # an aggregated cut must equal the probability-weighted sum of the
    # per-scenario cuts written with the same cluster dual
    for seed in range(4):
        inst = small_sslp(seed=seed)
        for trial in range(5):
            size = int(rng.integers(2, inst.n_scenarios + 1))
            cluster = tuple(sorted(rng.choice(inst.n_scenarios, size=size,
                                              replace=False).tolist()))
            xhat = rng.integers(0, 2, size=inst.n1).astype(float)
            if xhat.sum() == 0:
                xhat[0] = 1.0
            agg = aggregate(inst, cluster)
            res = solve_cluster_subproblem(inst, agg, xhat)
            if not res.feasible:
                continue
            combined = make_pbbenc(inst, agg, res)
            p = inst.probabilities
            total = p[list(cluster)].sum()
            x_sum = np.zeros(inst.n1)
            t_sum = np.zeros(inst.n_scenarios)
            r_sum = 0.0
            for s in cluster:
                one = make_benders_cut(inst, s,
                                       SubproblemResult(s, duals=res.duals))
                w = p[s] / total
                x_sum += w * one.x_coeffs
                t_sum += w * one.theta_coeffs
                r_sum += w * one.rhs
            assert np.abs(x_sum - combined.x_coeffs).max() <= 1e-9
            assert np.abs(t_sum - combined.theta_coeffs).max() <= 1e-9
            assert abs(r_sum - combined.rhs) <= 1e-9


def infeasible_recourse_instance():
    # y >= 2 - 2x and y <= 1: the recourse is empty for x < 1/2
    sc = Scenario(1.0, [[2.0], [0.0]], [2.0, -1.0])
    return Instance("gap", [1.0], np.zeros((0, 1)), [], (BINARY,),
                    [1.0], [[1.0], [-1.0]], (sc,))


def test_feasibility_cut_from_farkas_ray():
    inst = infeasible_recourse_instance()
    res = solve_scenario_subproblem(inst, 0, np.zeros(1))
    assert not res.feasible
    ray = res.farkas
    assert np.all(ray >= -1e-12)
    assert np.all(np.asarray(inst.recourse).T @ ray <= 1e-9)
    cut = make_feasibility_cut(inst, inst.scenarios[0].technology,
                               inst.scenarios[0].rhs, res)
    assert cut.kind == KIND_FEASIBILITY
    assert cut.theta_coeffs == pytest.approx([0.0])
    # the generating point is cut off, the feasible first stage survives
    assert cut.slack([0.0], [0.0]) < -1e-9
    assert cut.slack([1.0], [0.0]) >= -1e-9
    # and the subproblem really is feasible at x = 1
    at_one = solve_scenario_subproblem(inst, 0, np.ones(1))
    assert at_one.feasible


def test_theta_lower_bounds(thm1, refinement_example):
    assert compute_theta_lower_bounds(thm1) == pytest.approx([0.0, 0.0])
    lbs = compute_theta_lower_bounds(refinement_example)
    assert lbs == pytest.approx([0.0, 1.5, 0.0, 0.0])


def test_master_state_round(thm1):
    state = MasterState(thm1)
    x, theta, obj = solve_master(state)
    assert obj == pytest.approx(0.0)
    assert state.z_lb == pytest.approx(0.0)
    res = solve_scenario_subproblem(thm1, 1, x)
    grew = state.add_cut(make_benders_cut(thm1, 1, res))
    assert grew
    x2, theta2, obj2 = solve_master(state)
    # the LP master dodges the cut by moving x, so the bound stays 0
    assert obj2 == pytest.approx(0.0)
    assert state.z_lb >= -1e-12
    assert state.cut_counts() == {KIND_BENDERS: 1}


def test_master_integer_mode(thm1):
    state = MasterState(thm1)
    # force theta to carry the recourse via both scenario cuts at a point
    for xhat in (np.zeros(2), np.ones(2), np.array([1.0, 0.0])):
        for s in range(2):
            r = solve_scenario_subproblem(thm1, s, xhat)
            state.add_cut(make_benders_cut(thm1, s, r))
    x, theta, obj = solve_master(state, relax_integrality=False)
    frac = np.abs(x[:2] - np.round(x[:2])).max()
    assert frac <= 1e-9
    # integer master value is not folded into z_lb
    assert state.z_lb == -np.inf


def test_add_cut_dedup(thm1):
    state = MasterState(thm1)
    cut = Cut(KIND_BENDERS, [1.0, 1.0], [0.0, 1.0], 1.0)
    assert state.add_cut(cut)
    assert not state.add_cut(Cut(KIND_BENDERS, [1.0, 1.0], [0.0, 1.0], 1.0))
    # a scaled copy is the same halfspace
    assert not state.add_cut(Cut(KIND_BENDERS, [2.0, 2.0], [0.0, 2.0], 2.0))
    # the zero cut carries no information
    assert not state.add_cut(Cut(KIND_BENDERS, [0.0, 0.0], [0.0, 0.0], 0.0))
    assert len(state.cuts) == 1


def test_master_infeasible(thm1):
    state = MasterState(thm1)
    state.add_cut(Cut(KIND_FEASIBILITY, [1.0, 0.0], [0.0, 0.0], 2.0))
    with pytest.raises(MasterInfeasibleError):
        solve_master(state)


def test_z_lb_monotone_over_rounds(small_sslp):
    inst = small_sslp(seed=1)
    state = MasterState(inst)
    prev = -np.inf
    for _ in range(6):
        x, theta, obj = solve_master(state)
        assert state.z_lb >= prev - 1e-12
        prev = state.z_lb
        added = 0
        for s in range(inst.n_scenarios):
            res = solve_scenario_subproblem(inst, s, x)
            if not res.feasible:
                cut = make_feasibility_cut(inst, inst.scenarios[s].technology,
                                           inst.scenarios[s].rhs, res)
                added += state.add_cut(cut)
            elif res.value > theta[s] + 1e-6:
                added += state.add_cut(make_benders_cut(inst, s, res))
        if not added:
            break
    assert np.isfinite(state.z_lb)
