import math

import numpy as np
import pytest

from conftest import const_alpha, direct_set, rate_device
from iscc.allocation import fs_upper_bound
from iscc.comm import Scenario, generate_scenario, task_delay
from iscc.errors import ConfigError, InfeasibleError
from iscc.optimizer import (AllocationPlan, evaluate_fixed_fs, fs_feasible, min_sensing_compute,
                            parse_scheme, run_benchmark, solve, solve_at_fs, solve_exhaustive,
                            solve_low_complexity)
from iscc.sensing import (AlphaModel, SensingParams, avg_sensing_delay, default_class_set,
                          overall_accuracy)

SP, CS, AM = SensingParams(), default_class_set(), AlphaModel()
BENCHMARKS = ("conventional", "avg_compute", "avg_comm", "fixed_threshold:0.25",
              "fixed_threshold:0.5", "fixed_threshold:0.75", "fixed_threshold:1")


def _scenario(seed, f_edge=100e9, n=15):
    return generate_scenario(n, seed=seed).with_edge(f_edge)


def check_plan(plan, s, sp=SP, cs=CS):
    """Every constraint a feasible plan must satisfy, or the floor otherwise."""
    if not plan.feasible:
        assert plan.accuracy == 1.0 / len(cs)
        return
    a = plan.device_alloc
    assert sp.tau_s * plan.f_s + math.fsum(a.tau_c) <= 1 + 1e-9
    assert plan.f_sense + math.fsum(a.f_n) <= s.f_edge_hz + 1e-3
    assert plan.sensing_delay <= sp.t_sense_max * (1 + 1e-9)
    for d, tau, f in zip(s.devices, a.tau_c, a.f_n):
        assert task_delay(d.task, tau, f, d.rate) <= d.task.t_max * (1 + 1e-9)
    assert plan.sensing_delay == pytest.approx(
        avg_sensing_delay(cs, sp, plan.f_s, plan.eta, plan.f_sense), rel=1e-9)


# --- single sampling rate -------------------------------------------------------------


def test_worked_instance_leaves_remaining_cpu_to_sensing():
    s = Scenario((rate_device(1e6, 500, 0.4, 1e7),), 4e9, 0)
    sp = SensingParams(tau_s=2.5e-4, t_sense_max=100.0)
    plan = evaluate_fixed_fs(s, sp, CS, AM, 2000)
    assert plan.feasible
    assert plan.device_alloc.f_n[0] == pytest.approx(2.5e9, rel=1e-9)
    assert plan.f_sense == pytest.approx(1.5e9, rel=1e-9)
    check_plan(plan, s, sp)


def test_generous_edge_with_tiny_tasks():
    s = Scenario((rate_device(1.0, 1.0, 0.4, 1e7),), 1e12, 0)
    plan = evaluate_fixed_fs(s, SP, CS, AM, 100)
    assert plan.feasible
    assert plan.f_sense == pytest.approx(1e12, rel=1e-6)


def test_rates_above_bound_are_infeasible():
    for seed in range(20):
        s = _scenario(seed, f_edge=np.random.default_rng(seed).uniform(60e9, 200e9))
        f_u = fs_upper_bound(s, SP.tau_s)
        assert not evaluate_fixed_fs(s, SP, CS, AM, f_u + 1).feasible
        assert not fs_feasible(s, SP, CS, f_u + 1)


def test_rejects_nonpositive_rate():
    with pytest.raises(ConfigError):
        evaluate_fixed_fs(_scenario(0), SP, CS, AM, 0)


# --- exhaustive search ----------------------------------------------------------------


@pytest.mark.parametrize("seed", range(5))
def test_plans_satisfy_constraints(seed):
    s = _scenario(seed)
    for scheme in ("proposed", "low_complexity") + BENCHMARKS:
        check_plan(solve(scheme, s, SP, CS, AM), s)


def test_coarse_step_loses_little():
    for seed in range(5):
        for f_edge in (40e9, 80e9, 120e9):
            s = _scenario(seed, f_edge)
            a1 = solve_exhaustive(s, SP, CS, AM, step=1).accuracy
            a10 = solve_exhaustive(s, SP, CS, AM, step=10).accuracy
            assert a10 <= a1 + 1e-12
            assert a1 - a10 <= 0.005


def test_single_candidate_matches_fixed_rate():
    # one light task and a large CPU make the airtime bound the binding limit
    sp = SP
    s = Scenario((rate_device(1e5, 400, 0.4, 1e8),), 200e9, 0)
    f_u = fs_upper_bound(s, sp.tau_s)
    feasible = 0
    for f in (f_u // 2 + 1, f_u):  # each is the only candidate at this stride
        one = solve_exhaustive(s, sp, CS, AM, step=f)
        fixed = evaluate_fixed_fs(s, sp, CS, AM, f)
        assert one.feasible == fixed.feasible
        assert one.accuracy == pytest.approx(fixed.accuracy, abs=1e-12)
        if one.feasible:
            feasible += 1
            assert one.f_s == f and one.eta == pytest.approx(fixed.eta, rel=1e-9)
    assert feasible >= 1


def test_exhaustive_matches_scan_of_fixed_rates():
    s = _scenario(3, 80e9, n=6)
    best = solve_exhaustive(s, SP, CS, AM, step=7)
    f_u = fs_upper_bound(s, SP.tau_s)
    scan = [evaluate_fixed_fs(s, SP, CS, AM, f) for f in range(7, f_u + 1, 7)]
    top = max(p.accuracy for p in scan)
    assert best.accuracy == pytest.approx(top, abs=1e-9)
    assert scan[best.f_s // 7 - 1].accuracy == pytest.approx(top, abs=1e-9)


def test_ties_prefer_slower_sampling():
    # statistics and CNN accuracy independent of the rate, so every rate ties
    cs, sp = direct_set((0.5, 2.0), (0.1, 0.5), (0.6, 0.4))
    sp = SensingParams(sigma2=sp.sigma2, t_sense_max=1e3)
    s = _scenario(0, 200e9, n=3)
    plan = solve_exhaustive(s, sp, cs, const_alpha(0.9), step=5)
    assert plan.feasible and plan.f_s == 5


def test_dominates_benchmarks():
    for seed in range(8):
        for f_edge in (50e9, 90e9, 150e9):
            s = _scenario(seed, f_edge)
            best = solve_exhaustive(s, SP, CS, AM).accuracy
            for scheme in BENCHMARKS:
                assert best >= run_benchmark(scheme, s, SP, CS, AM).accuracy - 1e-9, scheme


def test_all_infeasible_reports_floor():
    s = _scenario(0, f_edge=1e9)
    for scheme in ("proposed", "low_complexity") + BENCHMARKS:
        plan = solve(scheme, s, SP, CS, AM)
        assert not plan.feasible
        assert plan.accuracy == 0.125
        assert plan.to_dict()["accuracy"] == 0.125


def test_plan_json_round_trip():
    s = _scenario(2)
    for scheme in ("proposed", "avg_comm"):
        plan = solve(scheme, s, SP, CS, AM)
        again = AllocationPlan.from_dict(plan.to_dict())
        assert again.to_dict() == plan.to_dict()


# --- low-complexity variant -------------------------------------------------------------


@pytest.mark.parametrize("seed", range(4))
def test_low_complexity_finds_fastest_feasible_rate(seed):
    s = _scenario(seed, 70e9 + 20e9 * seed)
    f_u = fs_upper_bound(s, SP.tau_s)
    feasible = [f for f in range(1, f_u + 1) if evaluate_fixed_fs(s, SP, CS, AM, f).feasible]
    plan = solve_low_complexity(s, SP, CS, AM)
    if not feasible:
        assert not plan.feasible
        return
    # feasibility is monotone in the rate, so the scan's last entry is the target
    assert feasible == list(range(feasible[0], feasible[-1] + 1))
    assert plan.f_s == feasible[-1]


def test_low_complexity_floor():
    plan = solve_low_complexity(_scenario(0, 1e9), SP, CS, AM)
    assert not plan.feasible and plan.accuracy == 0.125


# --- benchmarks ---------------------------------------------------------------------


def test_conventional_is_zero_threshold_search():
    s = _scenario(4, 90e9, n=5)
    conv = run_benchmark("conventional", s, SP, CS, AM, step=3)
    assert conv.to_dict() | {"scheme": ""} == \
        run_benchmark("fixed_threshold:0", s, SP, CS, AM, step=3).to_dict() | {"scheme": ""}
    f_u = fs_upper_bound(s, SP.tau_s)
    best = -1.0
    for f in range(3, f_u + 1, 3):
        p0 = solve_at_fs("conventional", s, SP, CS, AM, f)
        if p0.feasible:
            assert p0.eta == 0.0
            assert p0.accuracy == pytest.approx(overall_accuracy(CS, SP, AM, f, 0.0), rel=1e-12)
            best = max(best, p0.accuracy)
    assert conv.accuracy == pytest.approx(best, abs=1e-12)


def test_avg_compute_matches_proposed_with_ample_cpu():
    s = _scenario(0, 1e13)
    gap = solve_exhaustive(s, SP, CS, AM, step=5).accuracy - run_benchmark("avg_compute", s, SP,
                                                                           CS, AM, step=5).accuracy
    assert 0.0 <= gap <= 1e-3


def test_avg_comm_fixes_rate_and_airtime():
    s = _scenario(1, 200e9, n=3)
    plan = run_benchmark("avg_comm", s, SP, CS, AM)
    assert plan.feasible
    assert plan.f_s == math.floor(1 / (4 * SP.tau_s))
    assert plan.device_alloc.tau_c == pytest.approx((1 / 4,) * 3)
    for d, f in zip(s.devices, plan.device_alloc.f_n):
        assert task_delay(d.task, 0.25, f, d.rate) == pytest.approx(d.task.t_max, rel=1e-12)


def test_avg_compute_splits_cpu_evenly():
    s = _scenario(1, 200e9)
    plan = run_benchmark("avg_compute", s, SP, CS, AM)
    assert plan.device_alloc.f_n == pytest.approx((200e9 / 16,) * 15)
    assert plan.f_sense == pytest.approx(200e9 / 16)


def test_scheme_labels():
    assert parse_scheme("proposed") == ("proposed", None)
    assert parse_scheme("fixed_threshold:0.4") == ("fixed_threshold", 0.4)
    assert parse_scheme("fixed_threshold(0.4)") == ("fixed_threshold", 0.4)
    for bad in ("fixed_threshold", "fixed_threshold:1.5", "greedy", ""):
        with pytest.raises(ConfigError):
            parse_scheme(bad)
    with pytest.raises(ConfigError):
        run_benchmark("proposed", _scenario(0), SP, CS, AM)
    with pytest.raises(ConfigError):
        solve("magic", _scenario(0), SP, CS, AM)


def test_pinned_rate_schemes():
    s = _scenario(2, 120e9)
    for scheme in ("proposed", "low_complexity") + BENCHMARKS:
        plan = solve_at_fs(scheme, s, SP, CS, AM, 300)
        check_plan(plan, s)
        if plan.feasible:
            assert plan.f_s == 300


# --- sensing CPU needed for a target accuracy -------------------------------------------


def test_gating_never_needs_more_cpu():
    for p1 in (0.3, 0.5, 0.7):
        cs = default_class_set(p1)
        target = overall_accuracy(cs, SP, AM, 100.0, 0.0)
        gated = min_sensing_compute(cs, SP, AM, 100.0, target)
        plain = min_sensing_compute(cs, SP, AM, 100.0, target, gated=False)
        assert gated <= plain * (1 + 1e-9)
        # the ungated requirement is the delay budget at full pass-through
        assert plain == pytest.approx(avg_sensing_delay(cs, SP, 100.0, 0.0, 1.0) / SP.t_sense_max,
                                      rel=1e-8)


def test_unreachable_target():
    with pytest.raises(InfeasibleError):
        min_sensing_compute(CS, SP, AM, 100.0, 0.999)
