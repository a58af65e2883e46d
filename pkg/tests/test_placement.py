import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from slicer.placement import (
    EXHAUSTIVE_MAX_SITES, INFEASIBLE, OPTIMAL, PlacementProblem, PlacementSolution, build_problem, check_solution,
    default_models, solution_metrics, solve_exact, solve_exhaustive, to_lp,
)
from slicer.radio import RadioConfig, capacity, snr
from slicer.scenario import CandidateSite, Subarea, generate_random_scenario

from conftest import default_scenario, random_problem


def _problem(cap, demands, costs=None, budgets=None):
    cap = np.asarray(cap, dtype=float)
    n_sites, n_sub = cap.shape
    return PlacementProblem(
        site_ids=tuple(range(n_sites)), subarea_ids=tuple(range(n_sub)),
        activation_cost=costs if costs is not None else [1000.0] * n_sites,
        channel_budget=budgets if budgets is not None else [8] * n_sites,
        demands=demands, link_capacity=cap,
    )


def test_one_subarea_one_site():
    p = _problem([[50e6]], [20e6])
    s = solve_exact(p)
    assert s.status == OPTIMAL and s.active_sites() == [0] and s.objective == 1000.0
    assert s.channel_equiv[0, 0] == pytest.approx(0.4)


def test_either_site_serves_both():
    p = _problem([[50e6, 50e6], [60e6, 60e6]], [20e6, 20e6])
    s = solve_exact(p)
    assert len(s.active_sites()) == 1
    assert s.objective == solve_exhaustive(p).objective == 1000.0


def test_budget_forces_two_sites():
    # each subarea needs 0.8 channels anywhere, one channel per site
    p = _problem([[25e6, 25e6], [25e6, 25e6]], [20e6, 20e6], budgets=[1, 1])
    s = solve_exact(p)
    assert s.active_sites() == [0, 1]
    assert s.objective == solve_exhaustive(p).objective == 2000.0


def test_cheaper_pair_beats_expensive_single():
    p = _problem([[40e6, 40e6], [0, 40e6], [40e6, 0]], [20e6, 20e6], costs=[3000.0, 1000.0, 1000.0])
    assert solve_exact(p).active_sites() == [1, 2]


def test_zero_subareas():
    p = _problem(np.zeros((3, 0)), [])
    for s in (solve_exact(p), solve_exhaustive(p)):
        assert s.status == OPTIMAL and s.objective == 0.0 and s.active_sites() == []


def test_coverage_infeasible_witness():
    p = _problem([[50e6, 0.0], [50e6, 0.0]], [20e6, 20e6])
    for s in (solve_exact(p), solve_exhaustive(p)):
        assert s.status == INFEASIBLE and not s.feasible
        assert s.witness_kind == "coverage" and 1 in s.witness


def test_capacity_infeasible_witness():
    p = _problem([[25e6, 25e6, 25e6]], [20e6, 20e6, 20e6], budgets=[2])
    for s in (solve_exact(p), solve_exhaustive(p)):
        assert s.status == INFEASIBLE
        assert s.witness_kind == "capacity"


def test_exhaustive_size_guard():
    p = _problem(np.full((EXHAUSTIVE_MAX_SITES + 1, 1), 50e6), [1e6])
    with pytest.raises(ValueError):
        solve_exhaustive(p)


@pytest.mark.parametrize("seed", range(250))
def test_exact_equals_exhaustive(seed):
    p = random_problem(seed)
    exact, ref = solve_exact(p), solve_exhaustive(p)
    assert exact.status == ref.status
    if ref.feasible:
        assert exact.objective == ref.objective
        # both apply the lexicographic tie-break
        assert exact.active_sites() == ref.active_sites()
        assert check_solution(exact, p) == []
        assert check_solution(ref, p) == []
        assert exact.stats["unresolved_sets"] == 0


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.01, 100.0))
def test_cost_scaling_keeps_active_set(seed, k):
    p = random_problem(seed, max_sites=8, max_subareas=8)
    q = dataclasses.replace(p, activation_cost=p.activation_cost * k)
    a, b = solve_exact(p), solve_exact(q)
    assert a.status == b.status
    assert a.active_sites() == b.active_sites()


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.integers(0, 8))
def test_dead_site_never_changes_objective(seed, pos):
    p = random_problem(seed, max_sites=8, max_subareas=8)
    pos = min(pos, p.n_sites)
    cap = np.insert(p.link_capacity, pos, 0.0, axis=0)
    q = PlacementProblem(
        site_ids=tuple(range(p.n_sites + 1)), subarea_ids=p.subarea_ids,
        activation_cost=np.insert(p.activation_cost, pos, 1.0), channel_budget=np.insert(p.channel_budget, pos, 8),
        demands=p.demands, link_capacity=cap,
    )
    a, b = solve_exact(p), solve_exact(q)
    assert a.status == b.status
    if a.feasible:
        assert a.objective == b.objective


def test_check_solution_catches_violations():
    p = _problem([[25e6, 25e6], [25e6, 25e6]], [20e6, 20e6], budgets=[1, 1])
    s = solve_exact(p)
    r = s.channel_equiv.copy()
    r[r > 0] *= 0.9
    msgs = check_solution(dataclasses.replace(s, channel_equiv=r), p)
    assert any("rate below demand" in m for m in msgs)
    r = s.channel_equiv.copy()
    r[0, 1], r[1, 1] = r[1, 1], 0.0
    msgs = check_solution(dataclasses.replace(s, channel_equiv=r), p)
    assert any("budget exceeded" in m for m in msgs)
    assert any("indicator" in m for m in msgs)
    assert check_solution(s, p, integral=True) == ["non-integer channel allocation"]


def test_build_problem_site_directly_above():
    base = generate_random_scenario(rng_seed=0)
    sub = Subarea(0, (25.0, 25.0, 0.0), 10.0, "embb")
    site = CandidateSite(0, (25.0, 25.0, 10.0))
    sc = dataclasses.replace(base, subareas=(sub,), sites=(site,))
    models = default_models(sc)
    p = build_problem(sc, models)
    expected = capacity(models[1e-5], snr(sc.radio, 10.0))
    assert p.link_capacity[0, 0] == expected
    assert p.coverage_infeasible == ()


def test_build_problem_reports_uncovered():
    base = generate_random_scenario(rng_seed=0)
    weak = RadioConfig(tx_power=-40.0)
    sc = dataclasses.replace(base, radio=weak, sites=base.sites[:1])
    p = build_problem(sc)
    assert len(p.coverage_infeasible) > 0
    s = solve_exact(p)
    assert s.status == INFEASIBLE and s.witness_kind == "coverage"


def test_build_problem_empty_scenario():
    sc = dataclasses.replace(generate_random_scenario(rng_seed=0), subareas=())
    s = solve_exact(build_problem(sc))
    assert s.feasible and s.objective == 0.0


@pytest.mark.parametrize("seed", range(5))
def test_five_subarea_default_uses_one_uav(seed):
    p = build_problem(default_scenario(5, seed))
    s = solve_exact(p)
    m = solution_metrics(s, p)
    assert m["n_uavs"] == 1
    assert m["objective"] == 1000.0 * m["n_uavs"]
    assert m["total_channel_equiv"] == pytest.approx(s.channel_equiv.sum())


def test_default_scenarios_pass_checker():
    for n in (20, 45):
        p = build_problem(default_scenario(n, 0))
        s = solve_exact(p)
        assert check_solution(s, p) == []


def test_solution_and_problem_roundtrip():
    p = random_problem(7)
    s = solve_exact(p)
    q = PlacementProblem.from_dict(p.to_dict())
    np.testing.assert_array_equal(q.link_capacity, p.link_capacity)
    t = PlacementSolution.from_dict(s.to_dict(p))
    assert t.status == s.status and t.objective == s.objective
    np.testing.assert_array_equal(t.channel_equiv, s.channel_equiv)
    np.testing.assert_array_equal(t.active, s.active)


def test_lp_export_structure():
    p = _problem([[40e6, 0.0], [40e6, 40e6]], [20e6, 20e6], budgets=[8, 4])
    text = to_lp(p)
    assert text.startswith("\\") and text.rstrip().endswith("End")
    for section in ("Minimize", "Subject To", "Bounds", "Binary"):
        assert section in text
    assert " budget_1: + r_1_0 + r_1_1 - 4 z_1 <= 0" in text
    assert " rate_0: + 40 r_0_0 + 40 r_1_0 >= 20" in text
    assert "r_0_1" not in text  # dead link has no variable
    assert text.count("one_server_") == 2


def _parse_lp(text):
    """Minimal reader for the exported LP subset: linear rows, >= 0 bounds, binaries."""
    import re
    section, obj, rows, binaries = None, {}, [], set()
    term = re.compile(r"([+-])\s*([0-9.eE+-]+)?\s*([A-Za-z_][A-Za-z0-9_]*)")

    def coeffs(expr):
        expr = expr.strip()
        if expr[0] not in "+-":
            expr = "+ " + expr
        out = {}
        for sign, num, var in term.findall(expr):
            v = float(num) if num else 1.0
            out[var] = out.get(var, 0.0) + (v if sign == "+" else -v)
        return out

    pending = ""
    for line in text.splitlines():
        stripped = line.strip()
        if stripped in ("Minimize", "Subject To", "Bounds", "Binary", "End"):
            section = stripped
            continue
        if not stripped or stripped.startswith("\\"):
            continue
        if section == "Minimize":
            obj.update(coeffs(stripped.split(":", 1)[1]))
        elif section == "Subject To":
            pending += " " + stripped
            body = pending.split(":", 1)[1]
            m = re.search(r"(<=|>=|=)\s*([-0-9.eE+]+)$", body)
            if m:
                rows.append((coeffs(body[: m.start()]), m.group(1), float(m.group(2))))
                pending = ""
        elif section == "Binary":
            binaries.update(stripped.split())
    return obj, rows, binaries


@pytest.mark.parametrize("seed", range(15))
def test_lp_export_solves_to_same_objective(seed):
    from scipy.optimize import Bounds, LinearConstraint, milp

    p = random_problem(seed, max_sites=6, max_subareas=6)
    obj, rows, binaries = _parse_lp(to_lp(p))
    names = sorted({v for r, _, _ in rows for v in r} | set(obj))
    idx = {v: i for i, v in enumerate(names)}
    A = np.zeros((len(rows), len(names)))
    lo, hi = np.full(len(rows), -np.inf), np.full(len(rows), np.inf)
    for k, (r, op, rhs) in enumerate(rows):
        for v, c in r.items():
            A[k, idx[v]] = c
        if op in ("<=", "="):
            hi[k] = rhs
        if op in (">=", "="):
            lo[k] = rhs
    c = np.array([obj.get(v, 0.0) for v in names])
    integrality = np.array([1 if v in binaries else 0 for v in names])
    ub = np.array([1.0 if v in binaries else np.inf for v in names])
    res = milp(c, constraints=LinearConstraint(A, lo, hi), integrality=integrality, bounds=Bounds(0, ub))
    ref = solve_exact(p)
    if ref.feasible:
        assert res.status == 0
        assert res.fun == pytest.approx(ref.objective, rel=1e-9)
    else:
        assert res.status == 2
