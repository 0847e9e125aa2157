import numpy as np
import pytest

from rcsphere.knots import JamesSteinPlus, JamesSteinPlusUnknown, baseline_b_star, default_knots_a
from rcsphere.known import RcsKnown, coverage, sev
from rcsphere.optimize import (Case, OptimizationProblem, SolverSettings, Status, _from_gaps, _to_gaps,
                               audit_coverage, build_baseline, optimize)


def test_gap_round_trip():
    v = np.array([0.1, 0.1, 0.4, 0.9, 1.2])
    assert np.allclose(_from_gaps(_to_gaps(v), v[-1]), v, atol=1e-15)


def test_baseline_known():
    base = build_baseline(Case.KNOWN_AB, 3)
    kn = default_knots_a(3)
    assert kn[1] == pytest.approx(np.sqrt(1 / 3))
    assert base.start.a(kn[1]) <= 1e-8
    assert base.start.b.values[0] == pytest.approx(baseline_b_star(3, 0.05)(0.0), abs=1e-3 + 1e-12)
    assert isinstance(base.reference, RcsKnown)


def test_baseline_unknown():
    b_only = build_baseline(Case.UNKNOWN_B_ONLY, 3, 3)
    assert isinstance(b_only.start.a, JamesSteinPlusUnknown)
    assert np.all(b_only.start.b.values == b_only.start.d)
    full = build_baseline(Case.UNKNOWN_AB, 3, 3)
    assert full.start.a.values[1] <= 1e-8
    with pytest.raises(ValueError):
        build_baseline(Case.UNKNOWN_AB, 3)


def test_problem_validation():
    with pytest.raises(ValueError):
        OptimizationProblem(Case.KNOWN_AB, 3, constraint_grid=(1.0, 2.0))
    with pytest.raises(ValueError):
        OptimizationProblem(Case.UNKNOWN_AB, 3)
    with pytest.raises(ValueError):
        OptimizationProblem(Case.KNOWN_AB, 3, audit_step=0.2)
    with pytest.raises(ValueError):
        SolverSettings(method="newton")


def test_audit_standard_sphere():
    rec = audit_coverage(RcsKnown.standard(3))
    assert rec.passed
    assert rec.min_coverage == pytest.approx(0.95, abs=1e-6)


def test_audit_flags_baseline_dip():
    rec = audit_coverage(RcsKnown.baseline(3))
    assert not rec.passed
    assert rec.min_coverage < 0.95 - 1e-4


def test_short_run_invariants():
    # the knot-sampled start dips just below the level, so a few iterations are needed to reach feasibility
    settings = SolverSettings(method="slsqp", max_iters=15, multistart_count=1, refine_rounds=0)
    report = optimize(OptimizationProblem(Case.KNOWN_AB, 3, solver=settings))
    assert report.status in (Status.CONVERGED, Status.NON_CONVERGED)
    hist = report.objective_history
    assert all(b < a for a, b in zip(hist, hist[1:]))
    inst = report.instance
    # constraints re-checked outside the solver
    grid = np.arange(66.0)
    assert coverage(grid, inst).min() >= 0.95 - 1e-6
    assert report.sev_at_zero == pytest.approx(sev(0.0, inst), abs=1e-8)
    assert report.sev_at_zero <= report.baseline_sev_at_zero + 1e-6
    js = JamesSteinPlus(3)
    xs = np.linspace(10, 40, 50)
    assert np.array_equal(inst.a(xs), js(xs))
    xs = np.linspace(0, 10, 10_000)
    assert inst.b(xs).max() <= inst.d + 1e-12
    assert np.all(np.diff(inst.a(xs)) >= -1e-12) and np.all(np.diff(inst.b(xs)) >= -1e-12)
