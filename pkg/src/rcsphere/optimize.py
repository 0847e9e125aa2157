"""Minimum-volume recentered spheres.

The free parameters are knot ordinates of the center and/or radius
functions.  Each function keeps its terminal ordinate fixed (continuity with
the tail) and the others are written through nonnegative gaps g_j as

    v_i = v_q - sum_{j >= i} g_j,   g_j >= 0 (simple bounds),

so every iterate is nondecreasing and never exceeds the terminal value.
The objective is the scaled expected volume at the origin; the constraints
are coverage >= 1 - alpha on a gamma grid plus positive first ordinates.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np
from scipy import optimize as sopt

from .known import QuadratureConfig, RcsKnown, SevRule, coverage, radius_constant, sev, tail_correction
from .knots import (ConstantD, JamesSteinPlus, JamesSteinPlusUnknown, KnotFunction, baseline_b_star,
                    default_knots_a, default_knots_a_tilde, default_knots_b, default_knots_b_tilde,
                    knot_function_from)
from .unknown import (OuterQuadConfig, PsiEvaluator, RcsUnknown, SevRule as SevRuleUnknown,
                      coverage_unknown, radius_constant_unknown)

log = logging.getLogger(__name__)

A_FLOOR = 1e-8
B_FLOOR = 1e-8
NUDGE = 1e-3


class Case(str, Enum):
    KNOWN_AB = "known-ab"
    UNKNOWN_B_ONLY = "unknown-b"
    UNKNOWN_AB = "unknown-ab"

    @property
    def unknown(self) -> bool:
        return self is not Case.KNOWN_AB


class Status(str, Enum):
    CONVERGED = "CONVERGED"
    NON_CONVERGED = "NON_CONVERGED"
    INFEASIBLE = "INFEASIBLE"


@dataclass(frozen=True)
class SolverSettings:
    """``method`` is ``"cobyla"`` (derivative-free linear approximations in a
    trust region) or ``"slsqp"`` (sequential quadratic programming with
    finite-difference gradients).  If the primary method ends infeasible the
    other one is tried from the best point found.

    ``refine_rounds`` re-solves with the audited local minima added to the
    constraint grid when the fine-grid audit fails.
    """

    method: str = "slsqp"
    max_iters: int = 300
    constraint_tol: float = 1e-6
    step_tol: float = 1e-8
    multistart_count: int = 3
    rho_begin: float = 0.1
    seed: int = 12345
    refine_rounds: int = 6
    fd_step: float = 1e-6

    def __post_init__(self):
        if self.method not in ("cobyla", "slsqp"):
            raise ValueError("method must be 'cobyla' or 'slsqp'")
        if min(self.constraint_tol, self.step_tol, self.rho_begin, self.fd_step) <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iters < 1 or self.multistart_count < 1:
            raise ValueError("max_iters and multistart_count must be positive")


DEFAULT_GRID = tuple(float(g) for g in range(66))


@dataclass(frozen=True)
class OptimizationProblem:
    case: Case
    p: int
    m: int | None = None
    alpha: float = 0.05
    k: float = 10.0
    constraint_grid: tuple[float, ...] = DEFAULT_GRID
    solver: SolverSettings = SolverSettings()
    quad: QuadratureConfig = QuadratureConfig()
    outer: OuterQuadConfig = OuterQuadConfig(fixed_segments=32)
    audit_outer: OuterQuadConfig = OuterQuadConfig(fixed_segments=64)
    audit_step: float = 0.05
    audit_max: float = 70.0

    def __post_init__(self):
        object.__setattr__(self, "case", Case(self.case))
        grid = tuple(float(g) for g in self.constraint_grid)
        if not grid or grid[0] != 0.0 or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("constraint grid must be sorted, increasing and start at 0")
        object.__setattr__(self, "constraint_grid", grid)
        if self.case.unknown and (self.m is None or self.m < 1):
            raise ValueError("unknown-variance cases need m >= 1")
        if self.audit_step > 0.1 or self.audit_max < 70:
            raise ValueError("audit grid must have step <= 0.1 and reach at least 70")

    @property
    def level(self) -> float:
        return 1.0 - self.alpha


@dataclass
class AuditRecord:
    gamma_step: float
    gamma_max: float
    min_coverage: float
    argmin: float
    passed: bool
    threshold: float

    def as_dict(self) -> dict:
        return {"gamma_step": self.gamma_step, "gamma_max": self.gamma_max,
                "min_coverage": self.min_coverage, "argmin": self.argmin,
                "passed": self.passed, "threshold": self.threshold}


@dataclass
class OptimizationReport:
    problem: OptimizationProblem
    status: Status
    instance: object
    sev_at_zero: float
    min_coverage_on_grid: float
    audit: AuditRecord
    iterations: int
    wall_time: float
    method: str
    objective_history: list[float] = field(default_factory=list)
    baseline_sev_at_zero: float | None = None


# ---------------------------------------------------------------------------
# parameterisation
# ---------------------------------------------------------------------------

def _to_gaps(values: np.ndarray) -> np.ndarray:
    return np.maximum(np.diff(values), 0.0)


def _from_gaps(g: np.ndarray, top: float) -> np.ndarray:
    # v_i = top - sum_{j >= i} g_j; negative gaps (possible mid-step) count as zero
    g = np.maximum(g, 0.0)
    tail_sums = np.cumsum(g[::-1])[::-1]
    return np.append(top - tail_sums, top)


@dataclass
class _Layout:
    """Which functions are free and how x splits between them."""

    a_template: object
    b_template: KnotFunction

    @property
    def a_free(self) -> bool:
        return isinstance(self.a_template, KnotFunction)

    @property
    def n_a(self) -> int:
        return self.a_template.knots.size - 1 if self.a_free else 0

    @property
    def size(self) -> int:
        return self.n_a + self.b_template.knots.size - 1

    def pack(self, a, b) -> np.ndarray:
        parts = [_to_gaps(a.values)] if self.a_free else []
        parts.append(_to_gaps(b.values))
        return np.concatenate(parts)

    def unpack(self, x: np.ndarray):
        x = np.asarray(x, dtype=float)
        if self.a_free:
            at = self.a_template
            a = KnotFunction(at.knots, _from_gaps(x[:self.n_a], float(at.values[-1])), at.tail)
        else:
            a = self.a_template
        bt = self.b_template
        b = KnotFunction(bt.knots, _from_gaps(x[self.n_a:], float(bt.values[-1])), bt.tail)
        return a, b

    def first_values(self, x: np.ndarray) -> list[float]:
        x = np.asarray(x, dtype=float)
        out = []
        if self.a_free:
            out.append(float(self.a_template.values[-1] - np.sum(np.maximum(x[:self.n_a], 0.0))))
        out.append(float(self.b_template.values[-1] - np.sum(np.maximum(x[self.n_a:], 0.0))))
        return out

    def bounds(self) -> list[tuple[float, float]]:
        tops = [float(self.a_template.values[-1])] * self.n_a if self.a_free else []
        tops += [float(self.b_template.values[-1])] * (self.b_template.knots.size - 1)
        return [(0.0, t) for t in tops]


# ---------------------------------------------------------------------------
# starting points
# ---------------------------------------------------------------------------

@dataclass
class Baseline:
    """Starting instance for a case, and the closed-form comparator where one exists."""

    start: object
    reference: object | None


def build_baseline(case: Case, p: int, m: int | None = None, alpha: float = 0.05, k: float = 10.0) -> Baseline:
    """Initial point of the optimizer.

    Known variance: knot samples of the positive-part shrinkage factor and of
    b* (radius nudged up by 1e-3, capped at d), with the exact pair as
    reference.  Unknown variance: radius constant at d~ on its knots; the
    center is the exact shrinkage factor, or its knot samples when free.
    """
    case = Case(case)
    if not case.unknown:
        d = radius_constant(p, alpha)
        tail_a = JamesSteinPlus(p)
        a = knot_function_from(tail_a, default_knots_a(p, k), tail_a, floor=A_FLOOR)
        bstar = baseline_b_star(p, alpha)
        kb = default_knots_b(p, alpha, k)
        vals = np.minimum(np.asarray(bstar(kb)) + NUDGE, d)
        vals[-1] = d
        b = KnotFunction(kb, np.maximum.accumulate(vals), ConstantD(d))
        return Baseline(RcsKnown(p, alpha, a, b, k), RcsKnown.baseline(p, alpha, k))
    if m is None:
        raise ValueError("unknown-variance cases need m")
    d = radius_constant_unknown(p, m, alpha)
    tail_a = JamesSteinPlusUnknown(p, m)
    kb = default_knots_b_tilde(k)
    b = KnotFunction(kb, np.full(kb.size, d), ConstantD(d))
    if case is Case.UNKNOWN_AB:
        a = knot_function_from(tail_a, default_knots_a_tilde(p, m, k), tail_a, floor=A_FLOOR)
    else:
        a = tail_a
    return Baseline(RcsUnknown(p, m, alpha, a, b, k), None)


# ---------------------------------------------------------------------------
# evaluation with caching
# ---------------------------------------------------------------------------

class _Model:
    """Objective and constraint values for one problem, cached on the last x."""

    def __init__(self, problem: OptimizationProblem, start):
        self.problem = problem
        self.layout = _Layout(start.a, start.b)
        self.start = start
        self.grid = np.asarray(problem.constraint_grid)
        self.evaluations = 0
        self._last_x = None
        self._last = None
        self.best_x = None
        self.best_f = math.inf
        self.history: list[float] = []
        if problem.case.unknown:
            self._sev = SevRuleUnknown(start.p, start.m, start.b.knots, start.d)
            self._psi = PsiEvaluator(start, self.grid, problem.quad)
        else:
            self._sev = SevRule(start.p, start.b.knots, start.d)
            self._tail = tail_correction(self.grid, start, problem.quad)

    def instance(self, x):
        a, b = self.layout.unpack(x)
        s = self.start
        if self.problem.case.unknown:
            return RcsUnknown(s.p, s.m, s.alpha, a, b, s.k, s.d)
        return RcsKnown(s.p, s.alpha, a, b, s.k, s.d)

    def _eval(self, x):
        x = np.asarray(x, dtype=float)
        if self._last_x is not None and np.array_equal(x, self._last_x):
            return self._last
        inst = self.instance(x)
        if self.problem.case.unknown:
            self._psi.rebind(inst)
            cov = coverage_unknown(self.grid, inst, self.problem.quad, self.problem.outer, evaluator=self._psi)
        else:
            cov = coverage(self.grid, inst, self.problem.quad, tail=self._tail)
        f = self._sev(inst.b)
        cons = np.concatenate([cov - self.problem.level,
                               np.asarray(self.layout.first_values(x)) - np.array(self._floors())])
        self.evaluations += 1
        self._last_x, self._last = x.copy(), (f, cons)
        if cons.min() >= -self.problem.solver.constraint_tol and f < self.best_f:
            self.best_f, self.best_x = f, x.copy()
        if math.isfinite(self.best_f):
            self.history.append(self.best_f)
        return f, cons

    def _floors(self):
        return ([A_FLOOR] if self.layout.a_free else []) + [B_FLOOR]

    def objective(self, x) -> float:
        return self._eval(x)[0]

    def constraints(self, x) -> np.ndarray:
        return self._eval(x)[1]

    def add_gammas(self, gammas):
        grid = np.unique(np.concatenate([self.grid, np.asarray(gammas, dtype=float)]))
        self.grid = grid
        self._last_x = None
        if self.problem.case.unknown:
            self._psi = PsiEvaluator(self.start, grid, self.problem.quad)
        else:
            self._tail = tail_correction(grid, self.start, self.problem.quad)
        # the best point must be re-qualified against the enlarged grid
        if self.best_x is not None:
            x, self.best_x, self.best_f = self.best_x, None, math.inf
            self._eval(x)


def _run_method(model: _Model, x0: np.ndarray, settings: SolverSettings, method: str) -> sopt.OptimizeResult:
    cons = [{"type": "ineq", "fun": model.constraints}]
    bounds = model.layout.bounds()
    if method == "cobyla":
        return sopt.minimize(model.objective, x0, method="COBYLA", constraints=cons, bounds=bounds,
                             options={"maxiter": settings.max_iters, "rhobeg": settings.rho_begin,
                                      "tol": settings.step_tol, "catol": settings.constraint_tol})
    return sopt.minimize(model.objective, x0, method="SLSQP", constraints=cons, bounds=bounds,
                         jac="2-point",
                         options={"maxiter": settings.max_iters, "ftol": settings.step_tol,
                                  "eps": settings.fd_step})


def _audit_curve(instance, gamma_step, gamma_max, quad, outer):
    n = int(round(gamma_max / gamma_step))
    grid = np.arange(n + 1) * gamma_step
    if isinstance(instance, RcsUnknown):
        return grid, coverage_unknown(grid, instance, quad, outer)
    return grid, coverage(grid, instance, quad)


def audit_coverage(instance, gamma_step: float = 0.05, gamma_max: float = 70.0,
                   quad: QuadratureConfig = QuadratureConfig(),
                   outer: OuterQuadConfig = OuterQuadConfig(fixed_segments=64)) -> AuditRecord:
    """Coverage on {0, step, ..., gamma_max}; passes iff the minimum is >= 1 - alpha - 1e-4."""
    grid, cov = _audit_curve(instance, gamma_step, gamma_max, quad, outer)
    return _record(instance, gamma_step, gamma_max, grid, cov)


def _record(instance, gamma_step, gamma_max, grid, cov) -> AuditRecord:
    i = int(np.argmin(cov))
    threshold = 1.0 - instance.alpha - 1e-4
    return AuditRecord(gamma_step, gamma_max, float(cov[i]), float(grid[i]), bool(cov[i] >= threshold), threshold)


def _violations(grid, cov, level, limit=8):
    """Local minima of an audit curve that fall below ``level``, worst first."""
    inner = (cov[1:-1] <= cov[:-2]) & (cov[1:-1] <= cov[2:])
    idx = np.flatnonzero(np.concatenate([[cov[0] <= cov[1]], inner, [cov[-1] <= cov[-2]]]))
    idx = idx[cov[idx] < level]
    return grid[idx[np.argsort(cov[idx])][:limit]]


def _starts(x0: np.ndarray, count: int, seed: int) -> list[np.ndarray]:
    rng = np.random.default_rng(seed)
    out = [x0]
    for _ in range(count - 1):
        out.append(np.abs(x0 * (1.0 + 0.2 * rng.standard_normal(x0.size)) + 0.02 * rng.standard_normal(x0.size)))
    return out


def optimize(problem: OptimizationProblem, progress: Callable[[str], None] | None = None) -> OptimizationReport:
    """Minimise the volume at the origin subject to the coverage constraints, then audit."""
    t0 = time.perf_counter()
    say = progress or log.info
    settings = problem.solver
    base = build_baseline(problem.case, problem.p, problem.m, problem.alpha, problem.k)
    model = _Model(problem, base.start)
    x0 = model.layout.pack(base.start.a, base.start.b)
    iterations = 0
    hit_cap = False
    primary = settings.method
    fallback = "slsqp" if primary == "cobyla" else "cobyla"
    audit = None
    inst = None
    x_start = x0
    for round_ in range(settings.refine_rounds + 1):
        starts = _starts(x_start, settings.multistart_count if round_ == 0 else 1, settings.seed + round_)
        hit_cap = False
        for i, xs in enumerate(starts):
            res = _run_method(model, xs, settings, primary)
            iterations += int(res.get("nit", 0) or res.get("nfev", 0))
            hit_cap |= res.status == 2 if primary == "cobyla" else res.status == 9
            say(f"round {round_} start {i}: {primary} f={res.fun:.6f} best={model.best_f:.6f}")
        if model.best_x is None:
            res = _run_method(model, np.asarray(res.x), settings, fallback)
            iterations += int(res.get("nit", 0) or 0)
            say(f"fallback {fallback}: f={res.fun:.6f} best={model.best_f:.6f}")
        if model.best_x is None:
            break
        inst = model.instance(model.best_x)
        grid, cov = _audit_curve(inst, problem.audit_step, problem.audit_max, problem.quad, problem.audit_outer)
        audit = _record(inst, problem.audit_step, problem.audit_max, grid, cov)
        say(f"audit: min coverage {audit.min_coverage:.6f} at gamma={audit.argmin:g}")
        if audit.passed or round_ == settings.refine_rounds:
            break
        # the grid missed a dip: constrain the audited local minima and re-solve from here
        x_start = model.best_x
        model.add_gammas(_violations(grid, cov, problem.level))

    baseline_sev = sev(0.0, base.reference) if base.reference is not None else model._sev(base.start.b)
    if model.best_x is None:
        inst = model.instance(x0)
        audit = audit_coverage(inst, problem.audit_step, problem.audit_max, problem.quad, problem.audit_outer)
        status = Status.INFEASIBLE
    else:
        status = Status.NON_CONVERGED if hit_cap else Status.CONVERGED
    f, cons = model._eval(model.best_x if model.best_x is not None else x0)
    ng = model.grid.size
    return OptimizationReport(
        problem=problem, status=status, instance=inst, sev_at_zero=float(f),
        min_coverage_on_grid=float(cons[:ng].min() + problem.level), audit=audit,
        iterations=iterations, wall_time=time.perf_counter() - t0, method=primary,
        objective_history=_monotone(model.history), baseline_sev_at_zero=float(baseline_sev))


def _monotone(history: list[float]) -> list[float]:
    out = []
    for v in history:
        if not out or v < out[-1]:
            out.append(v)
    return out
