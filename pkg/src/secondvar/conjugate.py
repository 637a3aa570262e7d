"""Conjugate-point location and the positive-definiteness verdict.

The unconstrained tests look for the first zero of u past the left
endpoint; the isoperimetric tests look for the first zero of
Delta = m v - n u.  Delta always has a structural zero of third (or, with
u(a) = 0, fourth) order at x = a, so the scan starts past a small window
sized from the leading Taylor coefficient rather than a fixed epsilon.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import accessory
from .accessory import AccessoryTrajectory, InitialConditions
from .errors import SecondVarError
from .problem import (
    BoundaryKind,
    CoefficientField,
    Extremal,
    PreconditionReport,
    VariationalProblem,
    boundary_residuals,
    check_preconditions_field,
    field_from_problem,
    BOUNDARY_RESIDUAL_TOL,
)

ZERO_FLOOR_FACTOR = 1e-9       # touching-zero floor, relative to max |f|
BISECTION_WIDTH_FACTOR = 1e-10  # refine to |interval| < factor * (b - a)
AT_B_TOL_FACTOR = 1e-6          # zero within this fraction of (b-a) of b counts as "at b"


class Classification(enum.Enum):
    POSITIVE_DEFINITE = "PositiveDefinite"
    INDEFINITE = "Indefinite"
    DEGENERATE_AT_B = "DegenerateAtB"
    PRECONDITION_FAILED = "PreconditionFailed"


@dataclass(frozen=True)
class ConjugateResult:
    found: bool
    location: float | None
    test_function: str  # 'u' or 'delta'
    near_a_window: float
    triple_derivative_at_a: float | None = None


@dataclass(frozen=True)
class Verdict:
    classification: Classification
    preconditions: PreconditionReport | None
    conjugate: ConjugateResult | None
    notes: tuple[str, ...] = ()


@dataclass(frozen=True)
class VerdictOptions:
    n_samples: int = 1000          # dense-output rows across [a, b]
    n_precondition_grid: int = 256
    u0: float | None = None        # override for the mixed normalization u(a)
    v0: float = 0.0
    tol_scale: float = 1.0


def _bisect(f: Callable[[float], float], lo: float, hi: float, width: float) -> float:
    flo = f(lo)
    if flo == 0.0:
        return lo
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (flo < 0.0) != (fm < 0.0):
            hi = mid
        else:
            lo, flo = mid, fm
    return 0.5 * (lo + hi)


def first_zero(
    xs: Sequence[float],
    fs: Sequence[float],
    exclude_below: float,
    refine: Callable[[float], float] | None = None,
) -> float | None:
    """First zero of a densely sampled function at x > exclude_below.

    Scans for a sign change or for samples under the touching-zero floor
    (1e-9 of the max magnitude), then refines sign changes by bisection on
    ``refine`` (default: linear interpolation of the samples) until the
    bracket is below 1e-10*(b-a).  Returns None when no zero exists.
    """
    xs = np.asarray(xs, dtype=float)
    fs = np.asarray(fs, dtype=float)
    span = xs[-1] - xs[0]
    width = BISECTION_WIDTH_FACTOR * span
    floor = ZERO_FLOOR_FACTOR * float(np.max(np.abs(fs)))
    if refine is None:
        refine = lambda x: float(np.interp(x, xs, fs))

    start = int(np.searchsorted(xs, exclude_below, side="right"))
    if start >= len(xs):
        return None

    # A sign change may straddle the exclusion boundary itself.
    if start > 0:
        f_edge = refine(exclude_below)
        f_next = fs[start]
        if f_edge != 0.0 and f_next != 0.0 and (f_edge < 0.0) != (f_next < 0.0):
            return _bisect(refine, exclude_below, float(xs[start]), width)

    for i in range(start, len(xs)):
        if abs(fs[i]) <= floor:
            return float(xs[i])
        if i + 1 < len(xs) and abs(fs[i + 1]) > floor:
            if (fs[i] < 0.0) != (fs[i + 1] < 0.0):
                return _bisect(refine, float(xs[i]), float(xs[i + 1]), width)
    return None


def delta_triple_derivative_field(field: CoefficientField, ics: InitialConditions) -> float:
    """Third derivative of Delta at the left endpoint: -2 u(a) T(a)^2 / P(a)."""
    c = field.at(field.a)
    if c.P <= 0.0:
        raise SecondVarError("triple derivative of Delta requires P(a) > 0")
    return -2.0 * ics.u0 * c.T * c.T / c.P


def delta_triple_derivative(
    problem: VariationalProblem, extremal: Extremal, ics: InitialConditions
) -> float:
    if not problem.is_isoperimetric:
        raise ValueError("Delta derivative applies to isoperimetric problems only")
    return delta_triple_derivative_field(field_from_problem(problem, extremal), ics)


def _near_a_window(
    field: CoefficientField,
    ics: InitialConditions,
    grid_step: float,
    delta_max: float,
) -> tuple[float, float, list[str]]:
    """Exclusion half-width for the Delta scan, from the leading Taylor term.

    Returns (window, triple_derivative, notes).  The window is where the
    model first clears both 10x the integrator's absolute tolerance and the
    touching-zero floor, so the structural zero at a is skipped without
    masking genuine early conjugate points.
    """
    notes: list[str] = []
    c = field.at(field.a)
    d3 = -2.0 * ics.u0 * c.T * c.T / c.P
    thresh = max(10.0 * accessory.ATOL, ZERO_FLOOR_FACTOR * delta_max)
    if d3 != 0.0:
        w_model = (6.0 * thresh / abs(d3)) ** (1.0 / 3.0)
    elif ics.zu0 != 0.0:
        # u(a) = 0 makes the cubic term vanish; the leading term is quartic
        # with coefficient -2 u'(a) T(a)^2 / P(a) / 24.
        d4 = -2.0 * (ics.zu0 / c.P) * c.T * c.T / c.P
        if d4 == 0.0:
            notes.append("near-a analysis inconclusive: leading Delta derivatives vanish")
            return max(2.0 * grid_step, 0.0), d3, notes
        w_model = (24.0 * thresh / abs(d4)) ** 0.25
        notes.append("u(a) = 0: Delta exclusion window sized from the quartic term")
    else:
        notes.append("near-a analysis inconclusive: u(a) = 0 with zero initial slope")
        return 2.0 * grid_step, d3, notes
    return max(2.0 * grid_step, w_model), d3, notes


def verdict_from_field(
    field: CoefficientField,
    regime_kind: BoundaryKind,
    options: VerdictOptions = VerdictOptions(),
    extra_notes: Sequence[str] = (),
) -> Verdict:
    """Classify delta2J definiteness from a coefficient field.

    MIXED_RIGHT_FREE callers must reflect the field first; this routine
    handles DIRICHLET and MIXED_LEFT_FREE directly.
    """
    notes = list(extra_notes)
    if regime_kind == BoundaryKind.MIXED_RIGHT_FREE:
        raise ValueError("reflect the field before calling verdict_from_field")

    report = check_preconditions_field(
        field, regime_kind, n_grid=options.n_precondition_grid, tol_scale=options.tol_scale
    )
    if not report.passed:
        if not report.legendre_ok:
            notes.append(f"strengthened Legendre condition failed: min P = {report.min_P:.3g}")
        if not report.r_at_a_ok:
            notes.append(f"R(a) = {report.r_at_a:.3g} is not 0: boundary term survives at a")
        if not report.gyp_at_a_ok:
            notes.append(f"dG/dyp(a) = {report.gyp_at_a:.3g} is not 0")
        if not report.t_nonzero_ok:
            if report.max_abs_T is not None and report.max_abs_T > TOLERABLE_T_SUP:
                notes.append(
                    "T vanishes somewhere but not identically "
                    f"(min |T| = {report.min_abs_T:.3g}, max |T| = {report.max_abs_T:.3g}); "
                    "only the pointwise T != 0 form is implemented"
                )
            else:
                notes.append("constraint density T is (numerically) identically zero")
        return Verdict(Classification.PRECONDITION_FAILED, report, None, tuple(notes))

    if regime_kind == BoundaryKind.DIRICHLET:
        ics = InitialConditions.dirichlet(p_at_a=field.at(field.a).P)
        if options.u0 is not None:
            notes.append("u(a) override ignored for the Dirichlet regime (u(a) = 0 is structural)")
    else:
        ics = InitialConditions.mixed(u0=options.u0 if options.u0 is not None else 1.0)
    if field.isoperimetric and (options.v0 != 0.0):
        ics = InitialConditions(ics.u0, ics.zu0, v0=options.v0, zv0=0.0)

    try:
        traj = accessory.integrate_field(field, ics, n_out=options.n_samples)
    except SecondVarError as exc:
        notes.append(f"integration failed: {exc}")
        return Verdict(Classification.PRECONDITION_FAILED, report, None, tuple(notes))

    a, b = traj.a, traj.b
    grid_step = (b - a) / len(traj.xs)
    if field.isoperimetric:
        xs, deltas = accessory.delta_series(traj)
        window, d3, wnotes = _near_a_window(
            field, ics, grid_step, float(np.max(np.abs(deltas)))
        )
        notes.extend(wnotes)
        location = first_zero(xs, deltas, exclude_below=a + window, refine=traj.delta_at)
        conjugate = ConjugateResult(
            found=location is not None,
            location=location,
            test_function="delta",
            near_a_window=window,
            triple_derivative_at_a=d3,
        )
    else:
        location = first_zero(traj.xs, traj.us, exclude_below=a, refine=traj.u_at)
        conjugate = ConjugateResult(
            found=location is not None,
            location=location,
            test_function="u",
            near_a_window=0.0,
        )

    if location is None:
        classification = Classification.POSITIVE_DEFINITE
    elif abs(location - b) <= AT_B_TOL_FACTOR * (b - a) * options.tol_scale:
        classification = Classification.DEGENERATE_AT_B
        notes.append("first zero of the test function coincides with b: marginal case")
    else:
        classification = Classification.INDEFINITE
    return Verdict(classification, report, conjugate, tuple(notes))


# A constraint density whose largest sampled magnitude is below this is
# treated as identically zero when wording the failure note.
TOLERABLE_T_SUP = 1e-12


def verdict(
    problem: VariationalProblem,
    extremal: Extremal,
    options: VerdictOptions = VerdictOptions(),
) -> Verdict:
    """Full pipeline from an expression-level problem to a classification."""
    notes: list[str] = []
    try:
        residuals = boundary_residuals(problem, extremal)
        for name, r in residuals.items():
            if abs(r) > BOUNDARY_RESIDUAL_TOL * options.tol_scale:
                notes.append(f"boundary residual {name} = {r:.3g} exceeds tolerance")
        field = field_from_problem(problem, extremal)
        kind = problem.regime.kind
        if kind == BoundaryKind.MIXED_RIGHT_FREE:
            field = field.reflected()
            kind = BoundaryKind.MIXED_LEFT_FREE
            notes.append("right-free regime analyzed on the reflected interval x -> a+b-x")

        # Stationarity diagnostic at a few interior points.
        a, b = problem.a, problem.b
        worst = max(
            curvature_gap
            for curvature_gap in (
                _safe_curvature_gap(problem, extremal, a + t * (b - a))
                for t in (0.25, 0.5, 0.75)
            )
        )
        if worst > 1e-4:
            notes.append(
                f"supplied curve may not be stationary: y'' discrepancy {worst:.3g} (relative)"
            )

        result = verdict_from_field(field, kind, options, extra_notes=notes)
    except SecondVarError as exc:
        return Verdict(
            Classification.PRECONDITION_FAILED,
            None,
            None,
            tuple(notes + [f"analysis could not proceed: {exc}"]),
        )

    if (
        problem.regime.kind == BoundaryKind.MIXED_RIGHT_FREE
        and result.conjugate is not None
        and result.conjugate.location is not None
    ):
        mapped = problem.a + problem.b - result.conjugate.location
        result = Verdict(
            result.classification,
            result.preconditions,
            ConjugateResult(
                found=True,
                location=mapped,
                test_function=result.conjugate.test_function,
                near_a_window=result.conjugate.near_a_window,
                triple_derivative_at_a=result.conjugate.triple_derivative_at_a,
            ),
            result.notes,
        )
    return result


def _safe_curvature_gap(problem: VariationalProblem, extremal: Extremal, x: float) -> float:
    from .problem import curvature_discrepancy

    try:
        return curvature_discrepancy(problem, extremal, x)
    except SecondVarError:
        return math.inf
