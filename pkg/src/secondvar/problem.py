"""Variational problem setup: coefficient fields along an extremal and
the structural preconditions of the definiteness tests.

The quadratic form under test is delta2J[h] = R h^2 |_a^b + int (P h'^2 + Q h^2) dx
with P = d2H/dyp2, R = d2H/dy dyp, Q = d2H/dy2 - dR/dx evaluated along the
candidate curve, where H is the integrand (plus lambda times the constraint
integrand in the isoperimetric case).  The constraint contributes
T = dG/dy - d/dx dG/dyp and the boundary value of dG/dyp.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import expression
from .errors import SingularCoefficientError
from .expression import BinOp, Expr, Num, evaluate, partial

# Precondition tolerances: separate structural zeros from finite-difference
# noise (~1e-6) while rejecting genuine violations.
TOL_P = 1e-10
TOL_R = 1e-8
TOL_T = 1e-10

BOUNDARY_RESIDUAL_TOL = 1e-6


class BoundaryKind(enum.Enum):
    DIRICHLET = "dirichlet"
    MIXED_LEFT_FREE = "mixed-left-free"
    MIXED_RIGHT_FREE = "mixed-right-free"


@dataclass(frozen=True)
class BoundaryRegime:
    """Which endpoint values are pinned.

    Dirichlet pins y(a)=A and y(b)=B.  MIXED_LEFT_FREE leaves the left end
    free with y'(a)=0 and pins y(b)=B; MIXED_RIGHT_FREE is the mirror image
    and is analyzed by reflecting the interval.
    """

    kind: BoundaryKind
    A: float | None = None
    B: float | None = None

    @staticmethod
    def dirichlet(A: float, B: float) -> "BoundaryRegime":
        return BoundaryRegime(BoundaryKind.DIRICHLET, A=A, B=B)

    @staticmethod
    def mixed_left_free(B: float) -> "BoundaryRegime":
        return BoundaryRegime(BoundaryKind.MIXED_LEFT_FREE, B=B)

    @staticmethod
    def mixed_right_free(A: float) -> "BoundaryRegime":
        return BoundaryRegime(BoundaryKind.MIXED_RIGHT_FREE, A=A)


@dataclass(frozen=True)
class IsoperimetricBlock:
    """Integral constraint int G dx = ell with multiplier lam."""

    G: Expr
    ell: float
    lam: float


@dataclass(frozen=True)
class VariationalProblem:
    F: Expr
    a: float
    b: float
    regime: BoundaryRegime
    isoperimetric: IsoperimetricBlock | None = None

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError(f"interval endpoints must satisfy a < b, got [{self.a}, {self.b}]")

    @property
    def is_isoperimetric(self) -> bool:
        return self.isoperimetric is not None

    @property
    def effective_integrand(self) -> Expr:
        """F for unconstrained problems, F + lam*G for isoperimetric ones."""
        if self.isoperimetric is None:
            return self.F
        return BinOp("+", self.F, BinOp("*", Num(self.isoperimetric.lam), self.isoperimetric.G))


@dataclass(frozen=True)
class Extremal:
    """Candidate curve y(x); an expression in x only."""

    y: Expr

    def __post_init__(self):
        extra = expression.free_variables(self.y) - {"x"}
        if extra:
            raise ValueError(f"extremal must depend on x only, found {sorted(extra)}")

    def value(self, x: float) -> float:
        return evaluate(self.y, x)

    def slope(self, x: float) -> float:
        return partial(self.y, ["x"], x)

    def curvature(self, x: float) -> float:
        return partial(self.y, ["x", "x"], x)


@dataclass(frozen=True)
class Coefficients:
    """Pointwise coefficient values along the extremal.

    T and Gyp are zero by convention for unconstrained problems.
    """

    P: float
    Q: float
    R: float
    T: float = 0.0
    Gyp: float = 0.0


# --------------------------------------------------------------------------
# Third-order partials of the integrand (needed for dR/dx by the chain rule).
# Direct stencils on the integrand keep the noise ~1e-6; nesting the
# second-order differences would be an order of magnitude worse.

_H5 = (2.220446049250313e-16) ** 0.2


def _shifted_eval(expr: Expr, base: dict[str, float], offsets: dict[str, float]) -> float:
    p = dict(base)
    for k, dv in offsets.items():
        p[k] += dv
    return expr.eval(p["x"], p["y"], p["yp"])


def _third_partial_xyz(expr: Expr, base: dict[str, float]) -> float:
    """d3/dx dy dyp via the 8-point alternating-sign stencil."""
    hx = _H5 * max(1.0, abs(base["x"]))
    hy = _H5 * max(1.0, abs(base["y"]))
    hp = _H5 * max(1.0, abs(base["yp"]))
    total = 0.0
    for sx in (+1.0, -1.0):
        for sy in (+1.0, -1.0):
            for sp in (+1.0, -1.0):
                total += sx * sy * sp * _shifted_eval(
                    expr, base, {"x": sx * hx, "y": sy * hy, "yp": sp * hp}
                )
    return total / (8.0 * hx * hy * hp)


def _third_partial_uuv(expr: Expr, base: dict[str, float], u: str, v: str) -> float:
    """d3/du^2 dv for distinct u, v."""
    hu = _H5 * max(1.0, abs(base[u]))
    hv = _H5 * max(1.0, abs(base[v]))

    def curv(dv: float) -> float:
        return (
            _shifted_eval(expr, base, {u: +hu, v: dv})
            - 2.0 * _shifted_eval(expr, base, {v: dv})
            + _shifted_eval(expr, base, {u: -hu, v: dv})
        )

    return (curv(+hv) - curv(-hv)) / (2.0 * hv * hu * hu)


def coefficients_at(problem: VariationalProblem, extremal: Extremal, x: float) -> Coefficients:
    """P, Q, R (and T, dG/dyp when isoperimetric) at one abscissa.

    dR/dx is assembled by the chain rule dR/dx = R_x + R_y y' + R_yp y''
    with y'' taken from the extremal expression.
    """
    yv = extremal.value(x)
    ypv = extremal.slope(x)
    yppv = extremal.curvature(x)
    H = problem.effective_integrand
    base = {"x": float(x), "y": yv, "yp": ypv}

    P = partial(H, ["yp", "yp"], x, yv, ypv)
    R = partial(H, ["y", "yp"], x, yv, ypv)
    Hyy = partial(H, ["y", "y"], x, yv, ypv)

    dRdx = (
        _third_partial_xyz(H, base)
        + _third_partial_uuv(H, base, "y", "yp") * ypv
        + _third_partial_uuv(H, base, "yp", "y") * yppv
    )
    Q = Hyy - dRdx

    T = 0.0
    gyp = 0.0
    if problem.isoperimetric is not None:
        G = problem.isoperimetric.G
        gyp = partial(G, ["yp"], x, yv, ypv)
        Gy = partial(G, ["y"], x, yv, ypv)
        dGyp_dx = (
            partial(G, ["x", "yp"], x, yv, ypv)
            + partial(G, ["y", "yp"], x, yv, ypv) * ypv
            + partial(G, ["yp", "yp"], x, yv, ypv) * yppv
        )
        T = Gy - dGyp_dx

    for name, val in (("P", P), ("Q", Q), ("R", R), ("T", T), ("Gyp", gyp)):
        if not math.isfinite(val):
            raise SingularCoefficientError(f"coefficient {name} is non-finite at x = {x:.6g}")
    return Coefficients(P=P, Q=Q, R=R, T=T, Gyp=gyp)


# --------------------------------------------------------------------------
# Coefficient fields: the common currency between the expression pipeline,
# the closed-form builtins, and randomized test problems.


@dataclass(frozen=True)
class CoefficientField:
    """P, Q, R, T, dG/dyp as functions of x on [a, b]."""

    a: float
    b: float
    at: Callable[[float], Coefficients]
    isoperimetric: bool

    def P(self, x: float) -> float:
        return self.at(x).P

    def Q(self, x: float) -> float:
        return self.at(x).Q

    def R(self, x: float) -> float:
        return self.at(x).R

    def T(self, x: float) -> float:
        return self.at(x).T

    def Gyp(self, x: float) -> float:
        return self.at(x).Gyp

    def reflected(self) -> "CoefficientField":
        """Mirror image under x -> a+b-x.

        P, Q, T are even under the flip; R and dG/dyp pick up a sign because
        the slope variable changes orientation.
        """
        a, b = self.a, self.b
        inner = self.at

        def at(x: float) -> Coefficients:
            c = inner(a + b - x)
            return Coefficients(P=c.P, Q=c.Q, R=-c.R, T=c.T, Gyp=-c.Gyp)

        return CoefficientField(a=a, b=b, at=at, isoperimetric=self.isoperimetric)


def field_from_problem(problem: VariationalProblem, extremal: Extremal) -> CoefficientField:
    return CoefficientField(
        a=problem.a,
        b=problem.b,
        at=lambda x: coefficients_at(problem, extremal, x),
        isoperimetric=problem.is_isoperimetric,
    )


def field_from_functions(
    a: float,
    b: float,
    P: Callable[[float], float],
    Q: Callable[[float], float],
    R: Callable[[float], float] | None = None,
    T: Callable[[float], float] | None = None,
    Gyp: Callable[[float], float] | None = None,
) -> CoefficientField:
    """Wrap plain callables (closed forms, random test fields) as a field."""
    iso = T is not None

    def at(x: float) -> Coefficients:
        return Coefficients(
            P=P(x),
            Q=Q(x),
            R=R(x) if R is not None else 0.0,
            T=T(x) if iso else 0.0,
            Gyp=Gyp(x) if Gyp is not None else 0.0,
        )

    return CoefficientField(a=a, b=b, at=at, isoperimetric=iso)


# --------------------------------------------------------------------------
# Preconditions


@dataclass(frozen=True)
class PreconditionReport:
    """Numerical values behind each structural requirement plus pass flags.

    Flags are pure functions of the stored values and tolerances; checks that
    do not apply to the regime pass trivially.
    """

    legendre_ok: bool
    min_P: float
    r_at_a: float
    r_at_a_ok: bool
    gyp_at_a: float | None
    gyp_at_a_ok: bool
    t_nonzero_ok: bool
    min_abs_T: float | None
    max_abs_T: float | None
    grid: np.ndarray

    @property
    def passed(self) -> bool:
        return self.legendre_ok and self.r_at_a_ok and self.gyp_at_a_ok and self.t_nonzero_ok


def check_preconditions_field(
    field: CoefficientField,
    regime_kind: BoundaryKind,
    n_grid: int = 256,
    tol_scale: float = 1.0,
) -> PreconditionReport:
    """Evaluate the structural requirements on a uniform grid.

    Strengthened Legendre condition (min P > 0) always applies.  R(a) = 0 is
    enforced for the left-free mixed regime, dG/dyp(a) = 0 additionally when
    isoperimetric, and pointwise T != 0 for every isoperimetric problem.
    """
    if n_grid < 16:
        raise ValueError("n_grid must be at least 16")
    grid = np.linspace(field.a, field.b, n_grid + 1)
    coeffs = [field.at(float(x)) for x in grid]

    tol_p = TOL_P * tol_scale
    tol_r = TOL_R * tol_scale
    tol_t = TOL_T * tol_scale

    min_P = min(c.P for c in coeffs)
    legendre_ok = min_P > tol_p

    r_at_a = coeffs[0].R
    mixed = regime_kind == BoundaryKind.MIXED_LEFT_FREE
    r_at_a_ok = (abs(r_at_a) <= tol_r) if mixed else True

    if field.isoperimetric:
        gyp_at_a = coeffs[0].Gyp
        gyp_at_a_ok = (abs(gyp_at_a) <= tol_r) if mixed else True
        abs_T = [abs(c.T) for c in coeffs]
        min_abs_T: float | None = min(abs_T)
        max_abs_T: float | None = max(abs_T)
        t_nonzero_ok = min_abs_T > tol_t
    else:
        gyp_at_a, gyp_at_a_ok = None, True
        min_abs_T, max_abs_T, t_nonzero_ok = None, None, True

    return PreconditionReport(
        legendre_ok=legendre_ok,
        min_P=min_P,
        r_at_a=r_at_a,
        r_at_a_ok=r_at_a_ok,
        gyp_at_a=gyp_at_a,
        gyp_at_a_ok=gyp_at_a_ok,
        t_nonzero_ok=t_nonzero_ok,
        min_abs_T=min_abs_T,
        max_abs_T=max_abs_T,
        grid=grid,
    )


def check_preconditions(
    problem: VariationalProblem,
    extremal: Extremal,
    n_grid: int = 256,
    tol_scale: float = 1.0,
) -> PreconditionReport:
    field = field_from_problem(problem, extremal)
    kind = problem.regime.kind
    if kind == BoundaryKind.MIXED_RIGHT_FREE:
        field = field.reflected()
        kind = BoundaryKind.MIXED_LEFT_FREE
    return check_preconditions_field(field, kind, n_grid=n_grid, tol_scale=tol_scale)


# --------------------------------------------------------------------------
# Diagnostics


def boundary_residuals(problem: VariationalProblem, extremal: Extremal) -> dict[str, float]:
    """Residuals of the boundary conditions the extremal claims to satisfy."""
    a, b = problem.a, problem.b
    regime = problem.regime
    out: dict[str, float] = {}
    if regime.kind == BoundaryKind.DIRICHLET:
        out["y(a)-A"] = extremal.value(a) - float(regime.A)
        out["y(b)-B"] = extremal.value(b) - float(regime.B)
    elif regime.kind == BoundaryKind.MIXED_LEFT_FREE:
        out["y'(a)"] = extremal.slope(a)
        out["y(b)-B"] = extremal.value(b) - float(regime.B)
    else:
        out["y(a)-A"] = extremal.value(a) - float(regime.A)
        out["y'(b)"] = extremal.slope(b)
    return out


def curvature_discrepancy(problem: VariationalProblem, extremal: Extremal, x: float) -> float:
    """Relative gap between y'' from the expression and from the stationarity
    identity d/dx(dH/dyp) = dH/dy.  Large values mean the supplied curve is
    not actually an extremal."""
    yv = extremal.value(x)
    ypv = extremal.slope(x)
    ypp_expr = extremal.curvature(x)
    H = problem.effective_integrand
    P = partial(H, ["yp", "yp"], x, yv, ypv)
    if P == 0.0:
        return math.inf
    Hy = partial(H, ["y"], x, yv, ypv)
    Hxyp = partial(H, ["x", "yp"], x, yv, ypv)
    Hyyp = partial(H, ["y", "yp"], x, yv, ypv)
    ypp_stationarity = (Hy - Hxyp - Hyyp * ypv) / P
    return abs(ypp_expr - ypp_stationarity) / max(1.0, abs(ypp_expr))
