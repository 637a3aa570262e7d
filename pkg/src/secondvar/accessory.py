"""Accessory-equation integration.

The homogeneous and nonhomogeneous accessory equations

    -(P u')' + Q u = 0,      -(P v')' + Q v = T

are integrated together with the moment integrals m = int u T dx and
n = int v T dx as one first-order system in the momentum-like variables
zu = P u', zv = P v':

    u' = zu / P,   zu' = Q u,
    v' = zv / P,   zv' = Q v - T,
    m' = u T,      n'  = v T.

This form never differentiates P.  Unconstrained runs simply carry v, zv,
m, n as zeros.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp

from .errors import DegenerateBasisError, IntegrationFailure
from .problem import CoefficientField, Extremal, VariationalProblem, field_from_problem

RTOL = 1e-10
ATOL = 1e-12
MIN_OUTPUT_POINTS = 1000


@dataclass(frozen=True)
class InitialConditions:
    """State at x = a: u0, zu0 = P(a) u'(a), v0, zv0 = P(a) v'(a)."""

    u0: float
    zu0: float
    v0: float = 0.0
    zv0: float = 0.0

    def __post_init__(self):
        if self.u0 == 0.0 and self.zu0 == 0.0:
            raise ValueError("u must be nontrivial: (u0, zu0) != (0, 0)")

    @staticmethod
    def dirichlet(p_at_a: float) -> "InitialConditions":
        """u(a) = 0 with unit initial slope (zu0 = P(a))."""
        return InitialConditions(u0=0.0, zu0=p_at_a)

    @staticmethod
    def mixed(u0: float = 1.0) -> "InitialConditions":
        """u'(a) = 0 with u(a) normalized (default 1)."""
        return InitialConditions(u0=u0, zu0=0.0)


@dataclass(frozen=True)
class AccessoryTrajectory:
    """Dense samples of (u, zu, v, zv, m, n) plus interpolation access."""

    xs: np.ndarray
    us: np.ndarray
    zus: np.ndarray
    vs: np.ndarray
    zvs: np.ndarray
    ms: np.ndarray
    ns: np.ndarray
    ps: np.ndarray  # P at xs, for u' = zu/P
    isoperimetric: bool
    ics: InitialConditions
    dense: Callable[[float], np.ndarray]  # x -> 6-state between samples

    @property
    def a(self) -> float:
        return float(self.xs[0])

    @property
    def b(self) -> float:
        return float(self.xs[-1])

    @property
    def uprimes(self) -> np.ndarray:
        return self.zus / self.ps

    @property
    def vprimes(self) -> np.ndarray:
        return self.zvs / self.ps

    def u_at(self, x: float) -> float:
        return float(self.dense(x)[0])

    def delta_at(self, x: float) -> float:
        u, _, v, _, m, n = self.dense(x)
        return float(m * v - n * u)


def integrate_field(
    field: CoefficientField,
    ics: InitialConditions,
    n_out: int = MIN_OUTPUT_POINTS,
) -> AccessoryTrajectory:
    """Integrate the accessory system across [a, b] with dense output.

    Requires P > 0 on the interval (the state includes divisions by P).
    """
    a, b = field.a, field.b
    iso = field.isoperimetric
    at = field.at

    def rhs(x, s):
        c = at(float(x))
        u, zu, v, zv, _, _ = s
        if iso:
            return (zu / c.P, c.Q * u, zv / c.P, c.Q * v - c.T, u * c.T, v * c.T)
        return (zu / c.P, c.Q * u, 0.0, 0.0, 0.0, 0.0)

    y0 = [ics.u0, ics.zu0, ics.v0 if iso else 0.0, ics.zv0 if iso else 0.0, 0.0, 0.0]
    n_out = max(int(n_out), MIN_OUTPUT_POINTS)
    xs = np.linspace(a, b, n_out + 1)

    sol = solve_ivp(
        rhs, (a, b), y0, method="DOP853", rtol=RTOL, atol=ATOL,
        t_eval=xs, dense_output=True,
    )
    if not sol.success:
        reached = float(sol.t[-1]) if len(sol.t) else a
        raise IntegrationFailure(sol.message or "step-size collapse", reached)
    if not np.all(np.isfinite(sol.y)):
        raise IntegrationFailure("non-finite state during integration", float(sol.t[-1]))

    ps = np.array([at(float(x)).P for x in xs])
    us, zus, vs, zvs, ms, ns = sol.y
    return AccessoryTrajectory(
        xs=xs, us=us, zus=zus, vs=vs, zvs=zvs, ms=ms, ns=ns, ps=ps,
        isoperimetric=iso, ics=ics, dense=sol.sol,
    )


def integrate(
    problem: VariationalProblem,
    extremal: Extremal,
    ics: InitialConditions,
    n_out: int = MIN_OUTPUT_POINTS,
) -> AccessoryTrajectory:
    """Expression-pipeline entry point; see integrate_field."""
    return integrate_field(field_from_problem(problem, extremal), ics, n_out)


def delta_series(traj: AccessoryTrajectory) -> tuple[np.ndarray, np.ndarray]:
    """The determinant series Delta = m v - n u on the trajectory grid."""
    if not traj.isoperimetric:
        raise ValueError("delta_series requires an isoperimetric trajectory")
    return traj.xs, traj.ms * traj.vs - traj.ns * traj.us


def wronskian_residual(traj: AccessoryTrajectory) -> float:
    """Max over samples of |P (u'v - u v') - m| = |zu v - u zv - m|.

    The identity holds exactly along the flow when both initial slopes
    vanish, so the residual measures integration error.
    """
    return float(np.max(np.abs(traj.zus * traj.vs - traj.us * traj.zvs - traj.ms)))


# --------------------------------------------------------------------------
# Construction of u, v from a solution basis


@dataclass(frozen=True)
class FunctionWithDerivative:
    """A scalar function bundled with its first derivative."""

    value: Callable[[float], float]
    derivative: Callable[[float], float]

    def __call__(self, x: float) -> float:
        return self.value(x)


def construct_from_basis(
    theta0: FunctionWithDerivative,
    theta1: FunctionWithDerivative,
    theta2: FunctionWithDerivative,
    a: float,
) -> tuple[FunctionWithDerivative, FunctionWithDerivative]:
    """Build (u, v) with u'(a) = v'(a) = 0 from a solution basis.

    theta1, theta2 are linearly independent homogeneous solutions, theta0 a
    particular solution of the nonhomogeneous equation.  u is the
    combination theta2'(a) theta1 - theta1'(a) theta2, which kills the slope
    at a identically; v = theta0 + C1 theta1 + C2 theta2 with the single
    slope condition resolved by the tie-break: prefer C2 = 0 when
    theta1'(a) != 0, else C1 = 0.
    """
    d0 = theta0.derivative(a)
    d1 = theta1.derivative(a)
    d2 = theta2.derivative(a)
    scale = max(1.0, abs(d1), abs(d2))
    tiny = 1e-12 * scale

    if abs(d1) <= tiny and abs(d2) <= tiny:
        if abs(d0) > tiny:
            raise DegenerateBasisError(
                "both basis slopes vanish at a; slope condition for v is unsolvable"
            )
        c1, c2 = 0.0, 0.0
    elif abs(d1) > tiny:
        c1, c2 = -d0 / d1, 0.0
    else:
        c1, c2 = 0.0, -d0 / d2

    u = FunctionWithDerivative(
        value=lambda x: d2 * theta1.value(x) - d1 * theta2.value(x),
        derivative=lambda x: d2 * theta1.derivative(x) - d1 * theta2.derivative(x),
    )
    v = FunctionWithDerivative(
        value=lambda x: theta0.value(x) + c1 * theta1.value(x) + c2 * theta2.value(x),
        derivative=lambda x: theta0.derivative(x)
        + c1 * theta1.derivative(x)
        + c2 * theta2.derivative(x),
    )
    return u, v
