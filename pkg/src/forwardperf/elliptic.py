"""Positive solutions of one-dimensional linear elliptic equations.

The central object is the eigenvalue problem

    a(y) psi'' + b(y) psi' + (c(y) - lam) psi = 0,    psi(0) = 1,

whose strictly positive solutions are the building blocks ("atoms") of
separable space-time harmonic functions.  The solver integrates outward
from 0 with a classical fixed-step RK4 scheme and reports the first grid
point at which positivity fails; existence of a positive solution is
exactly what distinguishes admissible eigenvalues.

For the constant-coefficient operator a = 1, b = c = 0 the positive
solutions are known in closed form, exp(+- y sqrt(lam)) for lam >= 0 and
none for lam < 0; ``heat_fundamental`` exposes them as an oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .errors import NegativeLambda, PositivityLost

# Fixed-step RK4 resolution: step = min(DEFAULT_STEP, span / STEP_DIVISOR).
DEFAULT_STEP = 1e-3
STEP_DIVISOR = 4096

Coefficient = Union[float, Callable[[np.ndarray], np.ndarray]]


def _as_callable(c: Coefficient) -> Callable[[np.ndarray], np.ndarray]:
    if callable(c):
        return c
    val = float(c)
    return lambda y: np.full_like(np.asarray(y, dtype=float), val)


@dataclass(frozen=True)
class EllipticOperator1D:
    """Operator psi -> a psi'' + b psi' + c psi on the real line.

    Coefficients may be floats or callables of y (scalar or ndarray);
    a(y) must stay strictly positive on every probed grid.
    """

    a: Coefficient
    b: Coefficient
    c: Coefficient

    def coefficients(self, y: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        y = np.asarray(y, dtype=float)
        a = np.broadcast_to(np.asarray(_as_callable(self.a)(y), dtype=float), y.shape)
        b = np.broadcast_to(np.asarray(_as_callable(self.b)(y), dtype=float), y.shape)
        c = np.broadcast_to(np.asarray(_as_callable(self.c)(y), dtype=float), y.shape)
        if np.min(a) <= 0.0:
            raise ValueError("second-order coefficient a(y) must be strictly positive")
        return a, b, c

    def apply(self, y, psi, dpsi, d2psi) -> np.ndarray:
        a, b, c = self.coefficients(y)
        return a * d2psi + b * dpsi + c * psi


def laplacian_1d() -> EllipticOperator1D:
    """The pure second-derivative operator d^2/dy^2."""
    return EllipticOperator1D(1.0, 0.0, 0.0)


@dataclass(frozen=True)
class PsiClosedForm:
    """Closed-form profile with tag and parameters for serialization."""

    tag: str
    params: tuple[float, ...]

    def value(self, y):
        y = np.asarray(y, dtype=float)
        if self.tag == "const":
            return np.ones_like(y)
        if self.tag == "exp":
            return np.exp(self.params[0] * y)
        if self.tag == "quadexp":
            c1, c2 = self.params
            return np.exp(c1 * y + c2 * y * y)
        raise ValueError(f"unknown closed form tag {self.tag!r}")

    def derivative(self, y):
        y = np.asarray(y, dtype=float)
        if self.tag == "const":
            return np.zeros_like(y)
        if self.tag == "exp":
            return self.params[0] * np.exp(self.params[0] * y)
        c1, c2 = self.params
        return (c1 + 2.0 * c2 * y) * np.exp(c1 * y + c2 * y * y)

    def second_derivative(self, y):
        y = np.asarray(y, dtype=float)
        if self.tag == "const":
            return np.zeros_like(y)
        if self.tag == "exp":
            return self.params[0] ** 2 * np.exp(self.params[0] * y)
        c1, c2 = self.params
        g = c1 + 2.0 * c2 * y
        return (g * g + 2.0 * c2) * np.exp(c1 * y + c2 * y * y)


def psi_const() -> PsiClosedForm:
    return PsiClosedForm("const", ())


def psi_exp(c: float) -> PsiClosedForm:
    return PsiClosedForm("exp", (float(c),))


def psi_quadexp(c1: float, c2: float) -> PsiClosedForm:
    return PsiClosedForm("quadexp", (float(c1), float(c2)))


def _first_derivative(grid: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Second-order first derivative on a (possibly nonuniform) grid."""
    out = np.empty_like(f)
    hm = grid[1:-1] - grid[:-2]
    hp = grid[2:] - grid[1:-1]
    out[1:-1] = (
        -hp / (hm * (hm + hp)) * f[:-2]
        + (hp - hm) / (hm * hp) * f[1:-1]
        + hm / (hp * (hm + hp)) * f[2:]
    )
    h1, h2 = grid[1] - grid[0], grid[2] - grid[1]
    out[0] = (
        -(2 * h1 + h2) / (h1 * (h1 + h2)) * f[0]
        + (h1 + h2) / (h1 * h2) * f[1]
        - h1 / (h2 * (h1 + h2)) * f[2]
    )
    h1, h2 = grid[-1] - grid[-2], grid[-2] - grid[-3]
    out[-1] = (
        (2 * h1 + h2) / (h1 * (h1 + h2)) * f[-1]
        - (h1 + h2) / (h1 * h2) * f[-2]
        + h1 / (h2 * (h1 + h2)) * f[-3]
    )
    return out


@dataclass(frozen=True)
class MinimalSolution:
    """A positive eigenfunction with psi(0) = 1 on a grid containing 0.

    Stores value, first and second derivative arrays; closed-form
    solutions additionally carry their analytic profile so they can be
    evaluated anywhere.  Grid-only solutions are interpolated with cubic
    Hermite splines built from the stored derivatives.
    """

    lam: float
    grid: np.ndarray
    psi: np.ndarray
    dpsi: np.ndarray
    d2psi: np.ndarray
    closed_form: PsiClosedForm | None = None

    def __post_init__(self):
        g = self.grid
        if g.ndim != 1 or len(g) < 3 or np.any(np.diff(g) <= 0):
            raise ValueError("grid must be strictly increasing with at least 3 points")
        i0 = int(np.argmin(np.abs(g)))
        if g[i0] != 0.0:
            raise ValueError("grid must contain 0")
        if abs(self.psi[i0] - 1.0) > 1e-12:
            raise ValueError("psi(0) must equal 1")
        if np.min(self.psi) <= 0.0:
            raise ValueError("psi must be strictly positive on the grid")
        if self.closed_form is None:
            object.__setattr__(self, "_spline", CubicHermiteSpline(g, self.psi, self.dpsi))
            object.__setattr__(self, "_dspline", CubicHermiteSpline(g, self.dpsi, self.d2psi))

    @classmethod
    def from_closed_form(
        cls, lam: float, form: PsiClosedForm, grid: np.ndarray | None = None
    ) -> "MinimalSolution":
        if grid is None:
            grid = np.linspace(-5.0, 5.0, 201)
        grid = np.asarray(grid, dtype=float)
        return cls(
            lam=float(lam),
            grid=grid,
            psi=form.value(grid),
            dpsi=form.derivative(grid),
            d2psi=form.second_derivative(grid),
            closed_form=form,
        )

    def psi_at(self, y):
        if self.closed_form is not None:
            return self.closed_form.value(y)
        return self._spline(y)

    def dpsi_at(self, y):
        if self.closed_form is not None:
            return self.closed_form.derivative(y)
        return self._dspline(y)

    def d2psi_at(self, y):
        if self.closed_form is not None:
            return self.closed_form.second_derivative(y)
        return self._dspline.derivative()(y)


def _rk4_side(op, lam, endpoint, slope0, h_target):
    """Integrate from 0 toward ``endpoint``; returns grid, psi, dpsi arrays."""
    span = abs(endpoint)
    n = max(1, math.ceil(span / h_target))
    h = endpoint / n  # signed step
    a_f, b_f, c_f = _as_callable(op.a), _as_callable(op.b), _as_callable(op.c)

    def rhs(y, psi, phi):
        a = float(a_f(y))
        if a <= 0.0:
            raise ValueError(f"a(y) = {a:.6g} <= 0 at y = {y:.6g}; operator not elliptic")
        return phi, ((lam - float(c_f(y))) * psi - float(b_f(y)) * phi) / a

    ys = np.empty(n + 1)
    ps = np.empty(n + 1)
    qs = np.empty(n + 1)
    y, psi, phi = 0.0, 1.0, float(slope0)
    ys[0], ps[0], qs[0] = y, psi, phi
    for i in range(1, n + 1):
        k1p, k1q = rhs(y, psi, phi)
        k2p, k2q = rhs(y + h / 2, psi + h / 2 * k1p, phi + h / 2 * k1q)
        k3p, k3q = rhs(y + h / 2, psi + h / 2 * k2p, phi + h / 2 * k2q)
        k4p, k4q = rhs(y + h, psi + h * k3p, phi + h * k3q)
        psi += h / 6 * (k1p + 2 * k2p + 2 * k3p + k4p)
        phi += h / 6 * (k1q + 2 * k2q + 2 * k3q + k4q)
        y = i * h if i < n else endpoint
        ys[i], ps[i], qs[i] = y, psi, phi
        if psi <= 0.0:
            raise PositivityLost(y)
    return ys, ps, qs


def solve_positive_solution(
    op: EllipticOperator1D,
    lam: float,
    y_span: tuple[float, float] = (-3.0, 3.0),
    slope0: float = 0.0,
    step: float | None = None,
) -> MinimalSolution:
    """Integrate (op - lam) psi = 0 outward from psi(0) = 1, psi'(0) = slope0.

    Positivity is checked after every step; the first grid point with
    psi <= 0 raises PositivityLost.  The caller chooses slope0 (for the
    constant-coefficient oracle the exact slopes are +-sqrt(lam)).  The
    stored second derivative is differenced from the integrated slope so
    that the reported equation residual reflects actual solver error.
    """
    y_lo, y_hi = float(y_span[0]), float(y_span[1])
    if not (y_lo <= 0.0 <= y_hi) or y_lo == y_hi:
        raise ValueError("y_span must contain 0 and have positive length")
    h = step if step is not None else min(DEFAULT_STEP, (y_hi - y_lo) / STEP_DIVISOR)
    if h <= 0:
        raise ValueError("step must be positive")

    parts = []
    if y_lo < 0.0:
        gl, pl, ql = _rk4_side(op, lam, y_lo, slope0, h)
        parts.append((gl[:0:-1], pl[:0:-1], ql[:0:-1]))
    parts.append(((np.array([0.0]), np.array([1.0]), np.array([float(slope0)]))))
    if y_hi > 0.0:
        gr, pr, qr = _rk4_side(op, lam, y_hi, slope0, h)
        parts.append((gr[1:], pr[1:], qr[1:]))
    grid = np.concatenate([p[0] for p in parts])
    psi = np.concatenate([p[1] for p in parts])
    dpsi = np.concatenate([p[2] for p in parts])
    return MinimalSolution(
        lam=float(lam), grid=grid, psi=psi, dpsi=dpsi, d2psi=_first_derivative(grid, dpsi)
    )


def ode_residual(op: EllipticOperator1D, lam: float, sol: MinimalSolution) -> float:
    """max over the grid of |a psi'' + b psi' + (c - lam) psi| / (1 + |psi|)."""
    a, b, c = op.coefficients(sol.grid)
    r = a * sol.d2psi + b * sol.dpsi + (c - lam) * sol.psi
    return float(np.max(np.abs(r) / (1.0 + np.abs(sol.psi))))


def heat_fundamental(lam: float, direction: str, grid: np.ndarray | None = None) -> MinimalSolution:
    """Closed-form positive solution exp(+-y sqrt(lam)) of psi'' = lam psi.

    ``direction`` is "increasing" or "decreasing".  For lam < 0 every
    solution oscillates and NegativeLambda is raised; for lam = 0 both
    directions collapse to psi = 1.
    """
    lam = float(lam)
    if lam < 0.0:
        raise NegativeLambda(f"no positive solution of psi'' = {lam:.6g} psi")
    if direction not in ("increasing", "decreasing"):
        raise ValueError("direction must be 'increasing' or 'decreasing'")
    root = math.sqrt(lam)
    c = root if direction == "increasing" else -root
    form = psi_const() if c == 0.0 else psi_exp(c)
    return MinimalSolution.from_closed_form(lam, form, grid)
