"""Finite-difference and analytic residual checks for every equation in scope.

The time-reversed equations here are ill-posed for classical
time-stepping, so this module never solves anything: it only measures
how well a given surface satisfies its equation on a grid.  Residuals
are normalized by 1 + |u| pointwise to keep tolerances scale-free.
Analytic partials are used whenever the object carries them; central
differences (second order) are the fallback and the tool for
convergence-order checks.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .duality import DualInversionSurface, DualSurface, HomotheticSurface, PerformanceSurface, _solve_log_inverse
from .elliptic import EllipticOperator1D
from .errors import DegenerateSecondOrder
from .factor_model import FactorModel, market_price_of_risk
from .widder import DegenerateCoeffs, HarmonicFunction

DEFAULT_FD_STEP = 1e-4
HJB_FORMS = ("complete", "homothetic-linearized", "dual-linearized")


@dataclass(frozen=True)
class GridSpec:
    """Evaluation lattice plus finite-difference steps.

    Axes are linspace over the closed ranges; the x axis is log-spaced
    (wealth grids span decades).  z and x axes are optional and only
    consulted by the checks that need them.
    """

    t_range: tuple[float, float] = (0.0, 2.0)
    t_count: int = 5
    y_range: tuple[float, float] = (-3.0, 3.0)
    y_count: int = 61
    z_range: tuple[float, float] | None = None
    z_count: int = 21
    x_range: tuple[float, float] | None = None
    x_count: int = 41
    h_t: float = DEFAULT_FD_STEP
    h_y: float = DEFAULT_FD_STEP
    h_z: float = DEFAULT_FD_STEP
    h_x: float = DEFAULT_FD_STEP

    def __post_init__(self):
        for name in ("h_t", "h_y", "h_z", "h_x"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        for rng, cnt in ((self.t_range, self.t_count), (self.y_range, self.y_count)):
            if rng[1] < rng[0] or cnt < 1:
                raise ValueError("ranges must be nonempty with count >= 1")
        if self.t_range[0] < 0:
            raise ValueError("t range must start at t >= 0")
        if self.x_range is not None and self.x_range[0] - self.h_x <= 0:
            raise ValueError("x stencil would leave the positive half line")

    @property
    def t_axis(self) -> np.ndarray:
        return np.linspace(*self.t_range, self.t_count)

    @property
    def y_axis(self) -> np.ndarray:
        return np.linspace(*self.y_range, self.y_count)

    @property
    def z_axis(self) -> np.ndarray:
        if self.z_range is None:
            raise ValueError("grid has no z axis")
        return np.linspace(*self.z_range, self.z_count)

    @property
    def x_axis(self) -> np.ndarray:
        if self.x_range is None:
            raise ValueError("grid has no x axis")
        return np.geomspace(*self.x_range, self.x_count)


def standard_parabolic_grid() -> GridSpec:
    return GridSpec()


def standard_degenerate_grid() -> GridSpec:
    return GridSpec(z_range=(-2.0, 2.0))


def standard_hjb_grid() -> GridSpec:
    return GridSpec(x_range=(0.01, 100.0))


@dataclass(frozen=True)
class ResidualReport:
    """Normalized residual summary over a grid."""

    equation: str
    max_abs_residual: float
    argmax: tuple[float, ...]
    tolerance: float
    passed: bool
    axes: tuple[str, ...]
    values: np.ndarray = field(repr=False, compare=False)
    axis_arrays: tuple[np.ndarray, ...] = field(repr=False, compare=False)


def _finish(equation: str, axes: tuple[str, ...], arrays, resid: np.ndarray, tolerance: float) -> ResidualReport:
    resid = np.asarray(resid, dtype=float)
    worst = float(np.max(resid))
    loc = np.unravel_index(int(np.argmax(resid)), resid.shape)
    where = tuple(float(arrays[i][loc[i]]) for i in range(len(arrays)))
    return ResidualReport(
        equation=equation,
        max_abs_residual=worst,
        argmax=where,
        tolerance=tolerance,
        passed=worst < tolerance,
        axes=axes,
        values=resid,
        axis_arrays=tuple(np.asarray(a) for a in arrays),
    )


def report_json(report) -> str:
    """Structured-text form of a report; arrays stay out, summary goes in."""
    payload = {}
    for key, val in vars(report).items():
        if isinstance(val, np.ndarray):
            continue
        if isinstance(val, tuple) and val and isinstance(val[0], np.ndarray):
            continue
        if isinstance(val, (np.floating, np.integer)):
            val = float(val)
        payload[key] = val
    return json.dumps(payload, sort_keys=True, indent=2)


def export_residual_csv(report: ResidualReport, path: str) -> None:
    """Flat heatmap dump: one row per grid point, row-major."""
    with open(path, "w", newline="") as fh:
        fh.write(",".join(report.axes) + ",residual\n")
        grids = np.meshgrid(*report.axis_arrays, indexing="ij")
        flat = [g.ravel() for g in grids]
        res = report.values.ravel()
        for row in range(res.size):
            coords = ",".join(f"{f[row]:.17g}" for f in flat)
            fh.write(f"{coords},{res[row]:.17g}\n")


# ---------------------------------------------------------------------------
# Residual evaluation helpers


def _has_analytic(u, names) -> bool:
    return all(callable(getattr(u, n, None)) for n in names)


def _pick_method(u, names, method: str) -> bool:
    if method not in ("auto", "analytic", "fd"):
        raise ValueError("method must be auto, analytic, or fd")
    if method == "analytic":
        if not _has_analytic(u, names):
            raise ValueError("object carries no analytic partials")
        return True
    if method == "fd":
        return False
    return _has_analytic(u, names)


def _value_fn(u) -> Callable:
    return u.value if hasattr(u, "value") else u


def parabolic_residual(
    u,
    op: EllipticOperator1D,
    grid: GridSpec,
    tolerance: float = 1e-8,
    method: str = "auto",
) -> ResidualReport:
    """Residual of u_t + a u_yy + b u_y + c u = 0 on the (t, y) grid."""
    analytic = _pick_method(u, ("d_t", "d_y", "d_yy"), method)
    ts = grid.t_axis[:, None]
    ys = grid.y_axis[None, :]
    a, b, c = op.coefficients(grid.y_axis)
    if analytic:
        val = u.value(ts, ys)
        resid = u.d_t(ts, ys) + a * u.d_yy(ts, ys) + b * u.d_y(ts, ys) + c * val
    else:
        f = _value_fn(u)
        val = f(ts, ys)
        ht, hy = grid.h_t, grid.h_y
        ut = (f(ts + ht, ys) - f(ts - ht, ys)) / (2.0 * ht)
        uy = (f(ts, ys + hy) - f(ts, ys - hy)) / (2.0 * hy)
        uyy = (f(ts, ys + hy) - 2.0 * val + f(ts, ys - hy)) / hy ** 2
        resid = ut + a * uyy + b * uy + c * val
    resid = np.abs(resid) / (1.0 + np.abs(val))
    return _finish("u_t + L_y u = 0", ("t", "y"), (grid.t_axis, grid.y_axis), resid, tolerance)


_DEGENERATE_PARTIALS = ("d_t", "d_y", "d_yy", "d_z", "d_zz", "d_yz")


def degenerate_parabolic_residual(
    u,
    coeffs: DegenerateCoeffs,
    grid: GridSpec,
    tolerance: float = 1e-8,
    method: str = "auto",
) -> ResidualReport:
    """Residual of u_t + a u_yy + q u_yz + p u_zz + b u_y + r u_z + c u = 0."""
    analytic = _pick_method(u, _DEGENERATE_PARTIALS, method)
    ts = grid.t_axis[:, None, None]
    ys = grid.y_axis[None, :, None]
    zs = grid.z_axis[None, None, :]
    a, q, p, b, r, c = coeffs.evaluate(grid.y_axis[None, :, None])
    if analytic:
        val = u.value(ts, ys, zs)
        resid = (u.d_t(ts, ys, zs) + a * u.d_yy(ts, ys, zs) + q * u.d_yz(ts, ys, zs)
                 + p * u.d_zz(ts, ys, zs) + b * u.d_y(ts, ys, zs) + r * u.d_z(ts, ys, zs)
                 + c * val)
    else:
        f = _value_fn(u)
        val = f(ts, ys, zs)
        ht, hy, hz = grid.h_t, grid.h_y, grid.h_z
        ut = (f(ts + ht, ys, zs) - f(ts - ht, ys, zs)) / (2.0 * ht)
        uy = (f(ts, ys + hy, zs) - f(ts, ys - hy, zs)) / (2.0 * hy)
        uz = (f(ts, ys, zs + hz) - f(ts, ys, zs - hz)) / (2.0 * hz)
        uyy = (f(ts, ys + hy, zs) - 2.0 * val + f(ts, ys - hy, zs)) / hy ** 2
        uzz = (f(ts, ys, zs + hz) - 2.0 * val + f(ts, ys, zs - hz)) / hz ** 2
        uyz = (f(ts, ys + hy, zs + hz) - f(ts, ys + hy, zs - hz)
               - f(ts, ys - hy, zs + hz) + f(ts, ys - hy, zs - hz)) / (4.0 * hy * hz)
        resid = ut + a * uyy + q * uyz + p * uzz + b * uy + r * uz + c * val
    resid = np.abs(resid) / (1.0 + np.abs(val))
    return _finish(
        "u_t + L_yz u = 0", ("t", "y", "z"),
        (grid.t_axis, grid.y_axis, grid.z_axis), resid, tolerance,
    )


def _single_factor_fields(model: FactorModel, ys: np.ndarray):
    """Scalar mu, sigma, lam of a one-factor complete model along a y axis."""
    if model.n != 1 or model.k != 1 or model.d != 1:
        raise ValueError("complete form needs a one-factor, one-asset model")
    state = ys[..., None]
    mu = model.mu(state)[..., 0]
    sig = model.sigma(state)[..., 0, 0]
    lam = market_price_of_risk(model, state)[..., 0]
    return mu, sig, lam


def hjb_residual(
    surface: PerformanceSurface,
    model: FactorModel,
    grid: GridSpec,
    form: str,
    tolerance: float = 1e-8,
) -> ResidualReport:
    """Residual of the HJB equation in the requested formulation.

    complete:   V_t + mu V_y + sigma^2/2 V_yy - |lam V_x + sigma V_xy|^2/(2 V_xx)
                on the (t, y, x) grid (one-factor models).
    homothetic-linearized: the linear equation of surface.harmonic under
                surface.operator (grid over (t, y)).
    dual-linearized: the degenerate equation of surface.dual with
                coefficients built from the model (grid over (t, y, z)).
    """
    if form not in HJB_FORMS:
        raise ValueError(f"form must be one of {HJB_FORMS}")
    if form == "homothetic-linearized":
        if not isinstance(surface, HomotheticSurface) or surface.operator is None:
            raise ValueError("surface carries no harmonic/operator pair")
        rep = parabolic_residual(surface.harmonic, surface.operator, grid, tolerance)
        return replace(rep, equation="homothetic-linearized HJB")
    if form == "dual-linearized":
        if not isinstance(surface, DualInversionSurface):
            raise ValueError("surface carries no dual")
        ys = grid.y_axis
        mu, sig, lam = _single_factor_fields(model, ys)
        if not np.allclose(sig, sig.flat[0], rtol=0.0, atol=1e-12):
            raise ValueError("dual-linearized form assumes constant asset volatility")
        coeffs = DegenerateCoeffs.from_model_1d(
            sigma=float(sig.flat[0]),
            lam=lambda y: market_price_of_risk(model, np.asarray(y, dtype=float)[..., None])[..., 0],
            mu=lambda y: model.mu(np.asarray(y, dtype=float)[..., None])[..., 0],
        )
        rep = degenerate_parabolic_residual(surface.dual, coeffs, grid, tolerance)
        return replace(rep, equation="dual-linearized HJB")

    ts = grid.t_axis[:, None, None]
    ys = grid.y_axis[None, :, None]
    xs = grid.x_axis[None, None, :]
    mu, sig, lam = _single_factor_fields(model, grid.y_axis)
    mu, sig, lam = mu[None, :, None], sig[None, :, None], lam[None, :, None]
    val = surface.value(ts, ys, xs)
    vx = surface.d_x(ts, ys, xs)
    vxx = surface.d_xx(ts, ys, xs)
    if np.any(np.abs(vxx) < 1e-14 * np.abs(vx) / xs):
        raise DegenerateSecondOrder("V is numerically linear in wealth on the grid")
    bracket = lam * vx + sig * surface.d_xy(ts, ys, xs)
    resid = (surface.d_t(ts, ys, xs) + mu * surface.d_y(ts, ys, xs)
             + 0.5 * sig ** 2 * surface.d_yy(ts, ys, xs)
             - 0.5 * bracket ** 2 / vxx)
    resid = np.abs(resid) / (1.0 + np.abs(val))
    return _finish(
        "complete HJB", ("t", "y", "x"),
        (grid.t_axis, grid.y_axis, grid.x_axis), resid, tolerance,
    )


# ---------------------------------------------------------------------------
# Appendix bounds


@dataclass(frozen=True)
class BoundsReport:
    """Two-sided ratio bound check plus the fitted growth constant."""

    form: str
    eta: float
    ratio_min: float
    ratio_max: float
    lower: float
    upper: float
    passed: bool
    fitted_c: float


def appendix_bounds_check(obj, eta: float, grid: GridSpec) -> BoundsReport:
    """Verify the measure-support ratio bounds on a grid.

    Dual surfaces u(t,y,z): eta <= -u/u_z <= 1/(1+eta) pointwise.
    Inverted surfaces V(t,y,x): (1+eta) x <= -Vtilde/Vtilde_x <= x/eta,
    with -Vtilde/Vtilde_x = -u_z evaluated at the inverse point.
    The growth constant c in |u_y/u| <= c (1+|y|) is fitted and
    reported, never asserted (it is existential in the source bounds).
    """
    if not 0.0 < eta < 0.5:
        raise ValueError("need eta in (0, 1/2)")
    if isinstance(obj, PerformanceSurface):
        dual = getattr(obj, "dual", None)
        if dual is None:
            raise ValueError("marginal-form check needs a dual-inversion surface")
        ts = grid.t_axis[:, None, None]
        ys = grid.y_axis[None, :, None]
        xs = grid.x_axis[None, None, :]
        z = _solve_log_inverse(dual, ts, ys, np.broadcast_to(xs, (grid.t_count, grid.y_count, grid.x_count)))
        tb = np.broadcast_to(ts, z.shape)
        yb = np.broadcast_to(ys, z.shape)
        ratio = -dual.d_z(tb, yb, z) / xs
        growth = np.abs(dual.d_y(tb, yb, z) / dual.value(tb, yb, z)) / (1.0 + np.abs(yb))
        lower, upper, form = 1.0 + eta, 1.0 / eta, "marginal"
    else:
        ts = grid.t_axis[:, None, None]
        ys = grid.y_axis[None, :, None]
        zs = grid.z_axis[None, None, :]
        val = obj.value(ts, ys, zs)
        ratio = -val / obj.d_z(ts, ys, zs)
        growth = np.abs(obj.d_y(ts, ys, zs) / val) / (1.0 + np.abs(ys))
        lower, upper, form = eta, 1.0 / (1.0 + eta), "dual"
    rmin, rmax = float(np.min(ratio)), float(np.max(ratio))
    tol = 1e-12 * max(1.0, abs(lower), abs(upper))
    return BoundsReport(
        form=form,
        eta=eta,
        ratio_min=rmin,
        ratio_max=rmax,
        lower=lower,
        upper=upper,
        passed=(rmin >= lower - tol) and (rmax <= upper + tol),
        fitted_c=float(np.max(growth)),
    )
