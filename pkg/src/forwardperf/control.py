"""Candidate optimal portfolio and optimal wealth dynamics.

The first-order condition of the pointwise Hamiltonian gives, with M
the traded columns of sigma and s the diffusion loading of the surface
factor,

    x sigma pi* = -proj_M (lam V_x + s V_xy) / V_xx,

so pi* = -M^+ (lam V_x + s V_xy) / (x V_xx).  For the shipped one
factor complete model this is the scalar -(lam V_x + sigma V_xy) /
(x sigma V_xx).  All second-order quantities come from the surface's
analytic partials; finite differences appear only in tests.

State convention: models with n factors take y with a trailing axis of
length n; a single-factor model also accepts bare scalars or batches of
scalars.  The surface itself reads the coordinate ``factor_coord``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .duality import PerformanceSurface
from .errors import DegenerateSecondOrder
from .factor_model import FactorModel, PortfolioRule, market_price_of_risk, wealth_dynamics

# |V_xx| below this multiple of |V_x|/x makes the FOC ratio meaningless.
DEGENERACY_TOL = 1e-14


def _state(y, n: int) -> np.ndarray:
    arr = np.asarray(y, dtype=float)
    if n == 1:
        # Bare scalars/batches of scalars are accepted for one factor;
        # a trailing length-1 axis means the state axis is already there.
        if arr.ndim and arr.shape[-1] == 1:
            return arr
        return arr[..., None]
    if arr.ndim == 0 or arr.shape[-1] != n:
        raise ValueError(f"state must have trailing axis of length {n}")
    return arr


def _foc_pieces(surface: PerformanceSurface, model: FactorModel, t, y, x,
                sigma_val=None, lam_val=None):
    """Shared FOC ingredients: lam, traded columns, and x sigma pi* pre-projection.

    Works with the surface ratios V_x/V_xx and V_xy/V_xx so the common
    prefactors of the partials cancel instead of being computed; raises
    DegenerateSecondOrder when x < 1e-14 |V_x/V_xx|, the ratio form of
    |V_xx| < 1e-14 |V_x| / x.
    """
    ys = _state(y, model.n)
    sig = model.sigma(ys) if sigma_val is None else sigma_val
    lam = market_price_of_risk(model, ys, sigma_val=sig) if lam_val is None else lam_val
    traded = sig[..., :, : model.k]
    s_fac = sig[..., :, surface.factor_coord]
    ysc = ys[..., surface.factor_coord]
    xb = np.broadcast_to(np.asarray(x, dtype=float), np.broadcast_shapes(
        np.shape(t), ysc.shape, np.shape(x)))
    rx, rxy = surface.foc_ratios(t, ysc, x)
    if np.any(xb < DEGENERACY_TOL * np.abs(rx)):
        raise DegenerateSecondOrder(
            "surface is numerically linear in wealth at a probed point"
        )
    # w = -(lam V_x + s V_xy)/V_xx = x sigma pi* before projection.
    w = -(lam * np.asarray(rx)[..., None] + s_fac * np.asarray(rxy)[..., None])
    return lam, traded, w, xb


def optimal_portfolio(surface: PerformanceSurface, model: FactorModel, t, y, x,
                      sigma_val=None, lam_val=None) -> np.ndarray:
    """Optimal traded fractions pi* with trailing axis k.

    Requires V_xx < 0 at the probed points; raises DegenerateSecondOrder
    when |V_xx| < 1e-14 |V_x| / x.
    """
    lam, traded, w, xb = _foc_pieces(surface, model, t, y, x, sigma_val, lam_val)
    if model.k == 1:
        col = traded[..., :, 0]
        proj = np.sum(col * w, axis=-1) / np.sum(col * col, axis=-1)
        return (proj / xb)[..., None]
    pinv = np.linalg.pinv(traded)
    return np.einsum("...kd,...d->...k", pinv, w) / xb[..., None]


def optimal_rule(surface: PerformanceSurface, model: FactorModel) -> PortfolioRule:
    """The optimal portfolio as a feedback rule usable by the simulator."""
    return PortfolioRule(
        name="optimal",
        k=model.k,
        fn=lambda t, y, x: optimal_portfolio(surface, model, t, y, x),
        fn_fields=lambda t, y, x, sv, lv: optimal_portfolio(surface, model, t, y, x, sv, lv),
    )


@dataclass(frozen=True)
class OptimalWealthDynamics:
    """Feedback drift/diffusion of the optimal wealth process.

    drift(t, y, x) is scalar, diffusion(t, y, x) carries a trailing axis
    of length d, and drift = diffusion . lam(y) by construction.
    """

    drift: Callable
    diffusion: Callable
    source_tag: str


def optimal_wealth_dynamics(surface: PerformanceSurface, model: FactorModel) -> OptimalWealthDynamics:
    """Assemble x sigma pi* directly from surface partials.

    Computed as the projection of -(lam V_x + s V_xy)/V_xx onto the
    range of the traded columns, not by round-tripping through
    optimal_portfolio; tests compare the two routes.
    """

    def vol_vector(t, y, x):
        lam, traded, w, _ = _foc_pieces(surface, model, t, y, x)
        if model.k == 1:
            col = traded[..., :, 0]
            coef = np.sum(col * w, axis=-1) / np.sum(col * col, axis=-1)
            return coef[..., None] * col, lam
        pinv = np.linalg.pinv(traded)
        coef = np.einsum("...kd,...d->...k", pinv, w)
        return np.einsum("...dk,...k->...d", traded, coef), lam

    def drift(t, y, x):
        v, lam = vol_vector(t, y, x)
        return np.sum(v * lam, axis=-1)

    def diffusion(t, y, x):
        return vol_vector(t, y, x)[0]

    tag = "complete-1d" if model.n == 1 else "homothetic-2d"
    return OptimalWealthDynamics(drift=drift, diffusion=diffusion, source_tag=tag)


@dataclass(frozen=True)
class HamiltonianReport:
    """Grid search over the HJB bracket at one state point."""

    grid_argmax: np.ndarray
    analytic: np.ndarray
    gap: float
    spacing: float
    within_spacing: bool
    values: np.ndarray


def hamiltonian_argmax_check(
    surface: PerformanceSurface,
    model: FactorModel,
    t: float,
    y,
    x: float,
    pi_grid,
    spacing: float | None = None,
) -> HamiltonianReport:
    """Evaluate the Hamiltonian bracket over a grid of fractions.

    H(pi) = x (sigma pi).(lam V_x + s V_xy) + x^2/2 |sigma pi|^2 V_xx,
    maximized over the grid; the report states whether the grid argmax
    sits within one grid spacing of the analytic optimum.
    """
    grid = np.asarray(pi_grid, dtype=float)
    if grid.ndim == 1:
        grid = grid[:, None]
    if grid.shape[-1] != model.k:
        raise ValueError(f"grid rows must have length k = {model.k}")
    ys = _state(y, model.n)
    sig = model.sigma(ys)
    lam = market_price_of_risk(model, ys, sigma_val=sig)
    s_fac = sig[..., :, surface.factor_coord]
    ysc = ys[..., surface.factor_coord]
    vx = float(surface.d_x(t, ysc, x))
    vxx = float(surface.d_xx(t, ysc, x))
    vxy = float(surface.d_xy(t, ysc, x))
    target = np.asarray(lam * vx + s_fac * vxy, dtype=float).reshape(-1)
    sig_pi = np.einsum("dk,mk->md", np.atleast_2d(sig[..., :, : model.k]), grid)
    lin = sig_pi @ target
    quad = np.sum(sig_pi * sig_pi, axis=-1)
    values = float(x) * lin + 0.5 * float(x) ** 2 * quad * vxx
    best = int(np.argmax(values))
    analytic = optimal_portfolio(surface, model, t, y, x)
    gap = float(np.max(np.abs(grid[best] - np.asarray(analytic).reshape(-1))))
    if spacing is None:
        diffs = [np.max(np.diff(np.sort(grid[:, j]))) for j in range(grid.shape[1])]
        spacing = float(max(diffs)) if grid.shape[0] > 1 else np.inf
    return HamiltonianReport(
        grid_argmax=grid[best],
        analytic=np.asarray(analytic).reshape(-1),
        gap=gap,
        spacing=spacing,
        within_spacing=gap <= spacing,
        values=values,
    )


def export_portfolio_csv(surface, model, t_vals, y_vals, x_vals, path: str) -> None:
    """Write rows (t, y, x, pi_star), row-major in (t, y, x), 17 digits.

    y values populate the surface factor coordinate; any remaining state
    coordinates are zero (the shipped models depend on no others).
    """
    xs = np.asarray(x_vals, dtype=float)
    with open(path, "w", newline="") as fh:
        fh.write("t,y,x,pi_star\n")
        for t in t_vals:
            for yv in y_vals:
                state = np.zeros(model.n)
                state[surface.factor_coord] = yv
                pi = np.asarray(optimal_portfolio(surface, model, float(t), state, xs))
                for xv, pv in zip(xs, pi[..., 0].reshape(-1)):
                    fh.write(f"{t:.17g},{yv:.17g},{xv:.17g},{pv:.17g}\n")
