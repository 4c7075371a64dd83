"""Closed-form spectral solutions for the two shipped factor models.

Both models admit quadratic-exponential eigenfunctions

    psi(y) = exp(C1 y + C2 y^2)

whose coefficients follow from matching powers of y in the relevant
elliptic equation.  The coefficients are derived here from scratch
rather than copied from any reference table, and every constructed
triple is certified against its own ODE before use.

Mean-reverting asset (one factor, log price Y):

    dY = (a - bY) dt + sigma dW,  risk premium lam(y) = (A - by)/sigma,
    A = a + sigma^2/2.  A profile with z-exponent theta solves
    (sigma^2/2) psi'' + (theta(A - by) - sigma^2/2) psi'
        + (theta(theta-1)(A - by)^2/(2 sigma^2) - lam) psi = 0,

giving (matching y^2, y^1, y^0 in turn)

    C2 = b (theta +- sqrt(theta)) / (2 sigma^2),
    C1 = [2Ab theta(theta-1)/sigma^2 - 2 C2 (2 theta A - sigma^2)]
             / (+- 2 b sqrt(theta)),
    lam = [sigma^2 C1^2 + 2 sigma^2 C2 + (2 theta A - sigma^2) C1
             + theta(theta-1) A^2 / sigma^2] / 2.

Stochastic volatility (asset volatility e^Y with OU factor Y): with
risk aversion gamma, correlation rho, delta the dual exponent and

    A = a + rho sigma kappa gamma/(1-gamma),
    B = b + rho sigma mu gamma/(1-gamma),
    P = gamma / (2 delta (1-gamma)),

the reduced equation (sigma^2/2) psi'' + (A - By) psi'
+ (P (kappa - mu y)^2 - lam) psi = 0 has

    C2 = (B +- sqrt(B^2 - 2 sigma^2 P mu^2)) / (2 sigma^2),
    C1 = (2 P kappa mu - 2 A C2) / (+- sqrt(B^2 - 2 sigma^2 P mu^2)),
    lam = sigma^2 C1^2 / 2 + sigma^2 C2 + A C1 + P kappa^2,

real precisely when B^2 >= 2 sigma^2 P mu^2 (the well-posedness
condition: mean reversion strong enough for the risk-premium slope).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .duality import (
    DualInversionSurface,
    DualSurface,
    HomotheticParams,
    HomotheticSurface,
    delta_exponent,
    homothetic_value,
)
from .elliptic import EllipticOperator1D, MinimalSolution, ode_residual, psi_const, psi_quadexp
from .errors import NoRealBranch, NotWellPosed, SupportViolation
from .widder import DegenerateCoeffs, HarmonicFunction, SpectralAtom, build_degenerate, build_harmonic

# Certification grid and tolerance for every closed-form coefficient set.
_CHECK_GRID = np.linspace(-3.0, 3.0, 61)
COEFF_RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class QuadExpCoeffs:
    """Certified coefficients of a profile exp(C1 y + C2 y^2)."""

    c1: float
    c2: float
    lam: float
    branch: str

    def minimal_solution(self, grid: np.ndarray | None = None) -> MinimalSolution:
        form = psi_const() if self.c1 == 0.0 and self.c2 == 0.0 else psi_quadexp(self.c1, self.c2)
        return MinimalSolution.from_closed_form(self.lam, form, grid)


def _certify(coeffs: QuadExpCoeffs, op: EllipticOperator1D) -> QuadExpCoeffs:
    r = ode_residual(op, coeffs.lam, coeffs.minimal_solution(_CHECK_GRID))
    if not r < COEFF_RESIDUAL_TOL:
        raise AssertionError(
            f"coefficient matching produced residual {r:.3e} (branch {coeffs.branch})"
        )
    return coeffs


def _branch_sign(branch: str) -> float:
    if branch not in ("plus", "minus"):
        raise ValueError("branch must be 'plus' or 'minus'")
    return 1.0 if branch == "plus" else -1.0


# ---------------------------------------------------------------------------
# Mean-reverting asset (Schwartz-type single factor)


@dataclass(frozen=True)
class SchwartzParams:
    """Mean-reverting log price with spectral measures on [1+eta, 1/eta].

    nu_minus and nu_plus are finite measures given as (theta, weight)
    pairs; eta in (0, 1/2) controls both the admissible support and the
    resulting marginal bounds.
    """

    a: float
    b: float
    sigma: float
    eta: float
    nu_minus: tuple[tuple[float, float], ...] = field(default=())
    nu_plus: tuple[tuple[float, float], ...] = field(default=())

    def __post_init__(self):
        if not (self.a >= 0 and self.b > 0 and self.sigma > 0):
            raise ValueError("need a >= 0, b > 0, sigma > 0")
        if not 0.0 < self.eta < 0.5:
            raise ValueError("need eta in (0, 1/2)")
        lo, hi = 1.0 + self.eta, 1.0 / self.eta
        for theta, w in (*self.nu_minus, *self.nu_plus):
            if w < 0.0:
                raise ValueError("measure weights must be >= 0")
            if theta < lo - 1e-12 or theta > hi + 1e-12:
                raise SupportViolation(
                    f"theta = {theta:.6g} outside [{lo:.6g}, {hi:.6g}]"
                )

    @property
    def big_a(self) -> float:
        return self.a + 0.5 * self.sigma ** 2


def schwartz_coeffs(params: SchwartzParams, theta: float, branch: str) -> QuadExpCoeffs:
    """Match exp(C1 y + C2 y^2) in the theta-shifted equation; certified."""
    theta = float(theta)
    if theta <= 0.0:
        raise NoRealBranch(f"need theta > 0, got {theta}")
    s = _branch_sign(branch)
    a_p, b_p, sg = params.a, params.b, params.sigma
    big_a = params.big_a
    root = math.sqrt(theta)
    c2 = b_p * (theta + s * root) / (2.0 * sg ** 2)
    c1 = (2.0 * big_a * b_p * theta * (theta - 1.0) / sg ** 2
          - 2.0 * c2 * (2.0 * theta * big_a - sg ** 2)) / (s * 2.0 * b_p * root)
    lam = 0.5 * (sg ** 2 * c1 ** 2 + 2.0 * sg ** 2 * c2
                 + (2.0 * theta * big_a - sg ** 2) * c1
                 + theta * (theta - 1.0) * big_a ** 2 / sg ** 2)
    return _certify(QuadExpCoeffs(c1, c2, lam, branch), schwartz_theta_operator(params, theta))


def schwartz_dual_coeffs(params: SchwartzParams) -> DegenerateCoeffs:
    """Coefficients of the dual equation for the mean-reverting model."""
    a_p, b_p, sg = params.a, params.b, params.sigma
    big_a = params.big_a
    return DegenerateCoeffs.from_model_1d(
        sigma=sg,
        lam=lambda y: (big_a - b_p * np.asarray(y, dtype=float)) / sg,
        mu=lambda y: a_p - b_p * np.asarray(y, dtype=float),
    )


def schwartz_theta_operator(params: SchwartzParams, theta: float) -> EllipticOperator1D:
    """Elliptic operator felt by profiles with z-exponent theta."""
    return schwartz_dual_coeffs(params).shifted_operator(theta)


def schwartz_atoms(params: SchwartzParams) -> list[SpectralAtom]:
    atoms = []
    for branch, measure in (("minus", params.nu_minus), ("plus", params.nu_plus)):
        for theta, w in measure:
            if w == 0.0:
                continue
            coeffs = schwartz_coeffs(params, theta, branch)
            atoms.append(SpectralAtom(
                lam=coeffs.lam, weight=w, psi=coeffs.minimal_solution(), theta=float(theta)
            ))
    if not atoms:
        raise ValueError("both spectral measures are empty")
    return atoms


def schwartz_dual_surface(params: SchwartzParams) -> DualSurface:
    """Dual surface u(t,y,z) = sum over both measures of w e^{-lam t - theta z} psi(y)."""
    harmonic = build_degenerate(schwartz_atoms(params), schwartz_dual_coeffs(params))
    return DualSurface(harmonic)


def schwartz_value_surface(params: SchwartzParams) -> DualInversionSurface:
    """Performance surface of the mean-reverting model via dual inversion."""
    return DualInversionSurface(schwartz_dual_surface(params), factor_coord=0)


# ---------------------------------------------------------------------------
# Stochastic volatility (two factors, one traded asset)


@dataclass(frozen=True)
class StochVolParams:
    """OU volatility factor with risk premium kappa - mu y and power utility."""

    a: float
    b: float
    sigma: float
    rho: float
    kappa: float
    mu: float
    gamma: float
    nu_minus: float = 1.0
    nu_plus: float = 0.0

    def __post_init__(self):
        if not (self.b > 0 and self.sigma > 0):
            raise ValueError("need b > 0 and sigma > 0")
        if not -1.0 <= self.rho <= 1.0:
            raise ValueError("need -1 <= rho <= 1")
        if self.mu < 0.0:
            raise ValueError("need mu >= 0")
        if not (self.gamma < 1.0 and self.gamma != 0.0):
            raise ValueError("need gamma < 1, gamma != 0")
        if self.nu_minus < 0.0 or self.nu_plus < 0.0:
            raise ValueError("need nonnegative branch weights")

    @property
    def delta(self) -> float:
        return delta_exponent(self.gamma, self.rho)

    def _reduced(self) -> tuple[float, float, float]:
        g = self.gamma / (1.0 - self.gamma)
        big_a = self.a + self.rho * self.sigma * self.kappa * g
        big_b = self.b + self.rho * self.sigma * self.mu * g
        p = self.gamma / (2.0 * self.delta * (1.0 - self.gamma))
        return big_a, big_b, p

    def discriminant(self) -> float:
        _, big_b, p = self._reduced()
        return big_b ** 2 - 2.0 * self.sigma ** 2 * p * self.mu ** 2


def stochvol_wellposed(params: StochVolParams) -> bool:
    """True when the reduced equation admits real quadratic-exponential profiles."""
    return params.discriminant() >= 0.0


def stochvol_operator(params: StochVolParams) -> EllipticOperator1D:
    """Linear operator of the reduced (homothetic) equation in the factor."""
    big_a, big_b, p = params._reduced()
    sg, kp, mu = params.sigma, params.kappa, params.mu
    return EllipticOperator1D(
        a=0.5 * sg ** 2,
        b=lambda y: big_a - big_b * np.asarray(y, dtype=float),
        c=lambda y: p * (kp - mu * np.asarray(y, dtype=float)) ** 2,
    )


def stochvol_coeffs(params: StochVolParams, branch: str) -> QuadExpCoeffs:
    """Match exp(C1 y + C2 y^2) in the reduced equation; certified."""
    s = _branch_sign(branch)
    big_a, big_b, p = params._reduced()
    sg, kp, mu = params.sigma, params.kappa, params.mu
    disc = params.discriminant()
    if disc < 0.0:
        raise NotWellPosed(disc)
    root = math.sqrt(disc)
    c2 = (big_b + s * root) / (2.0 * sg ** 2)
    numer = 2.0 * p * kp * mu - 2.0 * big_a * c2
    if root == 0.0:
        if abs(numer) > 1e-14:
            raise NoRealBranch("branches coincide and the linear matching is inconsistent")
        c1 = 0.0
    else:
        c1 = numer / (s * root)
    lam = 0.5 * sg ** 2 * c1 ** 2 + sg ** 2 * c2 + big_a * c1 + p * kp ** 2
    return _certify(QuadExpCoeffs(c1, c2, lam, branch), stochvol_operator(params))


def stochvol_harmonic(params: StochVolParams) -> HarmonicFunction:
    atoms = []
    for branch, w in (("minus", params.nu_minus), ("plus", params.nu_plus)):
        if w == 0.0:
            continue
        coeffs = stochvol_coeffs(params, branch)
        atoms.append(SpectralAtom(lam=coeffs.lam, weight=w, psi=coeffs.minimal_solution()))
    if not atoms:
        raise ValueError("both branch weights are zero")
    return build_harmonic(atoms, stochvol_operator(params))


def stochvol_value_surface(params: StochVolParams) -> HomotheticSurface:
    """Homothetic performance surface V = (x^gamma/gamma) u(t,y)^delta.

    The scalar y argument of the surface is the volatility factor, the
    second component of the two-factor model state (factor_coord = 1).
    """
    return homothetic_value(
        stochvol_harmonic(params),
        HomotheticParams(params.gamma, params.rho),
        operator=stochvol_operator(params),
        factor_coord=1,
    )


def merton_value_surface(gamma: float, lam: float) -> HomotheticSurface:
    """V(t, x) = (x^gamma/gamma) e^{-lam_m t} for a constant risk premium.

    lam_m = gamma lam^2 / (2 (1 - gamma)); the surface ignores y and
    pairs with the constant-coefficient one-factor model.
    """
    if not (gamma < 1.0 and gamma != 0.0):
        raise ValueError("need gamma < 1, gamma != 0")
    lam_m = gamma * lam ** 2 / (2.0 * (1.0 - gamma))
    op = EllipticOperator1D(1.0, 0.0, lam_m)
    atom = SpectralAtom(lam=lam_m, weight=1.0, psi=MinimalSolution.from_closed_form(lam_m, psi_const()))
    return homothetic_value(build_harmonic([atom], op), HomotheticParams(gamma, 0.0), operator=op)
