"""Market factor models and self-financing wealth dynamics.

A model carries n factors driven by d Brownian motions, of which the
first k factors are the log prices of traded assets.  Writing sigma(y)
for the d x n diffusion matrix (column i is the loading vector of
factor i) and mu(y) for the factor drift, the traded assets earn the
arithmetic excess drift

    mu_tilde_i(y) = mu_i(y) + ||sigma^i(y)||^2 / 2,   i < k,

and a market price of risk is any lam(y) with (sigma^i)' lam = mu_tilde_i
for all traded i.  A portfolio rule pi (fractions of wealth in the k
traded assets) generates the self-financing wealth dynamics

    dX = X (sigma pi)' lam dt + X (sigma pi)' dW.

All coefficient callables in this package broadcast: y of shape
(..., n) maps to drift (..., n) and diffusion (..., d, n).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import NoRiskPremiumSolution

# Singular values below SV_CUTOFF * (largest singular value) are treated
# as zero when pseudo-inverting the traded diffusion block.
SV_CUTOFF = 1e-12

# Consistency tolerance for the risk premium equations, relative to the
# magnitude of the traded drifts.
RISK_PREMIUM_TOL = 1e-10


@dataclass(frozen=True)
class CoefficientField:
    """A state-dependent coefficient y -> array of fixed trailing shape.

    ``fn`` must accept y of shape (..., n) and return an array of shape
    (..., *out_shape); scalar-valued fields use out_shape = ().
    """

    fn: Callable[[np.ndarray], np.ndarray]
    out_shape: tuple[int, ...]

    def __call__(self, y: np.ndarray) -> np.ndarray:
        out = np.asarray(self.fn(np.asarray(y, dtype=float)), dtype=float)
        m = len(self.out_shape)
        if m and out.shape[-m:] != self.out_shape:
            raise ValueError(
                f"coefficient returned trailing shape {out.shape[-m:]}, "
                f"declared {self.out_shape}"
            )
        return out


@dataclass(frozen=True)
class OUFactorSpec:
    """Marks factor ``index`` as Ornstein-Uhlenbeck for exact sampling.

    The factor solves dY = rate (mean - Y) dt + vol (loadings . dW) with
    unit-norm loadings, so its transition over a step h is Gaussian with
    mean Y e^{-rate h} + mean (1 - e^{-rate h}) and variance
    vol^2 (1 - e^{-2 rate h}) / (2 rate).
    """

    index: int
    rate: float
    mean: float
    vol: float
    loadings: tuple[float, ...]


@dataclass(frozen=True)
class FactorModel:
    """Diffusion factor model with k traded assets among n factors."""

    n: int
    k: int
    d: int
    mu: CoefficientField
    sigma: CoefficientField
    name: str = "custom"
    ou_factors: tuple[OUFactorSpec, ...] = field(default=())

    def __post_init__(self):
        if not (self.n >= 1 and 1 <= self.k <= self.n and self.d >= 1):
            raise ValueError(f"need n >= 1, 1 <= k <= n, d >= 1; got n={self.n} k={self.k} d={self.d}")
        if self.mu.out_shape != (self.n,):
            raise ValueError("mu must map to shape (n,)")
        if self.sigma.out_shape != (self.d, self.n):
            raise ValueError("sigma must map to shape (d, n)")


@dataclass(frozen=True)
class PortfolioRule:
    """Feedback allocation rule (t, y, x) -> pi in R^k (wealth fractions).

    fn_fields, when set, is an equivalent evaluation taking the already
    computed sigma(y) and lam(y); the simulator prefers it so rules that
    depend on the market fields don't re-evaluate them every step.
    """

    name: str
    k: int
    fn: Callable[[float, np.ndarray, np.ndarray], np.ndarray]
    fn_fields: Callable | None = None

    def __call__(self, t: float, y: np.ndarray, x: np.ndarray, sigma_val=None, lam_val=None) -> np.ndarray:
        if self.fn_fields is not None and sigma_val is not None:
            pi = self.fn_fields(t, np.asarray(y, dtype=float), np.asarray(x, dtype=float), sigma_val, lam_val)
        else:
            pi = self.fn(t, np.asarray(y, dtype=float), np.asarray(x, dtype=float))
        pi = np.asarray(pi, dtype=float)
        if pi.shape[-1] != self.k:
            raise ValueError(f"rule {self.name!r} returned trailing dim {pi.shape[-1]}, expected k={self.k}")
        return pi


def zero_rule(k: int) -> PortfolioRule:
    def fn(t, y, x):
        return np.zeros(np.broadcast_shapes(y.shape[:-1], np.shape(x)) + (k,))

    return PortfolioRule("zero", k, fn)


def constant_rule(pi: np.ndarray) -> PortfolioRule:
    vec = np.atleast_1d(np.asarray(pi, dtype=float))

    def fn(t, y, x):
        shape = np.broadcast_shapes(y.shape[:-1], np.shape(x))
        return np.broadcast_to(vec, shape + vec.shape).copy()

    return PortfolioRule(f"constant({vec.tolist()})", len(vec), fn)


def scaled_rule(rule: PortfolioRule, factor: float) -> PortfolioRule:
    fields = None
    if rule.fn_fields is not None:
        fields = lambda t, y, x, sv, lv: factor * rule.fn_fields(t, y, x, sv, lv)
    return PortfolioRule(
        f"{factor:g}*{rule.name}", rule.k, lambda t, y, x: factor * rule(t, y, x), fields
    )


def traded_excess_drift(model: FactorModel, y: np.ndarray, *, mu_val=None, sigma_val=None) -> np.ndarray:
    """Arithmetic excess drifts mu_tilde of the k traded assets, shape (..., k).

    mu_val/sigma_val take already-evaluated coefficient arrays so hot
    loops don't re-evaluate the fields.
    """
    y = np.asarray(y, dtype=float)
    s = (model.sigma(y) if sigma_val is None else sigma_val)[..., :, : model.k]
    mu = model.mu(y) if mu_val is None else mu_val
    return mu[..., : model.k] + 0.5 * np.sum(s * s, axis=-2)


def market_price_of_risk(model: FactorModel, y: np.ndarray, *, mu_val=None, sigma_val=None) -> np.ndarray:
    """Minimal-norm lam(y) in R^d with (sigma^i)' lam = mu_tilde_i, i < k.

    Raises NoRiskPremiumSolution when the equations are inconsistent
    (residual above RISK_PREMIUM_TOL relative to the drift magnitude).
    """
    y = np.asarray(y, dtype=float)
    m_t = traded_excess_drift(model, y, mu_val=mu_val, sigma_val=sigma_val)
    s = (model.sigma(y) if sigma_val is None else sigma_val)[..., :, : model.k]  # (..., d, k)
    if model.k == 1:
        # lam = col m_t / |col|^2 satisfies the single equation exactly,
        # so no residual check is needed beyond a nondegenerate column.
        col = s[..., :, 0]
        norm2 = np.sum(col * col, axis=-1)
        if not np.all(norm2 > 0.0):
            raise NoRiskPremiumSolution(float(np.max(np.abs(m_t))))
        return col * (m_t[..., 0] / norm2)[..., None]
    else:
        # Solve the k x d system sigma' lam = mu_tilde in the least-squares
        # sense; pinv discards directions below the singular-value cutoff.
        lam = np.einsum("...dk,...k->...d", np.linalg.pinv(np.swapaxes(s, -1, -2), rcond=SV_CUTOFF), m_t)
    resid = np.einsum("...dk,...d->...k", s, lam) - m_t
    scale = max(1.0, float(np.max(np.abs(m_t))) if m_t.size else 1.0)
    worst = float(np.max(np.abs(resid))) if resid.size else 0.0
    if worst > RISK_PREMIUM_TOL * scale:
        raise NoRiskPremiumSolution(worst)
    return lam


def wealth_dynamics(
    model: FactorModel,
    rule: PortfolioRule,
    t: float,
    y: np.ndarray,
    x: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Drift and diffusion vector of wealth under ``rule`` at (t, y, x).

    Returns (drift, diffusion) with shapes (...,) and (..., d):
    drift = x (sigma pi)' lam and diffusion = x sigma pi, where pi is
    zero-padded from R^k to R^n before applying sigma.
    """
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    if rule.k != model.k:
        raise ValueError(f"rule has k={rule.k}, model has k={model.k}")
    pi = rule(t, y, x)
    pad = np.zeros(pi.shape[:-1] + (model.n,))
    pad[..., : model.k] = pi
    sigpi = np.einsum("...dn,...n->...d", model.sigma(y), pad)
    lam = market_price_of_risk(model, y)
    drift = x * np.sum(sigpi * lam, axis=-1)
    diffusion = x[..., None] * sigpi
    return drift, diffusion


# ---------------------------------------------------------------------------
# Built-in models


def schwartz_model(a: float, b: float, sigma: float) -> FactorModel:
    """Single traded asset whose log price mean-reverts: dY = (a - bY)dt + sigma dW."""
    if b <= 0 or sigma <= 0:
        raise ValueError("need b > 0 and sigma > 0")
    a, b, sigma = float(a), float(b), float(sigma)

    def mu_fn(y):
        return a - b * y

    def sigma_fn(y):
        out = np.empty(y.shape[:-1] + (1, 1))
        out[...] = sigma
        return out

    return FactorModel(
        n=1,
        k=1,
        d=1,
        mu=CoefficientField(mu_fn, (1,)),
        sigma=CoefficientField(sigma_fn, (1, 1)),
        name="schwartz",
        ou_factors=(OUFactorSpec(index=0, rate=b, mean=a / b, vol=sigma, loadings=(1.0,)),),
    )


def stochvol_model(
    a: float, b: float, sigma: float, rho: float, kappa: float, mu: float
) -> FactorModel:
    """Traded asset with volatility e^{Y2} driven by an OU factor Y2.

    dS/S = (kappa - mu Y2) e^{Y2} dt + e^{Y2} dW1,
    dY2 = (a - b Y2) dt + sigma (rho dW1 + sqrt(1-rho^2) dW2),
    with Y1 = log S carried as the first factor.
    """
    if b <= 0 or sigma <= 0:
        raise ValueError("need b > 0 and sigma > 0")
    if not -1.0 <= rho <= 1.0:
        raise ValueError("need -1 <= rho <= 1")
    if mu < 0:
        raise ValueError("need mu >= 0")
    a, b, sigma, rho, kappa, mu = map(float, (a, b, sigma, rho, kappa, mu))
    rho_c = float(np.sqrt(max(0.0, 1.0 - rho * rho)))

    def mu_fn(y):
        v = np.exp(y[..., 1])
        out = np.empty_like(y)
        out[..., 0] = (kappa - mu * y[..., 1]) * v - 0.5 * v * v
        out[..., 1] = a - b * y[..., 1]
        return out

    def sigma_fn(y):
        v = np.exp(y[..., 1])
        out = np.zeros(y.shape[:-1] + (2, 2))
        out[..., 0, 0] = v
        out[..., 0, 1] = sigma * rho
        out[..., 1, 1] = sigma * rho_c
        return out

    return FactorModel(
        n=2,
        k=1,
        d=2,
        mu=CoefficientField(mu_fn, (2,)),
        sigma=CoefficientField(sigma_fn, (2, 2)),
        name="stochvol",
        ou_factors=(OUFactorSpec(index=1, rate=b, mean=a / b, vol=sigma, loadings=(rho, rho_c)),),
    )


def bs_model(lam: float, sigma: float) -> FactorModel:
    """Constant-coefficient traded asset with market price of risk ``lam``."""
    if sigma <= 0:
        raise ValueError("need sigma > 0")
    lam, sigma = float(lam), float(sigma)
    drift = lam * sigma - 0.5 * sigma * sigma  # log-price drift

    def mu_fn(y):
        out = np.empty_like(y)
        out[...] = drift
        return out

    def sigma_fn(y):
        out = np.empty(y.shape[:-1] + (1, 1))
        out[...] = sigma
        return out

    return FactorModel(
        n=1,
        k=1,
        d=1,
        mu=CoefficientField(mu_fn, (1,)),
        sigma=CoefficientField(sigma_fn, (1, 1)),
        name="bs",
    )


_BUILTINS = {"schwartz": schwartz_model, "stochvol": stochvol_model, "bs": bs_model}


def builtin_model(name: str, **params: float) -> FactorModel:
    """Construct a built-in model ("schwartz", "stochvol", "bs") by name."""
    try:
        factory = _BUILTINS[name]
    except KeyError:
        raise ValueError(f"unknown model {name!r}; available: {sorted(_BUILTINS)}") from None
    return factory(**params)
