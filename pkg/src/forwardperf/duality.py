"""Performance surfaces from dual surfaces and homothetic reductions.

A dual surface is a positive function u(t, y, z), strictly decreasing
in z, that solves a linear equation; the marginal performance is
recovered by inverting u in its last argument,

    Vtilde(t, y, x) = exp(z*)  where  u(t, y, z*) = x,

and integrating, V(t, y, x) = int_0^x Vtilde(t, y, s) ds.  All other
partials follow from implicit differentiation at z*:

    V_x = Vtilde,        V_xx = Vtilde / u_z,
    V_xy = -Vtilde u_y / u_z,
    z*_y = -u_y / u_z,   z*_yy = -(u_yy + 2 u_yz z*_y + u_zz z*_y^2) / u_z.

When the inverse marginal fails to be integrable at zero wealth (local
exponent <= -1, the logarithmic-utility boundary) the surface value is
anchored at x = 1 instead, V(t, y, 1) = 0, and flagged in metadata.

Homothetic preferences short-circuit the inversion: with risk aversion
gamma and correlation rho the reduction V = (x^gamma / gamma) u^delta,
delta = (1 - gamma) / (1 - gamma + rho^2 gamma), turns the fully
nonlinear value equation into the linear one solved by atom mixtures.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DegenerateDelta, NonIntegrableAtZero, OutOfRange
from .widder import HarmonicFunction

# Inner bracket-expansion / bisection budget for the z root-find.
MAX_DOUBLINGS = 200
MAX_BISECTIONS = 200
ROUND_TRIP_TOL = 1e-12

# Quadrature: absolute target 1e-10 (1 + |V|); the integrand's power
# singularity at s = 0 is handled by splitting at SPLIT and integrating
# the tail under the substitution s = tau^8.
QUAD_ABS_TOL = 1e-10
SPLIT = 1e-8
_TAIL_POWER = 8

# Exponents at or below -1 (up to probe noise) mean a non-integrable
# inverse marginal at zero wealth.
_NONINTEGRABLE_EDGE = -1.0 + 1e-6


def delta_exponent(gamma: float, rho: float) -> float:
    """delta = (1 - gamma) / (1 - gamma + rho^2 gamma) for gamma < 1, gamma != 0."""
    gamma, rho = float(gamma), float(rho)
    if not (gamma < 1.0 and gamma != 0.0):
        raise ValueError(f"need gamma < 1 and gamma != 0, got {gamma}")
    denom = 1.0 - gamma + rho * rho * gamma
    if abs(denom) < 1e-14:
        raise DegenerateDelta(f"1 - gamma + rho^2 gamma = {denom:.3e}")
    return (1.0 - gamma) / denom


@dataclass(frozen=True)
class HomotheticParams:
    """Power-utility preference parameters with the induced dual exponent."""

    gamma: float
    rho: float

    def __post_init__(self):
        if not -1.0 <= self.rho <= 1.0:
            raise ValueError("need -1 <= rho <= 1")
        object.__setattr__(self, "delta", delta_exponent(self.gamma, self.rho))


class DualSurface:
    """Positive u(t, y, z) strictly decreasing in z, with analytic partials.

    Wraps any object exposing value/d_t/d_y/d_yy/d_z/d_zz/d_yz of
    (t, y, z); construction probes positivity and monotonicity on a
    coarse lattice.
    """

    def __init__(self, inner, probe=None):
        self.inner = inner
        self.atoms = getattr(inner, "atoms", None)
        if probe is None:
            probe = (
                np.array([0.0, 0.5, 1.0, 2.0])[:, None, None],
                np.linspace(-2.0, 2.0, 7)[None, :, None],
                np.linspace(-2.0, 2.0, 7)[None, None, :],
            )
        t, y, z = probe
        vals = inner.value(t, y, z)
        if np.min(vals) <= 0.0:
            raise ValueError("dual surface must be strictly positive")
        if np.max(inner.d_z(t, y, z)) >= 0.0:
            raise ValueError("dual surface must be strictly decreasing in z")

    def value(self, t, y, z):
        return self.inner.value(t, y, z)

    def d_t(self, t, y, z):
        return self.inner.d_t(t, y, z)

    def d_y(self, t, y, z):
        return self.inner.d_y(t, y, z)

    def d_yy(self, t, y, z):
        return self.inner.d_yy(t, y, z)

    def d_z(self, t, y, z):
        return self.inner.d_z(t, y, z)

    def d_zz(self, t, y, z):
        return self.inner.d_zz(t, y, z)

    def d_yz(self, t, y, z):
        return self.inner.d_yz(t, y, z)


def _solve_log_inverse(dual, t, y, x) -> np.ndarray:
    """z* with u(t, y, z*) = x, elementwise over broadcast arguments.

    Expands a bracket geometrically (u is decreasing in z), then runs
    safeguarded Newton inside it; OutOfRange after MAX_DOUBLINGS failed
    expansions.  Atom mixtures get a fast path: only z moves during the
    solve, so w e^{-lam t} psi(y) is hoisted out of the iteration and
    each step costs one exponential per atom.
    """
    t, y, x = np.asarray(t, dtype=float), np.asarray(y, dtype=float), np.asarray(x, dtype=float)
    if np.any(x <= 0.0):
        raise ValueError("wealth must be strictly positive")
    shape = np.broadcast_shapes(t.shape, y.shape, x.shape)
    t, y, x = (np.broadcast_to(v, shape).astype(float) for v in (t, y, x))

    atoms = getattr(dual, "atoms", None)
    if atoms:
        th = np.array([a.theta if a.theta is not None else 0.0 for a in atoms])
        thr = th.reshape((-1,) + (1,) * len(shape))
        amp = np.stack([
            np.broadcast_to(np.asarray(
                a.weight * np.exp(-a.lam * t) * a.psi.psi_at(y), dtype=float), shape)
            for a in atoms
        ])

        def eval_u(zv):
            return (amp * np.exp(-thr * zv)).sum(axis=0)

        def eval_u_uz(zv):
            terms = amp * np.exp(-thr * zv)
            return terms.sum(axis=0), -(thr * terms).sum(axis=0)
    else:
        def eval_u(zv):
            return dual.value(t, y, zv)

        def eval_u_uz(zv):
            return dual.value(t, y, zv), dual.d_z(t, y, zv)

    lo = np.full(shape, -1.0)
    hi = np.full(shape, 1.0)
    f_lo = eval_u(lo) - x
    f_hi = eval_u(hi) - x
    for _ in range(MAX_DOUBLINGS):
        need_lo = f_lo < 0.0
        need_hi = f_hi > 0.0
        if not (need_lo.any() or need_hi.any()):
            break
        width = hi - lo
        if need_lo.any():
            lo = np.where(need_lo, lo - width, lo)
            f_lo = np.where(need_lo, eval_u(lo) - x, f_lo)
        if need_hi.any():
            hi = np.where(need_hi, hi + width, hi)
            f_hi = np.where(need_hi, eval_u(hi) - x, f_hi)
    if (f_lo < 0.0).any() or (f_hi > 0.0).any():
        bad = np.argwhere(f_lo < 0.0) if (f_lo < 0.0).any() else np.argwhere(f_hi > 0.0)
        raise OutOfRange(
            f"could not bracket x = {x[tuple(bad[0])]:.6g} after {MAX_DOUBLINGS} doublings"
        )
    # Safeguarded Newton: u is smooth with analytic u_z < 0, so Newton
    # steps clipped to the bracket converge in a handful of iterations;
    # any step that leaves the bracket (or hits a non-finite slope in
    # the deep tails) falls back to plain bisection.
    z = 0.5 * (lo + hi)
    active = np.ones(shape, dtype=bool)
    for _ in range(MAX_BISECTIONS):
        f, fz = eval_u_uz(z)
        f = f - x
        above = f > 0.0  # root lies to the right
        lo = np.where(active & above, z, lo)
        hi = np.where(active & ~above, z, hi)
        z_new = z - f / fz
        inside = (z_new > lo) & (z_new < hi) & np.isfinite(z_new)
        z_new = np.where(inside, z_new, 0.5 * (lo + hi))
        scale = np.maximum(1.0, np.abs(z))
        settled = (np.abs(z_new - z) <= 2e-16 * scale) | (hi - lo <= 2e-16 * scale)
        z = np.where(active, z_new, z)
        active &= ~settled
        if not active.any():
            break
    return z


def invert_dual_marginal(dual, t, y, x) -> np.ndarray:
    """Vtilde(t, y, x) = exp(z*) with u(t, y, z*) = x (broadcasting)."""
    return np.exp(_solve_log_inverse(dual, t, y, x))


# ---------------------------------------------------------------------------
# Adaptive Gauss-Kronrod quadrature (7-15 pair), vectorized integrands

_GK_X = np.array([
    -0.991455371120812639206854697526329,
    -0.949107912342758524526189684047851,
    -0.864864423359769072789712788640926,
    -0.741531185599394439863864773280788,
    -0.586087235467691130294144838258730,
    -0.405845151377397166906606412076961,
    -0.207784955007898467600689403773245,
    0.0,
    0.207784955007898467600689403773245,
    0.405845151377397166906606412076961,
    0.586087235467691130294144838258730,
    0.741531185599394439863864773280788,
    0.864864423359769072789712788640926,
    0.949107912342758524526189684047851,
    0.991455371120812639206854697526329,
])
_GK_WK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
    0.204432940075298892414161999234649,
    0.190350578064785409913256402421014,
    0.169004726639267902826583426598550,
    0.140653259715525918745189590510238,
    0.104790010322250183839876322541518,
    0.063092092629978553290700663189204,
    0.022935322010529224963732008058970,
])
_GK_WG = np.zeros(15)
_GK_WG[1::2] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
    0.381830050505118944950369775488975,
    0.279705391489276667901467771423780,
    0.129484966168869693270611432679082,
]


def _gk_panel(f, lo, hi):
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    vals = f(mid + half * _GK_X)
    k = half * float(vals @ _GK_WK)
    g = half * float(vals @ _GK_WG)
    return k, abs(k - g)


def adaptive_quadrature(
    f: Callable[[np.ndarray], np.ndarray],
    lo: float,
    hi: float,
    tol: Callable[[float], float],
    max_panels: int = 2000,
) -> float:
    """Integrate a vectorized integrand by adaptive Gauss-Kronrod refinement.

    ``tol`` maps the running estimate to the allowed absolute error, so
    targets of the form c (1 + |I|) resolve as the estimate settles.
    Refinement always splits the current worst panel, making the
    subdivision (and hence the result) deterministic.
    """
    if lo == hi:
        return 0.0
    sign = 1.0
    if hi < lo:
        lo, hi, sign = hi, lo, -1.0
    panels = [(lo, hi, *_gk_panel(f, lo, hi))]
    while len(panels) < max_panels:
        total = math.fsum(p[2] for p in panels)
        err = math.fsum(p[3] for p in panels)
        if err <= 0.25 * tol(total):
            break
        i = max(range(len(panels)), key=lambda j: panels[j][3])
        a, b, _, _ = panels.pop(i)
        m = 0.5 * (a + b)
        panels.append((a, m, *_gk_panel(f, a, m)))
        panels.append((m, b, *_gk_panel(f, m, b)))
    panels.sort(key=lambda p: p[0])
    return sign * math.fsum(p[2] for p in panels)


def _integrate_from_zero(f, upper: float, tol) -> float:
    """int_0^upper f(s) ds with the power-singular endpoint transformed away.

    On [0, min(SPLIT, upper)] substitutes s = tau^8 so integrands with
    local exponent in (-1, 0) become bounded near 0.
    """
    m = _TAIL_POWER
    cut = min(SPLIT, upper)

    def tail(tau):
        return f(tau ** m) * m * tau ** (m - 1)

    total = adaptive_quadrature(tail, 0.0, cut ** (1.0 / m), tol)
    if upper > cut:
        total += adaptive_quadrature(f, cut, upper, tol)
    return total


@dataclass(frozen=True)
class ValuePoint:
    """Performance value and partials recovered at a single (t, y, x)."""

    value: float
    d_x: float
    d_xx: float
    d_y: float
    d_xy: float


def _local_exponent(dual, t, y) -> float:
    v1 = invert_dual_marginal(dual, t, y, SPLIT)
    v2 = invert_dual_marginal(dual, t, y, 2.0 * SPLIT)
    return float(np.log2(v2 / v1))


def integrate_to_value(dual, t: float, y: float, x: float) -> ValuePoint:
    """V(t, y, x) = int_0^x Vtilde ds plus implicit-function partials.

    Raises NonIntegrableAtZero when the inverse marginal's local
    exponent at zero wealth is <= -1 (no finite integral from 0; the
    anchored surface handles that regime).
    """
    t, y, x = float(t), float(y), float(x)
    p = _local_exponent(dual, t, y)
    if p <= _NONINTEGRABLE_EDGE:
        raise NonIntegrableAtZero(p)

    def vtilde(s):
        return invert_dual_marginal(dual, t, y, s)

    def vtilde_y(s):
        z = _solve_log_inverse(dual, t, y, s)
        return -np.exp(z) * dual.d_y(t, y, z) / dual.d_z(t, y, z)

    tol = lambda est: QUAD_ABS_TOL * (1.0 + abs(est))
    value = _integrate_from_zero(vtilde, x, tol)
    v_y = _integrate_from_zero(vtilde_y, x, tol)

    z = float(_solve_log_inverse(dual, t, y, x))
    vt = math.exp(z)
    uz = float(dual.d_z(t, y, z))
    uy = float(dual.d_y(t, y, z))
    return ValuePoint(value=value, d_x=vt, d_xx=vt / uz, d_y=v_y, d_xy=-vt * uy / uz)


# ---------------------------------------------------------------------------
# Performance surfaces


class PerformanceSurface:
    """Concave increasing wealth utility surface V(t, y, x).

    Subclasses provide value and the analytic partials d_x, d_xx, d_y,
    d_xy, d_t, d_yy; ``factor_coord`` names the component of a model's
    factor vector that the scalar y argument refers to.
    """

    construction = "abstract"

    def __init__(self, factor_coord: int = 0, metadata: dict | None = None):
        self.factor_coord = factor_coord
        self.metadata = dict(metadata or {})

    def value(self, t, y, x):
        raise NotImplementedError

    def d_x(self, t, y, x):
        raise NotImplementedError

    def d_xx(self, t, y, x):
        raise NotImplementedError

    def d_y(self, t, y, x):
        raise NotImplementedError

    def d_xy(self, t, y, x):
        raise NotImplementedError

    def d_t(self, t, y, x):
        raise NotImplementedError

    def d_yy(self, t, y, x):
        raise NotImplementedError

    def foc_ratios(self, t, y, x):
        """(V_x/V_xx, V_xy/V_xx), the only surface inputs of the portfolio FOC.

        Subclasses override where the ratios simplify; the default forms
        them from the analytic partials.
        """
        vxx = self.d_xx(t, y, x)
        return self.d_x(t, y, x) / vxx, self.d_xy(t, y, x) / vxx


class HomotheticSurface(PerformanceSurface):
    """V(t, y, x) = (x^gamma / gamma) u(t, y)^delta for a positive harmonic u."""

    construction = "homothetic"

    def __init__(
        self,
        harmonic: HarmonicFunction,
        params: HomotheticParams,
        operator=None,
        factor_coord: int = 0,
    ):
        super().__init__(factor_coord, {"gamma": params.gamma, "rho": params.rho, "delta": params.delta})
        if harmonic.mode != "standard":
            raise ValueError("homothetic reduction takes a standard harmonic function")
        self.harmonic = harmonic
        self.params = params
        self.operator = operator  # linear operator solved by ``harmonic``, when known

    def _xg(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x <= 0.0):
            raise ValueError("wealth must be strictly positive")
        return x

    def value(self, t, y, x):
        x = self._xg(x)
        g = self.params.gamma
        return x ** g / g * self.harmonic.value(t, y) ** self.params.delta

    def d_x(self, t, y, x):
        x = self._xg(x)
        g = self.params.gamma
        return x ** (g - 1.0) * self.harmonic.value(t, y) ** self.params.delta

    def d_xx(self, t, y, x):
        x = self._xg(x)
        g = self.params.gamma
        return (g - 1.0) * x ** (g - 2.0) * self.harmonic.value(t, y) ** self.params.delta

    def d_y(self, t, y, x):
        x = self._xg(x)
        g, d = self.params.gamma, self.params.delta
        u = self.harmonic.value(t, y)
        return x ** g / g * d * u ** (d - 1.0) * self.harmonic.d_y(t, y)

    def d_xy(self, t, y, x):
        x = self._xg(x)
        g, d = self.params.gamma, self.params.delta
        u = self.harmonic.value(t, y)
        return x ** (g - 1.0) * d * u ** (d - 1.0) * self.harmonic.d_y(t, y)

    def d_t(self, t, y, x):
        x = self._xg(x)
        g, d = self.params.gamma, self.params.delta
        u = self.harmonic.value(t, y)
        return x ** g / g * d * u ** (d - 1.0) * self.harmonic.d_t(t, y)

    def d_yy(self, t, y, x):
        x = self._xg(x)
        g, d = self.params.gamma, self.params.delta
        u = self.harmonic.value(t, y)
        uy = self.harmonic.d_y(t, y)
        return x ** g / g * d * ((d - 1.0) * u ** (d - 2.0) * uy * uy + u ** (d - 1.0) * self.harmonic.d_yy(t, y))

    def foc_ratios(self, t, y, x):
        # The u^delta factors cancel: V_x/V_xx = x/(gamma-1) and
        # V_xy/V_xx = delta x u_y / ((gamma-1) u).
        x = self._xg(x)
        g1 = self.params.gamma - 1.0
        ratio = self.harmonic.d_y(t, y) / self.harmonic.value(t, y)
        return x / g1, self.params.delta * x * ratio / g1


def homothetic_value(
    harmonic: HarmonicFunction,
    params: HomotheticParams,
    operator=None,
    factor_coord: int = 0,
) -> HomotheticSurface:
    """Wrap a positive harmonic function as a homothetic performance surface."""
    return HomotheticSurface(harmonic, params, operator, factor_coord)


class DualInversionSurface(PerformanceSurface):
    """Performance surface recovered by inverting a dual surface.

    For atom-mixture duals whose exponents all satisfy theta > 1 the
    wealth integral collapses to the closed form

        V = sum_i w_i theta_i/(theta_i - 1) Phi_i(t, y) exp(-(theta_i - 1) z*),

    obtained by substituting s = u(t, y, z) in int_0^x Vtilde ds; only
    the root z* is numeric.  Other duals fall back to adaptive
    quadrature per evaluation, anchored at x = 1 whenever the inverse
    marginal is not integrable at 0 (metadata flag "anchored_at_one").
    """

    construction = "dual-inversion"

    def __init__(self, dual: DualSurface, factor_coord: int = 0):
        self.dual = dual
        self._closed = None
        atoms = getattr(dual, "atoms", None)
        if atoms and all(
            a.theta is not None and a.theta > 1.0 + 1e-9 and a.psi.closed_form is not None
            and a.psi.closed_form.tag in ("const", "exp", "quadexp")
            for a in atoms
        ):
            lam = np.array([a.lam for a in atoms])
            th = np.array([a.theta for a in atoms])
            w = np.array([a.weight for a in atoms])
            c1 = np.array([
                a.psi.closed_form.params[0] if a.psi.closed_form.params else 0.0 for a in atoms
            ])
            c2 = np.array([
                a.psi.closed_form.params[1] if len(a.psi.closed_form.params) > 1 else 0.0
                for a in atoms
            ])
            self._closed = (lam, th, w, c1, c2)
        anchored = False
        if self._closed is None:
            anchored = _local_exponent(dual, 0.0, 0.0) <= _NONINTEGRABLE_EDGE
        route = "closed-form" if self._closed is not None else "quadrature"
        super().__init__(factor_coord, {"anchored_at_one": anchored, "value_route": route})

    # -- closed-form helpers ------------------------------------------------
    def _closed_terms(self, t, y, x):
        lam, th, w, c1, c2 = self._closed
        t, y, x = np.asarray(t, dtype=float), np.asarray(y, dtype=float), np.asarray(x, dtype=float)
        z = _solve_log_inverse(self.dual, t, y, x)
        shp = z.shape
        tt, yy = np.broadcast_to(t, shp)[..., None], np.broadcast_to(y, shp)[..., None]
        phi = np.exp(c1 * yy + c2 * yy * yy - lam * tt)
        e = np.exp(-(th - 1.0) * z[..., None])
        pref = w * th / (th - 1.0)
        return z, pref * phi * e, c1 + 2.0 * c2 * yy, lam, th

    def _z_partials(self, t, y, z):
        uz = self.dual.d_z(t, y, z)
        uy = self.dual.d_y(t, y, z)
        ut = self.dual.d_t(t, y, z)
        zy = -uy / uz
        zt = -ut / uz
        zyy = -(self.dual.d_yy(t, y, z) + 2.0 * self.dual.d_yz(t, y, z) * zy
                + self.dual.d_zz(t, y, z) * zy * zy) / uz
        return uz, zy, zt, zyy

    # -- surface API ---------------------------------------------------------
    def value(self, t, y, x):
        if self._closed is not None:
            _, terms, _, _, _ = self._closed_terms(t, y, x)
            return np.sum(terms, axis=-1)
        return self._quad_field(t, y, x, "value")

    def d_x(self, t, y, x):
        return invert_dual_marginal(self.dual, t, y, x)

    def d_xx(self, t, y, x):
        z = _solve_log_inverse(self.dual, t, y, x)
        return np.exp(z) / self.dual.d_z(t, y, z)

    def d_xy(self, t, y, x):
        z = _solve_log_inverse(self.dual, t, y, x)
        return -np.exp(z) * self.dual.d_y(t, y, z) / self.dual.d_z(t, y, z)

    def foc_ratios(self, t, y, x):
        # V_x/V_xx = u_z(z*) and V_xy/V_xx = -u_y(z*): one root-find.
        z = _solve_log_inverse(self.dual, t, y, x)
        return self.dual.d_z(t, y, z), -self.dual.d_y(t, y, z)

    def d_y(self, t, y, x):
        if self._closed is not None:
            z, terms, psi_log, lam, th = self._closed_terms(t, y, x)
            _, zy, _, _ = self._z_partials(np.broadcast_to(t, z.shape), np.broadcast_to(y, z.shape), z)
            return np.sum(terms * (psi_log - (th - 1.0) * zy[..., None]), axis=-1)
        return self._quad_field(t, y, x, "y")

    def d_t(self, t, y, x):
        if self._closed is not None:
            z, terms, _, lam, th = self._closed_terms(t, y, x)
            _, _, zt, _ = self._z_partials(np.broadcast_to(t, z.shape), np.broadcast_to(y, z.shape), z)
            return np.sum(terms * (-lam - (th - 1.0) * zt[..., None]), axis=-1)
        return self._quad_field(t, y, x, "t")

    def d_yy(self, t, y, x):
        if self._closed is not None:
            z, terms, psi_log, lam, th = self._closed_terms(t, y, x)
            lam2, th2, w, c1, c2 = self._closed
            _, zy, _, zyy = self._z_partials(np.broadcast_to(t, z.shape), np.broadcast_to(y, z.shape), z)
            inner = psi_log - (th - 1.0) * zy[..., None]
            return np.sum(terms * (inner * inner + 2.0 * c2 - (th - 1.0) * zyy[..., None]), axis=-1)
        return self._quad_field(t, y, x, "yy")

    # -- quadrature fallback ---------------------------------------------------
    def _quad_field(self, t, y, x, kind):
        t, y, x = np.asarray(t, dtype=float), np.asarray(y, dtype=float), np.asarray(x, dtype=float)
        shape = np.broadcast_shapes(t.shape, y.shape, x.shape)
        tb, yb, xb = (np.broadcast_to(v, shape).ravel() for v in (t, y, x))
        out = np.empty(tb.shape)
        for i in range(tb.size):
            out[i] = self._quad_point(tb[i], yb[i], xb[i], kind)
        return out.reshape(shape) if shape else float(out[0])

    def _quad_point(self, t, y, x, kind):
        anchored = self.metadata["anchored_at_one"]

        def integrand(s):
            z = _solve_log_inverse(self.dual, t, y, s)
            if kind == "value":
                return np.exp(z)
            uz, zy, zt, zyy = self._z_partials(t, y, z)
            if kind == "y":
                return np.exp(z) * zy
            if kind == "t":
                return np.exp(z) * zt
            return np.exp(z) * (zy * zy + zyy)

        tol = lambda est: QUAD_ABS_TOL * (1.0 + abs(est))
        if anchored:
            return adaptive_quadrature(integrand, 1.0, x, tol)
        p = _local_exponent(self.dual, t, y)
        if p <= _NONINTEGRABLE_EDGE:
            raise NonIntegrableAtZero(p)
        return _integrate_from_zero(integrand, x, tol)


def dual_to_performance(dual: DualSurface, factor_coord: int = 0) -> DualInversionSurface:
    """Performance surface of a dual surface (closed form for atom duals)."""
    return DualInversionSurface(dual, factor_coord)


def export_surface_csv(surface: PerformanceSurface, t_vals, y_vals, x_vals, path: str) -> None:
    """Write rows (t, y, x, V, V_x, V_xx), row-major in (t, y, x), 17 digits."""
    with open(path, "w", newline="") as fh:
        fh.write("t,y,x,V,V_x,V_xx\n")
        for t in np.asarray(t_vals, dtype=float):
            for y in np.asarray(y_vals, dtype=float):
                xs = np.asarray(x_vals, dtype=float)
                v = surface.value(t, y, xs)
                vx = surface.d_x(t, y, xs)
                vxx = surface.d_xx(t, y, xs)
                for j, x in enumerate(xs):
                    fh.write(
                        f"{t:.17g},{y:.17g},{x:.17g},{v[j]:.17g},{vx[j]:.17g},{vxx[j]:.17g}\n"
                    )
