"""Space-time harmonic functions built from spectral atoms.

A standard atom is a triple (lam, w, psi) with psi a positive solution
of (L - lam) psi = 0 and psi(0) = 1; the mixture

    u(t, y) = sum_i w_i exp(-lam_i t) psi_i(y)

is then a positive solution of u_t + L u = 0 for all horizons.  For the
constant-coefficient operator L = d^2/dy^2 this reduces, through the
change of variables z = +-sqrt(lam), to the classical representation
u(t, y) = sum_j w_j exp(z_j y - z_j^2 t) of positive heat solutions.

Degenerate atoms carry an extra exponent theta and represent solutions
u(t, y, z) = sum_i w_i exp(-lam_i t - theta_i z) psi_i(y) of equations
with a non-diffusing direction z.  Two classical fixtures show that the
mixture form genuinely requires its hypotheses: a compactly supported
traveling wave for the constant-coefficient equation, and an explicit
exponential solution of the Kolmogorov equation u_t + u_yy + y u_z = 0
that no atom mixture reproduces.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .elliptic import (
    Coefficient,
    EllipticOperator1D,
    MinimalSolution,
    PsiClosedForm,
    _as_callable,
    ode_residual,
    psi_exp,
    psi_quadexp,
)
from .errors import AtomInconsistent, BadParams, NegativeLambda

MAX_ATOMS = 10_000
ATOM_RESIDUAL_TOL = 1e-6


@dataclass(frozen=True)
class SpectralAtom:
    """One spectral component: weight on exp(-lam t [- theta z]) psi(y)."""

    lam: float
    weight: float
    psi: MinimalSolution
    theta: float | None = None

    def __post_init__(self):
        if self.weight < 0.0:
            raise ValueError(f"atom weight must be >= 0, got {self.weight}")


class HarmonicFunction:
    """Finite atom mixture with analytic partial derivatives.

    Standard mode exposes value/d_t/d_y/d_yy of u(t, y); degenerate mode
    additionally exposes d_z/d_zz/d_yz of u(t, y, z).  All evaluators
    broadcast over array arguments.
    """

    def __init__(self, atoms: Sequence[SpectralAtom], mode: str, coeffs=None):
        if mode not in ("standard", "degenerate"):
            raise ValueError("mode must be 'standard' or 'degenerate'")
        if not 1 <= len(atoms) <= MAX_ATOMS:
            raise ValueError(f"need between 1 and {MAX_ATOMS} atoms, got {len(atoms)}")
        self.atoms = tuple(atoms)
        self.mode = mode
        self.coeffs = coeffs  # degenerate equation coefficients, when known

    def _sum(self, t, y, z, kind):
        t = np.asarray(t, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.mode == "degenerate":
            if z is None:
                raise ValueError("degenerate harmonic functions need a z argument")
            z = np.asarray(z, dtype=float)
            shape = np.broadcast_shapes(t.shape, y.shape, z.shape)
        else:
            if z is not None:
                raise ValueError("standard harmonic functions take no z argument")
            shape = np.broadcast_shapes(t.shape, y.shape)
        out = np.zeros(shape)
        for atom in self.atoms:
            th = atom.theta if atom.theta is not None else 0.0
            expo = -atom.lam * t if z is None else -atom.lam * t - th * z
            if kind == "value":
                prof, fac = atom.psi.psi_at(y), 1.0
            elif kind == "t":
                prof, fac = atom.psi.psi_at(y), -atom.lam
            elif kind == "y":
                prof, fac = atom.psi.dpsi_at(y), 1.0
            elif kind == "yy":
                prof, fac = atom.psi.d2psi_at(y), 1.0
            elif kind == "z":
                prof, fac = atom.psi.psi_at(y), -th
            elif kind == "zz":
                prof, fac = atom.psi.psi_at(y), th * th
            elif kind == "yz":
                prof, fac = atom.psi.dpsi_at(y), -th
            else:  # pragma: no cover
                raise ValueError(kind)
            out += (fac * atom.weight) * np.exp(expo) * prof
        return out

    def value(self, t, y, z=None):
        return self._sum(t, y, z, "value")

    def d_t(self, t, y, z=None):
        return self._sum(t, y, z, "t")

    def d_y(self, t, y, z=None):
        return self._sum(t, y, z, "y")

    def d_yy(self, t, y, z=None):
        return self._sum(t, y, z, "yy")

    def d_z(self, t, y, z=None):
        return self._sum(t, y, z, "z")

    def d_zz(self, t, y, z=None):
        return self._sum(t, y, z, "zz")

    def d_yz(self, t, y, z=None):
        return self._sum(t, y, z, "yz")


def build_harmonic(atoms: Sequence[SpectralAtom], op: EllipticOperator1D) -> HarmonicFunction:
    """Assemble u(t,y) = sum w exp(-lam t) psi(y) after certifying each atom.

    Every profile must solve (op - lam) psi = 0 with residual below
    ATOM_RESIDUAL_TOL; the first failure raises AtomInconsistent with the
    offending index.
    """
    for i, atom in enumerate(atoms):
        if atom.theta is not None:
            raise ValueError(f"atom {i} carries theta; use build_degenerate")
        r = ode_residual(op, atom.lam, atom.psi)
        if not r < ATOM_RESIDUAL_TOL:
            raise AtomInconsistent(i, r, ATOM_RESIDUAL_TOL)
    return HarmonicFunction(atoms, "standard")


def classical_heat(z_atoms: Sequence[tuple[float, float]]) -> HarmonicFunction:
    """u(t,y) = sum w exp(z y - z^2 t) from atoms (z, weight) on the real line."""
    atoms = []
    for z, w in z_atoms:
        if w < 0.0:
            raise ValueError("weights must be >= 0")
        atoms.append(SpectralAtom(lam=float(z) ** 2, weight=float(w), psi=MinimalSolution.from_closed_form(float(z) ** 2, psi_exp(float(z)))))
    return HarmonicFunction(atoms, "standard")


def lambda_to_z_change_of_vars(
    lam_atoms: Sequence[tuple[float, float, float]]
) -> list[tuple[float, float]]:
    """Map eigenvalue atoms (lam, c1, c2) to wave-number atoms (z, w).

    c1 weights the decreasing profile exp(-y sqrt(lam)) and c2 the
    increasing one; they land at z = -sqrt(lam) and z = +sqrt(lam).  The
    two images collide at lam = 0, where the weights add.  Zero-weight
    images are dropped.
    """
    out: list[tuple[float, float]] = []
    for lam, c1, c2 in lam_atoms:
        if lam < 0.0:
            raise NegativeLambda(f"no positive profiles exist for lam = {lam:.6g}")
        if c1 < 0.0 or c2 < 0.0:
            raise ValueError("weights must be >= 0")
        root = math.sqrt(lam)
        if root == 0.0:
            if c1 + c2 > 0.0:
                out.append((0.0, c1 + c2))
            continue
        if c1 > 0.0:
            out.append((-root, c1))
        if c2 > 0.0:
            out.append((root, c2))
    return out


@dataclass(frozen=True)
class DegenerateCoeffs:
    """Coefficients of u_t + a u_yy + q u_yz + p u_zz + b u_y + r u_z + c u = 0.

    All six are functions of y alone (floats promote to constants).
    """

    a: Coefficient
    q: Coefficient
    p: Coefficient
    b: Coefficient
    r: Coefficient
    c: Coefficient = 0.0

    def evaluate(self, y):
        y = np.asarray(y, dtype=float)
        return tuple(
            np.broadcast_to(np.asarray(_as_callable(f)(y), dtype=float), y.shape)
            for f in (self.a, self.q, self.p, self.b, self.r, self.c)
        )

    def shifted_operator(self, theta: float) -> EllipticOperator1D:
        """Elliptic operator felt by a profile with z-exponent theta.

        Substituting u = exp(-lam t - theta z) psi(y) into the equation
        leaves a psi'' + (b - theta q) psi' + (c + theta^2 p - theta r - lam) psi = 0.
        """
        th = float(theta)
        a_f, q_f, p_f, b_f, r_f, c_f = (
            _as_callable(self.a), _as_callable(self.q), _as_callable(self.p),
            _as_callable(self.b), _as_callable(self.r), _as_callable(self.c),
        )
        return EllipticOperator1D(
            a=a_f,
            b=lambda y: b_f(y) - th * q_f(y),
            c=lambda y: c_f(y) + th * th * p_f(y) - th * r_f(y),
        )

    @classmethod
    def from_model_1d(cls, sigma: Coefficient, lam: Coefficient, mu: Coefficient) -> "DegenerateCoeffs":
        """Dual-equation coefficients of a one-factor complete market.

        With factor volatility sigma(y), risk premium lam(y) and factor
        drift mu(y), the dual transform of the value equation reads
        u_t + (sigma^2/2) u_yy - sigma lam u_yz + (lam^2/2) u_zz
            + (mu - sigma lam) u_y + (lam^2/2) u_z = 0.
        """
        s_f, l_f, m_f = _as_callable(sigma), _as_callable(lam), _as_callable(mu)
        return cls(
            a=lambda y: 0.5 * s_f(y) ** 2,
            q=lambda y: -s_f(y) * l_f(y),
            p=lambda y: 0.5 * l_f(y) ** 2,
            b=lambda y: m_f(y) - s_f(y) * l_f(y),
            r=lambda y: 0.5 * l_f(y) ** 2,
            c=0.0,
        )


def build_degenerate(atoms: Sequence[SpectralAtom], coeffs: DegenerateCoeffs) -> HarmonicFunction:
    """Assemble u(t,y,z) = sum w exp(-lam t - theta z) psi(y).

    Each profile is certified against the theta-shifted elliptic operator
    of ``coeffs``; failures raise AtomInconsistent.
    """
    for i, atom in enumerate(atoms):
        if atom.theta is None:
            raise ValueError(f"atom {i} lacks theta; use build_harmonic")
        r = ode_residual(coeffs.shifted_operator(atom.theta), atom.lam, atom.psi)
        if not r < ATOM_RESIDUAL_TOL:
            raise AtomInconsistent(i, r, ATOM_RESIDUAL_TOL)
    return HarmonicFunction(atoms, "degenerate", coeffs=coeffs)


# ---------------------------------------------------------------------------
# Counterexample fixtures


def _bump(s):
    """Smooth compactly supported profile with bump(0) = 1, support (-1, 1)."""
    s = np.asarray(s, dtype=float)
    inside = np.abs(s) < 1.0
    sc = np.where(inside, s, 0.0)
    g = -1.0 / (1.0 - sc * sc)
    val = np.where(inside, np.exp(1.0 + g), 0.0)
    gp = -2.0 * sc / (1.0 - sc * sc) ** 2
    gpp = -(2.0 + 6.0 * sc * sc) / (1.0 - sc * sc) ** 3
    d1 = np.where(inside, val * gp, 0.0)
    d2 = np.where(inside, val * (gpp + gp * gp), 0.0)
    return val, d1, d2


class TravelingWaveSurface:
    """Compactly supported wave u = bump(alpha t - beta y - z).

    With alpha = lam (lam - sigma) / 2 and beta = lam / sigma this solves
    the constant-coefficient dual equation while being positive on a
    moving slab only, so it admits no atom-mixture representation.
    """

    def __init__(self, sigma: float, lam: float):
        self.sigma = float(sigma)
        self.lam = float(lam)
        self.alpha = 0.5 * lam * (lam - sigma)
        self.beta = lam / sigma

    def _phase(self, t, y, z):
        t, y, z = (np.asarray(v, dtype=float) for v in (t, y, z))
        return self.alpha * t - self.beta * y - z

    def value(self, t, y, z):
        return _bump(self._phase(t, y, z))[0]

    def d_t(self, t, y, z):
        return self.alpha * _bump(self._phase(t, y, z))[1]

    def d_y(self, t, y, z):
        return -self.beta * _bump(self._phase(t, y, z))[1]

    def d_z(self, t, y, z):
        return -_bump(self._phase(t, y, z))[1]

    def d_yy(self, t, y, z):
        return self.beta ** 2 * _bump(self._phase(t, y, z))[2]

    def d_zz(self, t, y, z):
        return _bump(self._phase(t, y, z))[2]

    def d_yz(self, t, y, z):
        return self.beta * _bump(self._phase(t, y, z))[2]


class KolmogorovSurface:
    """u = exp(3z - 3ty - 3t^3), an exact solution of u_t + u_yy + y u_z = 0.

    Positive and globally smooth, yet outside every atom mixture for this
    operator: separable solutions exp(-lam t - theta z) psi(y) would need
    psi'' + (theta y - lam) psi = 0, which has no positive solution on
    the whole line (Airy-type oscillation on one side).
    """

    def _u(self, t, y, z):
        t, y, z = (np.asarray(v, dtype=float) for v in (t, y, z))
        return np.exp(3.0 * z - 3.0 * t * y - 3.0 * t ** 3)

    def value(self, t, y, z):
        return self._u(t, y, z)

    def d_t(self, t, y, z):
        t, y = np.asarray(t, dtype=float), np.asarray(y, dtype=float)
        return (-3.0 * y - 9.0 * t * t) * self._u(t, y, z)

    def d_y(self, t, y, z):
        return -3.0 * np.asarray(t, dtype=float) * self._u(t, y, z)

    def d_z(self, t, y, z):
        return 3.0 * self._u(t, y, z)

    def d_yy(self, t, y, z):
        t = np.asarray(t, dtype=float)
        return 9.0 * t * t * self._u(t, y, z)

    def d_zz(self, t, y, z):
        return 9.0 * self._u(t, y, z)

    def d_yz(self, t, y, z):
        return -9.0 * np.asarray(t, dtype=float) * self._u(t, y, z)


def counterexample_fixture(name: str, sigma: float = 1.0, lam: float = 2.0):
    """Return (surface, coeffs) for a named no-representation example.

    "bs_traveling_wave" needs lam not in {0, sigma} (the wave degenerates
    there and BadParams is raised); "kolmogorov" takes no parameters.
    """
    if name == "bs_traveling_wave":
        if abs(lam) < 1e-12 or abs(lam - sigma) < 1e-12:
            raise BadParams(f"traveling wave degenerates for lam in {{0, sigma}}; got lam={lam}, sigma={sigma}")
        surface = TravelingWaveSurface(sigma, lam)
        coeffs = DegenerateCoeffs.from_model_1d(sigma=sigma, lam=lam, mu=lam * sigma - 0.5 * sigma ** 2)
        return surface, coeffs
    if name == "kolmogorov":
        return KolmogorovSurface(), DegenerateCoeffs(a=1.0, q=0.0, p=0.0, b=0.0, r=lambda y: np.asarray(y, dtype=float), c=0.0)
    raise ValueError(f"unknown fixture {name!r}")


# ---------------------------------------------------------------------------
# Atom serialization


def atoms_to_csv(atoms: Sequence[SpectralAtom], path: str) -> None:
    """Write closed-form atoms as rows (lambda, theta, weight, psi_tag, psi_params)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["lambda", "theta", "weight", "psi_tag", "psi_params"])
        for atom in atoms:
            if atom.psi.closed_form is None:
                raise ValueError("only closed-form profiles serialize to CSV")
            form = atom.psi.closed_form
            writer.writerow([
                f"{atom.lam:.17g}",
                "" if atom.theta is None else f"{atom.theta:.17g}",
                f"{atom.weight:.17g}",
                form.tag,
                " ".join(f"{p:.17g}" for p in form.params),
            ])


def atoms_from_csv(path: str, grid: np.ndarray | None = None) -> list[SpectralAtom]:
    atoms = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            form = PsiClosedForm(row["psi_tag"], tuple(float(p) for p in row["psi_params"].split()))
            atoms.append(SpectralAtom(
                lam=float(row["lambda"]),
                weight=float(row["weight"]),
                psi=MinimalSolution.from_closed_form(float(row["lambda"]), form, grid),
                theta=float(row["theta"]) if row["theta"] else None,
            ))
    return atoms
