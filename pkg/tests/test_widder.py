"""Spectral construction of space-time harmonic functions.

The classical heat route u(t,y) = sum w exp(z y - z^2 t) is exact, so it
serves as the oracle for everything built through eigenvalue atoms: the
change of variables lam -> +-sqrt(lam) composed with atom assembly must
reproduce it to rounding.
"""

import math

import numpy as np
import pytest

from forwardperf import (
    AtomInconsistent,
    BadParams,
    DegenerateCoeffs,
    HarmonicFunction,
    MinimalSolution,
    NegativeLambda,
    SpectralAtom,
    atoms_from_csv,
    atoms_to_csv,
    build_degenerate,
    build_harmonic,
    classical_heat,
    counterexample_fixture,
    heat_fundamental,
    lambda_to_z_change_of_vars,
    laplacian_1d,
    psi_exp,
    schwartz_atoms,
    SchwartzParams,
)

ORACLE_REL_TOL = 1e-10
FD_STEP = 1e-5
FD_TOL = 1e-6


def _random_lam_atoms(rng, size):
    """Atoms (lam, c1, c2) with lam >= 0 and nonnegative weights."""
    lams = rng.uniform(0.0, 4.0, size)
    c1 = rng.uniform(0.0, 2.0, size)
    c2 = rng.uniform(0.0, 2.0, size)
    return [(float(l), float(a), float(b)) for l, a, b in zip(lams, c1, c2)]


class TestClassicalHeat:
    def test_value_is_exponential_mixture(self) -> None:
        atoms = [(0.7, 2.0), (-1.3, 0.5)]
        u = classical_heat(atoms)
        t = np.linspace(0.0, 2.0, 5)[:, None]
        y = np.linspace(-3.0, 3.0, 7)[None, :]
        expect = sum(w * np.exp(z * y - z * z * t) for z, w in atoms)
        np.testing.assert_allclose(u.value(t, y), expect, rtol=1e-14)

    def test_partials_close_the_heat_equation(self) -> None:
        u = classical_heat([(1.1, 1.0), (-0.4, 3.0)])
        t = np.linspace(0.0, 2.0, 4)[:, None]
        y = np.linspace(-2.0, 2.0, 5)[None, :]
        resid = u.d_t(t, y) + u.d_yy(t, y)
        assert np.max(np.abs(resid)) < 1e-12

    def test_negative_weight_rejected(self) -> None:
        with pytest.raises(ValueError):
            classical_heat([(1.0, -0.1)])


class TestChangeOfVariables:
    def test_maps_to_signed_roots(self) -> None:
        out = lambda_to_z_change_of_vars([(4.0, 0.5, 2.0)])
        assert out == [(-2.0, 0.5), (2.0, 2.0)]

    def test_zero_eigenvalue_collides(self) -> None:
        """Both profiles degenerate to the constant at lam = 0, so the
        weights add on the single image z = 0."""
        assert lambda_to_z_change_of_vars([(0.0, 0.3, 0.4)]) == [(0.0, 0.7)]

    def test_zero_weights_dropped(self) -> None:
        assert lambda_to_z_change_of_vars([(1.0, 0.0, 1.5)]) == [(1.0, 1.5)]

    def test_negative_eigenvalue_rejected(self) -> None:
        with pytest.raises(NegativeLambda):
            lambda_to_z_change_of_vars([(-0.5, 1.0, 1.0)])


class TestBuildHarmonic:
    def test_composition_reproduces_classical_heat(self) -> None:
        """Random eigenvalue atoms, pushed through the change of variables
        and reassembled from exponential profiles, must agree with the
        direct wave-number construction everywhere."""
        rng = np.random.default_rng(7)
        lam_atoms = _random_lam_atoms(rng, 12)
        z_atoms = lambda_to_z_change_of_vars(lam_atoms)

        spectral = []
        for lam, c1, c2 in lam_atoms:
            root = math.sqrt(lam)
            for c, direction in ((c1, "decreasing"), (c2, "increasing")):
                if c > 0.0:
                    spectral.append(SpectralAtom(lam, c, heat_fundamental(lam, direction)))
        u = build_harmonic(spectral, laplacian_1d())
        ref = classical_heat(z_atoms)

        t = np.linspace(0.0, 2.0, 9)[:, None]
        y = np.linspace(-3.0, 3.0, 25)[None, :]
        rel = np.max(np.abs(u.value(t, y) - ref.value(t, y)) / ref.value(t, y))
        assert rel < ORACLE_REL_TOL, f"composition drifted: {rel:.3e}"

    def test_certification_rejects_wrong_eigenvalue(self) -> None:
        # exp(y) solves psi'' = psi, not psi'' = 2 psi.
        bad = SpectralAtom(lam=2.0, weight=1.0, psi=MinimalSolution.from_closed_form(2.0, psi_exp(1.0)))
        with pytest.raises(AtomInconsistent):
            build_harmonic([bad], laplacian_1d())

    def test_theta_atoms_rejected(self) -> None:
        atom = SpectralAtom(1.0, 1.0, heat_fundamental(1.0, "increasing"), theta=2.0)
        with pytest.raises(ValueError):
            build_harmonic([atom], laplacian_1d())

    def test_negative_weight_rejected_at_atom(self) -> None:
        with pytest.raises(ValueError):
            SpectralAtom(1.0, -1.0, heat_fundamental(1.0, "increasing"))

    def test_mode_gate(self) -> None:
        with pytest.raises(ValueError):
            HarmonicFunction([], "diagonal")


class TestDegenerateMode:
    """Three-variable mixtures u(t, y, z) and their certified assembly."""

    def _params(self):
        return SchwartzParams(
            a=0.1, b=1.0, sigma=1.0, eta=0.25,
            nu_minus=((1.3, 1.0), (2.0, 0.5)), nu_plus=((3.0, 0.25),),
        )

    def test_value_matches_atom_sum(self) -> None:
        params = self._params()
        atoms = schwartz_atoms(params)
        from forwardperf import schwartz_dual_coeffs

        u = build_degenerate(atoms, schwartz_dual_coeffs(params))
        t, y, z = 0.5, -0.3, 0.4
        expect = sum(
            a.weight * math.exp(-a.lam * t - a.theta * z) * float(a.psi.psi_at(y))
            for a in atoms
        )
        assert np.isclose(float(u.value(t, y, z)), expect, rtol=1e-14)

    def test_z_partials_by_finite_difference(self) -> None:
        params = self._params()
        from forwardperf import schwartz_dual_coeffs

        u = build_degenerate(schwartz_atoms(params), schwartz_dual_coeffs(params))
        t, y, z = 0.8, 0.2, -0.1
        fd_z = (u.value(t, y, z + FD_STEP) - u.value(t, y, z - FD_STEP)) / (2 * FD_STEP)
        # second differences need a coarser step: roundoff scales as eps/h^2
        h = 1e-4
        fd_zz = (u.value(t, y, z + h) - 2 * u.value(t, y, z) + u.value(t, y, z - h)) / h**2
        fd_yz = (
            u.value(t, y + h, z + h) - u.value(t, y + h, z - h)
            - u.value(t, y - h, z + h) + u.value(t, y - h, z - h)
        ) / (4 * h * h)
        assert np.isclose(float(u.d_z(t, y, z)), float(fd_z), rtol=FD_TOL)
        assert np.isclose(float(u.d_zz(t, y, z)), float(fd_zz), rtol=1e-5)
        assert np.isclose(float(u.d_yz(t, y, z)), float(fd_yz), rtol=1e-4)

    def test_standard_atoms_rejected(self) -> None:
        coeffs = DegenerateCoeffs(a=1.0, q=0.0, p=0.0, b=0.0, r=0.0, c=0.0)
        atom = SpectralAtom(1.0, 1.0, heat_fundamental(1.0, "increasing"))
        with pytest.raises(ValueError):
            build_degenerate([atom], coeffs)

    def test_shifted_operator_coefficients(self) -> None:
        coeffs = DegenerateCoeffs(a=0.5, q=-1.0, p=0.5, b=0.2, r=0.5, c=0.0)
        op = coeffs.shifted_operator(2.0)
        y = np.array([0.0])
        a, b, c = op.coefficients(y)
        assert a[0] == 0.5
        assert b[0] == 0.2 - 2.0 * (-1.0)
        assert c[0] == 0.0 + 4.0 * 0.5 - 2.0 * 0.5


class TestCounterexampleFixtures:
    def test_traveling_wave_degenerates_on_bad_lam(self) -> None:
        with pytest.raises(BadParams):
            counterexample_fixture("bs_traveling_wave", sigma=1.0, lam=1.0)

    def test_unknown_fixture_name(self) -> None:
        with pytest.raises(ValueError):
            counterexample_fixture("heat_kernel")

    def test_fixtures_return_surface_and_coeffs(self) -> None:
        for name in ("bs_traveling_wave", "kolmogorov"):
            surface, coeffs = counterexample_fixture(name)
            assert hasattr(surface, "d_yz")
            assert isinstance(coeffs, DegenerateCoeffs)


class TestAtomSerialization:
    def test_round_trip_preserves_values(self, tmp_path) -> None:
        params = SchwartzParams(
            a=0.1, b=1.0, sigma=1.0, eta=0.25, nu_minus=((1.5, 2.0),), nu_plus=((2.5, 0.5),)
        )
        atoms = schwartz_atoms(params)
        path = tmp_path / "atoms.csv"
        atoms_to_csv(atoms, str(path))
        loaded = atoms_from_csv(str(path))
        assert len(loaded) == len(atoms)
        y = np.linspace(-2.0, 2.0, 11)
        for orig, back in zip(atoms, loaded):
            assert back.lam == orig.lam
            assert back.theta == orig.theta
            assert back.weight == orig.weight
            np.testing.assert_allclose(back.psi.psi_at(y), orig.psi.psi_at(y), rtol=1e-15)

    def test_grid_only_profiles_refuse_to_serialize(self, tmp_path) -> None:
        from forwardperf import laplacian_1d, solve_positive_solution

        sol = solve_positive_solution(laplacian_1d(), 1.0, (-2.0, 2.0), slope0=1.0)
        atom = SpectralAtom(1.0, 1.0, sol)
        with pytest.raises(ValueError):
            atoms_to_csv([atom], str(tmp_path / "atoms.csv"))
