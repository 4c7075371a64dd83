"""Shooting solver tests against the constant-coefficient oracle.

For psi'' = lam psi the positive solutions through psi(0) = 1 are
exactly exp(+-y sqrt(lam)), so every solver claim can be checked
against machine-precision references.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from forwardperf import (
    EllipticOperator1D,
    MinimalSolution,
    NegativeLambda,
    PositivityLost,
    heat_fundamental,
    laplacian_1d,
    ode_residual,
    psi_const,
    psi_exp,
    psi_quadexp,
    solve_positive_solution,
)

# RK4 at the default step lands well below this on [-3, 3].
SOLVER_REL_TOL = 1e-8
# Closed forms are exact; residuals only see rounding.
CLOSED_FORM_RESIDUAL_TOL = 1e-12

Y_SPAN = (-3.0, 3.0)


class TestClosedFormProfiles:
    def test_psi_const_is_flat(self) -> None:
        form = psi_const()
        y = np.linspace(-4.0, 4.0, 9)
        assert np.all(form.value(y) == 1.0)
        assert np.all(form.derivative(y) == 0.0)
        assert np.all(form.second_derivative(y) == 0.0)

    @given(c=st.floats(-3.0, 3.0), y=st.floats(-3.0, 3.0))
    @settings(max_examples=50, deadline=None)
    def test_psi_exp_derivatives(self, c: float, y: float) -> None:
        form = psi_exp(c)
        v = float(form.value(y))
        assert np.isclose(float(form.derivative(y)), c * v, rtol=1e-12)
        assert np.isclose(float(form.second_derivative(y)), c * c * v, rtol=1e-12)

    @given(
        c1=st.floats(-2.0, 2.0),
        c2=st.floats(-1.0, 1.0),
        y=st.floats(-2.0, 2.0),
    )
    @settings(max_examples=50, deadline=None)
    def test_psi_quadexp_derivatives(self, c1: float, c2: float, y: float) -> None:
        """psi = exp(c1 y + c2 y^2) differentiates through the chain rule."""
        form = psi_quadexp(c1, c2)
        v = float(form.value(y))
        slope = c1 + 2.0 * c2 * y
        assert np.isclose(float(form.derivative(y)), slope * v, rtol=1e-12)
        assert np.isclose(
            float(form.second_derivative(y)), (slope * slope + 2.0 * c2) * v, rtol=1e-12
        )


class TestHeatFundamental:
    @pytest.mark.parametrize("lam", [0.25, 1.0, 4.0])
    @pytest.mark.parametrize("direction", ["increasing", "decreasing"])
    def test_solves_equation_exactly(self, lam: float, direction: str) -> None:
        sol = heat_fundamental(lam, direction)
        assert ode_residual(laplacian_1d(), lam, sol) < CLOSED_FORM_RESIDUAL_TOL

    def test_lam_zero_is_constant(self) -> None:
        sol = heat_fundamental(0.0, "increasing")
        assert np.all(sol.psi == 1.0)

    def test_negative_lam_rejected(self) -> None:
        with pytest.raises(NegativeLambda):
            heat_fundamental(-1.0, "decreasing")

    def test_unknown_direction_rejected(self) -> None:
        with pytest.raises(ValueError):
            heat_fundamental(1.0, "sideways")


class TestShootingSolver:
    """solve_positive_solution vs the exponential references."""

    @pytest.mark.parametrize("lam", [0.25, 1.0, 4.0])
    @pytest.mark.parametrize("sign", [-1.0, 1.0])
    def test_matches_exponential(self, lam: float, sign: float) -> None:
        root = sign * np.sqrt(lam)
        sol = solve_positive_solution(laplacian_1d(), lam, Y_SPAN, slope0=root)
        exact = np.exp(root * sol.grid)
        rel = np.max(np.abs(sol.psi - exact) / exact)
        assert rel < SOLVER_REL_TOL, f"lam={lam} slope={root}: rel err {rel:.3e}"

    @pytest.mark.parametrize("lam", [0.25, 4.0])
    def test_residual_is_second_order_in_step(self, lam: float) -> None:
        """The stored d2psi is differenced from the slope, so the reported
        residual converges at O(h^2); a 4x step refinement shrinks it ~16x."""
        op = laplacian_1d()
        coarse = solve_positive_solution(op, lam, Y_SPAN, slope0=np.sqrt(lam), step=4e-3)
        fine = solve_positive_solution(op, lam, Y_SPAN, slope0=np.sqrt(lam), step=1e-3)
        ratio = ode_residual(op, lam, coarse) / ode_residual(op, lam, fine)
        assert 8.0 < ratio < 32.0, f"expected ~16, got {ratio:.2f}"
        assert ode_residual(op, lam, fine) < 1e-5

    def test_negative_lam_loses_positivity(self) -> None:
        # lam = -1 forces oscillation: cos-type solutions cross zero.
        with pytest.raises(PositivityLost):
            solve_positive_solution(laplacian_1d(), -1.0, Y_SPAN)

    def test_span_must_contain_origin(self) -> None:
        with pytest.raises(ValueError):
            solve_positive_solution(laplacian_1d(), 1.0, (1.0, 2.0))

    def test_variable_coefficients(self) -> None:
        # psi'' - y psi' = lam psi with lam = 0 has psi = 1.
        op = EllipticOperator1D(1.0, lambda y: -np.asarray(y, dtype=float), 0.0)
        sol = solve_positive_solution(op, 0.0, (-2.0, 2.0))
        assert np.max(np.abs(sol.psi - 1.0)) < 1e-12

    def test_nonelliptic_coefficient_rejected(self) -> None:
        op = EllipticOperator1D(lambda y: np.asarray(y, dtype=float), 0.0, 0.0)
        with pytest.raises(ValueError):
            solve_positive_solution(op, 1.0, (-1.0, 1.0))


class TestMinimalSolution:
    def test_grid_must_contain_zero(self) -> None:
        g = np.linspace(0.5, 2.5, 5)
        ones = np.ones_like(g)
        with pytest.raises(ValueError):
            MinimalSolution(1.0, g, ones, ones, ones)

    def test_normalization_enforced(self) -> None:
        g = np.linspace(-1.0, 1.0, 5)
        with pytest.raises(ValueError):
            MinimalSolution(1.0, g, 2.0 * np.ones_like(g), np.zeros_like(g), np.zeros_like(g))

    def test_interpolation_between_grid_points(self) -> None:
        """Grid-only solutions evaluate off-grid through Hermite splines."""
        sol = solve_positive_solution(laplacian_1d(), 1.0, (-2.0, 2.0), slope0=1.0)
        probe = np.array([-1.3337, -0.251, 0.6182, 1.997])
        assert np.max(np.abs(sol.psi_at(probe) - np.exp(probe))) < 1e-8
        assert np.max(np.abs(sol.dpsi_at(probe) - np.exp(probe))) < 1e-7

    def test_closed_form_evaluates_anywhere(self) -> None:
        sol = heat_fundamental(4.0, "decreasing")
        y = 7.25  # far outside the stored grid
        assert np.isclose(float(sol.psi_at(y)), np.exp(-2.0 * y), rtol=1e-14)


class TestOperator:
    def test_apply_combines_coefficients(self) -> None:
        op = EllipticOperator1D(2.0, lambda y: y, -1.0)
        y = np.array([0.0, 1.0, 2.0])
        out = op.apply(y, np.ones(3), np.full(3, 3.0), np.full(3, 5.0))
        np.testing.assert_allclose(out, 2.0 * 5.0 + y * 3.0 - 1.0)

    def test_positive_a_required(self) -> None:
        op = EllipticOperator1D(0.0, 0.0, 0.0)
        with pytest.raises(ValueError):
            op.coefficients(np.array([0.0]))
