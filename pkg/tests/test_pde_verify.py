"""Grid residual verification, finite-difference fallbacks, and bounds.

Positive controls use surfaces that satisfy their equations to rounding;
negative controls perturb one ingredient and must push the residual
above the detection floor by orders of magnitude.
"""

import json

import numpy as np
import pytest

from forwardperf import (
    DegenerateCoeffs,
    EllipticOperator1D,
    GridSpec,
    HarmonicFunction,
    QuadExpCoeffs,
    SchwartzParams,
    StochVolParams,
    appendix_bounds_check,
    bs_model,
    classical_heat,
    counterexample_fixture,
    degenerate_parabolic_residual,
    DualSurface,
    hjb_residual,
    laplacian_1d,
    merton_value_surface,
    parabolic_residual,
    schwartz_dual_coeffs,
    schwartz_model,
    schwartz_value_surface,
    stochvol_value_surface,
)
from forwardperf.pde_verify import (
    export_residual_csv,
    report_json,
    standard_degenerate_grid,
    standard_hjb_grid,
    standard_parabolic_grid,
)

ANALYTIC_TOL = 1e-12
COUNTEREXAMPLE_TOL = 1e-10
NEGATIVE_CONTROL_FLOOR = 1e-2

ETA = 0.25

SCHWARTZ_PARAMS = SchwartzParams(
    a=0.1, b=1.0, sigma=1.0, eta=ETA,
    nu_minus=((1.25, 1.0), (1.6, 0.5)), nu_plus=((2.5, 0.25),),
)

STOCHVOL_PARAMS = StochVolParams(
    a=0.05, b=1.5, sigma=0.3, rho=0.4, kappa=0.25, mu=0.15, gamma=0.5
)


class TestParabolicResidual:
    def test_heat_mixture_analytic(self) -> None:
        u = classical_heat([(0.8, 1.0), (-0.3, 2.0)])
        report = parabolic_residual(u, laplacian_1d(), standard_parabolic_grid())
        assert report.passed
        assert report.max_abs_residual < ANALYTIC_TOL

    def test_heat_mixture_finite_difference(self) -> None:
        # O(h^2) truncation at the default step sits near 5e-8 for these
        # atoms, so the fd route gets a method-appropriate tolerance.
        u = classical_heat([(0.8, 1.0), (-0.3, 2.0)])
        report = parabolic_residual(
            u, laplacian_1d(), standard_parabolic_grid(), tolerance=1e-6, method="fd"
        )
        assert report.passed
        assert report.max_abs_residual < 1e-7

    def test_wrong_operator_detected(self) -> None:
        """The same mixture against 2 d^2/dy^2 misses by O(1)."""
        u = classical_heat([(0.8, 1.0), (-0.3, 2.0)])
        op = EllipticOperator1D(2.0, 0.0, 0.0)
        report = parabolic_residual(u, op, standard_parabolic_grid())
        assert not report.passed
        assert report.max_abs_residual > NEGATIVE_CONTROL_FLOOR

    def test_fd_refinement_is_second_order(self) -> None:
        u = classical_heat([(0.8, 1.0)])
        grid = standard_parabolic_grid()
        res = []
        for h in (1e-2, 2.5e-3):
            g = GridSpec(t_range=grid.t_range, y_range=grid.y_range,
                         h_t=h, h_y=h)
            res.append(parabolic_residual(u, laplacian_1d(), g, method="fd").max_abs_residual)
        ratio = res[0] / res[1]
        assert 8.0 < ratio < 32.0, f"expected ~16, got {ratio:.2f}"

    def test_argmax_reported_in_grid_coordinates(self) -> None:
        u = classical_heat([(0.8, 1.0)])
        report = parabolic_residual(u, laplacian_1d(), standard_parabolic_grid())
        assert len(report.argmax) == 2
        t_arg, y_arg = report.argmax
        assert 0.0 <= t_arg <= 2.0 and -3.0 <= y_arg <= 3.0


class TestDegenerateResidual:
    def test_schwartz_dual_surface(self) -> None:
        from forwardperf import schwartz_dual_surface

        dual = schwartz_dual_surface(SCHWARTZ_PARAMS)
        report = degenerate_parabolic_residual(
            dual, schwartz_dual_coeffs(SCHWARTZ_PARAMS), standard_degenerate_grid()
        )
        assert report.passed
        assert report.max_abs_residual < ANALYTIC_TOL

    @pytest.mark.parametrize("name", ["bs_traveling_wave", "kolmogorov"])
    def test_counterexamples_solve_their_equations(self, name: str) -> None:
        """These surfaces satisfy degenerate equations to rounding while
        admitting no atom representation; the residual check must accept
        them so that non-representability is a separate question."""
        surface, coeffs = counterexample_fixture(name)
        report = degenerate_parabolic_residual(
            surface, coeffs, standard_degenerate_grid(), tolerance=COUNTEREXAMPLE_TOL
        )
        assert report.passed, f"{name}: {report.max_abs_residual:.3e}"

    def test_wrong_coefficients_detected(self) -> None:
        surface, coeffs = counterexample_fixture("kolmogorov")
        # Drop the drift term r(y) = y; the equation no longer closes.
        broken = DegenerateCoeffs(a=coeffs.a, q=coeffs.q, p=coeffs.p,
                                  b=coeffs.b, r=0.0, c=coeffs.c)
        report = degenerate_parabolic_residual(surface, broken, standard_degenerate_grid())
        assert not report.passed
        assert report.max_abs_residual > NEGATIVE_CONTROL_FLOOR


class TestHJBResidual:
    def test_merton_complete_form(self) -> None:
        surface = merton_value_surface(0.5, 0.3)
        model = bs_model(0.3, 0.2)
        report = hjb_residual(surface, model, standard_hjb_grid(), "complete")
        assert report.passed

    def test_schwartz_dual_linearized(self) -> None:
        surface = schwartz_value_surface(SCHWARTZ_PARAMS)
        model = schwartz_model(0.1, 1.0, 1.0)
        grid = GridSpec(z_range=(-2.0, 2.0))
        report = hjb_residual(surface, model, grid, "dual-linearized")
        assert report.passed
        assert report.max_abs_residual < ANALYTIC_TOL

    def test_stochvol_homothetic_linearized(self) -> None:
        surface = stochvol_value_surface(STOCHVOL_PARAMS)
        from forwardperf import stochvol_model

        model = stochvol_model(a=0.05, b=1.5, sigma=0.3, rho=0.4, kappa=0.25, mu=0.15)
        report = hjb_residual(surface, model, standard_parabolic_grid(), "homothetic-linearized")
        assert report.passed

    def test_unknown_form_rejected(self) -> None:
        surface = merton_value_surface(0.5, 0.3)
        with pytest.raises(ValueError, match="form"):
            hjb_residual(surface, bs_model(0.3, 0.2), standard_hjb_grid(), "primal")

    def test_dual_form_needs_dual_surface(self) -> None:
        surface = merton_value_surface(0.5, 0.3)
        with pytest.raises(ValueError, match="dual"):
            hjb_residual(surface, bs_model(0.3, 0.2), standard_degenerate_grid(), "dual-linearized")


class TestBoundsCheck:
    def test_dual_ratio_bounds(self) -> None:
        from forwardperf import schwartz_dual_surface

        dual = schwartz_dual_surface(SCHWARTZ_PARAMS)
        report = appendix_bounds_check(dual, ETA, standard_degenerate_grid())
        assert report.form == "dual"
        assert report.passed
        assert ETA <= report.ratio_min <= report.ratio_max <= 1.0 / (1.0 + ETA)
        assert np.isfinite(report.fitted_c)

    def test_marginal_ratio_bounds(self) -> None:
        surface = schwartz_value_surface(SCHWARTZ_PARAMS)
        grid = GridSpec(x_range=(0.01, 100.0))
        report = appendix_bounds_check(surface, ETA, grid)
        assert report.form == "marginal"
        assert report.passed
        assert report.lower == 1.0 + ETA
        assert report.upper == 1.0 / ETA

    def test_support_exponent_outside_window_fails(self) -> None:
        """An atom at theta = 5 > 1/eta makes -u/u_z = 0.2 < eta."""
        from forwardperf import MinimalSolution, SpectralAtom, psi_const

        atom = SpectralAtom(lam=0.0, weight=1.0,
                            psi=MinimalSolution.from_closed_form(0.0, psi_const()),
                            theta=5.0)
        coeffs = DegenerateCoeffs(a=1.0, q=0.0, p=0.0, b=0.0, r=0.0, c=0.0)
        u = HarmonicFunction([atom], "degenerate", coeffs=coeffs)
        report = appendix_bounds_check(DualSurface(u), ETA, standard_degenerate_grid())
        assert not report.passed
        assert report.ratio_max < ETA + 1e-9

    def test_eta_gate(self) -> None:
        surface = schwartz_value_surface(SCHWARTZ_PARAMS)
        with pytest.raises(ValueError):
            appendix_bounds_check(surface, 0.7, standard_hjb_grid())

    def test_marginal_form_needs_dual(self) -> None:
        with pytest.raises(ValueError, match="dual"):
            appendix_bounds_check(merton_value_surface(0.5, 0.3), ETA, standard_hjb_grid())


class TestReporting:
    def test_json_summary_has_no_arrays(self) -> None:
        u = classical_heat([(0.5, 1.0)])
        report = parabolic_residual(u, laplacian_1d(), standard_parabolic_grid())
        payload = json.loads(report_json(report))
        assert payload["passed"] is True
        assert payload["equation"] == "u_t + L_y u = 0"
        assert "values" not in payload

    def test_csv_export_row_count(self, tmp_path) -> None:
        u = classical_heat([(0.5, 1.0)])
        grid = GridSpec(t_count=3, y_count=5)
        report = parabolic_residual(u, laplacian_1d(), grid)
        path = tmp_path / "resid.csv"
        export_residual_csv(report, str(path))
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "t,y,residual"
        assert len(lines) == 1 + 3 * 5


class TestGridSpec:
    def test_missing_axes_raise(self) -> None:
        grid = GridSpec()
        with pytest.raises(ValueError, match="z axis"):
            grid.z_axis
        with pytest.raises(ValueError, match="x axis"):
            grid.x_axis

    def test_x_axis_is_log_spaced(self) -> None:
        grid = GridSpec(x_range=(0.01, 100.0), x_count=5)
        np.testing.assert_allclose(grid.x_axis, [0.01, 0.1, 1.0, 10.0, 100.0], rtol=1e-12)

    def test_x_stencil_must_stay_positive(self) -> None:
        with pytest.raises(ValueError):
            GridSpec(x_range=(1e-8, 1.0))

    def test_negative_time_rejected(self) -> None:
        with pytest.raises(ValueError):
            GridSpec(t_range=(-1.0, 1.0))
