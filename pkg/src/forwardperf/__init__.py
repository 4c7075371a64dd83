"""Forward investment performance surfaces driven by market factors.

Construction runs spectral atoms -> positive space-time harmonic
functions -> performance surfaces (homothetic or by dual inversion),
with optimal portfolios, Monte Carlo consistency checks, and PDE
residual verification layered on top.  The ``forwardperf`` console
script drives the same machinery from scenario files.
"""

from .closed_form import (
    QuadExpCoeffs,
    SchwartzParams,
    StochVolParams,
    merton_value_surface,
    schwartz_atoms,
    schwartz_coeffs,
    schwartz_dual_coeffs,
    schwartz_dual_surface,
    schwartz_theta_operator,
    schwartz_value_surface,
    stochvol_coeffs,
    stochvol_harmonic,
    stochvol_operator,
    stochvol_value_surface,
    stochvol_wellposed,
)
from .control import (
    hamiltonian_argmax_check,
    optimal_portfolio,
    optimal_rule,
    optimal_wealth_dynamics,
)
from .duality import (
    DualInversionSurface,
    DualSurface,
    HomotheticParams,
    HomotheticSurface,
    PerformanceSurface,
    delta_exponent,
    dual_to_performance,
    homothetic_value,
    integrate_to_value,
    invert_dual_marginal,
)
from .elliptic import (
    EllipticOperator1D,
    MinimalSolution,
    heat_fundamental,
    laplacian_1d,
    ode_residual,
    psi_const,
    psi_exp,
    psi_quadexp,
    solve_positive_solution,
)
from .errors import (
    AtomInconsistent,
    BadParams,
    DegenerateDelta,
    DegenerateSecondOrder,
    ExplosionDetected,
    ForwardPerfError,
    NegativeLambda,
    NoRealBranch,
    NoRiskPremiumSolution,
    NonIntegrableAtZero,
    NotWellPosed,
    OutOfRange,
    PositivityLost,
    SupportViolation,
)
from .factor_model import (
    FactorModel,
    PortfolioRule,
    bs_model,
    builtin_model,
    constant_rule,
    market_price_of_risk,
    scaled_rule,
    schwartz_model,
    stochvol_model,
    traded_excess_drift,
    wealth_dynamics,
    zero_rule,
)
from .monte_carlo import (
    MCReport,
    PathEnsemble,
    SimConfig,
    martingale_test,
    simulate_paths,
    supermartingale_test,
)
from .pde_verify import (
    BoundsReport,
    GridSpec,
    ResidualReport,
    appendix_bounds_check,
    degenerate_parabolic_residual,
    hjb_residual,
    parabolic_residual,
)
from .widder import (
    DegenerateCoeffs,
    HarmonicFunction,
    SpectralAtom,
    atoms_from_csv,
    atoms_to_csv,
    build_degenerate,
    build_harmonic,
    classical_heat,
    counterexample_fixture,
    lambda_to_z_change_of_vars,
)

__version__ = "0.1.0"
