"""Exception types shared across the package.

Every failure mode that callers are expected to branch on gets its own
class; generic misuse (wrong shapes, bad argument combinations) raises
plain ValueError.
"""


class ForwardPerfError(Exception):
    """Base class for all domain-specific errors."""


class NoRiskPremiumSolution(ForwardPerfError):
    """The traded drift equations admit no market price of risk."""

    def __init__(self, residual: float, message: str | None = None):
        self.residual = residual
        super().__init__(message or f"risk premium equations inconsistent, residual {residual:.3e}")


class PositivityLost(ForwardPerfError):
    """An elliptic solution crossed zero while integrating outward."""

    def __init__(self, y_star: float):
        self.y_star = y_star
        super().__init__(f"solution lost positivity at y = {y_star:.6g}")


class NegativeLambda(ForwardPerfError):
    """No positive fundamental solution exists for lambda < 0."""


class AtomInconsistent(ForwardPerfError):
    """A spectral atom's profile does not solve its elliptic equation."""

    def __init__(self, index: int, residual: float, tolerance: float):
        self.index = index
        self.residual = residual
        self.tolerance = tolerance
        super().__init__(
            f"atom {index}: elliptic residual {residual:.3e} exceeds {tolerance:.1e}"
        )


class BadParams(ForwardPerfError):
    """Parameter combination outside the valid region of a fixture or model."""


class DegenerateDelta(ForwardPerfError):
    """The dual exponent denominator 1 - gamma + rho^2 gamma vanishes."""


class OutOfRange(ForwardPerfError):
    """A wealth level could not be bracketed by the dual marginal."""


class NonIntegrableAtZero(ForwardPerfError):
    """The inverse marginal is not integrable at zero wealth."""

    def __init__(self, exponent: float):
        self.exponent = exponent
        super().__init__(
            f"inverse marginal behaves like x^({exponent:.6g}) near 0; integral diverges"
        )


class SupportViolation(ForwardPerfError):
    """A spectral measure's support leaves the required interval."""


class NoRealBranch(ForwardPerfError):
    """Coefficient matching has no real root for the requested branch."""


class NotWellPosed(ForwardPerfError):
    """Model parameters violate the well-posedness (discriminant) condition."""

    def __init__(self, discriminant: float):
        self.discriminant = discriminant
        super().__init__(
            "well-posedness condition violated: discriminant "
            f"{discriminant:.6g} < 0 (mean reversion too weak for the risk premium slope)"
        )


class DegenerateSecondOrder(ForwardPerfError):
    """V_xx is numerically zero; the optimal portfolio is undefined."""


class ExplosionDetected(ForwardPerfError):
    """A simulated path left the admissible region."""

    def __init__(self, t: float, what: str):
        self.t = t
        self.what = what
        super().__init__(f"{what} exceeded magnitude bound at t = {t:.6g}")
