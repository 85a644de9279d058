"""Exception types shared across the package."""


class SectionLabError(Exception):
    """Base class for all package errors."""


class NotDivisible(SectionLabError):
    """A polynomial field is not divisible by the requested linear form."""


class NotConvex(SectionLabError):
    """Sampled midpoint convexity failed for a candidate norm."""


class ValidationError(SectionLabError):
    """An input document or argument violates a stated invariant.

    The offending field name is kept in ``field``.
    """

    def __init__(self, field, message=""):
        self.field = field
        super().__init__(f"{field}: {message}" if message else str(field))


class ParseError(SectionLabError):
    """A TOML body document could not be parsed."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f" (line {line}, column {column})"
        super().__init__(message + where)


class RankDeficient(SectionLabError):
    """A basis handed to a section constructor is not linearly independent."""


class DegenerateBivector(SectionLabError):
    """A bivector is (numerically) zero, so it spans no plane."""


class NotDifferentiable(SectionLabError):
    """One-sided difference quotients of the section area disagree."""


class NullGradient(SectionLabError):
    """The area differential vanishes, so no kernel direction is defined."""


class AsymmetricBody(SectionLabError):
    """An operation requiring an origin-symmetric body received another one."""


class LoewnerNonconvergence(SectionLabError):
    """The minimal enclosing ellipsoid iteration did not converge."""


class EquivalenceFailed(SectionLabError):
    """Two cross-sections could not be matched by a linear map within tolerance."""

    def __init__(self, covector, residual, tol):
        self.covector = covector
        self.residual = residual
        self.tol = tol
        super().__init__(
            f"no linear equivalence for covector {list(covector)}: "
            f"residual {residual:.3e} > tol {tol:.1e}")


class CDegenerate(SectionLabError):
    """The fitted normal-component constant of the orbit limit is (near) zero."""


class Inconsistent(SectionLabError):
    """A linear system or an algebraic identity is violated beyond tolerance."""


class DegeneracyMismatch(SectionLabError):
    """Points handed to a construction do not have the required degeneracy type."""


class Blowup(SectionLabError):
    """An integrated trajectory left the bounded region."""


class Inconclusive(SectionLabError):
    """A dynamical classification could not decide within the time budget."""


class ZeroOnCircle(SectionLabError):
    """The field vanishes on the circle used for a winding number."""


class IndefiniteFit(SectionLabError):
    """A least-squares quadratic fit is not positive definite."""


class NotElliptic(SectionLabError):
    """A section failed the ellipse-fit gate."""


class IncompatibleSections(SectionLabError):
    """Three elliptic sections disagree on their shared basis points."""
