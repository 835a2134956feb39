"""Exception hierarchy shared by the library and the CLI."""


class CurvedBodyError(Exception):
    """Base class for all library errors."""


class DomainError(CurvedBodyError, ValueError):
    """Input lies outside the domain where a formula is defined."""


class SingularityError(CurvedBodyError):
    """Collision or antipodal configuration: the forces blow up."""


class ChartSingularityError(SingularityError):
    """The cylindrical chart degenerates (a body sits at a pole)."""


class DriftExceeded(CurvedBodyError):
    """Constraint residual grew beyond the configured tolerance."""


class StepSizeUnderflow(CurvedBodyError):
    """Adaptive step size collapsed below floating point resolution."""


class FamilyConstraintError(CurvedBodyError, ValueError):
    """Parameters violate the hypotheses under which a family exists.

    ``code`` is a short machine-readable tag, e.g. ``"mass_ratio"``.
    """

    def __init__(self, message, code="family_constraint"):
        super().__init__(message)
        self.code = code
