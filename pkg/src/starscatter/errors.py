"""Exception types shared across the package."""


class StarScatterError(Exception):
    """Base class for all package errors."""


class GraphValidationError(StarScatterError):
    """A star graph failed its consistency checks."""


class SolverDegeneracyError(StarScatterError):
    """The node linear system was numerically singular at this energy."""

    def __init__(self, energy, cond):
        self.energy = energy
        self.cond = cond
        super().__init__(
            f"node system degenerate at E={energy!r} (cond~{cond:.3e})"
        )


class PhaseSingularityError(StarScatterError):
    """Phase tracking hit an amplitude zero; carries the bracketing interval."""

    def __init__(self, lo, hi, msg=""):
        self.interval = (lo, hi)
        super().__init__(
            msg or f"phase not continuable across ({lo!r}, {hi!r}): "
                   "amplitude passes through zero"
        )


class SingularityOnContourError(StarScatterError):
    """A winding contour passes through the origin."""


class ResolutionError(StarScatterError):
    """A quadrature grid is too coarse for the requested evaluation."""


class ConfigError(StarScatterError):
    """A run configuration is malformed or inconsistent."""
