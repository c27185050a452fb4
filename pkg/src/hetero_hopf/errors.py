"""Exception hierarchy shared across modules.

The CLI maps :class:`ConfigError` to exit code 2 and :class:`NumericalError`
to exit code 3, so every failure raised by the numerics derives from the latter.
"""


class HeteroHopfError(Exception):
    """Base class for all package errors."""


class ConfigError(HeteroHopfError):
    """Invalid configuration document or parameter set."""

    def __init__(self, message, key=None, line=None):
        self.key = key
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key {key!r}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)


class NumericalError(HeteroHopfError):
    """A numerical procedure could not deliver a result."""


class NoRoot(NumericalError):
    """The equation has no root in the admissible range."""


class BracketFailure(NumericalError):
    """A bracketing interval did not contain a sign change."""


class BracketExhausted(NumericalError):
    """Bracket expansion ran past its hard limit."""


class RootToleranceNotMet(NumericalError):
    """A located root does not satisfy its residual tolerance."""


class NonFiniteIntegrand(NumericalError):
    """An integrand produced NaN or infinity at a quadrature node."""


class MomentOverflow(NumericalError):
    """A weighted moment exceeded the floating point range."""


class NonFiniteState(NumericalError):
    """A time integration blew up."""


class SingularMatrix(NumericalError):
    """LU factorization met a negligible pivot."""


class NoConvergence(NumericalError):
    """Iterative eigenvalue computation did not converge.

    ``result`` carries whatever partial :class:`~hetero_hopf.linalg.EigenResult`
    was available.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class CflViolation(NumericalError):
    """Requested time step exceeds the stability limit of the scheme."""


class UnstableStep(NumericalError):
    """Solution norm grew beyond the blow-up threshold."""


class NewtonDiverged(NumericalError):
    """Newton iteration failed to reach the residual tolerance."""


class NonPositiveSolution(NumericalError):
    """Newton converged, but to a state that is not strictly positive.

    The converged fields are attached so callers can inspect the semi-trivial
    or trivial state instead of discarding it.
    """

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class NoSignChange(NumericalError):
    """The stability indicator has the same sign at both bracket ends."""
