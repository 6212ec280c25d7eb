"""Exception types shared across the package."""


class PespError(Exception):
    """Base class for all package errors."""


class ObservationOutOfSupport(PespError):
    """A fixed observation value is impossible under the coordinate's marginal."""


class InfiniteSupport(PespError):
    """An enumeration was requested over a continuous coordinate."""


class SizeLimitExceeded(PespError):
    """An enumeration or search exceeded its configured cap."""


class SupportTooLarge(SizeLimitExceeded):
    """The joint outcome space exceeds the configured model-building cap."""


class ContinuousUnsupported(PespError):
    """The requested formulation requires finite-support demand distributions."""


class InfeasibleFirstStage(PespError):
    """A first-stage solution violates the configuration/assignment constraints."""


class BackendUnavailable(PespError):
    """The requested solve backend is not configured or not usable."""


class SolverFailure(PespError):
    """An external solver invocation failed; carries captured diagnostics."""

    def __init__(self, message: str, stdout: str = "", stderr: str = ""):
        super().__init__(message)
        self.stdout = stdout
        self.stderr = stderr
