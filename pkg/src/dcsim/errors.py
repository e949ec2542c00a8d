"""Exception hierarchy shared by the simulator and the CLI."""


class DcsimError(Exception):
    """Base class; the CLI maps every subclass to exit code 1."""


class ConfigError(DcsimError):
    """Invalid scenario or parameter set, detected before stepping."""


class ModelError(DcsimError):
    """A sub-model received or produced a non-physical value."""


class SolverError(ModelError):
    """An iterative solve failed to converge."""

    def __init__(self, message, *, iterations=None, residual=None, t=None):
        self.iterations = iterations
        self.residual = residual
        self.t = t
        detail = []
        if t is not None:
            detail.append(f"t={t:.6f}s")
        if iterations is not None:
            detail.append(f"iterations={iterations}")
        if residual is not None:
            detail.append(f"residual={residual:.3e}")
        if detail:
            message = f"{message} ({', '.join(detail)})"
        super().__init__(message)


class StalledMotorError(ModelError):
    """Induction motor slip left the (-1, 1) operating range."""


class InstabilityError(ModelError):
    """Generator speed deviation exceeded the validity limit."""


class InitializationError(DcsimError):
    """Pre-disturbance equilibrium could not be found."""
