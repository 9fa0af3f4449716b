"""
Exception hierarchy shared by the engine, the CLI and the HTTP service.

Each class carries the process exit code used by `pseudogap-lab` and the
HTTP status used by the FastAPI app.
"""


class PseudogapError(Exception):
    exit_code = 1
    http_status = 500

    def __init__(self, message: str, **details):
        super().__init__(message)
        self.message = message
        self.details = details


class ConfigurationError(PseudogapError):
    exit_code = 2
    http_status = 422


class DomainError(PseudogapError, ValueError):
    exit_code = 2
    http_status = 422


class UnderResolvedError(PseudogapError):
    exit_code = 3
    http_status = 409


class ConsistencyError(PseudogapError):
    exit_code = 4
    http_status = 500


class InvariantViolation(PseudogapError):
    exit_code = 4
    http_status = 500


class UnsupportedOperationError(PseudogapError):
    exit_code = 5
    http_status = 400


class UnsupportedCaseError(PseudogapError):
    """gamma0 = 0, or c_sigma != 0 without the absorption opt-in."""
    exit_code = 5
    http_status = 400


class DegenerateEnsembleError(PseudogapError):
    exit_code = 5
    http_status = 400


class NoRootError(PseudogapError):
    exit_code = 5
    http_status = 400
