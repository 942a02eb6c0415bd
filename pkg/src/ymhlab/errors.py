"""Exception types raised by the lattice laboratory.

Every exception carries a short machine-readable ``reason`` string that the
CLI copies into the run summary.
"""


class YMHError(Exception):
    reason = "error"


class CflViolation(YMHError):
    reason = "cfl-violation"


class Blowup(YMHError):
    reason = "blowup"


class NonConvergence(YMHError):
    reason = "non-convergence"

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NotInteger(YMHError):
    reason = "degree-not-integer"


class Undetermined(YMHError):
    reason = "maximal-weight-undetermined"


class NonPositiveInput(YMHError, ValueError):
    reason = "non-positive-input"


class InconclusiveRun(YMHError):
    reason = "inconclusive-run"


class ConfigError(YMHError, ValueError):
    reason = "config-error"


class ShapeMismatch(YMHError, ValueError):
    reason = "shape-mismatch"
