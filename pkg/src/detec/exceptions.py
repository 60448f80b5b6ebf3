"""Exception hierarchy for the detec toolkit.

The CLI maps these onto process exit codes: configuration and file-format
problems exit 3, rank/feasibility failures exit 2, numerical breakdowns
exit 4.
"""


class DetecError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(DetecError):
    """Invalid configuration file, unknown key, or malformed input file."""


class DataRankError(DetecError):
    """Stacked data matrix [U0; X0] is not full row rank.

    The experiment did not produce informative data; collect more samples
    or excite the plant with a richer input.
    """


class InfeasibleError(DetecError):
    """An LMI stage returned no feasible point.

    Attributes
    ----------
    stage : str
        Which synthesis stage failed ("design" or "trigger").
    margin : float
        Best margin found before giving up (negative).
    """

    def __init__(self, message, stage="", margin=float("nan")):
        super().__init__(message)
        self.stage = stage
        self.margin = margin


class NumericalError(DetecError):
    """Floating-point breakdown (non-finite values, failed eigensolve)."""


class NonFiniteStateError(NumericalError):
    """Integration produced NaN or Inf in the state vector.

    Carries the partial trace recorded up to the failure in ``trace``.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class ZenoSuspectError(NumericalError):
    """Two consecutive events closer than the event-storm guard.

    Carries the partial trace recorded up to the failure in ``trace``.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace
