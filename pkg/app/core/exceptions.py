"""
Domain Exceptions
One family per service module; every family derives from DpFlError
"""
from typing import List, Optional, Tuple


class DpFlError(Exception):
    """Base class for all toolkit errors"""


# Accountant

class AccountantError(DpFlError, ValueError):
    """Invalid accountant input or failed privacy computation"""


class InvalidOrderError(AccountantError):
    """Renyi order outside the domain of the requested path"""


class UndefinedCrossoverError(AccountantError):
    """The mixture crossover point is undefined (q = 0 or q = 1)"""


class SeriesNotConvergedError(AccountantError):
    """The fractional-order series hit its term cap before reaching tolerance"""

    def __init__(self, alpha: float, terms: int, message: Optional[str] = None):
        self.alpha = alpha
        self.terms = terms
        super().__init__(message or f"Series for alpha={alpha} did not converge after {terms} terms")


class NoValidOrderError(AccountantError):
    """Every order of the grid failed"""


class NegativeLogMomentError(AccountantError):
    """log A_alpha came out below the floating-point slack"""


# Models

class ModelError(DpFlError, ValueError):
    """Invalid model input"""


class DimensionMismatchError(ModelError):
    """Feature or parameter length does not match the architecture"""


class EmptyEvaluationError(ModelError):
    """Accuracy requested over zero samples"""


class ParamsFormatError(ModelError):
    """Parameter file is truncated or has a bad header"""


# Training

class TrainingError(DpFlError):
    """DP-SGD or federated run failure"""


class NonFiniteGradientError(TrainingError):
    """A per-sample gradient contained NaN or infinity"""


class OverlappingClientsError(TrainingError, ValueError):
    """The two client datasets share samples"""


# Data

class DataError(DpFlError, ValueError):
    """Dataset ingestion or preprocessing failure"""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MalformedHeaderError(DataError):
    pass


class RaggedRowError(DataError):
    pass


class NonNumericCellError(DataError):
    pass


class DuplicateGeneError(DataError):
    pass


class UnknownLabelError(DataError):
    pass


class SignatureFormatError(DataError):
    pass


class EmptySelectionError(DataError):
    """Signature and matrix share no gene"""


class ClassTooSmallError(DataError):
    """A class has fewer samples than requested split parts"""


class MissingValuesError(DataError):
    """Training requested on a matrix that still has missing entries"""


# Harness

class HarnessError(DpFlError):
    """Experiment orchestration failure"""


class GridConfigError(HarnessError, ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class FrontierParseError(HarnessError, ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NoFeasibleConfigurationError(HarnessError):
    """No frontier record satisfies the budget target"""


class BudgetViolationError(HarnessError):
    """Realized budget exceeds the target; frontier and accountant disagree"""


class OutputPathError(HarnessError):
    """Output location is not writable"""


class ExperimentFailedError(HarnessError):
    """At least one seed of a repeated run failed"""

    def __init__(self, failures: List[Tuple[int, str]]):
        self.failures = failures
        detail = "; ".join(f"seed {seed}: {error}" for seed, error in failures)
        super().__init__(f"{len(failures)} seed(s) failed: {detail}")


class GridSearchError(HarnessError):
    """Some grid points failed; successful records were still written"""

    def __init__(self, failures: List[Tuple[int, str]], records: list):
        self.failures = failures
        self.records = records
        detail = "; ".join(f"point {index}: {error}" for index, error in failures)
        super().__init__(f"{len(failures)} grid point(s) failed: {detail}")
