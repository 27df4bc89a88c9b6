"""Exception types shared across the package."""


class SULPError(Exception):
    """Base class for all package-specific errors."""


class DuplicateColumnError(SULPError):
    """A CSV header or dataset contains the same column name twice."""


class RaggedRowsError(SULPError):
    """A CSV body row has a different number of cells than the header."""


class NonMonotoneTimeError(SULPError):
    """The time index is not strictly increasing."""


class ConstantColumnError(SULPError):
    """A column has zero sample variance and cannot be standardized."""


class MissingColumnError(SULPError):
    """A requested column name is not present in the dataset."""


class InsufficientSampleError(SULPError):
    """The sample is too short for the requested lag/horizon structure."""


class KernelNotPDError(SULPError):
    """The GP kernel failed a Cholesky factorization even after jitter."""


class InstabilityError(SULPError):
    """A simulated process has an explosive companion matrix."""


class ConfigError(SULPError):
    """A run configuration file violates the documented schema."""


class NumericalError(SULPError):
    """A sampler step hit an unrecoverable numerical failure."""
