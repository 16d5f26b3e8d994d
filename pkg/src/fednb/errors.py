"""Exception hierarchy for the fednb package."""


class FedNBError(Exception):
    """Base class for all fednb errors."""


class SchemaError(FedNBError):
    """Schema definition or header mismatch problems."""


class ParseError(FedNBError):
    """Unparseable cell value in an input file."""


class LabelError(FedNBError):
    """Label value outside the known label universe."""


class SynthSpecError(FedNBError):
    """Invalid synthetic data specification."""


class StratificationError(FedNBError):
    """A class is too small to stratify."""


class PartitionError(FedNBError):
    """Degenerate Dirichlet partition (empty node after retries)."""


class FitError(FedNBError):
    """Model fitting on invalid input."""


class ShapeError(FedNBError):
    """Dimension mismatch between a model and a sample."""


class EnsembleError(FedNBError):
    """Inconsistent ensemble (weights vs. models, invalid weights)."""


class MetricError(FedNBError):
    """Metric requested on empty or invalid data."""


class NormalizationError(FedNBError):
    """log-softmax over a vector with no finite entry."""


class DegeneratePriorError(FedNBError):
    """All-zero coherence vector cannot be normalized."""


class OptimizerError(FedNBError):
    """Optimizer started at a non-finite objective value."""


class InversionError(FedNBError):
    """Weight vector cannot be mapped back to unconstrained space."""


class ConfigError(FedNBError):
    """Invalid experiment/CLI configuration."""
