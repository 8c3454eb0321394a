"""Exception types shared across the pipeline."""


class AmlRiskError(Exception):
    """Base class for all library errors."""


class ConfigError(AmlRiskError):
    """Invalid configuration; message names the offending field."""


class SchemaError(AmlRiskError):
    """Input data does not match the expected table schema."""


class IntegrityError(AmlRiskError):
    """Store or artifact integrity violated (duplicate keys, corrupt files)."""


class ParameterError(AmlRiskError):
    """Operation called with invalid parameters."""


class StratificationError(AmlRiskError):
    """A stratified split or fold plan is infeasible for the given labels."""


class MetricUndefinedError(AmlRiskError):
    """Metric has no defined value for the given inputs (e.g. single-class AUROC)."""


class NotFoundError(AmlRiskError):
    """Requested entity does not exist."""
