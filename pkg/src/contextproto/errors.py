"""Exception types shared across the package.

Each error carries a stable ``category`` string; the command-line front end
prints it in machine-parsable ``category: message`` form.
"""


class ContextProtoError(Exception):
    category = "error"


class DimensionError(ContextProtoError, ValueError):
    category = "dimension"


class DomainError(ContextProtoError, ValueError):
    category = "domain"


class ContractError(ContextProtoError):
    category = "contract"


class EmptyContextError(ContextProtoError):
    category = "empty-context"


class ParseError(ContextProtoError):
    category = "parse"


class FormatError(ContextProtoError):
    category = "format"


class IntegrityError(ContextProtoError):
    category = "integrity"


class SamplingError(ContextProtoError):
    category = "sampling"


class UnknownLabelError(ContextProtoError):
    category = "lookup"


class ConfigError(ContextProtoError, ValueError):
    category = "config"


class CheckpointError(ContextProtoError):
    category = "checkpoint"


class TrainingDiverged(ContextProtoError):
    category = "diverged"
