"""Exception hierarchy.

Every error derives from the builtin a caller would otherwise expect
(ValueError, FileNotFoundError, RuntimeError) and carries the exit code
the CLI maps it to: 1 config, 2 missing artifact, 3 runtime failure.
"""


class SSLProbeError(Exception):
    exit_code = 3


class ContractError(SSLProbeError, ValueError):
    """Shape, dimension or argument-domain violation."""


class AnnotationParseError(SSLProbeError, ValueError):
    pass


class InvalidAnnotationError(SSLProbeError, ValueError):
    pass


class CapacityError(SSLProbeError, ValueError):
    def __init__(self, category: str, available: int, requested: int):
        self.category = category
        self.available = available
        self.requested = requested
        super().__init__(
            f"Class {category!r} has {available} records, {requested} requested"
        )


class StratificationError(SSLProbeError, ValueError):
    pass


class IngestionError(SSLProbeError, ValueError):
    def __init__(self, locator: str, reason: str):
        self.locator = locator
        super().__init__(f"Cannot ingest {locator}: {reason}")


class PolicyError(SSLProbeError, ValueError):
    exit_code = 1


class CheckpointError(SSLProbeError, RuntimeError):
    pass


class CorruptCheckpointError(CheckpointError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class CheckpointDigestError(CheckpointError):
    pass


class IncompatibleCheckpointError(CheckpointError):
    def __init__(self, expected: str, found: str):
        self.expected = expected
        self.found = found
        super().__init__(
            f"Checkpoint architecture {found!r} does not match requested {expected!r}"
        )


class NonFiniteLossError(SSLProbeError, RuntimeError):
    def __init__(self, epoch: int, step: int, loss: float):
        self.epoch = epoch
        self.step = step
        self.loss = loss
        super().__init__(f"Non-finite loss {loss} at epoch {epoch}, step {step}")


class FrozenBackboneError(SSLProbeError, RuntimeError):
    pass


class ConfigError(SSLProbeError, ValueError):
    exit_code = 1


class OutputExistsError(SSLProbeError, FileExistsError):
    exit_code = 1


class MissingArtifactError(SSLProbeError, FileNotFoundError):
    exit_code = 2
