"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes: config errors exit 2, format errors
exit 3, numeric errors exit 4, anything else nonzero generic.
"""


class LoraforgeError(Exception):
    exit_code = 1


class ConfigError(LoraforgeError):
    """Bad configuration: shapes, ranges, unknown keys, missing artifacts of
    the right kind."""
    exit_code = 2


class FormatError(LoraforgeError):
    """Malformed on-disk artifact (LWT container, manifest, image file)."""
    exit_code = 3

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class NumericError(LoraforgeError):
    """Non-finite values or numerically degenerate inputs."""
    exit_code = 4


class ShapeError(ConfigError):
    """Operand shapes incompatible with the requested operation."""


class ContractError(LoraforgeError):
    """A documented precondition was violated by the caller."""


class RangeError(LoraforgeError):
    """Argument outside its documented range."""


class DataError(LoraforgeError):
    """Dataset contents violate an assumption (empty class, unassigned
    record, ...)."""


class PromptError(LoraforgeError):
    """Prompt cannot be used for conditioning (no known tokens)."""


class CompositionError(ConfigError):
    """Adapter composition rejected; carries the offending total strength."""

    def __init__(self, message, total_strength):
        super().__init__(message)
        self.total_strength = total_strength


class StageError(LoraforgeError):
    """Pipeline stage cannot run (missing prerequisite artifact, lock held)."""
