"""Exception hierarchy.

Every error raised by the package derives from :class:`IntentLabError` and
belongs to one of three categories, which the CLI maps to exit codes.
"""


class IntentLabError(Exception):
    exit_code = 1


class ConfigError(IntentLabError, ValueError):
    exit_code = 2


class DataError(IntentLabError, ValueError):
    exit_code = 3


class NumericError(IntentLabError, ArithmeticError):
    exit_code = 4


# ingest
class MissingFile(DataError, FileNotFoundError):
    pass


class MalformedRow(DataError):
    def __init__(self, path, line_no, reason):
        super().__init__(f"{path}:{line_no}: {reason}")
        self.path = path
        self.line_no = line_no


class EmptyRecording(DataError):
    pass


class BadMagic(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class UnsupportedVersion(DataError):
    pass


class RangeError(DataError):
    pass


class IoFailure(DataError, OSError):
    pass


class ParseError(DataError):
    def __init__(self, line_no, field, reason):
        super().__init__(f"line {line_no}, field {field!r}: {reason}")
        self.line_no = line_no
        self.field = field


class DuplicatePath(DataError):
    pass


# pipeline
class TooShort(DataError):
    pass


class EmptyClass(DataError):
    pass


class NonPositiveSigma(ConfigError):
    pass


class BadRange(ConfigError):
    pass


class EmptyInput(DataError):
    pass


class ChannelMismatch(DataError):
    pass


class OutOfRange(DataError):
    pass


class ZeroCountClass(DataError):
    pass


# engine
class ShapeMismatch(DataError):
    pass


class KernelTooLarge(ShapeMismatch):
    pass


class WindowTooLarge(ShapeMismatch):
    pass


class RateOutOfRange(ConfigError):
    pass


class LabelOutOfRange(DataError):
    pass


class NegativeRate(ConfigError):
    pass


class NotScalarLoss(NumericError):
    pass


class NonFiniteError(NumericError):
    def __init__(self, op):
        super().__init__(f"non-finite values produced by {op}")
        self.op = op


# models
class NotDivisible(ShapeMismatch):
    pass


class HeadsDontDivide(ConfigError):
    pass


class OddSpatialDims(ShapeMismatch):
    pass


class VersionMismatch(DataError):
    pass


class CorruptPayload(DataError):
    pass


class ConfigMismatch(ConfigError):
    pass


# train / eval
class EmptySplit(DataError):
    pass


class DivergedLoss(NumericError):
    def __init__(self, epoch, batch, value):
        super().__init__(f"non-finite loss {value} at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch


class EmptyGrid(ConfigError):
    pass


class TooFewSamples(ConfigError):
    pass


class BadSpec(ConfigError):
    pass
