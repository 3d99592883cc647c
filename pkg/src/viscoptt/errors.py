"""Exception hierarchy shared by all pipeline stages."""


class PipelineError(Exception):
    """Base class for every error raised by this package."""


# signal core
class EmptySignal(PipelineError):
    pass


class NonFiniteSample(PipelineError):
    def __init__(self, index):
        super().__init__(f"non-finite sample at index {index}")
        self.index = index


class NonPositiveRate(PipelineError):
    pass


class InvalidFilterSpec(PipelineError):
    pass


class SignalTooShort(PipelineError):
    pass


class FactorTooSmall(PipelineError):
    pass


# fiducials
class NoBeatsFound(PipelineError):
    pass


class WindowTooShort(PipelineError):
    pass


class NonPositiveSlope(PipelineError):
    pass


class IntersectionOutOfRange(PipelineError):
    pass


# decomposition
class NotEnoughImfs(PipelineError):
    pass


# regression
class TooFewSamples(PipelineError):
    pass


class TargetOutOfRange(PipelineError):
    pass


# evaluation
class TooFewBeats(PipelineError):
    def __init__(self, subject, n):
        super().__init__(f"subject {subject!r} has only {n} beats")
        self.subject = subject


class LengthMismatch(PipelineError):
    pass


# synthetic data
class NonUniformGrid(PipelineError):
    pass


class ProfileLengthMismatch(PipelineError):
    pass


# records, config and model files
class ParseError(PipelineError):
    def __init__(self, line, msg):
        super().__init__(f"line {line}: {msg}")
        self.line = line


class HeaderMismatch(PipelineError):
    pass


class MissingColumn(PipelineError):
    def __init__(self, column):
        super().__init__(f"missing column {column!r}")
        self.column = column


class ConfigError(PipelineError):
    pass


class VersionMismatch(PipelineError):
    pass


class CorruptModel(PipelineError):
    pass
