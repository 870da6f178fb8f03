"""Exception hierarchy shared by the pipeline stages."""


class SpeechSIError(Exception):
    """Base class for all toolkit errors."""


class MalformedContainer(SpeechSIError):
    pass


class UnsupportedEncoding(SpeechSIError):
    pass


class ClipTooShort(SpeechSIError):
    pass


class TooFewFrames(SpeechSIError):
    pass


class EmptyCorpus(SpeechSIError):
    pass


class EmptyClass(SpeechSIError):
    pass


class NonFiniteFeature(SpeechSIError):
    pass


class IncompatibleInputMeta(SpeechSIError):
    pass


class DivergedLoss(SpeechSIError):
    pass


class ClassTooSmall(SpeechSIError):
    pass


class LengthMismatch(SpeechSIError):
    pass


class SingleClassFold(SpeechSIError):
    pass


class OutOfRangeP(SpeechSIError):
    pass


class EmptyAfterStopwords(SpeechSIError):
    pass


class IoFailure(SpeechSIError):
    pass


class ManifestError(SpeechSIError):
    pass
