"""Exception hierarchy for the recognition runtime."""


class SignStreamError(Exception):
    """Base class for all runtime errors."""


# --- vocabulary / config ---

class DuplicateLabel(SignStreamError):
    def __init__(self, label):
        self.label = label
        super().__init__(f"duplicate vocabulary label: {label!r}")


class EmptyVocabulary(SignStreamError):
    pass


class ParseError(SignStreamError):
    pass


class ConfigRange(SignStreamError):
    """A config field is outside its allowed range."""

    def __init__(self, field, detail=""):
        self.field = field
        msg = f"config field {field!r} out of range"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class ConfigMissing(SignStreamError):
    def __init__(self, field):
        self.field = field
        super().__init__(f"missing required config field {field!r}")


# --- preprocessing ---

class DecodeError(SignStreamError):
    pass


class FrameTooSmall(SignStreamError):
    pass


class WindowSizeMismatch(SignStreamError):
    def __init__(self, expected, got):
        self.expected = expected
        self.got = got
        super().__init__(f"window needs exactly {expected} frames, got {got}")


class OutOfOrderFrame(SignStreamError):
    pass


# --- backend ---

class ModelNotFound(SignStreamError):
    pass


class ClassCountMismatch(SignStreamError):
    def __init__(self, found, expected):
        self.found = found
        self.expected = expected
        super().__init__(f"model has {found} output classes, vocabulary has {expected}")


class ModelShapeError(SignStreamError):
    pass


class InferShapeError(SignStreamError):
    pass


class BackendError(SignStreamError):
    pass


class ScriptError(SignStreamError):
    pass


# --- decoding ---

class InvalidScores(SignStreamError):
    pass


class DimensionMismatch(SignStreamError):
    pass


# --- evaluation ---

class EmptyReference(SignStreamError):
    pass


class SourceError(SignStreamError):
    pass


class UnknownLabel(SignStreamError):
    def __init__(self, label):
        self.label = label
        super().__init__(f"reference label {label!r} not in vocabulary")


# --- service ---

class SessionClosed(SignStreamError):
    pass
