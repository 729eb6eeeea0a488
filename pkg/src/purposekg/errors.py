"""Exception hierarchy shared by every pipeline stage."""


class PurposeKGError(Exception):
    """Base class for all errors raised by the toolkit."""


class DocumentSyntaxError(PurposeKGError, SyntaxError):
    """A purpose, ontology or dataset file could not be parsed.

    ``lineno`` and ``offset`` are 1-based when the position is known.
    """

    def __init__(self, message, path=None, lineno=None, offset=None):
        where = str(path) if path else "<document>"
        if lineno is not None:
            where += f":{lineno}"
            if offset is not None:
                where += f":{offset}"
        super().__init__(f"{where}: {message}")
        self.msg = message
        self.filename = str(path) if path else None
        self.lineno = lineno
        self.offset = offset


class ValidationError(PurposeKGError, ValueError):
    pass


class DanglingRangeError(ValidationError):
    pass


class RecordPathError(PurposeKGError):
    pass


class EmptyAlphaError(PurposeKGError, ZeroDivisionError):
    pass


class EmptyUniverseError(PurposeKGError, ZeroDivisionError):
    pass


class NoDatasetError(PurposeKGError):
    pass


class NoOntologyError(PurposeKGError):
    pass


class MappingLossError(PurposeKGError):
    pass


class MissingIdentityError(PurposeKGError):
    pass


class EtypeUnknownError(PurposeKGError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class InvalidBaseIriError(PurposeKGError, ValueError):
    pass


class BacktrackExhaustedError(PurposeKGError):
    """Raised when the gate loop runs out of re-entries.

    ``history`` holds every GateDecision taken, in order.
    """

    def __init__(self, message, history):
        super().__init__(message)
        self.history = list(history)


class MissingArtifactError(PurposeKGError):
    pass


class EmptyWorkspaceError(PurposeKGError):
    pass


class WorkspaceLockedError(PurposeKGError):
    pass


__all__ = [
    "BacktrackExhaustedError",
    "DanglingRangeError",
    "DocumentSyntaxError",
    "EmptyAlphaError",
    "EmptyUniverseError",
    "EmptyWorkspaceError",
    "EtypeUnknownError",
    "InvalidBaseIriError",
    "MappingLossError",
    "MissingArtifactError",
    "MissingIdentityError",
    "NoDatasetError",
    "NoOntologyError",
    "PurposeKGError",
    "RecordPathError",
    "ValidationError",
    "WorkspaceLockedError",
]
