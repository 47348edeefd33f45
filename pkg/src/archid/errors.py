"""Exception types shared across the toolkit.

Grouped so the CLI can map them to exit codes: UsageError -> 1,
DataError -> 2, anything else -> 3.
"""


class ArchidError(Exception):
    pass


class DataError(ArchidError):
    """Problems with user-supplied inputs (files, corpora, CSVs)."""


class UsageError(ArchidError):
    """Bad invocation (flags, missing arguments)."""


# --- binary format / corpus ---

class NotElf(DataError):
    pass


class MalformedHeader(DataError):
    pass


class NoCodeSections(DataError):
    pass


class FragmentTooLarge(DataError):
    pass


class UnknownArchitectureDirectory(DataError):
    pass


class EmptyCorpus(DataError):
    pass


# --- features ---

class InvalidPattern(DataError):
    pass


class EmptyInput(DataError):
    pass


class SchemaMismatch(DataError):
    pass


class IoFailure(ArchidError):
    pass


# --- classifiers ---

class TooFewSamples(DataError):
    pass


class TooFewClasses(DataError):
    pass


class NonFinite(ArchidError):
    pass


# --- evaluation ---

class EmptyMatrix(DataError):
    pass


class InsufficientClassSupport(DataError):
    pass


class DegenerateClass(DataError):
    pass


# --- model store ---

class BadMagic(DataError):
    pass


class UnsupportedVersion(DataError):
    pass


class CorruptPayload(DataError):
    def __init__(self, message, offset=None):
        super().__init__(message if offset is None else f"{message} (at byte offset {offset})")
        self.offset = offset


class InvalidModel(DataError):
    pass
