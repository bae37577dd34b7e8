"""Exception taxonomy shared by all pipeline stages.

Two broad families matter at the CLI boundary: ``InputError`` (unreadable or
malformed inputs, exit code 2) and ``InvariantError`` (a pipeline contract was
violated mid-run, exit code 3).
"""


class PipelineError(Exception):
    """Base class for every error raised by this package."""


class InputError(PipelineError):
    """Bad or malformed input data / arguments."""


class InvariantError(PipelineError):
    """A cross-stage contract was violated."""


# --- transcript / frame parsing -----------------------------------------


class MissingColumn(InputError):
    def __init__(self, name):
        super().__init__(f"required column missing: {name!r}")
        self.name = name


class BadTimestamp(InputError):
    def __init__(self, row, detail=""):
        msg = f"bad timestamp at row {row}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)
        self.row = row


class UnknownSpeaker(InputError):
    def __init__(self, row, label):
        super().__init__(f"unknown speaker {label!r} at row {row}")
        self.row = row
        self.label = label


class MalformedRow(InputError):
    def __init__(self, row, detail=""):
        super().__init__(f"malformed row {row}: {detail}")
        self.row = row


class ColumnCountMismatch(InputError):
    def __init__(self, expected, got):
        super().__init__(f"expected {expected} columns, got {got}")
        self.expected = expected
        self.got = got


class NonMonotonicTimestamps(InputError):
    pass


class NonNumericCell(InputError):
    def __init__(self, row, col, value):
        super().__init__(f"non-numeric cell at row {row}, column {col}: {value!r}")
        self.row = row
        self.col = col
        self.value = value


class InvalidWindow(InputError):
    pass


class FileNotFound(InputError):
    def __init__(self, path, session_id=None):
        tag = f" (session {session_id})" if session_id else ""
        super().__init__(f"file not found: {path}{tag}")
        self.path = str(path)
        self.session_id = session_id


class ManifestError(InputError):
    pass


class EmptyDataset(InputError):
    pass


class DictionaryError(InputError):
    """A dictionary or rules file failed validation."""


# --- features -------------------------------------------------------------


class EmptySegment(InputError):
    pass


class LayoutMismatch(InvariantError):
    pass


# --- selection ------------------------------------------------------------


class LengthMismatch(InputError):
    pass


class DegenerateInput(InputError):
    pass


class EmptySubset(InputError):
    pass


class NoUsableFeatures(InputError):
    pass


class TooFewSamples(InputError):
    pass


class DegenerateLabels(InputError):
    pass


class KTooLarge(InputError):
    def __init__(self, k, available):
        super().__init__(f"k={k} exceeds the {available} available features")
        self.k = k
        self.available = available


# --- models ---------------------------------------------------------------


class EmptyInput(InputError):
    pass


class NonFiniteFeature(InvariantError):
    pass


class DimensionMismatch(InvariantError):
    pass


# --- evaluation / synthesis ------------------------------------------------


class OverlapError(InvariantError):
    pass


class InvalidSpec(InputError):
    pass
