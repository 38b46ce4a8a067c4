"""
Exception hierarchy for the automaton-group key-agreement toolkit.

Every error carries an ``exit_code`` so the CLI can map failures to
distinct process exit statuses.
"""

from enum import IntEnum


class ToolkitError(Exception):
    """Base class for all toolkit errors."""
    exit_code = 1


# --- automaton core -------------------------------------------------------

class AutomatonError(ToolkitError, ValueError):
    """Malformed Mealy automaton tables."""
    exit_code = 4


class LetterOutOfRangeError(AutomatonError):
    """A letter outside {0..k-1} was supplied."""


class WordSyntaxError(ToolkitError, ValueError):
    """A generator word could not be parsed."""
    exit_code = 4


class PlatformMismatchError(ToolkitError, ValueError):
    """Operands belong to different platforms."""
    exit_code = 4


class UnknownPlatformError(ToolkitError, ValueError):
    """No platform registered under the requested name or id."""
    exit_code = 4


class BudgetExhaustedError(ToolkitError, RuntimeError):
    """A contraction budget bound was hit before the computation finished."""
    exit_code = 3


class NucleusError(ToolkitError, RuntimeError):
    """The platform has no nucleus, or the nucleus does not cover a section."""
    exit_code = 4


# --- portrait bytes -------------------------------------------------------

class PortraitFormatError(ToolkitError, ValueError):
    """Malformed portrait bytes."""
    exit_code = 4


class PortraitHeaderError(PortraitFormatError):
    """Bad magic, version, platform id, alphabet size or nucleus size."""


class PortraitTruncatedError(PortraitFormatError):
    """The byte stream ended inside a record."""


class PortraitTagError(PortraitFormatError):
    """A node record started with an unknown tag byte."""


class PortraitPermutationError(PortraitFormatError):
    """An internal node carried a non-bijective permutation."""


class PortraitLeafError(PortraitFormatError):
    """A leaf referenced a nucleus id that does not exist."""


class PortraitTrailingDataError(PortraitFormatError):
    """Extra bytes followed a complete portrait."""


class PortraitNonCanonicalError(PortraitFormatError):
    """A well-formed tree that is not the canonical portrait of its element."""


# --- affine platform ------------------------------------------------------

class AffineError(ToolkitError, ValueError):
    """Invalid affine element or word."""
    exit_code = 4


class DimensionMismatchError(AffineError):
    """Affine operands of different dimension."""


class NonUnimodularError(AffineError):
    """A matrix with |det M| != 1."""


# --- configuration / protocol ---------------------------------------------

class ConfigError(ToolkitError, ValueError):
    """Unreadable platform config or environment override."""
    exit_code = 4


class ParamsError(ToolkitError, ValueError):
    """Invalid public parameters."""
    exit_code = 4


class PrivateKeyError(ToolkitError, ValueError):
    """Invalid private key."""
    exit_code = 4


class TransmissionError(ToolkitError, ValueError):
    """A transmission does not fit the session it is used in."""
    exit_code = 4


class TranscriptError(ToolkitError, ValueError):
    """Malformed session transcript file."""
    exit_code = 4


class SearchBudgetExceeded(BudgetExhaustedError):
    """The conjugacy search hit its node budget before finishing."""


# --- wire ------------------------------------------------------------------

class FailureCode(IntEnum):
    """Wire-level failure codes; also sent in ERROR frames."""
    VERSION_MISMATCH = 0x01
    PLATFORM_MISMATCH = 0x02
    FRAME_TOO_LARGE = 0x03
    TRUNCATED_FRAME = 0x04
    CONFIRM_MISMATCH = 0x05
    OUT_OF_PHASE = 0x06
    PARAMS_MISMATCH = 0x07
    BAD_MAGIC = 0x08
    MALFORMED_PAYLOAD = 0x09
    PEER_ERROR = 0x0A
    UNKNOWN_TYPE = 0x0B


class ExchangeError(ToolkitError, RuntimeError):
    """A key-exchange session failed."""
    exit_code = 5

    def __init__(self, code: FailureCode, message: str = ""):
        self.code = FailureCode(code)
        super().__init__(f"{self.code.name.lower()}: {message}" if message else self.code.name.lower())


class FrameError(ExchangeError):
    """A frame could not be read or decoded."""
