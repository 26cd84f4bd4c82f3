"""Exception types raised across the package."""


class ChorusError(Exception):
    """Base class for all chorusid errors."""


# --- audio decoding / spectrogram ---

class MalformedHeader(ChorusError):
    """The byte stream is not a well-formed RIFF/WAVE container."""


class UnsupportedFormat(ChorusError):
    """The WAV container uses a codec or layout we do not decode."""


class ClipTooShort(ChorusError):
    """Fewer samples than one analysis frame."""


# --- feature aggregation ---

class EmptyInput(ChorusError):
    """No frame features available for aggregation."""


class NoDeltas(ChorusError):
    """No successor-difference values present (single-frame input)."""


# --- training store ---

class InsufficientFrames(ChorusError):
    """Not enough selected frames to form one training instance."""


class TargetTooLarge(ChorusError):
    """Requested per-class instance count exceeds availability."""


class BadMagic(ChorusError):
    """Store file does not start with the expected magic bytes."""


class VersionMismatch(ChorusError):
    """Store file was written by an incompatible format version."""


class ChecksumMismatch(ChorusError):
    """Store file is truncated or corrupted (CRC32 check failed)."""


# --- classifier ---

class SpecMismatch(ChorusError):
    """Feature vectors do not share a compatible feature spec."""


class KTooLarge(ChorusError):
    """More voting neighbours requested than candidate instances."""


class EmptyCandidates(ChorusError):
    """Candidate class filter leaves no classes to vote for."""


# --- evaluation ---

class DegenerateClass(ChorusError):
    """A one-vs-all split has no positives or no negatives."""


# --- archive ingestion ---

class NetworkError(ChorusError):
    """Archive API request failed at the transport level."""


class ArchiveSchemaChanged(ChorusError):
    """Archive API response is missing fields the schema map expects."""


class DownloadFailed(ChorusError):
    """A single audio download failed (recorded per entry, non-fatal)."""
