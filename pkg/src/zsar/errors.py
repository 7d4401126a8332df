"""Exception types shared across the package."""


class ZsarError(Exception):
    """Base class for all package-specific errors."""


class ParseError(ZsarError):
    """An LLM response could not be parsed into the expected structure.

    Carries the raw response text for diagnostics.
    """

    def __init__(self, message: str, raw: str = ""):
        super().__init__(message)
        self.raw = raw


class TransportError(ZsarError):
    """Network, HTTP, or authentication failure talking to the LLM endpoint."""

    def __init__(self, message: str, raw: str = ""):
        super().__init__(message)
        self.raw = raw


class MissingApiKeyError(TransportError):
    """The configured API key environment variable is unset."""


class BackendError(ZsarError):
    """Encoder backend failure (load, lookup, or inference)."""


class TokenizationError(ZsarError):
    """A text could not be tokenized at all."""


class ShapeError(ZsarError):
    """An array does not have the shape the contract requires."""


class DomainError(ZsarError):
    """An argument is outside the operation's domain."""


class DecodeError(ZsarError):
    """A video file or frame directory could not be decoded."""


class EmptyVideoError(ZsarError):
    """A video source contains zero frames."""


class DegenerateEmbeddingError(ZsarError):
    """A zero-norm embedding reached the classifier; upstream encoding is broken."""


class ManifestError(ZsarError):
    """A dataset manifest or classes file is malformed."""


class MissingDescriptorsError(ZsarError):
    """Evaluation requires descriptors that are neither cached nor generatable."""

    def __init__(self, message: str, missing: list[str]):
        super().__init__(message)
        self.missing = missing


class EvalAbortError(ZsarError):
    """Too many samples failed to decode; the evaluation result would be misleading."""


class ConfigError(ZsarError):
    """A run configuration file or flag combination is invalid."""
