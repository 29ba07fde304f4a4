"""Exception hierarchy shared across the harness."""


class CycleEvalError(Exception):
    """Base class for all cycleval errors."""


class FormatError(CycleEvalError):
    """A file or payload does not match its declared format."""


class ReferentialIntegrityError(FormatError):
    """A record references an id that does not exist."""


class ConfigurationError(CycleEvalError):
    """Invalid or incomplete run configuration (bad config file, missing credentials)."""


class DimensionMismatchError(CycleEvalError):
    """Two vectors that must share a dimension do not."""


class DegenerateVectorError(CycleEvalError):
    """Cosine similarity is undefined for a zero-norm vector."""


class ProviderError(CycleEvalError):
    """Base class for failures raised by caption/generate/embed providers."""


class UnresolvableImageError(ProviderError):
    """The provider cannot resolve the given image reference."""


class CaptionDecodeError(ProviderError):
    """A simulated caption payload could not be decoded (bad prefix or hex length)."""


class ProtocolError(ProviderError):
    """A remote response violated the provider protocol (wrong shape, wrong dimension)."""


class AuthenticationError(ProviderError):
    """The remote rejected our credentials; never retried."""


class TransportError(ProviderError):
    """HTTP transport failed; carries the last observed status code if any."""

    def __init__(self, message: str, status: int | None = None):
        super().__init__(message)
        self.status = status


class ProviderTimeoutError(TransportError):
    """The remote did not answer within the configured timeout."""


class FailureCeilingExceeded(CycleEvalError):
    """Too many per-record failures; the run is not trustworthy."""


class UnsupportedVersionError(CycleEvalError):
    """A persisted run file declares a schema version this build cannot read."""


class RunMismatchError(CycleEvalError):
    """Two runs that must cover the same images (or conditions) do not."""
