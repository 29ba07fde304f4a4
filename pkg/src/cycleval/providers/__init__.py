"""Provider contracts plus the sim, http, and file-backed families."""

from .base import (
    Captioner,
    ImageEmbedder,
    ImageGenerator,
    ProviderDescriptor,
    ProviderSet,
    TextEmbedder,
)
from .filebacked import (
    FileCaptioner,
    FileImageEmbedder,
    FileImageGenerator,
    FileTextEmbedder,
)
from .http import (
    HttpCaptioner,
    HttpImageEmbedder,
    HttpImageGenerator,
    HttpProviderConfig,
    HttpTextEmbedder,
    JsonHttpClient,
)
from .sim import (
    RotatedImageEmbedder,
    SimCaptioner,
    SimImageEmbedder,
    SimImageGenerator,
    SimTextEmbedder,
    SimWorld,
    make_synthetic_dataset,
    sim_provider_set,
)

__all__ = [
    "Captioner",
    "ImageEmbedder",
    "ImageGenerator",
    "ProviderDescriptor",
    "ProviderSet",
    "TextEmbedder",
    "FileCaptioner",
    "FileImageEmbedder",
    "FileImageGenerator",
    "FileTextEmbedder",
    "HttpCaptioner",
    "HttpImageEmbedder",
    "HttpImageGenerator",
    "HttpProviderConfig",
    "HttpTextEmbedder",
    "JsonHttpClient",
    "RotatedImageEmbedder",
    "SimCaptioner",
    "SimImageEmbedder",
    "SimImageGenerator",
    "SimTextEmbedder",
    "SimWorld",
    "make_synthetic_dataset",
    "sim_provider_set",
]
