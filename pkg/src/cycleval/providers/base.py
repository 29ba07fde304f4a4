"""Contracts for the four external capabilities the pipeline composes."""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass

from ..domain import Caption, EmbeddingVector, ImageRef

PROVIDER_KINDS = ("captioner", "generator", "image_embedder", "text_embedder")
_EMBEDDER_KINDS = ("image_embedder", "text_embedder")


@dataclass(frozen=True)
class ProviderDescriptor:
    """Identity and declared properties of one provider."""

    id: str
    kind: str
    deterministic: bool
    embedding_dim: int | None = None

    def __post_init__(self):
        if self.kind not in PROVIDER_KINDS:
            raise ValueError(f"unknown provider kind: {self.kind!r}")
        if self.kind in _EMBEDDER_KINDS:
            if not self.embedding_dim or self.embedding_dim <= 0:
                raise ValueError(f"{self.kind} must declare a positive embedding_dim")
        elif self.embedding_dim is not None:
            raise ValueError(f"{self.kind} must not declare embedding_dim")


class Captioner(ABC):
    """Turns an image into a short text description."""

    @property
    @abstractmethod
    def descriptor(self) -> ProviderDescriptor: ...

    @abstractmethod
    def caption(self, image: ImageRef, prompt: str, token_limit: int) -> Caption: ...


class ImageGenerator(ABC):
    """Turns a caption into a new image; sample_index selects among variants."""

    @property
    @abstractmethod
    def descriptor(self) -> ProviderDescriptor: ...

    @abstractmethod
    def generate_image(self, caption: Caption, sample_index: int) -> ImageRef: ...


class ImageEmbedder(ABC):
    """Maps an image to a fixed-dimension feature vector."""

    @property
    @abstractmethod
    def descriptor(self) -> ProviderDescriptor: ...

    @abstractmethod
    def embed_image(self, image: ImageRef) -> EmbeddingVector: ...


class TextEmbedder(ABC):
    """Maps a text to a fixed-dimension feature vector."""

    @property
    @abstractmethod
    def descriptor(self) -> ProviderDescriptor: ...

    @abstractmethod
    def embed_text(self, text: str) -> EmbeddingVector: ...


@dataclass
class ProviderSet:
    """The providers selected for one run; captioner and text embedder are
    optional because the validation protocol and the cycle metric do not need
    them, respectively."""

    generator: ImageGenerator | None = None
    image_embedder: ImageEmbedder | None = None
    captioner: Captioner | None = None
    text_embedder: TextEmbedder | None = None

    def descriptors(self) -> list[ProviderDescriptor]:
        out = []
        for provider in (self.captioner, self.generator, self.image_embedder, self.text_embedder):
            if provider is not None:
                out.append(provider.descriptor)
        return out
