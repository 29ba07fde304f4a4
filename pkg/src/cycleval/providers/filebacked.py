"""Providers backed by precomputed lookup files.

Each provider reads one JSON file at construction and serves lookups from it,
which makes real model outputs replayable without network access. Paths
inside generation files are resolved relative to the file's own directory.
"""

from __future__ import annotations

import json
from pathlib import Path

from ..domain import BytesSource, Caption, EmbeddingVector, FileSource, ImageRef
from ..errors import FormatError, ProtocolError, UnresolvableImageError
from .base import (
    Captioner,
    ImageEmbedder,
    ImageGenerator,
    ProviderDescriptor,
    TextEmbedder,
)
from .sim import caption_digest


def _load_json(path: Path) -> dict:
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON at byte offset {exc.pos}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise FormatError(f"{path}: top level must be a JSON object")
    return doc


class FileCaptioner(Captioner):
    """Serves captions from ``{"captions": {image_id: text}}``."""

    def __init__(self, path: Path | str, provider_id: str | None = None):
        path = Path(path)
        doc = _load_json(path)
        captions = doc.get("captions")
        if not isinstance(captions, dict):
            raise FormatError(f"{path}: expected a 'captions' object")
        self._captions = {str(k): str(v) for k, v in captions.items()}
        self._descriptor = ProviderDescriptor(
            id=provider_id or f"file-captioner-{path.stem}",
            kind="captioner",
            deterministic=True,
        )

    @property
    def descriptor(self) -> ProviderDescriptor:
        return self._descriptor

    def caption(self, image: ImageRef, prompt: str, token_limit: int) -> Caption:
        text = self._captions.get(image.id)
        if text is None:
            raise UnresolvableImageError(
                f"{self.descriptor.id}: no precomputed caption for image {image.id!r}"
            )
        # Precomputed captions cannot be truncated, so an over-limit one is an
        # error rather than a silent cut.
        if len(text.split()) > token_limit:
            raise ProtocolError(
                f"{self.descriptor.id}: caption for {image.id!r} exceeds "
                f"the {token_limit}-token limit"
            )
        return Caption(text=text, origin="model", image_id=image.id)


class FileImageGenerator(ImageGenerator):
    """Maps caption text to a pregenerated image file.

    File format: ``{"images": {caption_text: relative_path}}``. Precomputed
    corpora carry a single generation per caption, so only sample_index 0 is
    servable.
    """

    def __init__(self, path: Path | str, provider_id: str | None = None):
        path = Path(path)
        doc = _load_json(path)
        images = doc.get("images")
        if not isinstance(images, dict):
            raise FormatError(f"{path}: expected an 'images' object")
        self._root = path.parent
        self._images = {str(k): str(v) for k, v in images.items()}
        self._descriptor = ProviderDescriptor(
            id=provider_id or f"file-generator-{path.stem}",
            kind="generator",
            deterministic=True,
        )

    @property
    def descriptor(self) -> ProviderDescriptor:
        return self._descriptor

    def generate_image(self, caption: Caption, sample_index: int) -> ImageRef:
        if sample_index != 0:
            raise UnresolvableImageError(
                f"{self.descriptor.id}: precomputed generations carry a single sample"
            )
        rel = self._images.get(caption.text)
        if rel is None:
            raise UnresolvableImageError(
                f"{self.descriptor.id}: no pregenerated image for this caption"
            )
        digest = caption_digest(caption.text)
        return ImageRef(
            id=f"gen-{digest[:16]}-s{sample_index}",
            source=FileSource(self._root / rel),
        )


class _FileEmbedderBase:
    def __init__(self, path: Path, kind: str, provider_id: str | None):
        doc = _load_json(path)
        dim = doc.get("dim")
        vectors = doc.get("vectors")
        if not isinstance(dim, int) or dim <= 0 or not isinstance(vectors, dict):
            raise FormatError(f"{path}: expected a positive 'dim' and a 'vectors' object")
        self._vectors = vectors
        self._path = path
        self._descriptor = ProviderDescriptor(
            id=provider_id or f"file-{kind.replace('_', '-')}-{path.stem}",
            kind=kind,
            deterministic=True,
            embedding_dim=dim,
        )

    @property
    def descriptor(self) -> ProviderDescriptor:
        return self._descriptor

    def _lookup(self, key: str, what: str) -> EmbeddingVector:
        values = self._vectors.get(key)
        if values is None:
            raise UnresolvableImageError(
                f"{self.descriptor.id}: no precomputed embedding for {what}"
            )
        if len(values) != self.descriptor.embedding_dim:
            raise ProtocolError(
                f"{self._path}: entry for {what} has {len(values)} values, "
                f"file declares dim {self.descriptor.embedding_dim}"
            )
        return EmbeddingVector(self.descriptor.embedding_dim, values)


class FileImageEmbedder(_FileEmbedderBase, ImageEmbedder):
    """Serves vectors from ``{"dim": N, "vectors": {image_id: [...]}}``."""

    def __init__(self, path: Path | str, provider_id: str | None = None):
        super().__init__(Path(path), "image_embedder", provider_id)

    def embed_image(self, image: ImageRef) -> EmbeddingVector:
        return self._lookup(image.id, f"image {image.id!r}")


class FileTextEmbedder(_FileEmbedderBase, TextEmbedder):
    """Serves vectors from ``{"dim": N, "vectors": {exact_text: [...]}}``."""

    def __init__(self, path: Path | str, provider_id: str | None = None):
        super().__init__(Path(path), "text_embedder", provider_id)

    def embed_text(self, text: str) -> EmbeddingVector:
        if not text.strip():
            raise ValueError("text must be non-empty")
        return self._lookup(text, "text")


__all__ = [
    "FileCaptioner",
    "FileImageGenerator",
    "FileImageEmbedder",
    "FileTextEmbedder",
]
