"""Deterministic simulated providers over a seeded latent-vector world.

The world assigns image index k a unit latent u_k drawn from a keyed
counter-based generator, so any (seed, dim, k) triple always produces the
same latent. Captions are a plain-text encoding of the (optionally noised)
latent, generation decodes them back, and embedding applies a fixed seeded
orthonormal map, which preserves cosines exactly. This gives an offline,
fully reproducible stand-in for the captioner / generator / embedder stack.

Noise convention: ``caption_noise`` and ``generation_noise`` are the RMS
Euclidean length of the perturbation added to a unit latent (per-component
standard deviation sigma/sqrt(dim)), so sigma=0.05 means roughly a 5%
perturbation regardless of dimension.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ..domain import (
    BytesSource,
    Caption,
    DatasetEntry,
    EmbeddingVector,
    ImageRef,
    SyntheticSource,
)
from ..errors import CaptionDecodeError, UnresolvableImageError
from ..seeding import keyed_rng
from .base import (
    Captioner,
    ImageEmbedder,
    ImageGenerator,
    ProviderDescriptor,
    ProviderSet,
    TextEmbedder,
)

CAPTION_PREFIX = "SIMV1:"
LATENT_MEDIA_TYPE = "application/x-sim-latent"


@dataclass(frozen=True)
class SimWorld:
    """Parameters of one simulated latent universe."""

    seed: int
    dim: int
    caption_noise: float = 0.0
    generation_noise: float = 0.0
    quantization_bits: int = 16

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be positive")
        if self.caption_noise < 0 or self.generation_noise < 0:
            raise ValueError("noise levels must be >= 0")
        if not 8 <= self.quantization_bits <= 32:
            raise ValueError("quantization_bits must be in [8, 32]")

    @property
    def fingerprint(self) -> str:
        return (
            f"s{self.seed}-d{self.dim}-q{self.quantization_bits}"
            f"-c{self.caption_noise:g}-g{self.generation_noise:g}"
        )

    def latent(self, index: int, world_seed: int | None = None) -> np.ndarray:
        """Unit latent of image index k in this (or another) world seed."""
        seed = self.seed if world_seed is None else world_seed
        rng = keyed_rng(seed, "latent", index)
        v = rng.standard_normal(self.dim)
        return v / np.linalg.norm(v)

    def noise(self, sigma: float, *parts) -> np.ndarray:
        """Keyed Gaussian perturbation with expected L2 norm sigma."""
        rng = keyed_rng(self.seed, *parts)
        return sigma / math.sqrt(self.dim) * rng.standard_normal(self.dim)


def quantize(values: np.ndarray, bits: int) -> np.ndarray:
    """Affinely map [-1, 1] to the unsigned integer range of ``bits`` bits."""
    levels = (1 << bits) - 1
    clipped = np.clip(values, -1.0, 1.0)
    return np.rint((clipped + 1.0) / 2.0 * levels).astype(np.int64)


def dequantize(codes: np.ndarray, bits: int) -> np.ndarray:
    levels = (1 << bits) - 1
    return codes.astype(np.float64) * 2.0 / levels - 1.0


def encode_latent_caption(values: np.ndarray, bits: int) -> str:
    """Latent vector as "SIMV1:" plus fixed-width big-endian hex per component."""
    width = (bits + 3) // 4
    codes = quantize(values, bits)
    return CAPTION_PREFIX + "".join(format(int(c), f"0{width}x") for c in codes)


def decode_latent_caption(text: str, dim: int, bits: int) -> np.ndarray:
    """Inverse of :func:`encode_latent_caption`.

    Raises:
        CaptionDecodeError: missing prefix, wrong payload length, or non-hex
            characters.
    """
    if not text.startswith(CAPTION_PREFIX):
        raise CaptionDecodeError(f"caption does not start with {CAPTION_PREFIX!r}")
    payload = text[len(CAPTION_PREFIX) :]
    width = (bits + 3) // 4
    if len(payload) != dim * width:
        raise CaptionDecodeError(
            f"caption payload length {len(payload)} != dim {dim} x {width} hex chars"
        )
    try:
        codes = np.array(
            [int(payload[i : i + width], 16) for i in range(0, len(payload), width)],
            dtype=np.int64,
        )
    except ValueError as exc:
        raise CaptionDecodeError(f"caption payload is not hex: {exc}") from exc
    return dequantize(codes, bits)


def latent_to_bytes(values: np.ndarray) -> bytes:
    return np.asarray(values, dtype="<f8").tobytes()


def latent_from_bytes(payload: bytes) -> np.ndarray:
    return np.frombuffer(payload, dtype="<f8").copy()


def caption_digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def resolve_latent(world: SimWorld, image: ImageRef) -> np.ndarray:
    """Latent vector behind an image reference.

    Synthetic sources are recomputed from their (world seed, index); latent
    payloads produced by the sim generator are decoded from bytes. Anything
    else (real files, real pixels) is outside this world.
    """
    source = image.source
    if isinstance(source, SyntheticSource):
        return world.latent(source.index, world_seed=source.world_seed)
    if isinstance(source, BytesSource) and source.media_type == LATENT_MEDIA_TYPE:
        latent = latent_from_bytes(source.payload)
        if latent.shape[0] != world.dim:
            raise UnresolvableImageError(
                f"image {image.id!r}: latent dim {latent.shape[0]} != world dim {world.dim}"
            )
        return latent
    raise UnresolvableImageError(f"image {image.id!r} is not resolvable in the sim world")


def _image_noise_key(image: ImageRef) -> str:
    source = image.source
    if isinstance(source, SyntheticSource):
        return f"{source.world_seed}:{source.index}"
    if isinstance(source, BytesSource):
        return hashlib.sha256(source.payload).hexdigest()
    return image.id


class SimCaptioner(Captioner):
    def __init__(self, world: SimWorld):
        self.world = world
        self._descriptor = ProviderDescriptor(
            id=f"sim-captioner-{world.fingerprint}", kind="captioner", deterministic=True
        )

    @property
    def descriptor(self) -> ProviderDescriptor:
        return self._descriptor

    def caption(self, image: ImageRef, prompt: str, token_limit: int) -> Caption:
        latent = resolve_latent(self.world, image)
        if self.world.caption_noise > 0:
            latent = latent + self.world.noise(
                self.world.caption_noise, "caption-noise", _image_noise_key(image)
            )
        text = encode_latent_caption(latent, self.world.quantization_bits)
        # The encoding is a single whitespace-delimited token, so any
        # token_limit >= 1 is satisfied.
        return Caption(text=text, origin="model", image_id=image.id)


class SimImageGenerator(ImageGenerator):
    def __init__(self, world: SimWorld):
        self.world = world
        self._descriptor = ProviderDescriptor(
            id=f"sim-generator-{world.fingerprint}", kind="generator", deterministic=True
        )

    @property
    def descriptor(self) -> ProviderDescriptor:
        return self._descriptor

    def generate_image(self, caption: Caption, sample_index: int) -> ImageRef:
        if sample_index < 0:
            raise ValueError("sample_index must be >= 0")
        latent = decode_latent_caption(
            caption.text, self.world.dim, self.world.quantization_bits
        )
        digest = caption_digest(caption.text)
        if self.world.generation_noise > 0:
            latent = latent + self.world.noise(
                self.world.generation_noise, "generate-noise", digest, sample_index
            )
        return ImageRef(
            id=f"gen-{digest[:16]}-s{sample_index}",
            source=BytesSource(payload=latent_to_bytes(latent), media_type=LATENT_MEDIA_TYPE),
        )


def orthonormal_map(rng: np.random.Generator, dim: int) -> np.ndarray:
    """Orthonormal matrix from the QR factorization of a Gaussian draw.

    Column signs are canonicalized so the result is independent of the
    underlying LAPACK sign convention.
    """
    m = rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(m)
    signs = np.where(np.diag(r) >= 0, 1.0, -1.0)
    return q * signs


class SimImageEmbedder(ImageEmbedder):
    """Embeds sim images through a fixed seeded orthonormal map.

    Orthonormality means pairwise cosines between latents survive embedding
    exactly (up to float rounding).
    """

    def __init__(self, world: SimWorld):
        self.world = world
        self._descriptor = ProviderDescriptor(
            id=f"sim-image-embedder-{world.fingerprint}",
            kind="image_embedder",
            deterministic=True,
            embedding_dim=world.dim,
        )

    @cached_property
    def rotation(self) -> np.ndarray:
        return orthonormal_map(keyed_rng(self.world.seed, "embed-map"), self.world.dim)

    @property
    def descriptor(self) -> ProviderDescriptor:
        return self._descriptor

    def embed_image(self, image: ImageRef) -> EmbeddingVector:
        latent = resolve_latent(self.world, image)
        return EmbeddingVector(self.world.dim, self.rotation @ latent)


class SimTextEmbedder(TextEmbedder):
    """Hash-seeded unit Gaussian vector per exact text."""

    def __init__(self, world: SimWorld):
        self.world = world
        self._descriptor = ProviderDescriptor(
            id=f"sim-text-embedder-{world.fingerprint}",
            kind="text_embedder",
            deterministic=True,
            embedding_dim=world.dim,
        )

    @property
    def descriptor(self) -> ProviderDescriptor:
        return self._descriptor

    def embed_text(self, text: str) -> EmbeddingVector:
        if not text.strip():
            raise ValueError("text must be non-empty")
        rng = keyed_rng(self.world.seed, "text-embed", caption_digest(text))
        v = rng.standard_normal(self.world.dim)
        return EmbeddingVector(self.world.dim, v / np.linalg.norm(v))


class RotatedImageEmbedder(ImageEmbedder):
    """Composes a fixed orthonormal map onto another embedder.

    Used to check that downstream scores depend only on angles, not on the
    orientation of the embedding space.
    """

    def __init__(self, inner: ImageEmbedder, rotation_seed: int):
        dim = inner.descriptor.embedding_dim
        self.inner = inner
        self.rotation = orthonormal_map(keyed_rng(rotation_seed, "compose-rotation"), dim)
        self._descriptor = ProviderDescriptor(
            id=f"{inner.descriptor.id}+rot{rotation_seed}",
            kind="image_embedder",
            deterministic=inner.descriptor.deterministic,
            embedding_dim=dim,
        )

    @property
    def descriptor(self) -> ProviderDescriptor:
        return self._descriptor

    def embed_image(self, image: ImageRef) -> EmbeddingVector:
        inner = self.inner.embed_image(image)
        return EmbeddingVector(inner.dim, self.rotation @ inner.values)


def sim_provider_set(world: SimWorld, with_text_embedder: bool = True) -> ProviderSet:
    """The full provider stack for one world."""
    return ProviderSet(
        captioner=SimCaptioner(world),
        generator=SimImageGenerator(world),
        image_embedder=SimImageEmbedder(world),
        text_embedder=SimTextEmbedder(world) if with_text_embedder else None,
    )


def make_synthetic_dataset(
    world: SimWorld, n_images: int, refs_per_image: int = 5, id_prefix: str = "img-"
) -> list[DatasetEntry]:
    """Synthetic dataset whose references encode each image's own latent.

    Reference j of image k encodes u_k plus (when caption_noise > 0) a keyed
    perturbation, mimicking five independent human descriptions of the same
    scene.
    """
    entries = []
    for k in range(n_images):
        image = ImageRef(
            id=f"{id_prefix}{k:05d}", source=SyntheticSource(world_seed=world.seed, index=k)
        )
        latent = world.latent(k)
        references = []
        for j in range(refs_per_image):
            v = latent
            if world.caption_noise > 0:
                v = v + world.noise(world.caption_noise, "reference", k, j)
            references.append(
                Caption(
                    text=encode_latent_caption(v, world.quantization_bits),
                    origin="human",
                    image_id=image.id,
                )
            )
        entries.append(DatasetEntry(image=image, references=tuple(references)))
    return entries
