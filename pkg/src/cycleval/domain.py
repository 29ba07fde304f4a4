"""Core value types shared by every other module.

All types here are immutable after construction and safe to share between
threads. Invariants that can be checked locally (ranges, consistency between
fields) are enforced in ``__post_init__``; dataset-level expectations that are
advisory rather than hard errors live in :func:`validate_entry`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

CAPTION_ORIGINS = ("human", "model", "replacement")
CONDITIONS = ("model", "correct", "incorrect")

# Reference datasets conventionally carry five captions per image; fewer or
# more is legal but worth flagging.
EXPECTED_REFERENCE_COUNT = 5

DEFAULT_CAPTION_PROMPT = "A short image caption:"
DEFAULT_CAPTION_TOKEN_LIMIT = 100


@dataclass(frozen=True)
class FileSource:
    """Image stored as a file on disk."""

    path: Path

    def __post_init__(self):
        object.__setattr__(self, "path", Path(self.path))


@dataclass(frozen=True)
class BytesSource:
    """Opaque image payload plus a media-type tag.

    The harness never decodes the payload itself; only providers do.
    """

    payload: bytes
    media_type: str

    def __post_init__(self):
        if not isinstance(self.payload, (bytes, bytearray)):
            raise TypeError("payload must be bytes")
        object.__setattr__(self, "payload", bytes(self.payload))
        if not self.media_type:
            raise ValueError("media_type must be non-empty")


@dataclass(frozen=True)
class SyntheticSource:
    """Image identified by a (world seed, index) pair in a simulated world."""

    world_seed: int
    index: int


ImageSource = FileSource | BytesSource | SyntheticSource


@dataclass(frozen=True)
class ImageRef:
    """Identity of one image; the pixel payload stays opaque."""

    id: str
    source: ImageSource
    width: int | None = None
    height: int | None = None

    def __post_init__(self):
        if not self.id:
            raise ValueError("image id must be non-empty")
        if not isinstance(self.source, (FileSource, BytesSource, SyntheticSource)):
            raise TypeError(f"unknown image source: {type(self.source).__name__}")
        for name in ("width", "height"):
            value = getattr(self, name)
            if value is not None and value <= 0:
                raise ValueError(f"{name} must be positive, got {value}")


@dataclass(frozen=True)
class Caption:
    """One caption text together with where it came from."""

    text: str
    origin: str
    image_id: str

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("caption text must be non-empty after trimming")
        if self.origin not in CAPTION_ORIGINS:
            raise ValueError(f"unknown caption origin: {self.origin!r}")
        if not self.image_id:
            raise ValueError("caption image_id must be non-empty")


@dataclass(frozen=True)
class DatasetEntry:
    """One image plus its human reference captions.

    Construction is permissive about reference count and origin so that
    :func:`validate_entry` can report violations instead of the constructor
    hiding them.
    """

    image: ImageRef
    references: tuple[Caption, ...]

    def __post_init__(self):
        object.__setattr__(self, "references", tuple(self.references))


class EmbeddingVector:
    """Fixed-dimension real feature vector for an image or text.

    Values are stored as a read-only float64 array; all components must be
    finite.
    """

    __slots__ = ("dim", "values")

    def __init__(self, dim: int, values):
        arr = np.array(values, dtype=np.float64, copy=True)
        if arr.ndim != 1:
            raise ValueError(f"embedding must be 1-D, got shape {arr.shape}")
        if dim <= 0:
            raise ValueError("dim must be positive")
        if arr.shape[0] != dim:
            raise ValueError(f"declared dim {dim} != {arr.shape[0]} values")
        if not np.all(np.isfinite(arr)):
            raise ValueError("embedding contains non-finite components")
        arr.setflags(write=False)
        object.__setattr__(self, "dim", int(dim))
        object.__setattr__(self, "values", arr)

    def __setattr__(self, name, value):
        raise AttributeError("EmbeddingVector is immutable")

    @classmethod
    def from_values(cls, values) -> "EmbeddingVector":
        arr = np.asarray(values, dtype=np.float64)
        return cls(dim=arr.shape[0], values=arr)

    def __eq__(self, other):
        if not isinstance(other, EmbeddingVector):
            return NotImplemented
        return self.dim == other.dim and np.array_equal(self.values, other.values)

    def __repr__(self):
        return f"EmbeddingVector(dim={self.dim})"


@dataclass(frozen=True)
class StageCacheHits:
    """Per-stage cache-hit provenance for one record.

    ``caption`` is None when the stage was bypassed (validation runs take
    captions from the dataset instead of a captioner).
    """

    caption: bool | None
    generate: bool
    embed_original: bool
    embed_generated: bool

    def flags(self) -> list[bool]:
        out = [self.generate, self.embed_original, self.embed_generated]
        if self.caption is not None:
            out.insert(0, self.caption)
        return out


@dataclass(frozen=True)
class StageProviders:
    """Which provider id served each stage of one record."""

    captioner: str | None
    generator: str
    image_embedder: str


@dataclass(frozen=True)
class EvalRecord:
    """Outcome of one pipeline pass for one (image, sample) pair."""

    image_id: str
    caption: Caption
    condition: str
    cosine: float
    generated_image_id: str
    sample_index: int
    cache_hits: StageCacheHits
    provider_ids: StageProviders

    def __post_init__(self):
        if self.condition not in CONDITIONS:
            raise ValueError(f"unknown condition: {self.condition!r}")
        if not -1.0 <= self.cosine <= 1.0:
            raise ValueError(f"cosine {self.cosine} outside [-1, 1]")
        if self.sample_index < 0:
            raise ValueError("sample_index must be >= 0")
        origin = self.caption.origin
        if self.condition == "model" and origin != "model":
            raise ValueError("condition=model requires a model caption")
        if self.condition == "correct":
            if origin != "human" or self.caption.image_id != self.image_id:
                raise ValueError(
                    "condition=correct requires a human caption of the same image"
                )
        if self.condition == "incorrect":
            if origin != "replacement" or self.caption.image_id == self.image_id:
                raise ValueError(
                    "condition=incorrect requires a replacement caption "
                    "from a different image"
                )


@dataclass(frozen=True)
class GapReport:
    """Aggregate contrast between correct- and incorrect-caption runs."""

    mean_correct: float
    mean_incorrect: float
    gap: float
    std_correct: float
    std_incorrect: float
    n: int
    per_image: tuple[tuple[str, float, float], ...]

    def __post_init__(self):
        object.__setattr__(self, "per_image", tuple(tuple(row) for row in self.per_image))
        if self.n != len(self.per_image):
            raise ValueError(f"n={self.n} != {len(self.per_image)} per-image rows")
        if self.n:
            mean_c = math.fsum(row[1] for row in self.per_image) / self.n
            mean_i = math.fsum(row[2] for row in self.per_image) / self.n
            if abs(mean_c - self.mean_correct) > 1e-12 or abs(mean_i - self.mean_incorrect) > 1e-12:
                raise ValueError("means do not match per-image rows")
        if self.gap != self.mean_correct - self.mean_incorrect:
            raise ValueError("gap must equal mean_correct - mean_incorrect exactly")


@dataclass(frozen=True)
class RunConfig:
    """Everything that, together with fixed providers, determines a run."""

    seed: int
    cache_dir: Path
    captioner_id: str | None = None
    generator_id: str | None = None
    embedder_id: str | None = None
    text_embedder_id: str | None = None
    max_parallel: int = 1
    caption_prompt: str = DEFAULT_CAPTION_PROMPT
    caption_token_limit: int = DEFAULT_CAPTION_TOKEN_LIMIT
    samples_per_caption: int = 1
    correct_reference_index: int = 0
    correct_reference_mode: str = "single"
    failure_ceiling: float = 0.05

    def __post_init__(self):
        object.__setattr__(self, "cache_dir", Path(self.cache_dir))
        if self.max_parallel < 1:
            raise ValueError("max_parallel must be >= 1")
        if self.samples_per_caption < 1:
            raise ValueError("samples_per_caption must be >= 1")
        if self.caption_token_limit < 1:
            raise ValueError("caption_token_limit must be >= 1")
        if self.correct_reference_mode not in ("single", "all"):
            raise ValueError("correct_reference_mode must be 'single' or 'all'")
        if not 0.0 <= self.failure_ceiling <= 1.0:
            raise ValueError("failure_ceiling must be in [0, 1]")


@dataclass(frozen=True)
class ValidationIssue:
    level: str  # "warning" | "error"
    message: str


def validate_entry(entry: DatasetEntry) -> list[ValidationIssue]:
    """Check one dataset entry against its invariants.

    Returns an empty list iff every invariant holds. A reference count other
    than five is only a warning: the cycle metric itself needs no references,
    they are required only by the validation protocol and text baselines.
    """
    issues: list[ValidationIssue] = []
    if not entry.references:
        issues.append(ValidationIssue("error", "no references"))
    elif len(entry.references) != EXPECTED_REFERENCE_COUNT:
        issues.append(
            ValidationIssue(
                "warning",
                f"reference count {len(entry.references)} != {EXPECTED_REFERENCE_COUNT}",
            )
        )
    for i, ref in enumerate(entry.references):
        if ref.origin != "human":
            issues.append(
                ValidationIssue("error", f"reference {i} has origin {ref.origin!r}, expected 'human'")
            )
        if ref.image_id != entry.image.id:
            issues.append(
                ValidationIssue(
                    "error",
                    f"reference {i} belongs to image {ref.image_id!r}, not {entry.image.id!r}",
                )
            )
    return issues
