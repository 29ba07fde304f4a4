"""Content-addressed provider cache and durable run persistence.

Cache entries live at ``cache_dir/<first 2 hex>/<digest>`` with a small JSON
sidecar. Writes go through a temp file plus atomic rename, so concurrent
writers never expose partial entries and repeated puts of the same key are
harmless. Entries are immutable once written; eviction is manual.
"""

from __future__ import annotations

import base64
import hashlib
import json
import logging
import os
import tempfile
import threading
import time
from dataclasses import dataclass
from pathlib import Path

from .domain import (
    BytesSource,
    Caption,
    EmbeddingVector,
    FileSource,
    ImageRef,
    SyntheticSource,
)
from .errors import FormatError, UnsupportedVersionError
from .providers.base import Captioner, ImageEmbedder, ImageGenerator, TextEmbedder

logger = logging.getLogger("cycleval.store")

RUN_SCHEMA_VERSION = 1


def canonical_json_bytes(obj) -> bytes:
    """Canonical encoding: sorted keys, no whitespace, UTF-8."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode(
        "utf-8"
    )


def cache_key(provider_id: str, op_name: str, input_bytes: bytes) -> str:
    """64-hex SHA-256 digest over (provider id, op name, canonical inputs)."""
    if "\n" in provider_id or "\n" in op_name:
        raise ValueError("provider_id and op_name must not contain newlines")
    h = hashlib.sha256()
    h.update(provider_id.encode("utf-8"))
    h.update(b"\n")
    h.update(op_name.encode("utf-8"))
    h.update(b"\n")
    h.update(input_bytes)
    return h.hexdigest()


class FileCache:
    """Filesystem cache; get is lock-free, put is atomic."""

    def __init__(self, cache_dir: Path | str):
        self.cache_dir = Path(cache_dir)
        self.cache_dir.mkdir(parents=True, exist_ok=True)

    def _payload_path(self, key: str) -> Path:
        return self.cache_dir / key[:2] / key

    def get(self, key: str) -> bytes | None:
        path = self._payload_path(key)
        try:
            return path.read_bytes()
        except FileNotFoundError:
            return None

    def put(
        self,
        key: str,
        payload: bytes,
        provider_id: str = "",
        op: str = "",
        media_type: str = "application/octet-stream",
    ) -> None:
        path = self._payload_path(key)
        path.parent.mkdir(parents=True, exist_ok=True)
        sidecar = {
            "provider_id": provider_id,
            "op": op,
            "created_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
            "media_type": media_type,
        }
        _atomic_write(path.with_name(path.name + ".meta.json"), canonical_json_bytes(sidecar))
        _atomic_write(path, payload)


def _atomic_write(path: Path, payload: bytes) -> None:
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp_name, path)
    except OSError:
        try:
            os.unlink(tmp_name)
        except OSError:
            pass
        raise


# --- canonical encodings of domain values (cache payloads and run files) ---


def image_ref_to_dict(image: ImageRef, payload_as_digest: bool = False) -> dict:
    source = image.source
    if isinstance(source, FileSource):
        src = {"kind": "file", "path": str(source.path)}
    elif isinstance(source, SyntheticSource):
        src = {"kind": "synthetic", "world_seed": source.world_seed, "index": source.index}
    else:
        assert isinstance(source, BytesSource)
        src = {"kind": "bytes", "media_type": source.media_type}
        if payload_as_digest:
            src["sha256"] = hashlib.sha256(source.payload).hexdigest()
        else:
            src["b64"] = base64.b64encode(source.payload).decode("ascii")
    return {"id": image.id, "source": src, "width": image.width, "height": image.height}


def image_ref_from_dict(doc: dict) -> ImageRef:
    src = doc["source"]
    kind = src["kind"]
    if kind == "file":
        source = FileSource(Path(src["path"]))
    elif kind == "synthetic":
        source = SyntheticSource(world_seed=src["world_seed"], index=src["index"])
    elif kind == "bytes":
        source = BytesSource(
            payload=base64.b64decode(src["b64"]), media_type=src["media_type"]
        )
    else:
        raise FormatError(f"unknown image source kind {kind!r}")
    return ImageRef(id=doc["id"], source=source, width=doc.get("width"), height=doc.get("height"))


def caption_to_dict(caption: Caption) -> dict:
    return {"text": caption.text, "origin": caption.origin, "image_id": caption.image_id}


def caption_from_dict(doc: dict) -> Caption:
    return Caption(text=doc["text"], origin=doc["origin"], image_id=doc["image_id"])


def embedding_to_dict(vec: EmbeddingVector) -> dict:
    return {"dim": vec.dim, "values": [float(v) for v in vec.values]}


def embedding_from_dict(doc: dict) -> EmbeddingVector:
    return EmbeddingVector(doc["dim"], doc["values"])


def _image_cache_identity(image: ImageRef) -> dict:
    # Bytes payloads enter keys as digests so keys stay small.
    return image_ref_to_dict(image, payload_as_digest=True)


# --- caching wrappers -------------------------------------------------------


class _CachedStage:
    """Shared miss counting for the per-stage wrappers."""

    def __init__(self, cache: FileCache):
        self._cache = cache
        self._lock = threading.Lock()
        self._inner_calls = 0

    @property
    def inner_calls(self) -> int:
        """How many times the wrapped provider was actually invoked."""
        return self._inner_calls

    def _fetch(self, key: str) -> bytes | None:
        return self._cache.get(key)

    def _store(self, key: str, payload: bytes, provider_id: str, op: str) -> None:
        with self._lock:
            self._inner_calls += 1
        self._cache.put(key, payload, provider_id=provider_id, op=op, media_type="application/json")


class CachedCaptioner(_CachedStage):
    def __init__(self, inner: Captioner, cache: FileCache):
        super().__init__(cache)
        self.inner = inner

    @property
    def descriptor(self):
        return self.inner.descriptor

    def caption(self, image: ImageRef, prompt: str, token_limit: int) -> tuple[Caption, bool]:
        pid = self.inner.descriptor.id
        key = cache_key(
            pid,
            "caption",
            canonical_json_bytes(
                {"image": _image_cache_identity(image), "prompt": prompt, "token_limit": token_limit}
            ),
        )
        cached = self._fetch(key)
        if cached is not None:
            return caption_from_dict(json.loads(cached)), True
        result = self.inner.caption(image, prompt, token_limit)
        self._store(key, canonical_json_bytes(caption_to_dict(result)), pid, "caption")
        return result, False


class CachedImageGenerator(_CachedStage):
    def __init__(self, inner: ImageGenerator, cache: FileCache):
        super().__init__(cache)
        self.inner = inner

    @property
    def descriptor(self):
        return self.inner.descriptor

    def generate_image(self, caption: Caption, sample_index: int) -> tuple[ImageRef, bool]:
        pid = self.inner.descriptor.id
        key = cache_key(
            pid,
            "generate_image",
            canonical_json_bytes({"caption": caption.text, "sample_index": sample_index}),
        )
        cached = self._fetch(key)
        if cached is not None:
            return image_ref_from_dict(json.loads(cached)), True
        result = self.inner.generate_image(caption, sample_index)
        self._store(key, canonical_json_bytes(image_ref_to_dict(result)), pid, "generate_image")
        return result, False


class CachedImageEmbedder(_CachedStage):
    def __init__(self, inner: ImageEmbedder, cache: FileCache):
        super().__init__(cache)
        self.inner = inner

    @property
    def descriptor(self):
        return self.inner.descriptor

    def embed_image(self, image: ImageRef) -> tuple[EmbeddingVector, bool]:
        pid = self.inner.descriptor.id
        key = cache_key(
            pid, "embed_image", canonical_json_bytes({"image": _image_cache_identity(image)})
        )
        cached = self._fetch(key)
        if cached is not None:
            return embedding_from_dict(json.loads(cached)), True
        result = self.inner.embed_image(image)
        self._store(key, canonical_json_bytes(embedding_to_dict(result)), pid, "embed_image")
        return result, False


class CachedTextEmbedder(_CachedStage):
    def __init__(self, inner: TextEmbedder, cache: FileCache):
        super().__init__(cache)
        self.inner = inner

    @property
    def descriptor(self):
        return self.inner.descriptor

    def embed_text(self, text: str) -> tuple[EmbeddingVector, bool]:
        pid = self.inner.descriptor.id
        key = cache_key(pid, "embed_text", canonical_json_bytes({"text": text}))
        cached = self._fetch(key)
        if cached is not None:
            return embedding_from_dict(json.loads(cached)), True
        result = self.inner.embed_text(text)
        self._store(key, canonical_json_bytes(embedding_to_dict(result)), pid, "embed_text")
        return result, False


# --- run persistence --------------------------------------------------------


@dataclass(frozen=True)
class CacheStats:
    """Provider invocation counts for one executed run."""

    caption_calls: int
    generate_calls: int
    embed_image_calls: int
    embed_text_calls: int

    @property
    def total(self) -> int:
        return (
            self.caption_calls
            + self.generate_calls
            + self.embed_image_calls
            + self.embed_text_calls
        )


def persist_run(result, path: Path | str) -> None:
    """Write a run as a single self-describing JSON document."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = result.to_json_dict()
    doc["schema_version"] = RUN_SCHEMA_VERSION
    _atomic_write(path, json.dumps(doc, ensure_ascii=False, indent=1).encode("utf-8"))


def load_run(path: Path | str):
    """Read a run file back; refuses unknown schema versions."""
    from .pipeline import RunResult

    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON at byte offset {exc.pos}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise FormatError(f"{path}: run file must be a JSON object")
    version = doc.get("schema_version")
    if version != RUN_SCHEMA_VERSION:
        raise UnsupportedVersionError(
            f"{path}: schema_version {version!r} is not supported (expected {RUN_SCHEMA_VERSION})"
        )
    try:
        return RunResult.from_json_dict(doc)
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: malformed run file: {exc}") from exc
