"""Generic JSON-over-HTTP provider adapters.

All four adapters share one call path: credential check at construction,
bounded retries with exponential backoff plus jitter on 429/5xx, immediate
failure on everything else. Request and response field names are specific to
these adapters and isolated here.
"""

from __future__ import annotations

import base64
import logging
import os
import random
import time
from dataclasses import dataclass
from typing import Callable

import httpx

from ..domain import BytesSource, Caption, EmbeddingVector, FileSource, ImageRef
from ..errors import (
    AuthenticationError,
    ConfigurationError,
    ProtocolError,
    ProviderTimeoutError,
    TransportError,
    UnresolvableImageError,
)
from .base import (
    Captioner,
    ImageEmbedder,
    ImageGenerator,
    ProviderDescriptor,
    TextEmbedder,
)
from .sim import caption_digest

logger = logging.getLogger("cycleval.http")

RETRYABLE_STATUSES = frozenset({429} | set(range(500, 600)))
AUTH_STATUSES = frozenset({401, 403})
BACKOFF_BASE_SECONDS = 0.5
JITTER_FRACTION = 0.25


@dataclass(frozen=True)
class HttpProviderConfig:
    """Connection settings for one remote provider.

    ``credential_env`` names the environment variable holding the secret;
    the secret itself never appears in config or run files.
    """

    provider_id: str
    endpoint: str
    model: str
    credential_env: str
    timeout: float = 30.0
    max_retries: int = 3
    embedding_dim: int | None = None


class JsonHttpClient:
    """POSTs JSON payloads with the shared retry policy.

    The credential is read once at construction; a missing or empty variable
    is a configuration error raised before any network traffic.
    """

    def __init__(
        self,
        config: HttpProviderConfig,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        token = os.environ.get(config.credential_env, "")
        if not token:
            raise ConfigurationError(
                f"provider {config.provider_id!r}: credential environment variable "
                f"{config.credential_env!r} is not set"
            )
        self.config = config
        self._sleep = sleep
        self._client = httpx.Client(
            transport=transport,
            timeout=config.timeout,
            headers={"Authorization": f"Bearer {token}"},
        )

    def post(self, payload: dict) -> dict:
        config = self.config
        last_status: int | None = None
        for attempt in range(config.max_retries + 1):
            started = time.perf_counter()
            try:
                response = self._client.post(config.endpoint, json=payload)
            except httpx.TimeoutException as exc:
                raise ProviderTimeoutError(
                    f"{config.provider_id}: timed out after {config.timeout}s"
                ) from exc
            except httpx.HTTPError as exc:
                raise TransportError(f"{config.provider_id}: {exc}") from exc
            elapsed_ms = (time.perf_counter() - started) * 1000.0
            logger.info(
                "POST %s status=%d elapsed_ms=%.1f attempt=%d",
                config.endpoint,
                response.status_code,
                elapsed_ms,
                attempt,
            )
            status = response.status_code
            if 200 <= status < 300:
                try:
                    body = response.json()
                except ValueError as exc:
                    raise ProtocolError(f"{config.provider_id}: response is not JSON") from exc
                if not isinstance(body, dict):
                    raise ProtocolError(f"{config.provider_id}: response must be a JSON object")
                return body
            if status in AUTH_STATUSES:
                raise AuthenticationError(f"{config.provider_id}: status {status}")
            if status not in RETRYABLE_STATUSES:
                raise TransportError(f"{config.provider_id}: status {status}", status=status)
            last_status = status
            if attempt < config.max_retries:
                delay = BACKOFF_BASE_SECONDS * (2**attempt)
                delay += delay * JITTER_FRACTION * random.random()
                self._sleep(delay)
        raise TransportError(
            f"{config.provider_id}: gave up after {config.max_retries} retries",
            status=last_status,
        )

    def close(self):
        self._client.close()


def _image_payload(image: ImageRef) -> dict:
    """Encode the image for a request body; never decodes pixels."""
    source = image.source
    if isinstance(source, FileSource):
        try:
            data = source.path.read_bytes()
        except OSError as exc:
            raise UnresolvableImageError(f"image {image.id!r}: {exc}") from exc
        return {"image_b64": base64.b64encode(data).decode("ascii")}
    if isinstance(source, BytesSource):
        return {
            "image_b64": base64.b64encode(source.payload).decode("ascii"),
            "media_type": source.media_type,
        }
    raise UnresolvableImageError(
        f"image {image.id!r}: synthetic images cannot be sent to a remote provider"
    )


class HttpCaptioner(Captioner):
    def __init__(self, config: HttpProviderConfig, **client_kwargs):
        self._client = JsonHttpClient(config, **client_kwargs)
        self._descriptor = ProviderDescriptor(
            id=config.provider_id, kind="captioner", deterministic=False
        )

    @property
    def descriptor(self) -> ProviderDescriptor:
        return self._descriptor

    def caption(self, image: ImageRef, prompt: str, token_limit: int) -> Caption:
        payload = {
            "model": self._client.config.model,
            "prompt": prompt,
            "max_tokens": token_limit,
        }
        payload.update(_image_payload(image))
        body = self._client.post(payload)
        text = body.get("caption")
        if not isinstance(text, str) or not text.strip():
            raise ProtocolError(f"{self.descriptor.id}: missing or empty 'caption' field")
        token_count = body.get("token_count")
        if token_count is not None and token_count > token_limit:
            raise ProtocolError(
                f"{self.descriptor.id}: response reports {token_count} tokens, "
                f"over the {token_limit} limit"
            )
        return Caption(text=text, origin="model", image_id=image.id)


class HttpImageGenerator(ImageGenerator):
    def __init__(self, config: HttpProviderConfig, **client_kwargs):
        self._client = JsonHttpClient(config, **client_kwargs)
        self._descriptor = ProviderDescriptor(
            id=config.provider_id, kind="generator", deterministic=False
        )

    @property
    def descriptor(self) -> ProviderDescriptor:
        return self._descriptor

    def generate_image(self, caption: Caption, sample_index: int) -> ImageRef:
        body = self._client.post(
            {
                "model": self._client.config.model,
                "prompt": caption.text,
                "sample_index": sample_index,
            }
        )
        encoded = body.get("image_b64")
        if not isinstance(encoded, str) or not encoded:
            raise ProtocolError(f"{self.descriptor.id}: missing 'image_b64' field")
        try:
            payload = base64.b64decode(encoded, validate=True)
        except Exception as exc:
            raise ProtocolError(f"{self.descriptor.id}: invalid base64 image payload") from exc
        media_type = body.get("media_type", "image/png")
        digest = caption_digest(caption.text)
        return ImageRef(
            id=f"gen-{digest[:16]}-s{sample_index}",
            source=BytesSource(payload=payload, media_type=media_type),
        )


class _HttpEmbedderBase:
    def __init__(self, config: HttpProviderConfig, kind: str, **client_kwargs):
        if not config.embedding_dim:
            raise ConfigurationError(
                f"provider {config.provider_id!r}: embedding_dim is required for embedders"
            )
        self._client = JsonHttpClient(config, **client_kwargs)
        self._descriptor = ProviderDescriptor(
            id=config.provider_id,
            kind=kind,
            deterministic=False,
            embedding_dim=config.embedding_dim,
        )

    @property
    def descriptor(self) -> ProviderDescriptor:
        return self._descriptor

    def _vector_from(self, body: dict) -> EmbeddingVector:
        values = body.get("values")
        if not isinstance(values, list):
            raise ProtocolError(f"{self.descriptor.id}: missing 'values' array")
        expected = self.descriptor.embedding_dim
        if len(values) != expected:
            raise ProtocolError(
                f"{self.descriptor.id}: remote returned {len(values)} values, "
                f"descriptor declares {expected}"
            )
        return EmbeddingVector(expected, values)


class HttpImageEmbedder(_HttpEmbedderBase, ImageEmbedder):
    def __init__(self, config: HttpProviderConfig, **client_kwargs):
        super().__init__(config, "image_embedder", **client_kwargs)

    def embed_image(self, image: ImageRef) -> EmbeddingVector:
        payload = {"model": self._client.config.model}
        payload.update(_image_payload(image))
        return self._vector_from(self._client.post(payload))


class HttpTextEmbedder(_HttpEmbedderBase, TextEmbedder):
    def __init__(self, config: HttpProviderConfig, **client_kwargs):
        super().__init__(config, "text_embedder", **client_kwargs)

    def embed_text(self, text: str) -> EmbeddingVector:
        if not text.strip():
            raise ValueError("text must be non-empty")
        payload = {"model": self._client.config.model, "text": text}
        return self._vector_from(self._client.post(payload))
