"""Run-config file parsing and provider construction.

The config file is one JSON document carrying the run parameters plus a
provider block per kind, each selecting the sim, file, or http family.
Secrets never appear in the file; http blocks name the environment variable
that holds them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .domain import (
    DEFAULT_CAPTION_PROMPT,
    DEFAULT_CAPTION_TOKEN_LIMIT,
    RunConfig,
)
from .errors import ConfigurationError
from .providers.base import PROVIDER_KINDS, ProviderSet
from .providers.filebacked import (
    FileCaptioner,
    FileImageEmbedder,
    FileImageGenerator,
    FileTextEmbedder,
)
from .providers.http import (
    HttpCaptioner,
    HttpImageEmbedder,
    HttpImageGenerator,
    HttpProviderConfig,
    HttpTextEmbedder,
)
from .providers.sim import (
    SimCaptioner,
    SimImageEmbedder,
    SimImageGenerator,
    SimTextEmbedder,
    SimWorld,
)

_REQUIRED_KINDS = ("generator", "image_embedder")

_FILE_CLASSES = {
    "captioner": FileCaptioner,
    "generator": FileImageGenerator,
    "image_embedder": FileImageEmbedder,
    "text_embedder": FileTextEmbedder,
}
_HTTP_CLASSES = {
    "captioner": HttpCaptioner,
    "generator": HttpImageGenerator,
    "image_embedder": HttpImageEmbedder,
    "text_embedder": HttpTextEmbedder,
}
_SIM_CLASSES = {
    "captioner": SimCaptioner,
    "generator": SimImageGenerator,
    "image_embedder": SimImageEmbedder,
    "text_embedder": SimTextEmbedder,
}


@dataclass
class LoadedConfig:
    run_config: RunConfig
    providers: ProviderSet


def load_config(
    path: Path | str,
    seed_override: int | None = None,
    cache_dir_override: Path | str | None = None,
    max_parallel_override: int | None = None,
) -> LoadedConfig:
    """Parse a config file and construct its providers.

    CLI overrides take precedence over file values; leaving them unset
    changes nothing relative to the file.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON: {exc.msg} (line {exc.lineno})") from exc
    if not isinstance(doc, dict):
        raise ConfigurationError(f"{path}: config must be a JSON object")
    return build_config(doc, path.parent, seed_override, cache_dir_override, max_parallel_override)


def build_config(
    doc: dict,
    base_dir: Path,
    seed_override: int | None = None,
    cache_dir_override: Path | str | None = None,
    max_parallel_override: int | None = None,
) -> LoadedConfig:
    seed = seed_override if seed_override is not None else doc.get("seed", 0)
    cache_dir = Path(cache_dir_override) if cache_dir_override is not None else _resolve(
        base_dir, doc.get("cache_dir", "cycleval-cache")
    )
    max_parallel = (
        max_parallel_override if max_parallel_override is not None else doc.get("max_parallel", 1)
    )

    provider_blocks = doc.get("providers")
    if not isinstance(provider_blocks, dict):
        raise ConfigurationError("config needs a 'providers' object")
    for kind in provider_blocks:
        if kind not in PROVIDER_KINDS:
            raise ConfigurationError(f"unknown provider kind {kind!r}")
    for kind in _REQUIRED_KINDS:
        if kind not in provider_blocks:
            raise ConfigurationError(f"config must configure a {kind} provider")

    sim_doc = doc.get("sim", {})
    world = None
    if any(
        isinstance(block, dict) and block.get("type") == "sim"
        for block in provider_blocks.values()
    ):
        world = _build_sim_world(sim_doc, seed)

    providers = ProviderSet()
    for kind, block in provider_blocks.items():
        setattr(providers, kind, _build_provider(kind, block, world, base_dir))

    run_config = RunConfig(
        seed=seed,
        cache_dir=cache_dir,
        captioner_id=providers.captioner.descriptor.id if providers.captioner else None,
        generator_id=providers.generator.descriptor.id,
        embedder_id=providers.image_embedder.descriptor.id,
        text_embedder_id=providers.text_embedder.descriptor.id if providers.text_embedder else None,
        max_parallel=max_parallel,
        caption_prompt=doc.get("caption_prompt", DEFAULT_CAPTION_PROMPT),
        caption_token_limit=doc.get("caption_token_limit", DEFAULT_CAPTION_TOKEN_LIMIT),
        samples_per_caption=doc.get("samples_per_caption", 1),
        correct_reference_index=doc.get("correct_reference_index", 0),
        correct_reference_mode=doc.get("correct_reference_mode", "single"),
        failure_ceiling=doc.get("failure_ceiling", 0.05),
    )
    return LoadedConfig(run_config=run_config, providers=providers)


def _build_sim_world(sim_doc, seed: int) -> SimWorld:
    if not isinstance(sim_doc, dict) or "dim" not in sim_doc:
        raise ConfigurationError("sim providers need a top-level 'sim' block with a 'dim'")
    try:
        return SimWorld(
            seed=seed,
            dim=sim_doc["dim"],
            caption_noise=sim_doc.get("caption_noise", 0.0),
            generation_noise=sim_doc.get("generation_noise", 0.0),
            quantization_bits=sim_doc.get("quantization_bits", 16),
        )
    except ValueError as exc:
        raise ConfigurationError(f"invalid sim block: {exc}") from exc


def _build_provider(kind: str, block, world: SimWorld | None, base_dir: Path):
    if not isinstance(block, dict) or "type" not in block:
        raise ConfigurationError(f"{kind}: provider block needs a 'type'")
    family = block["type"]
    if family == "sim":
        return _SIM_CLASSES[kind](world)
    if family == "file":
        if "path" not in block:
            raise ConfigurationError(f"{kind}: file provider needs a 'path'")
        return _FILE_CLASSES[kind](
            _resolve(base_dir, block["path"]), provider_id=block.get("id")
        )
    if family == "http":
        missing = [f for f in ("endpoint", "model", "credential_env") if f not in block]
        if missing:
            raise ConfigurationError(f"{kind}: http provider missing {missing}")
        http_config = HttpProviderConfig(
            provider_id=block.get("id", f"http-{kind}-{block['model']}"),
            endpoint=block["endpoint"],
            model=block["model"],
            credential_env=block["credential_env"],
            timeout=block.get("timeout", 30.0),
            max_retries=block.get("retries", 3),
            embedding_dim=block.get("embedding_dim"),
        )
        return _HTTP_CLASSES[kind](http_config)
    raise ConfigurationError(f"{kind}: unknown provider type {family!r}")


def _resolve(base_dir: Path, value) -> Path:
    p = Path(value)
    return p if p.is_absolute() else base_dir / p
