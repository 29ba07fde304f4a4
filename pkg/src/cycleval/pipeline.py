"""Run orchestration: the caption -> generate -> embed -> cosine loop, the
correct/incorrect validation protocol, and gap reports.

Entries are processed concurrently up to ``max_parallel``; within one entry
the stages are sequential. Records are sorted deterministically afterwards,
so results do not depend on scheduling. Every provider call goes through the
content-addressed cache.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .domain import (
    Caption,
    DatasetEntry,
    EvalRecord,
    GapReport,
    RunConfig,
    StageCacheHits,
    StageProviders,
)
from .errors import (
    ConfigurationError,
    DegenerateVectorError,
    DimensionMismatchError,
    FailureCeilingExceeded,
    ProviderError,
    RunMismatchError,
)
from .metrics import ScoreSummary, aggregate, bleu, cosine_similarity, text_to_text_similarity
from .providers.base import ProviderDescriptor, ProviderSet
from .seeding import keyed_rng
from .store import (
    CachedCaptioner,
    CachedImageEmbedder,
    CachedImageGenerator,
    CachedTextEmbedder,
    CacheStats,
    FileCache,
    caption_from_dict,
    caption_to_dict,
)

logger = logging.getLogger("cycleval.pipeline")

_RECORD_FAILURES = (ProviderError, DegenerateVectorError, DimensionMismatchError)


@dataclass(frozen=True)
class BaselineScores:
    """Text-metric baselines for one image's evaluated caption."""

    image_id: str
    bleu: float | None
    text2text_per_ref: tuple[float, ...] | None
    text2text_mean: float | None


@dataclass(frozen=True)
class RunResult:
    """Everything one run produced, in deterministic order."""

    config: RunConfig
    condition: str
    records: tuple[EvalRecord, ...]
    summary: ScoreSummary
    baselines: tuple[BaselineScores, ...] | None
    started: str
    finished: str
    providers: tuple[ProviderDescriptor, ...]

    def to_json_dict(self) -> dict:
        cfg = {
            "seed": self.config.seed,
            "cache_dir": str(self.config.cache_dir),
            "captioner_id": self.config.captioner_id,
            "generator_id": self.config.generator_id,
            "embedder_id": self.config.embedder_id,
            "text_embedder_id": self.config.text_embedder_id,
            "max_parallel": self.config.max_parallel,
            "caption_prompt": self.config.caption_prompt,
            "caption_token_limit": self.config.caption_token_limit,
            "samples_per_caption": self.config.samples_per_caption,
            "correct_reference_index": self.config.correct_reference_index,
            "correct_reference_mode": self.config.correct_reference_mode,
            "failure_ceiling": self.config.failure_ceiling,
        }
        records = []
        for r in self.records:
            records.append(
                {
                    "image_id": r.image_id,
                    "caption": caption_to_dict(r.caption),
                    "condition": r.condition,
                    "cosine": r.cosine,
                    "generated_image_id": r.generated_image_id,
                    "sample_index": r.sample_index,
                    "cache_hits": {
                        "caption": r.cache_hits.caption,
                        "generate": r.cache_hits.generate,
                        "embed_original": r.cache_hits.embed_original,
                        "embed_generated": r.cache_hits.embed_generated,
                    },
                    "provider_ids": {
                        "captioner": r.provider_ids.captioner,
                        "generator": r.provider_ids.generator,
                        "image_embedder": r.provider_ids.image_embedder,
                    },
                }
            )
        baselines = None
        if self.baselines is not None:
            baselines = [
                {
                    "image_id": b.image_id,
                    "bleu": b.bleu,
                    "text2text_per_ref": list(b.text2text_per_ref)
                    if b.text2text_per_ref is not None
                    else None,
                    "text2text_mean": b.text2text_mean,
                }
                for b in self.baselines
            ]
        return {
            "condition": self.condition,
            "config": cfg,
            "records": records,
            "summary": {
                "n": self.summary.n,
                "mean": self.summary.mean,
                "std": self.summary.std,
                "min": self.summary.min,
                "max": self.summary.max,
            },
            "baselines": baselines,
            "started": self.started,
            "finished": self.finished,
            "providers": [
                {
                    "id": d.id,
                    "kind": d.kind,
                    "deterministic": d.deterministic,
                    "embedding_dim": d.embedding_dim,
                }
                for d in self.providers
            ],
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "RunResult":
        cfg = doc["config"]
        config = RunConfig(
            seed=cfg["seed"],
            cache_dir=Path(cfg["cache_dir"]),
            captioner_id=cfg.get("captioner_id"),
            generator_id=cfg.get("generator_id"),
            embedder_id=cfg.get("embedder_id"),
            text_embedder_id=cfg.get("text_embedder_id"),
            max_parallel=cfg["max_parallel"],
            caption_prompt=cfg["caption_prompt"],
            caption_token_limit=cfg["caption_token_limit"],
            samples_per_caption=cfg["samples_per_caption"],
            correct_reference_index=cfg.get("correct_reference_index", 0),
            correct_reference_mode=cfg.get("correct_reference_mode", "single"),
            failure_ceiling=cfg.get("failure_ceiling", 0.05),
        )
        records = []
        for r in doc["records"]:
            hits = r["cache_hits"]
            pids = r["provider_ids"]
            records.append(
                EvalRecord(
                    image_id=r["image_id"],
                    caption=caption_from_dict(r["caption"]),
                    condition=r["condition"],
                    cosine=r["cosine"],
                    generated_image_id=r["generated_image_id"],
                    sample_index=r["sample_index"],
                    cache_hits=StageCacheHits(
                        caption=hits["caption"],
                        generate=hits["generate"],
                        embed_original=hits["embed_original"],
                        embed_generated=hits["embed_generated"],
                    ),
                    provider_ids=StageProviders(
                        captioner=pids["captioner"],
                        generator=pids["generator"],
                        image_embedder=pids["image_embedder"],
                    ),
                )
            )
        summary_doc = doc["summary"]
        summary = ScoreSummary(
            n=summary_doc["n"],
            mean=summary_doc["mean"],
            std=summary_doc["std"],
            min=summary_doc["min"],
            max=summary_doc["max"],
        )
        baselines = None
        if doc.get("baselines") is not None:
            baselines = tuple(
                BaselineScores(
                    image_id=b["image_id"],
                    bleu=b["bleu"],
                    text2text_per_ref=tuple(b["text2text_per_ref"])
                    if b["text2text_per_ref"] is not None
                    else None,
                    text2text_mean=b["text2text_mean"],
                )
                for b in doc["baselines"]
            )
        providers = tuple(
            ProviderDescriptor(
                id=d["id"],
                kind=d["kind"],
                deterministic=d["deterministic"],
                embedding_dim=d.get("embedding_dim"),
            )
            for d in doc["providers"]
        )
        return cls(
            config=config,
            condition=doc["condition"],
            records=tuple(records),
            summary=summary,
            baselines=baselines,
            started=doc["started"],
            finished=doc["finished"],
            providers=providers,
        )


@dataclass(frozen=True)
class ExecutedRun:
    """A run result together with its provider invocation counts."""

    result: RunResult
    stats: CacheStats


def cache_hit_rate(records) -> float:
    """Fraction of cacheable stage calls served from cache, NaN when empty."""
    flags = [flag for r in records for flag in r.cache_hits.flags()]
    if not flags:
        return float("nan")
    return sum(flags) / len(flags)


def strip_volatile(doc: dict) -> dict:
    """Run-file dict without timestamps or cache-hit provenance.

    Two executions of the same run differ only in these fields, so this is
    the comparison form for reproducibility checks.
    """
    out = dict(doc)
    out.pop("started", None)
    out.pop("finished", None)
    out["records"] = [
        {k: v for k, v in record.items() if k != "cache_hits"} for record in doc.get("records", [])
    ]
    return out


def select_incorrect_caption(entry: DatasetEntry, dataset, seed: int) -> Caption:
    """Reference caption of a uniformly chosen other image.

    The draw is keyed by (run seed, entry id), so repeated calls are
    identical and independent of iteration order.
    """
    donors = [e for e in dataset if e.image.id != entry.image.id and e.references]
    if not donors:
        raise ValueError(
            "incorrect-caption selection needs at least one other entry with references"
        )
    rng = keyed_rng(seed, "incorrect-caption", entry.image.id)
    donor = donors[int(rng.integers(len(donors)))]
    ref = donor.references[int(rng.integers(len(donor.references)))]
    return Caption(text=ref.text, origin="replacement", image_id=donor.image.id)


@dataclass
class _Stages:
    captioner: CachedCaptioner | None
    generator: CachedImageGenerator
    image_embedder: CachedImageEmbedder
    text_embedder: CachedTextEmbedder | None

    def stats(self) -> CacheStats:
        return CacheStats(
            caption_calls=self.captioner.inner_calls if self.captioner else 0,
            generate_calls=self.generator.inner_calls,
            embed_image_calls=self.image_embedder.inner_calls,
            embed_text_calls=self.text_embedder.inner_calls if self.text_embedder else 0,
        )


@dataclass
class _EntryOutcome:
    records: list[EvalRecord]
    baseline: BaselineScores | None
    failures: int
    attempted: int


def run_evaluation(
    dataset,
    providers: ProviderSet,
    config: RunConfig,
    condition: str = "model",
    cache: FileCache | None = None,
) -> ExecutedRun:
    """Execute one full run in the given condition.

    ``model`` runs caption with the configured captioner; ``correct`` and
    ``incorrect`` take captions from the dataset per the validation protocol.
    """
    if condition not in ("model", "correct", "incorrect"):
        raise ValueError(f"unknown condition {condition!r}")
    if providers.generator is None or providers.image_embedder is None:
        raise ConfigurationError("a generator and an image embedder are required")
    if condition == "model" and providers.captioner is None:
        raise ConfigurationError("model evaluation requires a captioner")
    if condition == "incorrect" and len(dataset) < 2:
        raise ConfigurationError("incorrect-caption runs need at least 2 dataset entries")

    cache = cache if cache is not None else FileCache(config.cache_dir)
    stages = _Stages(
        captioner=CachedCaptioner(providers.captioner, cache) if providers.captioner else None,
        generator=CachedImageGenerator(providers.generator, cache),
        image_embedder=CachedImageEmbedder(providers.image_embedder, cache),
        text_embedder=CachedTextEmbedder(providers.text_embedder, cache)
        if providers.text_embedder
        else None,
    )

    started = _utc_now()
    with ThreadPoolExecutor(max_workers=config.max_parallel) as pool:
        outcomes = list(
            pool.map(lambda entry: _process_entry(entry, dataset, stages, config, condition), dataset)
        )
    finished = _utc_now()

    records: list[EvalRecord] = []
    baselines: list[BaselineScores] = []
    failures = 0
    attempted = 0
    for outcome in outcomes:
        records.extend(outcome.records)
        if outcome.baseline is not None:
            baselines.append(outcome.baseline)
        failures += outcome.failures
        attempted += outcome.attempted

    if attempted and failures / attempted > config.failure_ceiling:
        raise FailureCeilingExceeded(
            f"{failures}/{attempted} records failed, over the "
            f"{config.failure_ceiling:.0%} ceiling"
        )

    records.sort(key=lambda r: (r.image_id, r.sample_index, r.caption.text))
    baselines.sort(key=lambda b: b.image_id)
    result = RunResult(
        config=config,
        condition=condition,
        records=tuple(records),
        summary=aggregate([r.cosine for r in records]),
        baselines=tuple(baselines) if condition == "model" and baselines else None,
        started=started,
        finished=finished,
        providers=tuple(providers.descriptors()),
    )
    return ExecutedRun(result=result, stats=stages.stats())


def evaluate_model(dataset, providers: ProviderSet, config: RunConfig, cache=None) -> RunResult:
    """Score the configured captioner over the dataset (condition=model)."""
    return run_evaluation(dataset, providers, config, "model", cache).result


def human_validation_run(
    dataset, providers: ProviderSet, condition: str, config: RunConfig, cache=None
) -> RunResult:
    """Run the validation protocol arm for ``correct`` or ``incorrect``."""
    if condition not in ("correct", "incorrect"):
        raise ValueError("condition must be 'correct' or 'incorrect'")
    return run_evaluation(dataset, providers, config, condition, cache).result


def _process_entry(
    entry: DatasetEntry, dataset, stages: _Stages, config: RunConfig, condition: str
) -> _EntryOutcome:
    samples = config.samples_per_caption
    records: list[EvalRecord] = []

    if condition in ("correct", "incorrect") and not entry.references:
        logger.warning("image %s: no references; skipped in %s condition", entry.image.id, condition)
        return _EntryOutcome(records=[], baseline=None, failures=0, attempted=0)

    # Caption stage: provider call for model runs, dataset lookup otherwise.
    caption_hit: bool | None = None
    try:
        if condition == "model":
            caption, caption_hit = stages.captioner.caption(
                entry.image, config.caption_prompt, config.caption_token_limit
            )
            captions = [caption]
        elif condition == "correct":
            if config.correct_reference_mode == "all":
                captions = list(entry.references)
            else:
                index = config.correct_reference_index
                if index >= len(entry.references):
                    logger.warning(
                        "image %s: reference index %d out of range; skipped",
                        entry.image.id,
                        index,
                    )
                    return _EntryOutcome(records=[], baseline=None, failures=0, attempted=0)
                captions = [entry.references[index]]
        else:
            captions = [select_incorrect_caption(entry, dataset, config.seed)]
        original_embedding, original_hit = stages.image_embedder.embed_image(entry.image)
    except _RECORD_FAILURES as exc:
        n = len(entry.references) if (condition == "correct" and config.correct_reference_mode == "all") else 1
        failed = n * samples
        logger.warning("image %s: %s", entry.image.id, exc)
        return _EntryOutcome(records=[], baseline=None, failures=failed, attempted=failed)

    failures = 0
    attempted = 0
    for caption in captions:
        for sample_index in range(samples):
            attempted += 1
            try:
                generated, generate_hit = stages.generator.generate_image(caption, sample_index)
                generated_embedding, generated_hit = stages.image_embedder.embed_image(generated)
                cosine = cosine_similarity(original_embedding, generated_embedding)
            except _RECORD_FAILURES as exc:
                failures += 1
                logger.warning(
                    "image %s sample %d: %s", entry.image.id, sample_index, exc
                )
                continue
            records.append(
                EvalRecord(
                    image_id=entry.image.id,
                    caption=caption,
                    condition=condition,
                    cosine=cosine,
                    generated_image_id=generated.id,
                    sample_index=sample_index,
                    cache_hits=StageCacheHits(
                        caption=caption_hit,
                        generate=generate_hit,
                        embed_original=original_hit,
                        embed_generated=generated_hit,
                    ),
                    provider_ids=StageProviders(
                        captioner=stages.captioner.descriptor.id if condition == "model" else None,
                        generator=stages.generator.descriptor.id,
                        image_embedder=stages.image_embedder.descriptor.id,
                    ),
                )
            )

    baseline = None
    if condition == "model" and entry.references and records:
        baseline = _entry_baseline(entry, records[0].caption.text, stages)
    return _EntryOutcome(records=records, baseline=baseline, failures=failures, attempted=attempted)


def _entry_baseline(entry: DatasetEntry, candidate: str, stages: _Stages) -> BaselineScores:
    reference_texts = [ref.text for ref in entry.references]
    bleu_score = bleu(candidate, reference_texts)
    per_ref = None
    mean = None
    if stages.text_embedder is not None:
        try:
            scores, mean = text_to_text_similarity(
                candidate, reference_texts, lambda t: stages.text_embedder.embed_text(t)[0]
            )
            per_ref = tuple(scores)
        except _RECORD_FAILURES as exc:
            logger.warning("image %s: text baseline failed: %s", entry.image.id, exc)
            mean = None
    return BaselineScores(
        image_id=entry.image.id,
        bleu=bleu_score,
        text2text_per_ref=per_ref,
        text2text_mean=mean,
    )


def per_image_means(result: RunResult) -> dict[str, float]:
    """Mean cosine per image id (samples and multi-reference records pooled)."""
    sums: dict[str, list[float]] = {}
    for record in result.records:
        sums.setdefault(record.image_id, []).append(record.cosine)
    return {
        image_id: math.fsum(values) / len(values) for image_id, values in sorted(sums.items())
    }


def compute_gap(correct: RunResult, incorrect: RunResult) -> GapReport:
    """Pair two runs by image id and report the mean-cosine gap."""
    means_correct = per_image_means(correct)
    means_incorrect = per_image_means(incorrect)
    ids_correct = set(means_correct)
    ids_incorrect = set(means_incorrect)
    if ids_correct != ids_incorrect:
        difference = sorted(ids_correct.symmetric_difference(ids_incorrect))
        raise RunMismatchError(f"runs cover different images: {difference}")

    per_image = tuple(
        (image_id, means_correct[image_id], means_incorrect[image_id])
        for image_id in sorted(means_correct)
    )
    n = len(per_image)
    mean_c = math.fsum(row[1] for row in per_image) / n if n else 0.0
    mean_i = math.fsum(row[2] for row in per_image) / n if n else 0.0
    std_c = math.sqrt(math.fsum((row[1] - mean_c) ** 2 for row in per_image) / n) if n else 0.0
    std_i = math.sqrt(math.fsum((row[2] - mean_i) ** 2 for row in per_image) / n) if n else 0.0
    return GapReport(
        mean_correct=mean_c,
        mean_incorrect=mean_i,
        gap=mean_c - mean_i,
        std_correct=std_c,
        std_incorrect=std_i,
        n=n,
        per_image=per_image,
    )


def gap_report_to_dict(report: GapReport) -> dict:
    return {
        "mean_correct": report.mean_correct,
        "mean_incorrect": report.mean_incorrect,
        "gap": report.gap,
        "std_correct": report.std_correct,
        "std_incorrect": report.std_incorrect,
        "n": report.n,
        "per_image": [list(row) for row in report.per_image],
    }


def _utc_now() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
