"""Reference-free image-captioning evaluation via cycle consistency.

Caption an image, regenerate an image from the caption, embed both images,
and score their cosine similarity; plus the correct/incorrect-caption
validation protocol and text-metric baselines.
"""

from .domain import (
    Caption,
    DatasetEntry,
    EmbeddingVector,
    EvalRecord,
    GapReport,
    ImageRef,
    RunConfig,
    validate_entry,
)
from .ingest import (
    dataset_summary,
    load_coco_annotations,
    load_jsonl_dataset,
    save_jsonl_dataset,
)
from .metrics import (
    BleuParams,
    aggregate,
    bleu,
    brevity_penalty,
    cosine_similarity,
    modified_ngram_precision,
    text_to_text_similarity,
    tokenize,
)
from .pipeline import (
    RunResult,
    compute_gap,
    evaluate_model,
    human_validation_run,
    run_evaluation,
    select_incorrect_caption,
)
from .store import FileCache, cache_key, load_run, persist_run

__version__ = "0.1.0"

__all__ = [
    "Caption",
    "DatasetEntry",
    "EmbeddingVector",
    "EvalRecord",
    "GapReport",
    "ImageRef",
    "RunConfig",
    "validate_entry",
    "dataset_summary",
    "load_coco_annotations",
    "load_jsonl_dataset",
    "save_jsonl_dataset",
    "BleuParams",
    "aggregate",
    "bleu",
    "brevity_penalty",
    "cosine_similarity",
    "modified_ngram_precision",
    "text_to_text_similarity",
    "tokenize",
    "RunResult",
    "compute_gap",
    "evaluate_model",
    "human_validation_run",
    "run_evaluation",
    "select_incorrect_caption",
    "FileCache",
    "cache_key",
    "load_run",
    "persist_run",
]
