"""Command-line surface: validate, eval, validate-framework, report.

Exit codes: 0 success, 2 usage/config/parse errors, 3 runtime failure
ceiling exceeded. Lines meant for machine parsing are single-line key=value
pairs on stdout.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path

from .config import load_config
from .domain import validate_entry
from .errors import (
    ConfigurationError,
    CycleEvalError,
    FailureCeilingExceeded,
    FormatError,
    RunMismatchError,
    UnsupportedVersionError,
)
from .ingest import dataset_summary, load_coco_annotations, load_jsonl_dataset
from .pipeline import (
    cache_hit_rate,
    compute_gap,
    gap_report_to_dict,
    per_image_means,
    run_evaluation,
)
from .store import FileCache, load_run, persist_run

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_FAILURE_CEILING = 3


def entrypoint() -> None:
    sys.exit(main())


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (ConfigurationError, FormatError, UnsupportedVersionError, RunMismatchError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FailureCeilingExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE_CEILING
    except CycleEvalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cycleval",
        description="Reference-free image-captioning evaluation via cycle consistency.",
    )
    parser.add_argument("--verbose", action="store_true", help="log provider and cache activity")
    sub = parser.add_subparsers(dest="command", required=True)

    p_validate = sub.add_parser("validate", help="check a dataset file and print its summary")
    p_validate.add_argument("dataset", type=Path)
    _dataset_flags(p_validate)
    p_validate.set_defaults(func=cmd_validate)

    p_eval = sub.add_parser("eval", help="run the captioner evaluation pipeline")
    p_eval.add_argument("dataset", type=Path)
    _dataset_flags(p_eval)
    _run_flags(p_eval)
    p_eval.set_defaults(func=cmd_eval)

    p_framework = sub.add_parser(
        "validate-framework",
        help="run the correct/incorrect caption experiment and report the gap",
    )
    p_framework.add_argument("dataset", type=Path)
    _dataset_flags(p_framework)
    _run_flags(p_framework)
    p_framework.set_defaults(func=cmd_validate_framework)

    p_report = sub.add_parser("report", help="re-emit persisted runs as json/csv/plotdata")
    p_report.add_argument("runs", type=Path, nargs="+")
    p_report.add_argument("--format", choices=("json", "csv", "plotdata"), default="json")
    p_report.add_argument("--out", type=Path, default=None, help="output file (default stdout)")
    p_report.set_defaults(func=cmd_report)
    return parser


def _dataset_flags(parser):
    parser.add_argument(
        "--format",
        dest="dataset_format",
        choices=("coco", "jsonl"),
        default=None,
        help="dataset format (default: by file extension)",
    )
    parser.add_argument(
        "--image-root",
        type=Path,
        default=None,
        help="directory that COCO file_name entries are relative to",
    )


def _run_flags(parser):
    parser.add_argument("--config", type=Path, required=True)
    parser.add_argument("--out", type=Path, required=True)
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--cache-dir", type=Path, default=None, help="override the cache location")
    parser.add_argument("--max-parallel", type=int, default=None)


def _load_dataset(args):
    fmt = args.dataset_format
    if fmt is None:
        fmt = "jsonl" if args.dataset.suffix == ".jsonl" else "coco"
    if fmt == "coco":
        image_root = args.image_root if args.image_root is not None else args.dataset.parent
        return load_coco_annotations(args.dataset, image_root)
    return load_jsonl_dataset(args.dataset)


def cmd_validate(args) -> int:
    entries = _load_dataset(args)
    summary = dataset_summary(entries)
    print(f"n_images={summary.n_images} n_captions={summary.n_captions}")
    for count in sorted(summary.captions_per_image):
        print(f"captions_per_image[{count}]={summary.captions_per_image[count]}")
    errors = 0
    for entry in entries:
        for issue in validate_entry(entry):
            print(f"{issue.level} image_id={entry.image.id}: {issue.message}")
            if issue.level == "error":
                errors += 1
    return EXIT_OK if errors == 0 else EXIT_USAGE


def cmd_eval(args) -> int:
    loaded = load_config(
        args.config,
        seed_override=args.seed,
        cache_dir_override=args.cache_dir,
        max_parallel_override=args.max_parallel,
    )
    dataset = _load_dataset(args)
    cache = FileCache(loaded.run_config.cache_dir)
    executed = run_evaluation(dataset, loaded.providers, loaded.run_config, "model", cache)
    persist_run(executed.result, args.out)
    mean = executed.result.summary.mean
    print(
        f"mean_cosine={_fmt(mean)} n={executed.result.summary.n} "
        f"cache_hit_rate={_fmt(cache_hit_rate(executed.result.records))}"
    )
    return EXIT_OK


def cmd_validate_framework(args) -> int:
    loaded = load_config(
        args.config,
        seed_override=args.seed,
        cache_dir_override=args.cache_dir,
        max_parallel_override=args.max_parallel,
    )
    dataset = _load_dataset(args)
    cache = FileCache(loaded.run_config.cache_dir)
    correct = run_evaluation(dataset, loaded.providers, loaded.run_config, "correct", cache)
    incorrect = run_evaluation(dataset, loaded.providers, loaded.run_config, "incorrect", cache)
    report = compute_gap(correct.result, incorrect.result)

    out_dir = args.out
    out_dir.mkdir(parents=True, exist_ok=True)
    persist_run(correct.result, out_dir / "correct.json")
    persist_run(incorrect.result, out_dir / "incorrect.json")
    (out_dir / "gap.json").write_text(
        json.dumps(gap_report_to_dict(report), indent=1), encoding="utf-8"
    )
    print(
        f"gap={_fmt(report.gap)} correct={_fmt(report.mean_correct)} "
        f"incorrect={_fmt(report.mean_incorrect)}"
    )
    return EXIT_OK


def cmd_report(args) -> int:
    runs = [load_run(path) for path in args.runs]
    if args.format == "csv":
        text = _report_csv(runs)
    elif args.format == "plotdata":
        text = _report_plotdata(runs)
    else:
        text = _report_json(runs)
    if args.out is not None:
        args.out.write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _report_csv(runs) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["image_id", "condition", "sample", "cosine", "bleu", "text2text_mean"])
    for run in runs:
        baselines = {b.image_id: b for b in run.baselines} if run.baselines else {}
        for record in run.records:
            baseline = baselines.get(record.image_id)
            writer.writerow(
                [
                    record.image_id,
                    record.condition,
                    record.sample_index,
                    repr(record.cosine),
                    repr(baseline.bleu) if baseline and baseline.bleu is not None else "",
                    repr(baseline.text2text_mean)
                    if baseline and baseline.text2text_mean is not None
                    else "",
                ]
            )
    return buffer.getvalue()


def _report_plotdata(runs) -> str:
    conditions = {}
    for run in runs:
        if run.condition in conditions:
            raise RunMismatchError(f"two runs share the condition {run.condition!r}")
        means = per_image_means(run)
        image_ids = sorted(means)
        scores = [means[i] for i in image_ids]
        n = len(scores)
        conditions[run.condition] = {
            "image_ids": image_ids,
            "scores": scores,
            "mean": (math.fsum(scores) / n) if n else None,
        }
    doc = {"schema": "plotdata-v1", "conditions": conditions}
    if set(conditions) >= {"correct", "incorrect"}:
        doc["gap"] = conditions["correct"]["mean"] - conditions["incorrect"]["mean"]
    return json.dumps(doc, indent=1) + "\n"


def _report_json(runs) -> str:
    if len(runs) == 2:
        by_condition = {run.condition: run for run in runs}
        if set(by_condition) != {"correct", "incorrect"}:
            raise RunMismatchError(
                "json report over two runs needs one 'correct' and one 'incorrect' run"
            )
        report = compute_gap(by_condition["correct"], by_condition["incorrect"])
        return json.dumps(gap_report_to_dict(report), indent=1) + "\n"
    if len(runs) != 1:
        raise RunMismatchError("json report takes one run (summary) or two runs (gap)")
    run = runs[0]
    doc = {
        "condition": run.condition,
        "summary": {
            "n": run.summary.n,
            "mean": run.summary.mean,
            "std": run.summary.std,
            "min": run.summary.min,
            "max": run.summary.max,
        },
    }
    return json.dumps(doc, indent=1) + "\n"


def _fmt(value) -> str:
    if value is None or value != value:
        return "nan"
    return f"{value:.4f}"


if __name__ == "__main__":
    entrypoint()
