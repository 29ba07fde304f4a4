"""Dataset loading: MSCOCO-style annotation files and a JSON-lines format.

Both loaders are pure functions of the file bytes and produce deterministic
entry lists. Only image ids, file names, dimensions, and caption annotations
are read from COCO files; every other annotation kind is ignored.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .domain import (
    BytesSource,
    Caption,
    DatasetEntry,
    FileSource,
    ImageRef,
    SyntheticSource,
)
from .errors import FormatError, ReferentialIntegrityError


def load_coco_annotations(path: Path | str, image_root: Path | str) -> list[DatasetEntry]:
    """Load a COCO-style captions file into dataset entries.

    One entry per image, captions grouped by image_id in annotation order,
    entries sorted by image id. Image files are addressed as
    ``image_root/file_name`` and are not opened here.

    Raises:
        FormatError: on unparseable JSON (with byte offset) or wrong shape.
        ReferentialIntegrityError: when an annotation names an unknown image.
    """
    path = Path(path)
    image_root = Path(image_root)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON at byte offset {exc.pos}: {exc.msg}") from exc

    if not isinstance(doc, dict):
        raise FormatError(f"{path}: top level must be a JSON object")
    images = doc.get("images")
    annotations = doc.get("annotations")
    if not isinstance(images, list) or not isinstance(annotations, list):
        raise FormatError(f"{path}: expected top-level 'images' and 'annotations' arrays")

    refs_by_image: dict = {}
    image_info: dict = {}
    seen_file_names: set[str] = set()
    for i, image in enumerate(images):
        if not isinstance(image, dict) or "id" not in image or "file_name" not in image:
            raise FormatError(f"{path}: images[{i}] must carry 'id' and 'file_name'")
        image_id = image["id"]
        file_name = image["file_name"]
        if image_id in image_info:
            raise FormatError(f"{path}: duplicate image id {image_id!r}")
        if file_name in seen_file_names:
            raise FormatError(f"{path}: duplicate file_name {file_name!r}")
        seen_file_names.add(file_name)
        image_info[image_id] = image
        refs_by_image[image_id] = []

    for i, ann in enumerate(annotations):
        if not isinstance(ann, dict) or "image_id" not in ann or "caption" not in ann:
            raise FormatError(f"{path}: annotations[{i}] must carry 'image_id' and 'caption'")
        image_id = ann["image_id"]
        if image_id not in refs_by_image:
            ann_id = ann.get("id", f"#{i}")
            raise ReferentialIntegrityError(
                f"{path}: annotation {ann_id} references unknown image_id {image_id!r}"
            )
        caption_text = str(ann["caption"]).strip()
        if not caption_text:
            raise FormatError(f"{path}: annotation {ann.get('id', f'#{i}')} has an empty caption")
        refs_by_image[image_id].append(caption_text)

    entries = []
    for image_id in sorted(image_info, key=_id_sort_key):
        image = image_info[image_id]
        ref = ImageRef(
            id=str(image_id),
            source=FileSource(image_root / image["file_name"]),
            width=image.get("width"),
            height=image.get("height"),
        )
        captions = tuple(
            Caption(text=t, origin="human", image_id=ref.id) for t in refs_by_image[image_id]
        )
        entries.append(DatasetEntry(image=ref, references=captions))
    return entries


def _id_sort_key(image_id):
    # Numeric ids sort numerically, string ids lexically; mixed files stay
    # deterministic by grouping ints first.
    if isinstance(image_id, bool):
        return (1, str(image_id))
    if isinstance(image_id, int):
        return (0, image_id)
    return (1, str(image_id))


def load_jsonl_dataset(path: Path | str) -> list[DatasetEntry]:
    """Load the line-delimited custom dataset format, preserving line order.

    Each line is ``{"image": {"id", "path" | ("seed" + "index")},
    "captions": [text, ...]}``. Synthetic images carry the seed of the world
    they live in plus their index within it.

    Raises:
        FormatError: malformed line (named by 1-based line number) or
            duplicate image id.
    """
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise FormatError(f"{path}: {exc}") from exc

    entries: list[DatasetEntry] = []
    seen_ids: set[str] = set()
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: line {lineno}: invalid JSON: {exc.msg}") from exc
        try:
            entry = _entry_from_jsonl(obj)
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"{path}: line {lineno}: {exc}") from exc
        if entry.image.id in seen_ids:
            raise FormatError(f"{path}: line {lineno}: duplicate image id {entry.image.id!r}")
        seen_ids.add(entry.image.id)
        entries.append(entry)
    return entries


def _entry_from_jsonl(obj) -> DatasetEntry:
    if not isinstance(obj, dict):
        raise ValueError("line must be a JSON object")
    image = obj["image"]
    if not isinstance(image, dict):
        raise ValueError("'image' must be an object")
    image_id = str(image["id"])
    has_path = "path" in image
    has_seed = "seed" in image
    if has_path == has_seed:
        raise ValueError("image must carry exactly one of 'path' or 'seed'")
    if has_path:
        source = FileSource(Path(image["path"]))
    else:
        if "index" not in image:
            raise ValueError("synthetic image needs an 'index' alongside 'seed'")
        source = SyntheticSource(world_seed=int(image["seed"]), index=int(image["index"]))
    ref = ImageRef(
        id=image_id,
        source=source,
        width=image.get("width"),
        height=image.get("height"),
    )
    captions = obj.get("captions", [])
    if not isinstance(captions, list):
        raise ValueError("'captions' must be an array")
    references = tuple(
        Caption(text=str(t).strip(), origin="human", image_id=image_id) for t in captions
    )
    return DatasetEntry(image=ref, references=references)


def save_jsonl_dataset(entries: Sequence[DatasetEntry], path: Path | str) -> None:
    """Write entries in the custom JSON-lines format (inverse of the loader)."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for entry in entries:
            image: dict = {"id": entry.image.id}
            source = entry.image.source
            if isinstance(source, FileSource):
                image["path"] = str(source.path)
            elif isinstance(source, SyntheticSource):
                image["seed"] = source.world_seed
                image["index"] = source.index
            elif isinstance(source, BytesSource):
                raise ValueError(
                    f"image {entry.image.id!r}: bytes-source images cannot be written "
                    "to the line-delimited format"
                )
            if entry.image.width is not None:
                image["width"] = entry.image.width
            if entry.image.height is not None:
                image["height"] = entry.image.height
            obj = {"image": image, "captions": [ref.text for ref in entry.references]}
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


@dataclass(frozen=True)
class DatasetSummary:
    n_images: int
    n_captions: int
    captions_per_image: dict[int, int]


def dataset_summary(entries: Sequence[DatasetEntry]) -> DatasetSummary:
    """Exact counts plus a histogram of observed captions-per-image."""
    histogram = Counter(len(e.references) for e in entries)
    return DatasetSummary(
        n_images=len(entries),
        n_captions=sum(len(e.references) for e in entries),
        captions_per_image=dict(histogram),
    )
