"""Annotation ingestion: JSONL records of character- and word-level quads.

One record per line:

    {"image_path": str,
     "char_boxes": [[[x, y] * 4] ...],
     "word_boxes": [[[x, y] * 4] ...],
     "transcriptions": [str ...]}        # optional

Vertex order inside a box is fixed as lt, lb, rt, rb.
"""

from __future__ import annotations

import enum
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .raster import QuadBox, rasterize_quad


class AnnotationError(ValueError):
    """Unrecoverable annotation file defect (malformed JSON, missing image_path)."""


class AbsentGranularityError(ValueError):
    """The requested box granularity is empty in this annotation set."""


class Granularity(enum.Enum):
    CHAR = "char"
    WORD = "word"


@dataclass(frozen=True)
class AnnotationSet:
    image_path: str
    char_boxes: tuple[QuadBox, ...]
    word_boxes: tuple[QuadBox, ...]
    transcriptions: tuple[str, ...] | None = None


@dataclass
class ParseResult:
    """Parsed records plus drop-count metadata; behaves as a sequence of records."""

    records: list[AnnotationSet] = field(default_factory=list)
    warnings: int = 0

    def __iter__(self):
        return iter(self.records)

    def __len__(self):
        return len(self.records)

    def __getitem__(self, i):
        return self.records[i]


def _boxes_from_json(raw, strict_shape: bool) -> tuple[list[QuadBox], int]:
    """Validate a box list. Shape violations raise; geometric ones drop the box."""
    boxes: list[QuadBox] = []
    dropped = 0
    for entry in raw:
        if (not isinstance(entry, list) or len(entry) != 4
                or any(not isinstance(p, list) or len(p) != 2 for p in entry)
                or any(not isinstance(v, (int, float)) or isinstance(v, bool)
                       for p in entry for v in p)):
            raise _BoxShapeError()
        box = QuadBox.from_list(entry)
        if not box.is_finite() or not box.is_simple():
            dropped += 1
            continue
        boxes.append(box)
    return boxes, dropped


class _BoxShapeError(Exception):
    pass


def parse_annotations(path: str | os.PathLike) -> ParseResult:
    """Parse a JSONL annotation file.

    Malformed JSON or a missing image_path raises AnnotationError naming the
    line. A record holding a box that violates the storage schema (wrong point
    count or non-numeric coordinates) is dropped with a warning, as is a record
    whose box lists are both empty; a geometrically invalid box drops only
    itself.
    """
    result = ParseResult()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise AnnotationError(f"line {lineno}: malformed JSON ({exc.msg})") from exc
            if not isinstance(obj, dict):
                raise AnnotationError(f"line {lineno}: record must be a JSON object")
            image_path = obj.get("image_path")
            if not isinstance(image_path, str) or not image_path:
                raise AnnotationError(f"line {lineno}: image_path missing or empty")

            try:
                char_boxes, char_dropped = _boxes_from_json(obj.get("char_boxes", []), True)
                word_boxes, word_dropped = _boxes_from_json(obj.get("word_boxes", []), True)
            except _BoxShapeError:
                result.warnings += 1
                continue
            result.warnings += char_dropped + word_dropped

            transcriptions = obj.get("transcriptions")
            if transcriptions is not None:
                if (not isinstance(transcriptions, list)
                        or any(not isinstance(t, str) for t in transcriptions)):
                    result.warnings += 1
                    continue
                transcriptions = tuple(transcriptions)

            if not char_boxes and not word_boxes:
                result.warnings += 1
                continue
            result.records.append(AnnotationSet(
                image_path=image_path,
                char_boxes=tuple(char_boxes),
                word_boxes=tuple(word_boxes),
                transcriptions=transcriptions,
            ))
    return result


def write_annotations(records, path: str | os.PathLike) -> None:
    """Write AnnotationSets as JSONL; inverse of parse_annotations on valid data."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            obj = {
                "image_path": rec.image_path,
                "char_boxes": [b.as_list() for b in rec.char_boxes],
                "word_boxes": [b.as_list() for b in rec.word_boxes],
            }
            if rec.transcriptions is not None:
                obj["transcriptions"] = list(rec.transcriptions)
            fh.write(json.dumps(obj) + "\n")


def select_boxes(a: AnnotationSet, g: Granularity) -> list[QuadBox]:
    """Pick the box list for a granularity; empty selection is an error, not a fallback."""
    boxes = a.char_boxes if g is Granularity.CHAR else a.word_boxes
    if not boxes:
        raise AbsentGranularityError(
            f"annotation for {a.image_path!r} has no {g.value}-level boxes")
    return list(boxes)


def label_map(boxes, width: int, height: int) -> np.ndarray:
    """Union of rasterized boxes: 1 inside any box, 0 elsewhere."""
    out = np.zeros((height, width), dtype=np.uint8)
    for box in boxes:
        np.bitwise_or(out, rasterize_quad(box, width, height), out=out)
    return out
