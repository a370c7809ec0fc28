"""Disk I/O: PASCAL-style dataset trees, PNG codecs, and evaluation reports.

Dataset layout (a deliberately minimal PASCAL-like convention; a real VOC
tree can be symlinked into it, see README):

    root/
      splits/<split>.txt      LF-terminated UTF-8 list of image ids
      images/<id>.png         8-bit RGB query/support images (.jpg accepted)
      labels/<id>.png         8-bit paletted or grayscale class-id maps
      candidates/<id>_<k>.png 8-bit gray candidate masks, k = 0..L, no gaps
      coarse/<id>_<c>.png     per-class coarse masks (judging runs)
      refined/<id>_<c>.png    per-class refined masks (judging runs)

Per-entry class sets are always derived from the decoded label map, never
from sidecar files. Loading is read-only and idempotent.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import (
    DimensionError,
    DuplicateEntryError,
    FormatError,
    MissingEntryError,
)
from .maskcore import BinaryMask, LabelMap

_IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg")

REPORT_HEADER = "group,n,miou_coarse,miou_refined,miou_jfs,success_rate"


# ---------------------------------------------------------------------------
# PNG codecs


def decode_palette_png(data: bytes) -> LabelMap:
    """Decode an 8-bit paletted or grayscale PNG into a LabelMap.

    Palette indices (or gray values) become class ids verbatim; 255 is the
    ignore value. Anything else (RGB without palette, 16-bit, ...) raises
    FormatError.
    """
    img = Image.open(io.BytesIO(data))
    if img.mode not in ("P", "L"):
        raise FormatError(f"label PNG must be 8-bit paletted or grayscale, got mode {img.mode}")
    labels = np.asarray(img, dtype=np.uint8)
    return LabelMap(labels, ignore_value=255)


def encode_labelmap_png(label_map: LabelMap) -> bytes:
    """Encode a LabelMap as a paletted PNG (ids fit in 8 bits)."""
    labels = label_map.labels
    if labels.max(initial=0) > 255:
        raise FormatError("label map has ids above 255; cannot encode as 8-bit PNG")
    img = Image.fromarray(labels.astype(np.uint8), mode="P")
    img.putpalette(_voc_palette().ravel().tolist())
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def _voc_palette() -> np.ndarray:
    """The classic bit-interleaved 256-color segmentation palette."""
    palette = np.zeros((256, 3), dtype=np.uint8)
    for i in range(256):
        r = g = b = 0
        c = i
        for j in range(8):
            r |= ((c >> 0) & 1) << (7 - j)
            g |= ((c >> 1) & 1) << (7 - j)
            b |= ((c >> 2) & 1) << (7 - j)
            c >>= 3
        palette[i] = (r, g, b)
    return palette


def decode_mask_png(data: bytes) -> BinaryMask:
    """Decode an 8-bit grayscale PNG mask (0 background, nonzero foreground)."""
    img = Image.open(io.BytesIO(data))
    if img.mode != "L":
        raise FormatError(f"mask PNG must be 8-bit grayscale, got mode {img.mode}")
    return BinaryMask(np.asarray(img) != 0)


def encode_mask_png(mask: BinaryMask) -> bytes:
    """Encode a mask as 8-bit grayscale PNG, 0 background / 255 foreground."""
    img = Image.fromarray(np.where(mask.pixels, 255, 0).astype(np.uint8), mode="L")
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def decode_image_png(data: bytes) -> np.ndarray:
    """Decode an image file into an 8-bit RGB array of shape (H, W, 3)."""
    img = Image.open(io.BytesIO(data))
    return np.asarray(img.convert("RGB"))


def encode_image_png(image: np.ndarray) -> bytes:
    """Encode an (H, W, 3) uint8 array as RGB PNG."""
    arr = np.asarray(image, dtype=np.uint8)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise DimensionError(f"image must have shape (H, W, 3), got {arr.shape}")
    buf = io.BytesIO()
    Image.fromarray(arr, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def load_mask_png(path: Path | str) -> BinaryMask:
    return decode_mask_png(Path(path).read_bytes())


def save_mask_png(mask: BinaryMask, path: Path | str):
    Path(path).write_bytes(encode_mask_png(mask))


def load_labelmap_png(path: Path | str) -> LabelMap:
    return decode_palette_png(Path(path).read_bytes())


def save_labelmap_png(label_map: LabelMap, path: Path | str):
    Path(path).write_bytes(encode_labelmap_png(label_map))


def load_image(path: Path | str) -> np.ndarray:
    return decode_image_png(Path(path).read_bytes())


def save_image_png(image: np.ndarray, path: Path | str):
    Path(path).write_bytes(encode_image_png(image))


# ---------------------------------------------------------------------------
# Dataset index


@dataclass(frozen=True)
class DatasetEntry:
    image_id: str
    image_path: Path
    labelmap_path: Path
    classes: tuple[int, ...]  # derived from the decoded label map


@dataclass(frozen=True)
class DatasetIndex:
    root: Path
    split: str
    entries: tuple[DatasetEntry, ...]

    def __post_init__(self):
        ids = [e.image_id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise DuplicateEntryError("image ids must be unique within a split")

    def entry(self, image_id: str) -> DatasetEntry:
        for e in self.entries:
            if e.image_id == image_id:
                return e
        raise MissingEntryError(f"no entry with id {image_id!r}")

    def with_class(self, class_id: int) -> tuple[DatasetEntry, ...]:
        return tuple(e for e in self.entries if class_id in e.classes)

    @property
    def image_ids(self) -> tuple[str, ...]:
        return tuple(e.image_id for e in self.entries)


@dataclass(frozen=True)
class CandidateBank:
    """Class-agnostic candidate masks S_0..S_L for one image (may be empty)."""

    image_id: str
    candidates: tuple[BinaryMask, ...]

    def __post_init__(self):
        sizes = {m.size for m in self.candidates}
        if len(sizes) > 1:
            raise DimensionError(f"candidate masks disagree on dimensions: {sorted(sizes)}")

    def __len__(self) -> int:
        return len(self.candidates)


def _find_image(root: Path, image_id: str) -> Path | None:
    for ext in _IMAGE_EXTENSIONS:
        p = root / "images" / f"{image_id}{ext}"
        if p.is_file():
            return p
    return None


def load_dataset(root: Path | str, split: str) -> DatasetIndex:
    """Index a dataset tree for one split.

    Raises the built-in OSError family when the split file is unreadable,
    DuplicateEntryError on repeated ids, and MissingEntryError when a listed
    id has no image or label file.
    """
    root = Path(root)
    split_file = root / "splits" / f"{split}.txt"
    ids = [line for line in split_file.read_text(encoding="utf-8").split("\n") if line]
    seen = set()
    for image_id in ids:
        if image_id in seen:
            raise DuplicateEntryError(f"id {image_id!r} listed twice in split {split!r}")
        seen.add(image_id)
    entries = []
    for image_id in ids:
        image_path = _find_image(root, image_id)
        if image_path is None:
            raise MissingEntryError(f"id {image_id!r} has no image under {root / 'images'}")
        labelmap_path = root / "labels" / f"{image_id}.png"
        if not labelmap_path.is_file():
            raise MissingEntryError(f"id {image_id!r} has no label map under {root / 'labels'}")
        label_map = load_labelmap_png(labelmap_path)
        entries.append(
            DatasetEntry(image_id, image_path, labelmap_path, label_map.present_classes())
        )
    return DatasetIndex(root, split, tuple(entries))


def load_candidate_bank(
    directory: Path | str, image_id: str, expected_size: tuple[int, int] | None = None
) -> CandidateBank:
    """Load candidate masks ``<image_id>_<k>.png`` for k = 0..L in order.

    A missing directory or no matching files yields an empty bank. A gap in
    the k sequence raises MissingEntryError; a mask whose dimensions differ
    from ``expected_size`` (width, height) raises DimensionError.
    """
    directory = Path(directory)
    found: dict[int, Path] = {}
    if directory.is_dir():
        prefix = f"{image_id}_"
        for p in sorted(directory.glob(f"{prefix}*.png")):
            suffix = p.stem[len(prefix):]
            if suffix.isdigit():
                found[int(suffix)] = p
    if not found:
        return CandidateBank(image_id, ())
    top = max(found)
    missing = [k for k in range(top + 1) if k not in found]
    if missing:
        raise MissingEntryError(
            f"candidate files for {image_id!r} have gaps at indices {missing}"
        )
    masks = []
    for k in range(top + 1):
        mask = load_mask_png(found[k])
        if expected_size is not None and mask.size != tuple(expected_size):
            raise DimensionError(
                f"candidate {found[k].name} is {mask.size}, expected {tuple(expected_size)}"
            )
        masks.append(mask)
    return CandidateBank(image_id, tuple(masks))


# ---------------------------------------------------------------------------
# Evaluation reports


@dataclass(frozen=True)
class ReportRow:
    group: str
    n: int
    miou_coarse: float
    miou_refined: float
    miou_jfs: float
    success_rate: float


@dataclass(frozen=True)
class EvalReport:
    rows: tuple[ReportRow, ...]


def write_report(report: EvalReport, path: Path | str, format: str = "csv"):
    """Write a report as CSV or JSON; byte-deterministic for equal reports.

    The CSV header is exactly ``group,n,miou_coarse,miou_refined,miou_jfs,
    success_rate`` and ratios are printed with 4 decimal places. The JSON
    form mirrors the fields at full precision.
    """
    path = Path(path)
    if format == "csv":
        lines = [REPORT_HEADER]
        for row in report.rows:
            lines.append(
                f"{row.group},{row.n},{row.miou_coarse:.4f},{row.miou_refined:.4f},"
                f"{row.miou_jfs:.4f},{row.success_rate:.4f}"
            )
        path.write_bytes(("\n".join(lines) + "\n").encode("utf-8"))
    elif format == "json":
        payload = {
            "rows": [
                {
                    "group": row.group,
                    "n": row.n,
                    "miou_coarse": row.miou_coarse,
                    "miou_refined": row.miou_refined,
                    "miou_jfs": row.miou_jfs,
                    "success_rate": row.success_rate,
                }
                for row in report.rows
            ]
        }
        path.write_bytes((json.dumps(payload, indent=2) + "\n").encode("utf-8"))
    else:
        raise ValueError(f"format must be 'csv' or 'json', got {format!r}")


def read_report(path: Path | str, format: str = "csv") -> EvalReport:
    """Re-parse a written report (round-trip at the written precision)."""
    path = Path(path)
    rows = []
    if format == "csv":
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if ",".join(header) != REPORT_HEADER:
                raise FormatError(f"unexpected report header {header}")
            for rec in reader:
                rows.append(
                    ReportRow(rec[0], int(rec[1]), float(rec[2]), float(rec[3]),
                              float(rec[4]), float(rec[5]))
                )
    elif format == "json":
        payload = json.loads(path.read_text(encoding="utf-8"))
        for rec in payload["rows"]:
            rows.append(
                ReportRow(rec["group"], rec["n"], rec["miou_coarse"], rec["miou_refined"],
                          rec["miou_jfs"], rec["success_rate"])
            )
    else:
        raise ValueError(f"format must be 'csv' or 'json', got {format!r}")
    return EvalReport(tuple(rows))
