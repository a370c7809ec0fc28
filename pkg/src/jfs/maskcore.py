"""Binary/label mask types, mask algebra, run-length storage, and IoU metrics.

Masks are immutable: the backing numpy arrays are marked read-only at
construction, so every operation below is a pure function and values can be
shared freely across threads.

Conventions:
  - arrays are row-major with shape ``(height, width)``
  - IoU of two empty masks is 1.0 (agreeing the class is absent is perfect
    agreement; this also keeps mean IoU well defined)
  - ignore pixels are excluded from both intersection and union
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy import ndimage

from .errors import (
    DimensionError,
    EmptyAggregateError,
    InvalidClassError,
    RleFormatError,
    UndefinedRegionError,
)

RLE_MAGIC = b"JFSM"
RLE_VERSION = 1


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """Per-pixel foreground membership for one class on one image."""

    pixels: np.ndarray  # bool, shape (height, width), read-only

    def __post_init__(self):
        arr = np.asarray(self.pixels)
        if arr.dtype != np.bool_:
            arr = arr.astype(bool)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DimensionError(f"mask must be 2D with positive dims, got shape {arr.shape}")
        object.__setattr__(self, "pixels", _freeze(np.ascontiguousarray(arr)))

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def size(self) -> tuple[int, int]:
        """(width, height)"""
        return (self.pixels.shape[1], self.pixels.shape[0])

    @property
    def area(self) -> int:
        """Number of foreground pixels."""
        return int(np.count_nonzero(self.pixels))

    def __eq__(self, other) -> bool:
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(
            np.array_equal(self.pixels, other.pixels)
        )

    def __hash__(self):
        return hash((self.pixels.shape, self.pixels.tobytes()))

    @classmethod
    def empty(cls, width: int, height: int) -> "BinaryMask":
        return cls(np.zeros((height, width), dtype=bool))

    @classmethod
    def full(cls, width: int, height: int) -> "BinaryMask":
        return cls(np.ones((height, width), dtype=bool))

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "BinaryMask":
        return cls(np.asarray(arr) != 0)


@dataclass(frozen=True, eq=False)
class LabelMap:
    """Per-pixel class ids with a reserved ignore value."""

    labels: np.ndarray  # unsigned int, shape (height, width), read-only
    ignore_value: int = 255

    def __post_init__(self):
        arr = np.asarray(self.labels)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DimensionError(f"label map must be 2D with positive dims, got shape {arr.shape}")
        if not np.issubdtype(arr.dtype, np.integer):
            raise TypeError(f"label map dtype must be integer, got {arr.dtype}")
        if arr.min(initial=0) < 0:
            raise ValueError("class ids must be non-negative")
        object.__setattr__(self, "labels", _freeze(np.ascontiguousarray(arr)))

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def size(self) -> tuple[int, int]:
        return (self.labels.shape[1], self.labels.shape[0])

    def present_classes(self) -> tuple[int, ...]:
        """Sorted class ids with at least one pixel, excluding 0 and ignore."""
        ids = np.unique(self.labels)
        return tuple(int(i) for i in ids if i != 0 and i != self.ignore_value)

    def __eq__(self, other) -> bool:
        if not isinstance(other, LabelMap):
            return NotImplemented
        return (
            self.ignore_value == other.ignore_value
            and self.labels.shape == other.labels.shape
            and bool(np.array_equal(self.labels, other.labels))
        )


@dataclass(frozen=True)
class Rle:
    """Run-length encoding of a BinaryMask.

    Runs alternate starting with a background run over the row-major
    flattening; a mask that starts with foreground carries a leading
    zero-length background run.
    """

    width: int
    height: int
    runs: tuple[int, ...]


def _require_same_size(a: BinaryMask, b: BinaryMask):
    if a.pixels.shape != b.pixels.shape:
        raise DimensionError(
            f"mask dimensions differ: {a.width}x{a.height} vs {b.width}x{b.height}"
        )


def mask_algebra(a: BinaryMask, b: BinaryMask) -> dict:
    """Pixelwise AND/OR of two same-size masks plus all four popcounts.

    Returns a dict with keys ``intersection``, ``union`` (BinaryMask) and
    ``a_area``, ``b_area``, ``intersection_area``, ``union_area`` (int).
    The counts always satisfy a_area + b_area = intersection_area + union_area.
    """
    _require_same_size(a, b)
    inter = a.pixels & b.pixels
    union = a.pixels | b.pixels
    return {
        "intersection": BinaryMask(inter),
        "union": BinaryMask(union),
        "a_area": a.area,
        "b_area": b.area,
        "intersection_area": int(np.count_nonzero(inter)),
        "union_area": int(np.count_nonzero(union)),
    }


def iou(a: BinaryMask, b: BinaryMask) -> float:
    """Intersection-over-union of two same-size masks, in [0, 1].

    Two empty masks score 1.0.
    """
    _require_same_size(a, b)
    inter = int(np.count_nonzero(a.pixels & b.pixels))
    union = int(np.count_nonzero(a.pixels | b.pixels))
    if union == 0:
        return 1.0
    return inter / union


def masked_iou(pred: BinaryMask, gt: BinaryMask, valid: BinaryMask) -> float:
    """IoU computed only over pixels where ``valid`` is true.

    Pixels outside the valid region contribute to neither intersection nor
    union. Raises UndefinedRegionError when valid is all false.
    """
    _require_same_size(pred, gt)
    _require_same_size(pred, valid)
    v = valid.pixels
    if not v.any():
        raise UndefinedRegionError("valid region is empty")
    inter = int(np.count_nonzero(pred.pixels & gt.pixels & v))
    union = int(np.count_nonzero((pred.pixels | gt.pixels) & v))
    if union == 0:
        return 1.0
    return inter / union


def mean_iou(values: Iterable[float]) -> float:
    """Arithmetic mean of IoU values; raises EmptyAggregateError on none."""
    vals = list(values)
    if not vals:
        raise EmptyAggregateError("mean of zero IoU values")
    for v in vals:
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"IoU value out of range [0,1]: {v}")
    return sum(vals) / len(vals)


def extract_class(label_map: LabelMap, class_id: int) -> tuple[BinaryMask, BinaryMask]:
    """Split a label map into (class mask, valid mask) for one class.

    ``mask`` is true where the pixel carries ``class_id``; ``valid`` is true
    where the pixel is not the ignore value.
    """
    if class_id == label_map.ignore_value:
        raise InvalidClassError(f"class id {class_id} is the ignore value")
    mask = label_map.labels == class_id
    valid = label_map.labels != label_map.ignore_value
    return BinaryMask(mask), BinaryMask(valid)


def rle_encode(mask: BinaryMask) -> Rle:
    """Encode a mask as alternating run lengths starting with background."""
    flat = mask.pixels.ravel()
    change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate(([0], change, [flat.size]))
    runs = np.diff(bounds)
    if flat[0]:
        runs = np.concatenate(([0], runs))
    return Rle(mask.width, mask.height, tuple(int(r) for r in runs))


def rle_decode(rle: Rle) -> BinaryMask:
    """Decode back to a BinaryMask, validating the run stream."""
    runs = np.asarray(rle.runs, dtype=np.int64)
    if runs.size == 0:
        raise RleFormatError("empty run stream")
    if (runs < 0).any():
        raise RleFormatError("negative run length")
    if (runs[1:] == 0).any():
        raise RleFormatError("zero-length run after the first")
    total = int(runs.sum())
    if total != rle.width * rle.height:
        raise RleFormatError(
            f"run lengths sum to {total}, expected {rle.width * rle.height}"
        )
    values = np.zeros(runs.size, dtype=bool)
    values[1::2] = True
    flat = np.repeat(values, runs)
    return BinaryMask(flat.reshape(rle.height, rle.width))


def rle_to_bytes(rle: Rle) -> bytes:
    """Serialize to the versioned binary container (magic ``JFSM``, v1)."""
    header = struct.pack("<4sBIII", RLE_MAGIC, RLE_VERSION, rle.width, rle.height, len(rle.runs))
    body = np.asarray(rle.runs, dtype="<u4").tobytes()
    return header + body


def rle_from_bytes(data: bytes) -> Rle:
    """Parse the binary container; corrupt input raises RleFormatError."""
    header_size = struct.calcsize("<4sBIII")
    if len(data) < header_size:
        raise RleFormatError("container truncated before header end")
    magic, version, width, height, count = struct.unpack_from("<4sBIII", data)
    if magic != RLE_MAGIC:
        raise RleFormatError(f"bad magic {magic!r}")
    if version != RLE_VERSION:
        raise RleFormatError(f"unsupported container version {version}")
    expected = header_size + 4 * count
    if len(data) != expected:
        raise RleFormatError(f"container length {len(data)}, expected {expected}")
    runs = np.frombuffer(data, dtype="<u4", offset=header_size, count=count)
    rle = Rle(width, height, tuple(int(r) for r in runs))
    total = sum(rle.runs)
    if total != width * height:
        raise RleFormatError(f"run lengths sum to {total}, expected {width * height}")
    return rle


def morph(mask: BinaryMask, op: str, radius: int) -> BinaryMask:
    """Dilate or erode with a square structuring element of side 2*radius+1.

    Out-of-bounds neighbors count as background, so erosion always peels
    pixels within ``radius`` of the border.
    """
    if radius < 1:
        raise ValueError(f"radius must be >= 1, got {radius}")
    structure = np.ones((2 * radius + 1, 2 * radius + 1), dtype=bool)
    if op == "dilate":
        out = ndimage.binary_dilation(mask.pixels, structure=structure, border_value=0)
    elif op == "erode":
        out = ndimage.binary_erosion(mask.pixels, structure=structure, border_value=0)
    else:
        raise ValueError(f"op must be 'dilate' or 'erode', got {op!r}")
    return BinaryMask(out)
