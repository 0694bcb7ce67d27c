"""Binary region masks, labeled segment maps, and normalized boxes.

Coordinates are normalized to [0, 1] so the same plan can be rasterized at
image resolution and at latent resolution. A pixel belongs to a box when its
center falls inside the half-open box interval.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class DimensionMismatch(ValueError):
    pass


class EmptyBox(ValueError):
    pass


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box in normalized xyxy coordinates."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        for name in ("x0", "y0", "x1", "y1"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ValueError(f"degenerate box {self.as_list()}")

    def as_list(self) -> list[float]:
        return [self.x0, self.y0, self.x1, self.y1]

    def clipped(self) -> "BoundingBox":
        """Clip to the unit square; raises ValueError if nothing is left."""
        return BoundingBox(
            min(max(self.x0, 0.0), 1.0),
            min(max(self.y0, 0.0), 1.0),
            min(max(self.x1, 0.0), 1.0),
            min(max(self.y1, 0.0), 1.0),
        )

    def contains(self, other: "BoundingBox", tol: float = 1e-9) -> bool:
        return (
            self.x0 <= other.x0 + tol
            and self.y0 <= other.y0 + tol
            and self.x1 >= other.x1 - tol
            and self.y1 >= other.y1 - tol
        )


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class RegionMask:
    """Binary H x W pixel grid. Immutable; shared freely across threads."""

    width: int
    height: int
    bits: np.ndarray = field(repr=False)

    def __eq__(self, other) -> bool:
        if not isinstance(other, RegionMask):
            return NotImplemented
        return (self.width, self.height) == (other.width, other.height) and np.array_equal(
            self.bits, other.bits
        )

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("mask dimensions must be positive")
        bits = np.asarray(self.bits)
        if bits.shape != (self.height, self.width):
            raise DimensionMismatch(
                f"bits shape {bits.shape} != (height={self.height}, width={self.width})"
            )
        if not np.isin(bits, (0, 1)).all():
            raise ValueError("mask values must be strictly binary")
        object.__setattr__(self, "bits", _freeze(bits.astype(np.uint8)))

    @classmethod
    def zeros(cls, width: int, height: int) -> "RegionMask":
        return cls(width, height, np.zeros((height, width), dtype=np.uint8))

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "RegionMask":
        arr = np.asarray(arr)
        return cls(arr.shape[1], arr.shape[0], arr)

    @property
    def area(self) -> int:
        return int(self.bits.sum())

    def is_empty(self) -> bool:
        return self.area == 0

    def tight_bbox(self) -> BoundingBox:
        """Normalized tight bounding rectangle of the set pixels."""
        if self.is_empty():
            raise ValueError("empty mask has no bounding box")
        rows = np.flatnonzero(self.bits.any(axis=1))
        cols = np.flatnonzero(self.bits.any(axis=0))
        return BoundingBox(
            cols[0] / self.width,
            rows[0] / self.height,
            (cols[-1] + 1) / self.width,
            (rows[-1] + 1) / self.height,
        )

    def complement(self) -> "RegionMask":
        return RegionMask(self.width, self.height, 1 - self.bits)


@dataclass(frozen=True, eq=False)
class SegmentMap:
    """H x W grid of small integer labels; 0 marks the non-object region."""

    width: int
    height: int
    labels: np.ndarray = field(repr=False)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SegmentMap):
            return NotImplemented
        return (self.width, self.height) == (other.width, other.height) and np.array_equal(
            self.labels, other.labels
        )

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.shape != (self.height, self.width):
            raise DimensionMismatch(
                f"labels shape {labels.shape} != (height={self.height}, width={self.width})"
            )
        if labels.min() < 0:
            raise ValueError("segment labels must be non-negative")
        object.__setattr__(self, "labels", _freeze(labels.astype(np.int32)))

    def segment_ids(self) -> list[int]:
        """Object segment ids present in the map (label 0 excluded)."""
        ids = np.unique(self.labels)
        return [int(i) for i in ids if i != 0]

    def segment_mask(self, segment_id: int) -> RegionMask:
        return RegionMask(self.width, self.height, (self.labels == segment_id).astype(np.uint8))

    def non_object_mask(self) -> RegionMask:
        """The complement of all object segments (M_non)."""
        return self.segment_mask(0)

    def area_fractions(self) -> dict[int, float]:
        total = self.width * self.height
        ids, counts = np.unique(self.labels, return_counts=True)
        return {int(i): float(c) / total for i, c in zip(ids, counts)}


# --- run-length wire format -------------------------------------------------
# Row-major, alternating zero/one run lengths, starting with zeros:
# [[0,1],[1,0]] -> "rle:1,2,1".

def mask_to_rle(mask: RegionMask) -> str:
    flat = mask.bits.ravel()
    runs: list[int] = []
    current = 0  # first run counts zeros
    run = 0
    for v in flat:
        if v == current:
            run += 1
        else:
            runs.append(run)
            current = v
            run = 1
    runs.append(run)
    return "rle:" + ",".join(str(r) for r in runs)


def mask_from_rle(rle: str, width: int, height: int) -> RegionMask:
    if not rle.startswith("rle:"):
        raise ValueError(f"not an RLE string: {rle[:20]!r}")
    body = rle[4:]
    runs = [int(tok) for tok in body.split(",")] if body else []
    flat = np.zeros(width * height, dtype=np.uint8)
    pos = 0
    value = 0
    for run in runs:
        if run < 0:
            raise ValueError("negative run length")
        if value:
            flat[pos : pos + run] = 1
        pos += run
        value ^= 1
    if pos != width * height:
        raise ValueError(f"RLE covers {pos} pixels, expected {width * height}")
    return RegionMask(width, height, flat.reshape(height, width))


def mask_union(masks: Sequence[RegionMask]) -> RegionMask:
    """Bitwise OR of equally sized masks."""
    if not masks:
        raise ValueError("mask_union of no masks")
    first = masks[0]
    out = np.zeros_like(first.bits)
    for m in masks:
        if (m.width, m.height) != (first.width, first.height):
            raise DimensionMismatch(
                f"{m.width}x{m.height} mask in a {first.width}x{first.height} union"
            )
        out |= m.bits
    return RegionMask(first.width, first.height, out)


def _pixel_centers(n: int) -> np.ndarray:
    return (np.arange(n) + 0.5) / n


def rasterize_box(box: BoundingBox, width: int, height: int) -> RegionMask:
    """Pixels whose centers lie in [x0,x1) x [y0,y1). May be empty."""
    cx = _pixel_centers(width)
    cy = _pixel_centers(height)
    cols = (cx >= box.x0) & (cx < box.x1)
    rows = (cy >= box.y0) & (cy < box.y1)
    return RegionMask(width, height, np.outer(rows, cols).astype(np.uint8))


def compose_generation_map(
    boxes: Iterable[tuple[BoundingBox, int]], size: tuple[int, int]
) -> SegmentMap:
    """Rasterize insertion boxes into a labeled segment map (M_gen).

    Later boxes overwrite earlier ones on overlap. Label 0 is the non-object
    region (M_non). Raises EmptyBox when a segment ends up with no pixels,
    either because the box is narrower than a pixel or because later boxes
    covered it entirely.
    """
    width, height = size
    boxes = list(boxes)
    ids = [sid for _, sid in boxes]
    if len(set(ids)) != len(ids) or any(sid < 1 for sid in ids):
        raise ValueError(f"segment ids must be distinct and >= 1, got {ids}")
    labels = np.zeros((height, width), dtype=np.int32)
    for box, sid in boxes:
        raster = rasterize_box(box, width, height)
        if raster.is_empty():
            raise EmptyBox(f"box {box.as_list()} rasterizes to zero pixels at {width}x{height}")
        labels[raster.bits == 1] = sid
    for box, sid in boxes:
        if not (labels == sid).any():
            raise EmptyBox(f"segment {sid} fully covered by later boxes")
    return SegmentMap(width, height, labels)


def downsample_mask(mask: RegionMask, width: int, height: int) -> RegionMask:
    """Area-threshold downsampling: a target pixel is on iff >= 50% covered."""
    if (width, height) == (mask.width, mask.height):
        return mask
    src = mask.bits.astype(np.float64)
    # Fractional overlap of each target cell with source pixels, computed
    # exactly from interval intersections.
    out = np.zeros((height, width))
    ys = np.arange(mask.height)
    xs = np.arange(mask.width)
    for r in range(height):
        y0, y1 = r * mask.height / height, (r + 1) * mask.height / height
        wy = np.clip(np.minimum(y1, ys + 1) - np.maximum(y0, ys), 0.0, 1.0)
        for c in range(width):
            x0, x1 = c * mask.width / width, (c + 1) * mask.width / width
            wx = np.clip(np.minimum(x1, xs + 1) - np.maximum(x0, xs), 0.0, 1.0)
            cell_area = (y1 - y0) * (x1 - x0)
            out[r, c] = (wy[:, None] * wx[None, :] * src).sum() / cell_area
    return RegionMask(width, height, (out >= 0.5).astype(np.uint8))
