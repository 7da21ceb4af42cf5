"""Binary-mask primitives: RLE codec, IoU, coverage, components, boxes.

A binary mask is a 2D ``numpy`` array of ``bool`` with shape (height,
width), row-major in memory. All set operations in the package reduce to
the functions in this module.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DimensionMismatch, EmptyMask, EmptyTarget, SumMismatch

__all__ = [
    "Rle",
    "BBox",
    "rle_encode",
    "rle_decode",
    "mask_area",
    "mask_union",
    "mask_iou",
    "box_iou",
    "coverage",
    "connected_components",
    "bbox_of",
]


@dataclass(frozen=True)
class Rle:
    """Run-length encoding of a binary mask.

    Counts alternate starting with a zeros-run over the column-major pixel
    scan, so a mask whose first scanned pixel is foreground encodes with a
    leading 0. ``sum(counts) == height * width`` always.
    """

    height: int
    width: int
    counts: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box: ``x``/``y`` is the left/top edge, sizes positive.

    Coordinates are real-valued; pixel-derived boxes use integer values
    where column c spans [c, c+1).
    """

    x: float
    y: float
    w: float
    h: float

    @property
    def area(self) -> float:
        return self.w * self.h


def _check_mask(mask: np.ndarray) -> np.ndarray:
    mask = np.asarray(mask)
    if mask.ndim != 2 or mask.shape[0] < 1 or mask.shape[1] < 1:
        raise ValueError(f"mask must be a 2D array with positive dimensions, got shape {mask.shape}")
    return mask.astype(bool, copy=False)


def _check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimensionMismatch(f"mask shapes differ: {a.shape} vs {b.shape}")


def rle_encode(mask: np.ndarray) -> Rle:
    """Encode a binary mask, scanning pixels column by column.

    The inverse of :func:`rle_decode`; the round trip is bit-exact.
    """
    mask = _check_mask(mask)
    h, w = mask.shape
    flat = mask.flatten(order="F")
    # run boundaries: indices where the value changes
    change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate(([0], change, [flat.size]))
    counts = np.diff(bounds).tolist()
    if flat[0]:
        counts = [0] + counts
    return Rle(height=h, width=w, counts=tuple(counts))


def rle_decode(rle: Rle) -> np.ndarray:
    """Decode an :class:`Rle` back into a (height, width) bool array.

    Raises :class:`~mobilabel.errors.SumMismatch` when the counts do not
    sum to ``height * width``.
    """
    total = sum(rle.counts)
    if total != rle.height * rle.width:
        raise SumMismatch(
            f"RLE counts sum to {total}, expected {rle.height * rle.width} for {rle.height}x{rle.width}"
        )
    values = np.arange(len(rle.counts), dtype=np.int64) % 2 == 1
    flat = np.repeat(values, np.asarray(rle.counts, dtype=np.int64))
    return flat.reshape((rle.width, rle.height)).T


def mask_area(mask: np.ndarray) -> int:
    """Number of foreground pixels."""
    return int(np.count_nonzero(_check_mask(mask)))


def mask_union(masks, shape: tuple[int, int] | None = None) -> np.ndarray:
    """Union of a sequence of same-shaped masks.

    ``shape`` is required when the sequence may be empty.
    """
    masks = list(masks)
    if not masks:
        if shape is None:
            raise ValueError("shape is required for an empty mask sequence")
        return np.zeros(shape, dtype=bool)
    out = _check_mask(masks[0]).copy()
    for m in masks[1:]:
        m = _check_mask(m)
        _check_same_shape(out, m)
        out |= m
    return out


def mask_iou(a: np.ndarray, b: np.ndarray) -> float:
    """Intersection-over-union of two masks; 0.0 when both are empty."""
    a = _check_mask(a)
    b = _check_mask(b)
    _check_same_shape(a, b)
    inter = int(np.count_nonzero(a & b))
    union = int(np.count_nonzero(a)) + int(np.count_nonzero(b)) - inter
    if union == 0:
        return 0.0
    return inter / union


def box_iou(a: BBox, b: BBox) -> float:
    """Intersection-over-union of two axis-aligned boxes."""
    ix = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    iy = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    union = a.area + b.area - inter
    if union <= 0:
        return 0.0
    return inter / union


def coverage(ref_masks, targ: np.ndarray) -> float:
    """Fraction of ``targ`` covered by the union of ``ref_masks``.

    Raises :class:`~mobilabel.errors.EmptyTarget` when the target has no
    foreground. An empty reference set covers nothing (0.0).
    """
    targ = _check_mask(targ)
    targ_area = int(np.count_nonzero(targ))
    if targ_area == 0:
        raise EmptyTarget("coverage target mask is empty")
    covered = np.zeros_like(targ)
    for m in ref_masks:
        m = _check_mask(m)
        _check_same_shape(targ, m)
        covered |= m & targ
    return int(np.count_nonzero(covered)) / targ_area


_STRUCT_4 = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
_STRUCT_8 = np.ones((3, 3), dtype=bool)


def connected_components(mask: np.ndarray, connectivity: int = 8) -> list[np.ndarray]:
    """Split foreground into maximal connected regions.

    Regions are returned ordered by (min row, min col) of their pixels,
    which makes the output deterministic. An empty mask yields ``[]``.
    """
    mask = _check_mask(mask)
    if connectivity == 4:
        structure = _STRUCT_4
    elif connectivity == 8:
        structure = _STRUCT_8
    else:
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")
    labeled, n = ndimage.label(mask, structure=structure)
    comps = []
    for i in range(1, n + 1):
        comp = labeled == i
        rows, cols = np.nonzero(comp)
        comps.append((int(rows.min()), int(cols.min()), comp))
    comps.sort(key=lambda t: (t[0], t[1]))
    return [c for _, _, c in comps]


def bbox_of(mask: np.ndarray) -> BBox:
    """Tight bounding box of the foreground pixels.

    Raises :class:`~mobilabel.errors.EmptyMask` for an all-zero mask.
    """
    mask = _check_mask(mask)
    rows, cols = np.nonzero(mask)
    if rows.size == 0:
        raise EmptyMask("cannot compute the bounding box of an empty mask")
    y0, y1 = int(rows.min()), int(rows.max())
    x0, x1 = int(cols.min()), int(cols.max())
    return BBox(x=float(x0), y=float(y0), w=float(x1 - x0 + 1), h=float(y1 - y0 + 1))
