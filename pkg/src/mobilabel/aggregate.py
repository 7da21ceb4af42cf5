"""Merging large-detector and small-detector mask proposals.

The large branch tends to propose whole objects and groups of small
objects; the small branch proposes small objects and parts of large ones.
:func:`mask_agg` resolves the two accordingly: a large mask sufficiently
covered by several small masks is treated as a group and replaced by
them, while a large mask overlapping a single well-matched small mask
keeps whichever scores higher. Plain NMS is provided as the baseline.

Aggregation selects among input instances; it never edits a mask.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch
from .initlabel import InstanceLabel, LabelSet
from .maskcore import rle_decode

__all__ = [
    "AggParams",
    "remove_smaller_overlapping",
    "remove_larger_overlapping",
    "mask_agg",
    "nms",
]


@dataclass(frozen=True)
class AggParams:
    """Thresholds for :func:`mask_agg`; defaults are the working values."""

    match_thrd: float = 0.5
    filt_frac: float = 0.75
    cover_frac: float = 0.5

    def __post_init__(self):
        for name in ("match_thrd", "filt_frac", "cover_frac"):
            v = getattr(self, name)
            if not (0 < v < 1):
                raise ValueError(f"{name} must lie in (0, 1), got {v}")


class _Prepared:
    """Instance with its decoded mask, tight pixel bounds, and area."""

    __slots__ = ("inst", "mask", "area", "r0", "r1", "c0", "c1", "source")

    def __init__(self, inst: InstanceLabel, source: int):
        self.inst = inst
        self.source = source
        self.mask = rle_decode(inst.mask)
        rows, cols = np.nonzero(self.mask)
        self.area = rows.size
        if self.area:
            self.r0, self.r1 = int(rows.min()), int(rows.max())
            self.c0, self.c1 = int(cols.min()), int(cols.max())

    def intersection(self, other: "_Prepared") -> int:
        r0 = max(self.r0, other.r0)
        r1 = min(self.r1, other.r1)
        c0 = max(self.c0, other.c0)
        c1 = min(self.c1, other.c1)
        if r0 > r1 or c0 > c1:
            return 0
        window = self.mask[r0: r1 + 1, c0: c1 + 1] & other.mask[r0: r1 + 1, c0: c1 + 1]
        return int(np.count_nonzero(window))


def _prepare(labels: LabelSet, source: int) -> list[_Prepared]:
    # empty masks carry no evidence and would poison coverage fractions
    return [p for p in (_Prepared(i, source) for i in labels.instances) if p.area]


def _coverage(refs: list[_Prepared], targ: _Prepared) -> float:
    """Fraction of targ covered by the union of refs."""
    hits = [p for p in refs if p.intersection(targ) > 0]
    if not hits:
        return 0.0
    if len(hits) == 1:
        return hits[0].intersection(targ) / targ.area
    union = np.zeros_like(targ.mask)
    for p in hits:
        union |= p.mask
    return int(np.count_nonzero(union & targ.mask)) / targ.area


def _iou(a: _Prepared, b: _Prepared) -> float:
    inter = a.intersection(b)
    union = a.area + b.area - inter
    return inter / union if union else 0.0


def _canonical(prepared: list[_Prepared]) -> list[_Prepared]:
    return sorted(prepared, key=lambda p: (-p.inst.score, p.inst.instance_id, p.source))


def _emit(frame: LabelSet, kept: list[_Prepared], reassign: bool) -> LabelSet:
    instances = []
    for n, p in enumerate(kept):
        if reassign:
            instances.append(InstanceLabel(mask=p.inst.mask, box=p.inst.box, score=p.inst.score,
                                           instance_id=n, attributes=p.inst.attributes))
        else:
            instances.append(p.inst)
    return LabelSet(frame.frame_id, frame.height, frame.width, instances)


def _filter_smaller(prepared: list[_Prepared], filt_frac: float) -> list[_Prepared]:
    """Drop instances mostly inside a strictly larger single instance."""
    return [a for a in prepared if not any(
        b.area > a.area and b.intersection(a) / a.area > filt_frac
        for b in prepared if b is not a)]


def _filter_larger(prepared: list[_Prepared], filt_frac: float) -> list[_Prepared]:
    """Drop instances that act as containers of a strictly smaller one."""
    return [a for a in prepared if not any(
        b.area < a.area and a.intersection(b) / b.area > filt_frac
        for b in prepared if b is not a)]


def remove_smaller_overlapping(ml: LabelSet, filt_frac: float) -> LabelSet:
    """Drop any instance covered beyond filt_frac by one strictly larger
    instance; survivors keep their masks, scores and ids."""
    return _emit(ml, _filter_smaller(_prepare(ml, 0), filt_frac), reassign=False)


def remove_larger_overlapping(ms: LabelSet, filt_frac: float) -> LabelSet:
    """Drop any instance that alone covers a strictly smaller instance
    beyond filt_frac; survivors are unchanged."""
    return _emit(ms, _filter_larger(_prepare(ms, 1), filt_frac), reassign=False)


def mask_agg(ml: LabelSet, ms: LabelSet, p: AggParams) -> LabelSet:
    """Aggregate large-branch and small-branch proposals.

    After pre-filtering both sets, each large mask is resolved against
    the small masks overlapping it: none -> deferred to the final union;
    exactly one with IoU above match_thrd -> the higher-scoring of the
    two; a subset covering the large mask beyond cover_frac -> the
    subset (group of objects); otherwise the large mask itself (the
    small ones are parts). Finally every mask of either set with zero
    overlap against the entire other set is added. Output ids are
    reassigned in (score, id) order; scores are untouched.
    """
    if (ml.height, ml.width) != (ms.height, ms.width):
        raise DimensionMismatch(
            f"label sets differ in frame size: {ml.height}x{ml.width} vs {ms.height}x{ms.width}"
        )
    large = _filter_smaller(_canonical(_prepare(ml, 0)), p.filt_frac)
    small = _filter_larger(_canonical(_prepare(ms, 1)), p.filt_frac)

    agg: list[_Prepared] = []
    chosen = set()

    def add(q: _Prepared) -> None:
        if id(q) not in chosen:
            chosen.add(id(q))
            agg.append(q)

    for m in large:
        overlap = [s for s in small if s.intersection(m) > 0]
        if not overlap:
            continue  # picked up below iff nothing in MS ever touches it
        if len(overlap) == 1 and _iou(overlap[0], m) > p.match_thrd:
            s = overlap[0]
            add(s if s.inst.score > m.inst.score else m)
        elif _coverage(overlap, m) > p.cover_frac:
            for s in overlap:
                add(s)
        else:
            add(m)

    for m in large:
        if _coverage(small, m) == 0.0:
            add(m)
    for s in small:
        if _coverage(large, s) == 0.0:
            add(s)

    return _emit(ml, _canonical(agg), reassign=True)


def nms(proposals: LabelSet, iou_thrd: float) -> LabelSet:
    """Greedy score-descending suppression at the given mask-IoU level.

    Ties in score fall to the lower instance id. Survivors are returned
    highest score first, otherwise unchanged.
    """
    ordered = _canonical(_prepare(proposals, 0))
    kept: list[_Prepared] = []
    for cand in ordered:
        if all(_iou(cand, k) <= iou_thrd for k in kept):
            kept.append(cand)
    return _emit(proposals, kept, reassign=False)
