"""GradMix and CutMix for a single (major, rare) pair.

A GradMix edit replaces a major-class nucleus of the target image by a
rare-class nucleus taken from a source image.  Around the target centroid the
working patch is split into three disjoint regions:

``outside``  pixels outside the dilated major footprint (mask 1),
``inside``   the translated rare footprint (mask 0),
``ring``     the rest of the dilated major footprint, graded by distance to
             the rare footprint.

The output is ``mask * background + (1 - mask) * source`` where the background
is the target patch with the major nucleus inpainted away and the source is
the rare nucleus with its surroundings, shifted onto the major centroid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import AugmentationConfig
from .dataset import NucleusRecord, Sample
from .imageops import (
    centroid_offset,
    dilate,
    from_mask,
    min_distance_field,
    round_half_away,
    to_mask,
    translate_footprint,
)
from .inpaint import inpaint

__all__ = [
    "RegionPartition",
    "MixingMask",
    "PatchEdit",
    "Skip",
    "partition_regions",
    "build_mixing_mask",
    "composite",
    "gradmix_pair",
    "cutmix_pair",
    "apply_edit",
]

_EMPTY = np.empty((0, 2), dtype=np.int64)


@dataclass
class RegionPartition:
    """Boolean masks over ``patch`` (inclusive ``top, left, bottom, right``)."""

    patch: tuple[int, int, int, int]
    outside: np.ndarray
    inside: np.ndarray
    ring: np.ndarray

    @property
    def origin(self) -> tuple[int, int]:
        return self.patch[0], self.patch[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.outside.shape

    def pixels(self, region: str) -> np.ndarray:
        """Frame coordinates of ``'outside'``, ``'inside'`` or ``'ring'``."""
        return from_mask(getattr(self, region), self.origin)

    def label_map(self) -> np.ndarray:
        """0 = outside, 1 = ring, 2 = inside."""
        out = np.zeros(self.shape, dtype=np.uint8)
        out[self.ring] = 1
        out[self.inside] = 2
        return out


@dataclass
class MixingMask:
    values: np.ndarray
    norm_mode: str
    distance: np.ndarray


@dataclass
class PatchEdit:
    patch: tuple[int, int, int, int]
    pixels: np.ndarray
    removed_id: int
    removed_footprint: np.ndarray
    inserted_id: int
    inserted_class: int
    inserted_footprint: np.ndarray
    protected: np.ndarray = field(default_factory=lambda: _EMPTY)
    cleared: np.ndarray = field(default_factory=lambda: _EMPTY)
    offset: tuple[int, int] = (0, 0)
    partition: RegionPartition | None = field(default=None, repr=False)
    mask: MixingMask | None = field(default=None, repr=False)
    background: np.ndarray | None = field(default=None, repr=False)


@dataclass(frozen=True)
class Skip:
    reason: str
    offset: tuple[int, int] | None = None

    def __bool__(self):
        return False


def _box_slices(box):
    return slice(box[0], box[2] + 1), slice(box[1], box[3] + 1)


def partition_regions(major, rare_translated: np.ndarray, iterations: int, frame) -> RegionPartition:
    footprint = major.footprint if isinstance(major, NucleusRecord) else np.asarray(major)
    if len(footprint) == 0 or len(rare_translated) == 0:
        raise ValueError("empty major or rare footprint")
    dilated = dilate(footprint, iterations, frame)
    both = np.vstack([dilated, rare_translated])
    top, left = both.min(axis=0)
    bottom, right = both.max(axis=0)
    top, left = max(int(top), 0), max(int(left), 0)
    bottom, right = min(int(bottom), frame[0] - 1), min(int(right), frame[1] - 1)
    shape = (bottom - top + 1, right - left + 1)
    dil_mask = to_mask(dilated, shape, (top, left))
    inside = to_mask(rare_translated, shape, (top, left))
    ring = dil_mask & ~inside
    outside = ~dil_mask & ~inside
    return RegionPartition((top, left, bottom, right), outside, inside, ring)


def build_mixing_mask(partition: RegionPartition, norm_mode: str = "max") -> MixingMask:
    if not partition.inside.any():
        raise ValueError("empty rare region")
    if norm_mode not in ("max", "sum"):
        raise ValueError(f"unknown norm mode {norm_mode!r}")
    distance = min_distance_field(partition.shape, from_mask(partition.inside))
    values = np.ones(partition.shape)
    values[partition.inside] = 0.0
    if partition.ring.any():
        d = distance[partition.ring]
        denom = d.max() if norm_mode == "max" else d.sum()
        values[partition.ring] = d / denom
    np.clip(values, 0.0, 1.0, out=values)
    return MixingMask(values, norm_mode, distance)


def composite(background: np.ndarray, source: np.ndarray, mask) -> np.ndarray:
    """``round(mask * background + (1 - mask) * source)`` per channel, clamped to uint8."""
    values = mask.values if isinstance(mask, MixingMask) else np.asarray(mask, dtype=np.float64)
    if background.shape != source.shape or background.shape[:2] != values.shape:
        raise ValueError(f"dimension mismatch: {background.shape}, {source.shape}, mask {values.shape}")
    m = values[..., None]
    mixed = m * background.astype(np.float64) + (1.0 - m) * source.astype(np.float64)
    # exact endpoints regardless of float error
    mixed = np.where(m == 1.0, background, np.where(m == 0.0, source, mixed))
    return np.clip(round_half_away(mixed), 0, 255).astype(np.uint8)


def _next_id(sample: Sample) -> int:
    return max(sample.class_of, default=0) + 1


def _shifted_source(source: Sample, rare: NucleusRecord, box, offset, delta, fill):
    """Source pixels that land on ``box`` after shifting by ``offset``.

    Rare footprint pixels get the colour shift.  Pixels with no source
    counterpart keep ``fill``.
    """
    h, w = box[2] - box[0] + 1, box[3] - box[1] + 1
    out = fill.copy()
    sh, sw = source.shape
    s_top, s_left = box[0] - offset[0], box[1] - offset[1]
    r0, c0 = max(s_top, 0), max(s_left, 0)
    r1, c1 = min(s_top + h, sh), min(s_left + w, sw)
    if r0 < r1 and c0 < c1:
        out[r0 - s_top : r1 - s_top, c0 - s_left : c1 - s_left] = source.image[r0:r1, c0:c1]
    local = rare.footprint - np.array([s_top, s_left])
    vals = out[local[:, 0], local[:, 1]].astype(np.float64) + np.asarray(delta, dtype=np.float64)
    out[local[:, 0], local[:, 1]] = np.clip(round_half_away(vals), 0, 255).astype(np.uint8)
    return out


def _source_covers(pixels, offset, frame) -> bool:
    back = pixels - np.array(offset)
    return bool((back >= 0).all() and (back[:, 0] < frame[0]).all() and (back[:, 1] < frame[1]).all())


def gradmix_pair(
    target: Sample,
    major: NucleusRecord,
    source: Sample,
    rare: NucleusRecord,
    cfg: AugmentationConfig,
    delta=(0.0, 0.0, 0.0),
):
    """Build the edit replacing ``major`` in ``target`` by ``rare`` from ``source``.

    Returns a :class:`PatchEdit`, or a :class:`Skip` when the pair is
    geometrically infeasible.
    """
    frame = target.shape
    offset = centroid_offset(rare.centroid, major.centroid)
    gamma = translate_footprint(rare.footprint, offset[0], offset[1], frame)
    if gamma is None:
        return Skip("out-of-frame", offset)
    labels = target.instance_map
    if cfg.protect_neighbors:
        hit = labels[gamma[:, 0], gamma[:, 1]]
        if ((hit != 0) & (hit != major.id)).any():
            return Skip("neighbor-overlap", offset)

    partition = partition_regions(major, gamma, cfg.dilation_iterations, frame)
    if not _source_covers(from_mask(~partition.outside, partition.origin), offset, source.shape):
        return Skip("source-out-of-frame", offset)
    mask = build_mixing_mask(partition, cfg.norm_mode)

    box = partition.patch
    pad = cfg.inpaint_radius + 1
    wtop, wleft = max(box[0] - pad, 0), max(box[1] - pad, 0)
    wbottom, wright = min(box[2] + pad, frame[0] - 1), min(box[3] + pad, frame[1] - 1)
    window = target.image[wtop : wbottom + 1, wleft : wright + 1]
    try:
        filled = inpaint(window, major.footprint - np.array([wtop, wleft]), cfg.inpaint_radius)
    except ValueError:
        return Skip("inpaint-infeasible", offset)
    ys, xs = slice(box[0] - wtop, box[2] - wtop + 1), slice(box[1] - wleft, box[3] - wleft + 1)
    background = filled[ys, xs]

    src = _shifted_source(source, rare, box, offset, delta, background)
    pixels = composite(background, src, mask)

    protected = _EMPTY
    if cfg.protect_neighbors:
        local_labels = labels[_box_slices(box)]
        keep = (local_labels != 0) & (local_labels != major.id)
        if keep.any():
            pixels[keep] = target.image[_box_slices(box)][keep]
            protected = from_mask(keep, partition.origin)

    return PatchEdit(
        patch=box,
        pixels=pixels,
        removed_id=major.id,
        removed_footprint=major.footprint,
        inserted_id=_next_id(target),
        inserted_class=rare.class_id,
        inserted_footprint=gamma,
        protected=protected,
        offset=offset,
        partition=partition,
        mask=mask,
        background=background,
    )


def cutmix_pair(
    target: Sample,
    major: NucleusRecord,
    source: Sample,
    rare: NucleusRecord,
    cfg: AugmentationConfig,
    delta=(0.0, 0.0, 0.0),
):
    """Paste the rectangle enclosing ``rare`` over the major centroid, wholesale."""
    frame = target.shape
    offset = centroid_offset(rare.centroid, major.centroid)
    gamma = translate_footprint(rare.footprint, offset[0], offset[1], frame)
    top, left, bottom, right = rare.bbox
    box = (top + offset[0], left + offset[1], bottom + offset[0], right + offset[1])
    if gamma is None or box[0] < 0 or box[1] < 0 or box[2] >= frame[0] or box[3] >= frame[1]:
        return Skip("out-of-frame", offset)
    fill = target.image[_box_slices(box)]
    pixels = _shifted_source(source, rare, box, offset, delta, fill)
    rows, cols = np.mgrid[box[0] : box[2] + 1, box[1] : box[3] + 1]
    region = np.stack([rows.ravel(), cols.ravel()], axis=1).astype(np.int64)
    return PatchEdit(
        patch=box,
        pixels=pixels,
        removed_id=major.id,
        removed_footprint=major.footprint,
        inserted_id=_next_id(target),
        inserted_class=rare.class_id,
        inserted_footprint=gamma,
        cleared=region,
        offset=offset,
    )


def apply_edit_inplace(sample: Sample, edit: PatchEdit) -> Sample:
    if edit.inserted_id in sample.class_of:
        raise ValueError(f"id collision: instance {edit.inserted_id} already exists")
    labels = sample.instance_map
    ys, xs = _box_slices(edit.patch)
    sample.image[ys, xs] = edit.pixels

    touched = {edit.removed_id}
    fp = edit.removed_footprint
    hit = labels[fp[:, 0], fp[:, 1]] == edit.removed_id
    labels[fp[hit, 0], fp[hit, 1]] = 0
    if len(edit.cleared):
        rows, cols = edit.cleared[:, 0], edit.cleared[:, 1]
        touched.update(int(v) for v in np.unique(labels[rows, cols]))
        labels[rows, cols] = 0
    ins = edit.inserted_footprint
    touched.update(int(v) for v in np.unique(labels[ins[:, 0], ins[:, 1]]))
    labels[ins[:, 0], ins[:, 1]] = edit.inserted_id

    sample.class_of[edit.inserted_id] = edit.inserted_class
    touched.discard(0)
    for label in touched:
        if label in sample.class_of and not (labels == label).any():
            del sample.class_of[label]
    return sample


def apply_edit(sample: Sample, edit: PatchEdit) -> Sample:
    """Return a new sample with ``edit`` applied; ``sample`` is left untouched."""
    return apply_edit_inplace(sample.copy(), edit)
