"""Dataset-level orchestration of GradMix / CutMix.

For every image a fraction of the major-class nuclei is drawn, each one is
paired with a rare-class nucleus (same image with probability
``intra_image_prob``, otherwise any other image) strictly smaller than
``size_ratio`` times its area, and the pair is mixed.  Each image gets its own
random stream derived from the run seed and its manifest position, so results
do not depend on scheduling.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .config import AugmentationConfig
from .dataset import (
    DatasetManifest,
    ManifestEntry,
    NucleusRecord,
    Sample,
    _atomic_write,
    build_inventory,
    load_sample,
    nucleus_record,
    save_manifest,
    write_sample,
)
from .imageops import from_mask, mean_color
from .mixer import Skip, apply_edit_inplace, cutmix_pair, gradmix_pair

__all__ = [
    "ProvenanceRecord",
    "DatasetContext",
    "CountTable",
    "rng_for",
    "select_majors",
    "select_rare",
    "rare_candidates",
    "target_mean_color",
    "color_delta",
    "augment_sample",
    "augment_dataset",
    "AugmentResult",
    "stats",
]

logger = logging.getLogger(__name__)


@dataclass
class ProvenanceRecord:
    target: str
    major_id: int
    source: str | None
    rare_id: int | None
    offset: list[int] | None
    color_delta: list[float] | None
    outcome: str
    norm_mode: str
    seed: int

    @property
    def applied(self) -> bool:
        return self.outcome == "applied"

    def to_json(self) -> str:
        return json.dumps(asdict(self), separators=(", ", ": "))


def rng_for(seed: int, index: int) -> np.random.Generator:
    """Independent stream for the sample at manifest position ``index``."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(index),)))


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def select_majors(inventory, fraction: float, rng, major_classes=None) -> list[NucleusRecord]:
    """Draw ``round_half_up(fraction * N)`` major records without replacement, ascending id."""
    pool = [r for r in inventory if major_classes is None or r.class_id in major_classes]
    k = _round_half_up(fraction * len(pool))
    if k == 0:
        return []
    chosen = rng.choice(len(pool), size=k, replace=False)
    return [pool[i] for i in sorted(chosen)]


class DatasetContext:
    """Original samples, their inventories, and an area-sorted bank of rare nuclei."""

    def __init__(self, samples, major_classes, rare_classes, inventories=None):
        self.samples = list(samples)
        self.major_classes = frozenset(major_classes)
        self.rare_classes = frozenset(rare_classes)
        if inventories is None:
            inventories = [build_inventory(s) for s in self.samples]
        self.inventories = inventories
        bank = [
            (rec.area, i, rec.id, rec)
            for i, inv in enumerate(inventories)
            for rec in inv
            if rec.class_id in self.rare_classes
        ]
        bank.sort(key=lambda t: t[:3])
        self._areas = np.array([t[0] for t in bank], dtype=np.int64)
        self._owner = np.array([t[1] for t in bank], dtype=np.int64)
        self._records = [t[3] for t in bank]
        self._index_of = {s.sample_id: i for i, s in enumerate(self.samples)}

    def index_of(self, sample_id: str):
        return self._index_of.get(sample_id)

    def with_extra(self, sample: Sample) -> tuple["DatasetContext", int]:
        ctx = DatasetContext(
            self.samples + [sample],
            self.major_classes,
            self.rare_classes,
            self.inventories + [build_inventory(sample)],
        )
        return ctx, len(self.samples)

    def pools(self, target_index: int, threshold: float):
        """Bank positions of rare nuclei with area < ``threshold``: (same image, other images)."""
        n = int(np.searchsorted(self._areas, threshold, side="left"))
        owners = self._owner[:n]
        positions = np.arange(n)
        same = owners == target_index
        return positions[same], positions[~same]

    def rare(self, position) -> tuple[int, NucleusRecord]:
        return int(self._owner[position]), self._records[position]


def rare_candidates(target_index: int, context: DatasetContext, major: NucleusRecord, cfg, rng):
    """Yield ``(source index, rare record)`` candidates following the sourcing policy.

    A coin picks the same-image pool with probability ``intra_image_prob``.  Up
    to ``1 + max_reselect`` uniform draws come from that pool, then as many
    from the other pool.  Empty pools are passed over.
    """
    intra, inter = context.pools(target_index, cfg.size_ratio * major.area)
    first_intra = rng.random() < cfg.intra_image_prob
    for pool in (intra, inter) if first_intra else (inter, intra):
        if len(pool) == 0:
            continue
        for _ in range(1 + cfg.max_reselect):
            yield context.rare(pool[rng.integers(len(pool))])


def select_rare(target_index: int, context: DatasetContext, major: NucleusRecord, cfg, rng):
    """First candidate of :func:`rare_candidates`, or ``None`` if both pools are empty."""
    return next(rare_candidates(target_index, context, major, cfg, rng), None)


def target_mean_color(target: Sample, phi, cfg):
    if cfg.color_adjust == "off":
        return None
    if cfg.color_mean_scope == "all-nuclei":
        region = from_mask(target.instance_map > 0)
    else:
        region = np.vstack([r.footprint for r in phi]) if phi else np.empty((0, 2), dtype=np.int64)
    return mean_color(target.image, region)


def color_delta(target: Sample, phi, source: Sample, rare: NucleusRecord, cfg, target_mean=None):
    """Per-channel shift moving the rare nucleus onto the target's mean nuclear colour."""
    if cfg.color_adjust == "off":
        return (0.0, 0.0, 0.0)
    if cfg.color_adjust == "inter_only" and source.sample_id == target.sample_id:
        return (0.0, 0.0, 0.0)
    if target_mean is None:
        target_mean = target_mean_color(target, phi, cfg)
    rare_mean = mean_color(source.image, rare.footprint)
    return tuple(float(a - b) for a, b in zip(target_mean, rare_mean))


def _current_record(sample: Sample, original: NucleusRecord):
    top, left, bottom, right = original.bbox
    local = sample.instance_map[top : bottom + 1, left : right + 1] == original.id
    if not local.any():
        return None
    return nucleus_record(original.id, original.class_id, from_mask(local, (top, left)))


def augment_sample(target: Sample, target_index, context: DatasetContext, cfg: AugmentationConfig, rng=None):
    """Augment one image; returns ``(new sample, provenance records)``.

    ``target_index`` is the position of ``target`` in ``context``; pass ``None``
    for an image outside the context (its own nuclei then form the
    same-image pool).
    """
    if target_index is None:
        context, target_index = context.with_extra(target)
    if rng is None:
        rng = rng_for(cfg.seed, target_index)
    inventory = context.inventories[target_index]
    phi = select_majors(inventory, cfg.major_fraction, rng, context.major_classes)
    working = target.copy()
    records = []
    if not phi:
        return working, records
    mu_target = target_mean_color(target, phi, cfg)
    pair = gradmix_pair if cfg.mode == "gradmix" else cutmix_pair

    for original in phi:
        rec = ProvenanceRecord(target.sample_id, original.id, None, None, None, None, "", cfg.norm_mode, cfg.seed)
        records.append(rec)
        major = _current_record(working, original)
        if major is None:
            rec.outcome = "skipped:major-consumed"
            continue
        outcome = "skipped:pool-empty"
        for source_index, rare in rare_candidates(target_index, context, major, cfg, rng):
            source = context.samples[source_index]
            delta = color_delta(target, phi, source, rare, cfg, mu_target)
            edit = pair(working, major, source, rare, cfg, delta)
            rec.source, rec.rare_id = source.sample_id, rare.id
            rec.color_delta = [float(d) for d in delta]
            if isinstance(edit, Skip):
                outcome = f"skipped:{edit.reason}"
                rec.offset = list(edit.offset) if edit.offset is not None else None
                continue
            apply_edit_inplace(working, edit)
            rec.offset = list(edit.offset)
            outcome = "applied"
            break
        rec.outcome = outcome
    return working, records


# ---------------------------------------------------------------------------
# count tables


@dataclass
class CountTable:
    taxonomy: dict[int, str]
    rows: dict[str, dict[int, int]]

    def total(self, row: str) -> int:
        return sum(self.rows[row].values())

    def to_dict(self) -> dict:
        return {
            "classes": [{"id": c, "name": n} for c, n in sorted(self.taxonomy.items())],
            "rows": {
                name: {**{str(c): counts.get(c, 0) for c in sorted(self.taxonomy)}, "total": self.total(name)}
                for name, counts in self.rows.items()
            },
        }

    def format(self) -> str:
        classes = sorted(self.taxonomy)
        header = ["split"] + [self.taxonomy[c] for c in classes] + ["total"]
        body = [
            [name] + [str(counts.get(c, 0)) for c in classes] + [str(self.total(name))]
            for name, counts in self.rows.items()
        ]
        widths = [max(len(row[i]) for row in [header] + body) for i in range(len(header))]
        lines = []
        for row in [header] + body:
            cells = [row[0].ljust(widths[0])] + [cell.rjust(w) for cell, w in zip(row[1:], widths[1:])]
            lines.append("  ".join(cells))
        return "\n".join(lines) + "\n"


def _class_counts(class_of, taxonomy) -> dict[int, int]:
    counts = {c: 0 for c in sorted(taxonomy)}
    for class_id in class_of.values():
        counts[class_id] = counts.get(class_id, 0) + 1
    return counts


def _read_class_map(manifest: DatasetManifest, entry: ManifestEntry) -> dict[int, int]:
    doc = json.loads(manifest.resolve(entry.classes).read_text(encoding="utf-8"))
    return {int(k): int(v) for k, v in doc.items()}


def stats(manifest: DatasetManifest) -> CountTable:
    """Per-class instance counts per split, plus a combined row when there are several splits."""
    rows: dict[str, dict[int, int]] = {}
    for entry in manifest.entries:
        counts = _class_counts(_read_class_map(manifest, entry), manifest.taxonomy)
        row = rows.setdefault(entry.split, {c: 0 for c in sorted(manifest.taxonomy)})
        for c, n in counts.items():
            row[c] = row.get(c, 0) + n
    if not rows:
        rows["all"] = {c: 0 for c in sorted(manifest.taxonomy)}
    elif len(rows) > 1:
        combined = {c: 0 for c in sorted(manifest.taxonomy)}
        for counts in list(rows.values()):
            for c, n in counts.items():
                combined[c] = combined.get(c, 0) + n
        rows["combined"] = combined
    return CountTable(dict(manifest.taxonomy), rows)


# ---------------------------------------------------------------------------
# dataset runs


@dataclass
class AugmentResult:
    table: CountTable
    provenance: list[ProvenanceRecord]
    manifest: DatasetManifest

    @property
    def applied(self) -> int:
        return sum(r.applied for r in self.provenance)


def augment_dataset(manifest: DatasetManifest, cfg: AugmentationConfig, out_dir, workers: int = 1) -> AugmentResult:
    """Augment every sample of ``manifest`` into ``out_dir``.

    Writes copies of the originals, one augmented sample per original, a
    merged ``manifest.json``, ``provenance.jsonl`` and ``stats.json``.
    """
    out_dir = Path(out_dir)
    samples = [load_sample(e, manifest) for e in manifest.entries]
    context = DatasetContext(samples, manifest.major_classes, manifest.rare_classes)
    suffix = cfg.mode

    def run(index):
        entry = manifest.entries[index]
        sample = samples[index]
        augmented, records = augment_sample(sample, index, context, cfg, rng_for(cfg.seed, index))
        original = ManifestEntry(
            entry.id, f"images/{entry.id}.png", f"instances/{entry.id}.png", f"classes/{entry.id}.json", entry.split
        )
        for src, dst in ((entry.image, original.image), (entry.instances, original.instances), (entry.classes, original.classes)):
            _atomic_write(out_dir / dst, manifest.resolve(src).read_bytes())
        aug_id = f"{entry.id}_{suffix}"
        new = ManifestEntry(
            aug_id, f"images/{aug_id}.png", f"instances/{aug_id}.png", f"classes/{aug_id}.json", "augmented"
        )
        write_sample(augmented, out_dir / new.image, out_dir / new.instances, out_dir / new.classes)
        applied = sum(r.applied for r in records)
        logger.info("%s: %d/%d majors replaced", entry.id, applied, len(records))
        return original, new, records, sample.class_of, augmented.class_of

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, range(len(samples))))
    else:
        results = [run(i) for i in range(len(samples))]

    taxonomy = dict(manifest.taxonomy)
    rows = {name: {c: 0 for c in sorted(taxonomy)} for name in ("original", "augmented", "combined")}
    provenance = []
    originals, augmented_entries = [], []
    for original, new, records, class_before, class_after in results:
        originals.append(original)
        augmented_entries.append(new)
        provenance.extend(records)
        for name, class_of in (("original", class_before), ("augmented", class_after)):
            for c, n in _class_counts(class_of, taxonomy).items():
                rows[name][c] = rows[name].get(c, 0) + n
                rows["combined"][c] = rows["combined"].get(c, 0) + n
    table = CountTable(taxonomy, rows)

    merged = DatasetManifest(
        originals + augmented_entries, taxonomy, manifest.major_classes, manifest.rare_classes, out_dir
    )
    log = "".join(r.to_json() + "\n" for r in provenance)
    _atomic_write(out_dir / "provenance.jsonl", log.encode("utf-8"))
    report = dict(table.to_dict(), applied=sum(r.applied for r in provenance), attempted=len(provenance))
    _atomic_write(out_dir / "stats.json", (json.dumps(report, indent=2) + "\n").encode("utf-8"))
    save_manifest(merged, out_dir / "manifest.json")
    return AugmentResult(table, provenance, merged)

