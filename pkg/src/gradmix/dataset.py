"""Samples, nucleus inventories and the portable on-disk format.

On disk a sample is three files: an 8-bit RGB PNG, a 16-bit grayscale PNG
holding the instance map, and a JSON object mapping decimal instance ids to
class ids.  A JSON manifest lists samples in a fixed order together with the
class taxonomy and the major/rare designation.
"""

from __future__ import annotations

import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

from .imageops import from_mask
from .validation import check_sample

__all__ = [
    "Sample",
    "NucleusRecord",
    "ManifestEntry",
    "DatasetManifest",
    "ManifestError",
    "SampleError",
    "PackingError",
    "load_manifest",
    "save_manifest",
    "load_sample",
    "write_sample",
    "build_inventory",
    "nucleus_record",
    "synth_dataset",
]

PNG_SETTINGS = {"compress_level": 6, "optimize": False}


class ManifestError(ValueError):
    pass


class SampleError(ValueError):
    pass


class PackingError(RuntimeError):
    def __init__(self, message, achieved):
        super().__init__(message)
        self.achieved = achieved


@dataclass(eq=False)
class Sample:
    """RGB image, instance map (0 = background) and instance -> class mapping."""

    image: np.ndarray
    instance_map: np.ndarray
    class_of: dict[int, int]
    sample_id: str = ""

    @property
    def shape(self) -> tuple[int, int]:
        return self.instance_map.shape

    def copy(self) -> "Sample":
        return Sample(self.image.copy(), self.instance_map.copy(), dict(self.class_of), self.sample_id)

    def equals(self, other: "Sample") -> bool:
        return (
            np.array_equal(self.image, other.image)
            and np.array_equal(self.instance_map, other.instance_map)
            and self.class_of == other.class_of
        )


@dataclass(frozen=True, eq=False)
class NucleusRecord:
    id: int
    class_id: int
    footprint: np.ndarray
    area: int
    centroid: tuple[float, float]
    bbox: tuple[int, int, int, int]

    def __repr__(self):
        return f"NucleusRecord(id={self.id}, class_id={self.class_id}, area={self.area}, centroid={self.centroid})"


@dataclass(frozen=True)
class ManifestEntry:
    id: str
    image: str
    instances: str
    classes: str
    split: str = "train"


@dataclass
class DatasetManifest:
    entries: list[ManifestEntry]
    taxonomy: dict[int, str]
    major_classes: frozenset[int]
    rare_classes: frozenset[int]
    root: Path = field(default_factory=Path)

    def resolve(self, relpath: str) -> Path:
        return self.root / relpath

    def to_dict(self) -> dict:
        entries = []
        for e in self.entries:
            d = {"id": e.id, "image": e.image, "instances": e.instances, "classes": e.classes}
            if e.split != "train":
                d["split"] = e.split
            entries.append(d)
        return {
            "entries": entries,
            "taxonomy": {str(k): v for k, v in sorted(self.taxonomy.items())},
            "major_classes": sorted(self.major_classes),
            "rare_classes": sorted(self.rare_classes),
        }


def _parse_manifest(doc, root: Path) -> DatasetManifest:
    if not isinstance(doc, dict):
        raise ManifestError("manifest must be a JSON object")
    for key in ("entries", "taxonomy", "major_classes", "rare_classes"):
        if key not in doc:
            raise ManifestError(f"manifest missing field '{key}'")
    try:
        taxonomy = {int(k): str(v) for k, v in doc["taxonomy"].items()}
        major = frozenset(int(c) for c in doc["major_classes"])
        rare = frozenset(int(c) for c in doc["rare_classes"])
    except (AttributeError, TypeError, ValueError) as exc:
        raise ManifestError(f"malformed manifest: {exc}") from None
    if not major or not rare:
        raise ManifestError("major_classes and rare_classes must be non-empty")
    if major & rare:
        raise ManifestError(f"class designation overlap: {sorted(major & rare)}")
    unknown = (major | rare) - set(taxonomy)
    if unknown:
        raise ManifestError(f"classes {sorted(unknown)} not in taxonomy")

    entries = []
    seen = set()
    for raw in doc["entries"]:
        try:
            entry = ManifestEntry(
                id=str(raw["id"]),
                image=str(raw["image"]),
                instances=str(raw["instances"]),
                classes=str(raw["classes"]),
                split=str(raw.get("split", "train")),
            )
        except (KeyError, TypeError) as exc:
            raise ManifestError(f"malformed manifest entry: {raw!r}") from exc
        if entry.id in seen:
            raise ManifestError(f"duplicate sample id '{entry.id}'")
        seen.add(entry.id)
        entries.append(entry)
    return DatasetManifest(entries, taxonomy, major, rare, root)


def load_manifest(path) -> DatasetManifest:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ManifestError(f"manifest not found: {path}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ManifestError(f"malformed manifest {path}: {exc}") from None
    return _parse_manifest(doc, path.parent)


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_manifest(manifest: DatasetManifest, path) -> None:
    text = json.dumps(manifest.to_dict(), indent=2) + "\n"
    _atomic_write(Path(path), text.encode("utf-8"))


def load_sample(entry: ManifestEntry, manifest: DatasetManifest | None = None) -> Sample:
    root = manifest.root if manifest is not None else Path()
    try:
        with Image.open(root / entry.image) as im:
            image = np.array(im.convert("RGB"), dtype=np.uint8)
        with Image.open(root / entry.instances) as im:
            if im.mode not in ("I;16", "I;16B", "I", "L"):
                raise SampleError(f"{entry.instances}: unsupported instance map mode {im.mode}")
            instance_map = np.array(im).astype(np.int32)
        doc = json.loads((root / entry.classes).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise SampleError(f"sample '{entry.id}': {exc}") from None
    try:
        class_of = {int(k): int(v) for k, v in doc.items()}
    except (AttributeError, ValueError) as exc:
        raise SampleError(f"sample '{entry.id}': malformed class map ({exc})") from None
    sample = Sample(image, instance_map, class_of, entry.id)
    taxonomy = manifest.taxonomy if manifest is not None else None
    try:
        check_sample(sample, taxonomy=taxonomy)
    except ValueError as exc:
        raise SampleError(f"sample '{entry.id}': {exc}") from None
    return sample


def _png_bytes(array: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(array).save(buf, format="PNG", **PNG_SETTINGS)
    return buf.getvalue()


def write_sample(sample: Sample, image_path, instances_path, classes_path) -> None:
    """Write the three files of a sample; each file is replaced atomically."""
    if sample.instance_map.size and sample.instance_map.max() > 0xFFFF:
        raise SampleError("instance ids above 65535 do not fit a 16-bit map")
    labels = np.ascontiguousarray(sample.instance_map.astype(np.uint16))
    classes = {str(k): int(v) for k, v in sorted(sample.class_of.items())}
    _atomic_write(Path(image_path), _png_bytes(np.ascontiguousarray(sample.image, dtype=np.uint8)))
    _atomic_write(Path(instances_path), _png_bytes(labels))
    _atomic_write(Path(classes_path), (json.dumps(classes, indent=1) + "\n").encode("utf-8"))


def nucleus_record(instance_id: int, class_id: int, footprint: np.ndarray) -> NucleusRecord:
    top, left = footprint.min(axis=0)
    bottom, right = footprint.max(axis=0)
    r, c = footprint.mean(axis=0, dtype=np.float64)
    return NucleusRecord(
        id=int(instance_id),
        class_id=int(class_id),
        footprint=footprint,
        area=len(footprint),
        centroid=(float(r), float(c)),
        bbox=(int(top), int(left), int(bottom), int(right)),
    )


def build_inventory(sample: Sample) -> list[NucleusRecord]:
    """One record per instance label, sorted by id."""
    labels = sample.instance_map
    records = []
    if not labels.size or labels.max() == 0:
        return records
    for index, window in enumerate(ndimage.find_objects(labels), start=1):
        if window is None:
            continue
        local = labels[window] == index
        footprint = from_mask(local, (window[0].start, window[1].start))
        records.append(nucleus_record(index, sample.class_of[index], footprint))
    return records


# ---------------------------------------------------------------------------
# synthetic fixtures

_CLASS_COLORS = [
    (70, 40, 120),
    (120, 60, 150),
    (40, 30, 90),
    (150, 90, 170),
    (95, 45, 95),
    (60, 70, 140),
]
_BACKGROUND = (228, 196, 214)


def _ellipse(center, a, b, theta):
    reach = int(math.ceil(max(a, b)))
    dr, dc = np.mgrid[-reach : reach + 1, -reach : reach + 1]
    cos, sin = math.cos(theta), math.sin(theta)
    u = (dr * cos + dc * sin) / a
    v = (-dr * sin + dc * cos) / b
    inside = u * u + v * v <= 1.0
    return np.stack([dr[inside] + center[0], dc[inside] + center[1]], axis=1).astype(np.int64)


def _synth_one(rng, height, width, class_mix, rare_classes, major_axes, rare_axes, gap, border, max_tries):
    wanted = [c for c, n in sorted(class_mix.items()) for _ in range(n)]
    order = rng.permutation(len(wanted))
    centers = np.empty((0, 2), dtype=np.float64)
    reaches = np.empty(0, dtype=np.float64)
    placed = []
    for idx in order:
        class_id = wanted[idx]
        lo, hi = rare_axes if class_id in rare_classes else major_axes
        a, b = rng.uniform(lo, hi, size=2)
        theta = rng.uniform(0.0, math.pi)
        reach = max(a, b)
        # never let an ellipse leave the frame, whatever the requested border
        margin = max(border, int(math.ceil(reach)) + 1)
        if height - margin <= margin or width - margin <= margin:
            raise PackingError(f"frame {height}x{width} too small for instance {len(placed) + 1}", achieved=len(placed))
        for _ in range(max_tries):
            r = int(rng.integers(margin, height - margin))
            c = int(rng.integers(margin, width - margin))
            if len(centers):
                dist = np.hypot(centers[:, 0] - r, centers[:, 1] - c)
                if (dist < reaches + reach + gap).any():
                    continue
            break
        else:
            raise PackingError(
                f"could not place instance {len(placed) + 1} of {len(wanted)} after {max_tries} tries",
                achieved=len(placed),
            )
        centers = np.vstack([centers, [r, c]])
        reaches = np.append(reaches, reach)
        placed.append((class_id, _ellipse((r, c), a, b, theta)))

    image = np.empty((height, width, 3), dtype=np.float64)
    image[:] = _BACKGROUND
    image += rng.normal(0.0, 8.0, size=image.shape)
    labels = np.zeros((height, width), dtype=np.int32)
    class_of = {}
    for instance_id, (class_id, pixels) in enumerate(placed, start=1):
        color = np.array(_CLASS_COLORS[(class_id - 1) % len(_CLASS_COLORS)], dtype=np.float64)
        rows, cols = pixels[:, 0], pixels[:, 1]
        image[rows, cols] = color + rng.normal(0.0, 12.0, size=(len(pixels), 3))
        labels[rows, cols] = instance_id
        class_of[instance_id] = class_id
    image = np.clip(np.rint(image), 0, 255).astype(np.uint8)
    return image, labels, class_of


def synth_dataset(
    out_dir,
    n_samples: int,
    class_mix: dict[int, int],
    rare_classes,
    seed: int = 0,
    height: int = 256,
    width: int = 256,
    taxonomy: dict[int, str] | None = None,
    major_axes=(6.0, 9.0),
    rare_axes=(3.0, 4.0),
    gap: float = 4.0,
    border: int = 12,
    max_tries: int = 2000,
):
    """Write a dataset of random non-overlapping ellipses; return (manifest, census).

    ``class_mix`` maps class id to the number of instances per image.  With the
    default geometry every rare nucleus is smaller than half of every major
    nucleus and fits inside any major footprint when centered on it, so every
    GradMix pair is geometrically feasible.  The census maps class id to total
    instance count and lists per-sample counts.
    """
    out_dir = Path(out_dir)
    rare_classes = frozenset(int(c) for c in rare_classes)
    class_mix = {int(k): int(v) for k, v in class_mix.items()}
    if taxonomy is None:
        taxonomy = {c: f"class{c}" for c in sorted(class_mix)}
    major_classes = frozenset(class_mix) - rare_classes
    if not major_classes or not rare_classes:
        raise ValueError("need at least one major and one rare class")
    if sum(class_mix.values()) == 0:
        raise ValueError("class mix places no instances")

    entries = []
    per_class = {c: 0 for c in sorted(taxonomy)}
    per_sample = {}
    for index in range(n_samples):
        sid = f"s{index:03d}"
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))
        image, labels, class_of = _synth_one(
            rng, height, width, class_mix, rare_classes, major_axes, rare_axes, gap, border, max_tries
        )
        sample = Sample(image, labels, class_of, sid)
        entry = ManifestEntry(sid, f"images/{sid}.png", f"instances/{sid}.png", f"classes/{sid}.json")
        write_sample(sample, out_dir / entry.image, out_dir / entry.instances, out_dir / entry.classes)
        entries.append(entry)
        counts = {c: 0 for c in sorted(taxonomy)}
        for class_id in class_of.values():
            counts[class_id] += 1
            per_class[class_id] += 1
        per_sample[sid] = counts

    manifest = DatasetManifest(entries, dict(taxonomy), major_classes, rare_classes, out_dir)
    save_manifest(manifest, out_dir / "manifest.json")
    census = {"per_class": per_class, "per_sample": per_sample}
    return manifest, census
