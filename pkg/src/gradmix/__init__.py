"""Rare-class nucleus synthesis for imbalanced instance-annotated pathology datasets."""

from .config import AugmentationConfig
from .dataset import (
    DatasetManifest,
    ManifestEntry,
    NucleusRecord,
    Sample,
    build_inventory,
    load_manifest,
    load_sample,
    synth_dataset,
    write_sample,
)
from .estimator import GradMix
from .mixer import PatchEdit, Skip, apply_edit, cutmix_pair, gradmix_pair
from .pipeline import ProvenanceRecord, augment_dataset, augment_sample, stats

__version__ = "0.1.0"

__all__ = [
    "AugmentationConfig",
    "DatasetManifest",
    "ManifestEntry",
    "NucleusRecord",
    "Sample",
    "GradMix",
    "PatchEdit",
    "ProvenanceRecord",
    "Skip",
    "apply_edit",
    "augment_dataset",
    "augment_sample",
    "build_inventory",
    "cutmix_pair",
    "gradmix_pair",
    "load_manifest",
    "load_sample",
    "stats",
    "synth_dataset",
    "write_sample",
]
