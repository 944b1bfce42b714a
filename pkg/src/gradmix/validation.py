"""Input validation helpers in the spirit of ``sklearn.utils.validation``."""

from __future__ import annotations

import numpy as np

__all__ = ["check_image", "check_instance_map", "check_sample", "check_probability", "check_count"]


def check_image(image) -> np.ndarray:
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError(f"expected an H x W x 3 RGB image, got shape {image.shape}")
    if image.dtype != np.uint8:
        raise ValueError(f"expected uint8 image, got {image.dtype}")
    return image


def check_instance_map(instance_map) -> np.ndarray:
    instance_map = np.asarray(instance_map)
    if instance_map.ndim != 2:
        raise ValueError(f"expected a 2-D instance map, got shape {instance_map.shape}")
    if not np.issubdtype(instance_map.dtype, np.integer):
        raise ValueError(f"instance map must be integer, got {instance_map.dtype}")
    if instance_map.size and instance_map.min() < 0:
        raise ValueError("instance map has negative labels")
    return instance_map


def check_sample(sample, taxonomy=None):
    """Raise ``ValueError`` unless ``sample`` satisfies the Sample invariants."""
    check_image(sample.image)
    check_instance_map(sample.instance_map)
    if sample.image.shape[:2] != sample.instance_map.shape:
        raise ValueError(
            f"dimension mismatch: image {sample.image.shape[:2]} vs instance map {sample.instance_map.shape}"
        )
    present = set(int(v) for v in np.unique(sample.instance_map)) - {0}
    mapped = set(sample.class_of)
    for label in sorted(present - mapped):
        raise ValueError(f"unlabeled instance {label}")
    for label in sorted(mapped - present):
        raise ValueError(f"class map entry for absent instance {label}")
    if taxonomy is not None:
        for label, class_id in sorted(sample.class_of.items()):
            if class_id not in taxonomy:
                raise ValueError(f"instance {label} has class {class_id} not in taxonomy")
    return sample


def check_probability(value, name):
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value}")
    return value


def check_count(value, name, minimum=0):
    if int(value) != value or value < minimum:
        raise ValueError(f"{name} must be an integer >= {minimum}, got {value}")
    return int(value)
