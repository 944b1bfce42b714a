import numpy as np
import pytest

from gradmix.dataset import Sample, build_inventory, nucleus_record
from gradmix.imageops import as_pixel_set

ACCEPTANCE = {}


def square(top, left, size):
    return as_pixel_set([(r, c) for r in range(top, top + size) for c in range(left, left + size)])


PLUS = as_pixel_set([(4, 4), (3, 4), (5, 4), (4, 3), (4, 5)])


@pytest.fixture
def fix_a():
    """9x9 frame, 5x5 major at rows/cols 2-6, plus-shaped rare already on the major centroid."""
    major = nucleus_record(1, 1, square(2, 2, 5))
    return {"frame": (9, 9), "major": major, "rare": PLUS}


def make_sample(shape, instances, sample_id="t", seed=0):
    """Sample with a noisy background; ``instances`` maps id -> (class, pixels, color)."""
    rng = np.random.default_rng(seed)
    image = rng.integers(150, 230, size=shape + (3,), dtype=np.uint8)
    labels = np.zeros(shape, dtype=np.int32)
    class_of = {}
    for iid, (cls, pixels, color) in instances.items():
        noise = rng.integers(-10, 11, size=(len(pixels), 3))
        image[pixels[:, 0], pixels[:, 1]] = np.clip(np.array(color) + noise, 0, 255)
        labels[pixels[:, 0], pixels[:, 1]] = iid
        class_of[iid] = cls
    return Sample(image, labels, class_of, sample_id)


@pytest.fixture
def fix_a_samples():
    """Target with the FIX-A major plus a source holding a plus-shaped rare nucleus."""
    target = make_sample((9, 9), {1: (1, square(2, 2, 5), (80, 40, 120))}, "target", seed=1)
    source = make_sample((9, 9), {1: (3, PLUS, (40, 30, 90))}, "source", seed=2)
    return target, build_inventory(target)[0], source, build_inventory(source)[0]


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")
