from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from .validation import check_count, check_probability

MODES = ("gradmix", "cutmix")
NORM_MODES = ("max", "sum")
COLOR_ADJUST = ("all", "inter_only", "off")
COLOR_MEAN_SCOPES = ("phi", "all-nuclei")


@dataclass(frozen=True)
class AugmentationConfig:
    """Every tunable of an augmentation run.

    Defaults: 80% of major nuclei replaced, 60% same-image rare sourcing,
    rare area strictly below half the major area, one 3x3 dilation.
    """

    mode: str = "gradmix"
    major_fraction: float = 0.8
    intra_image_prob: float = 0.6
    size_ratio: float = 0.5
    dilation_iterations: int = 1
    inpaint_radius: int = 5
    norm_mode: str = "max"
    protect_neighbors: bool = True
    color_adjust: str = "all"
    color_mean_scope: str = "phi"
    max_reselect: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.norm_mode not in NORM_MODES:
            raise ValueError(f"norm_mode must be one of {NORM_MODES}, got {self.norm_mode!r}")
        if self.color_adjust not in COLOR_ADJUST:
            raise ValueError(f"color_adjust must be one of {COLOR_ADJUST}, got {self.color_adjust!r}")
        if self.color_mean_scope not in COLOR_MEAN_SCOPES:
            raise ValueError(f"color_mean_scope must be one of {COLOR_MEAN_SCOPES}, got {self.color_mean_scope!r}")
        check_probability(self.major_fraction, "major_fraction")
        check_probability(self.intra_image_prob, "intra_image_prob")
        if not self.size_ratio > 0:
            raise ValueError("size_ratio must be positive")
        check_count(self.dilation_iterations, "dilation_iterations")
        check_count(self.inpaint_radius, "inpaint_radius", minimum=1)
        check_count(self.max_reselect, "max_reselect")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")

    def replace(self, **changes) -> "AugmentationConfig":
        return dataclasses.replace(self, **changes)

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in dataclasses.fields(cls)]
