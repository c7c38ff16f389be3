"""End-to-end driver: blur, quantize, tile, classify, refine.

Both the CLI and the estimator front-end funnel through `run`, so their
outputs are identical for identical settings.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ParameterError
from .imaging import GrayImage, gaussian_blur, quantize
from .patcher import PatchSpec, plan_grid
from .segmenter import Grouping, RefineMode, SegmentationResult, refine, segment


@dataclass(frozen=True)
class PipelineConfig:
    """Validated knob set for one segmentation run.

    kernel_size 0 skips smoothing entirely (useful on clean synthetic
    input); workers 0 picks a worker count automatically.
    """

    kernel_size: int = 0
    bin_width: int = 40
    patch: PatchSpec = field(default_factory=lambda: PatchSpec(4, 4))
    threshold: int = 1
    grouping: Grouping = Grouping.MODULO_CONSTANT
    refine: RefineMode = RefineMode.NONE
    refine_k: int = 3
    workers: int = 0

    def __post_init__(self) -> None:
        if self.kernel_size < 0 or (self.kernel_size > 0 and self.kernel_size % 2 == 0):
            raise ParameterError(
                f"gaussian kernel size must be 0 (off) or odd, got {self.kernel_size}"
            )
        if not 1 <= self.bin_width <= 255:
            raise ParameterError(f"bin width {self.bin_width} outside [1, 255]")
        if self.threshold < 1:
            raise ParameterError(f"threshold must be >= 1, got {self.threshold}")
        if not 1 <= self.refine_k <= 4:
            raise ParameterError(f"refine neighbour count must be in [1, 4], got {self.refine_k}")
        if self.workers < 0:
            raise ParameterError(f"worker count must be >= 0, got {self.workers}")


def run(gray: GrayImage, cfg: PipelineConfig) -> SegmentationResult:
    """Run the full pipeline on a loaded grayscale image."""
    smoothed = gray if cfg.kernel_size == 0 else gaussian_blur(gray, cfg.kernel_size)
    quantized = quantize(smoothed, cfg.bin_width)
    grid = plan_grid(quantized.width, quantized.height, cfg.patch)
    result = segment(
        quantized,
        grid,
        cfg.threshold,
        grouping=cfg.grouping,
        workers=cfg.workers,
        extra_parameters={"kernel_size": cfg.kernel_size},
    )
    return refine(result, cfg.refine, cfg.refine_k)
