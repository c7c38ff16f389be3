"""Scikit-learn style front end for the segmentation pipeline.

The algorithm learns nothing from data, so `fit` only validates the
parameters and the input contract, like sklearn's stateless transformers.
`transform` exposes the per-patch effective-degree grid (threshold-free
contrast features) and `predict` the binary edge/blob grid, so the
segmenter drops into pipelines, grid searches, and `clone` without
adapters.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .errors import ParameterError
from .imaging import GrayImage, rgb_to_gray
from .patcher import PatchSpec
from .pipeline import PipelineConfig, run
from .segmenter import Grouping, RefineMode, SegmentationResult


def as_gray_image(X) -> GrayImage:
    """Coerce an array-like into a GrayImage.

    Accepts (H, W) integer grayscale or (H, W, 3) integer RGB with values
    in [0, 255].  Floating point input is rejected: the pipeline is exact.
    """
    arr = np.asarray(X)
    if arr.ndim == 3 and arr.shape[2] == 3:
        if not np.issubdtype(arr.dtype, np.integer):
            raise ParameterError("RGB input must have an integer dtype")
        if arr.size == 0:
            raise ParameterError("input image is empty")
        if arr.min() < 0 or arr.max() > 255:
            raise ParameterError("RGB values must lie in [0, 255]")
        return GrayImage(rgb_to_gray(arr))
    if arr.ndim != 2:
        raise ParameterError(f"expected a 2-D grayscale or 3-D RGB array, got shape {arr.shape}")
    if not np.issubdtype(arr.dtype, np.integer):
        raise ParameterError("grayscale input must have an integer dtype")
    if arr.size == 0:
        raise ParameterError("input image is empty")
    if arr.min() < 0 or arr.max() > 255:
        raise ParameterError("grayscale values must lie in [0, 255]")
    return GrayImage(arr.astype(np.uint8))


def _as_patch_spec(value) -> PatchSpec:
    if isinstance(value, PatchSpec):
        return value
    if isinstance(value, str):
        return PatchSpec.parse(value)
    if isinstance(value, (tuple, list)) and len(value) == 2:
        return PatchSpec(int(value[0]), int(value[1]))
    raise ParameterError(f"patch size must be 'HxW', (h, w) or PatchSpec, got {value!r}")


class PseudoBooleanSegmenter(BaseEstimator):
    """Deterministic patch-contrast segmenter with an estimator interface.

    Parameters
    ----------
    patch_size : str | tuple[int, int], default "4x4"
        Patch extent in pixels, rows x cols.
    bin_width : int, default 40
        Intensity bin size applied before classification.
    kernel_size : int, default 0
        Odd Gaussian kernel extent; 0 disables smoothing.
    threshold : int, default 1
        Minimum effective polynomial degree that marks a patch as edge.
    grouping : str, default "modconst"
        Blob equivalence mode: "strict", "modconst", or "connect".
    refine : str, default "none"
        Neighbour-vote pass: "none", "favor-edge", or "favor-blob".
    refine_k : int, default 3
        Neighbour votes (1..4) needed to flip a patch during refinement.
    workers : int, default 1
        Process count for patch classification; 0 chooses automatically.
        The output never depends on this value.
    """

    def __init__(
        self,
        patch_size="4x4",
        bin_width=40,
        kernel_size=0,
        threshold=1,
        grouping="modconst",
        refine="none",
        refine_k=3,
        workers=1,
    ):
        self.patch_size = patch_size
        self.bin_width = bin_width
        self.kernel_size = kernel_size
        self.threshold = threshold
        self.grouping = grouping
        self.refine = refine
        self.refine_k = refine_k
        self.workers = workers

    def _build_config(self) -> PipelineConfig:
        return PipelineConfig(
            kernel_size=int(self.kernel_size),
            bin_width=int(self.bin_width),
            patch=_as_patch_spec(self.patch_size),
            threshold=int(self.threshold),
            grouping=self.grouping if isinstance(self.grouping, Grouping) else Grouping.from_name(self.grouping),
            refine=self.refine if isinstance(self.refine, RefineMode) else RefineMode.from_name(self.refine),
            refine_k=int(self.refine_k),
            workers=int(self.workers),
        )

    def fit(self, X, y=None):
        """Validate parameters and the input image contract."""
        image = as_gray_image(X)
        config = self._build_config()
        if image.width < config.patch.w or image.height < config.patch.h:
            raise ParameterError(
                f"image {image.width}x{image.height} smaller than one {config.patch} patch"
            )
        self.config_ = config
        self.image_shape_ = (image.height, image.width)
        return self

    def segment(self, X) -> SegmentationResult:
        """Full segmentation result for an image."""
        check_is_fitted(self, "config_")
        return run(as_gray_image(X), self.config_)

    def transform(self, X) -> np.ndarray:
        """Per-patch effective degree grid (grid_rows x grid_cols, int)."""
        return self.segment(X).degree_grid()

    def predict(self, X) -> np.ndarray:
        """Per-patch class grid: 1 for edge, 0 for blob."""
        return self.segment(X).class_grid()

    def fit_transform(self, X, y=None) -> np.ndarray:
        return self.fit(X, y).transform(X)

    def fit_predict(self, X, y=None) -> np.ndarray:
        return self.fit(X, y).predict(X)
