"""Deterministic edge detection and coarse segmentation.

Image patches are compressed into penalty-based pseudo-Boolean
polynomials; the polynomial degree classifies each patch as blob or edge,
and polynomial equivalence groups the blobs into regions.
"""

from .errors import (
    ConsistencyError,
    EmptyImageError,
    ImageLoadError,
    ParameterError,
    PbpSegError,
    UnreadableFileError,
    UnsupportedImageError,
)
from .estimator import PseudoBooleanSegmenter, as_gray_image
from .imaging import (
    GrayImage,
    MaskImage,
    QuantizedImage,
    gaussian_blur,
    load_image,
    quantize,
    render_masks,
    write_png,
)
from .patcher import PatchGrid, PatchSpec, Rect, extract, plan_grid, transpose
from .pbp import (
    ColumnPacking,
    CostMatrix,
    PseudoBooleanPolynomial,
    column_pack,
    delta_matrix,
    max_column_degree,
    permutation_matrix,
    polynomial_from_json,
    polynomial_from_text,
    reduce,
    sorted_matrix,
    terms_matrix,
)
from .pipeline import PipelineConfig, run
from .segmenter import (
    Grouping,
    PatchClass,
    PatchRecord,
    RefineMode,
    SegmentationResult,
    classify_patch,
    group_blobs,
    refine,
    segment,
)

__version__ = "0.1.0"

__all__ = [
    "ColumnPacking",
    "ConsistencyError",
    "CostMatrix",
    "EmptyImageError",
    "GrayImage",
    "Grouping",
    "ImageLoadError",
    "MaskImage",
    "ParameterError",
    "PatchClass",
    "PatchGrid",
    "PatchRecord",
    "PatchSpec",
    "PbpSegError",
    "PipelineConfig",
    "PseudoBooleanPolynomial",
    "PseudoBooleanSegmenter",
    "QuantizedImage",
    "Rect",
    "SegmentationResult",
    "UnreadableFileError",
    "UnsupportedImageError",
    "as_gray_image",
    "classify_patch",
    "column_pack",
    "delta_matrix",
    "extract",
    "gaussian_blur",
    "group_blobs",
    "load_image",
    "max_column_degree",
    "permutation_matrix",
    "plan_grid",
    "polynomial_from_json",
    "polynomial_from_text",
    "quantize",
    "reduce",
    "refine",
    "render_masks",
    "run",
    "segment",
    "sorted_matrix",
    "terms_matrix",
    "transpose",
    "write_png",
]
