"""Image ingestion, smoothing, quantization, and mask rendering.

Input formats are 8-bit grayscale or RGB PNG and binary PGM; RGB collapses
to luminance with the common 0.299/0.587/0.114 weights.  All arithmetic
that lands in an output image is integer or rounded exactly once, so
repeated runs are byte-identical.  Output files are written atomically
(temp file in the target directory, then rename).
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import (
    ConsistencyError,
    EmptyImageError,
    ParameterError,
    UnreadableFileError,
    UnsupportedImageError,
)

BLOB_CODE = 0
EDGE_CODE = 1

BLOB_COLOR = (0, 0, 255)
EDGE_COLOR = (255, 255, 255)

_SUPPORTED_MODES = {"L", "RGB", "P"}  # palette decodes to 8-bit RGB


def _frozen(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class GrayImage:
    """Immutable 8-bit grayscale image, row-major ``(height, width)``."""

    pixels: np.ndarray

    def __post_init__(self) -> None:
        if self.pixels.ndim != 2:
            raise ParameterError("grayscale image must be a 2-D array")
        if self.pixels.size == 0:
            raise EmptyImageError("image has a zero dimension")
        if self.pixels.dtype != np.uint8:
            raise ParameterError("grayscale image must be uint8")
        object.__setattr__(self, "pixels", _frozen(self.pixels))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True, eq=False)
class QuantizedImage:
    """Grayscale image after binning; values lie in [0, 255 // bin_width]."""

    pixels: np.ndarray
    bin_width: int

    def __post_init__(self) -> None:
        if self.pixels.ndim != 2 or self.pixels.size == 0:
            raise ParameterError("quantized image must be a non-empty 2-D array")
        if not 1 <= self.bin_width <= 255:
            raise ParameterError(f"bin width {self.bin_width} outside [1, 255]")
        if int(self.pixels.max(initial=0)) > 255 // self.bin_width:
            raise ConsistencyError("quantized values exceed 255 // bin_width")
        object.__setattr__(self, "pixels", _frozen(self.pixels))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True, eq=False)
class MaskImage:
    """Per-patch class grid in patch-grid units (0 = blob, 1 = edge).

    `group_ids` optionally labels blob cells with their equivalence group;
    edge cells carry -1.
    """

    classes: np.ndarray
    group_ids: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.classes.ndim != 2 or self.classes.size == 0:
            raise ParameterError("mask must be a non-empty 2-D array")
        if not np.isin(self.classes, (BLOB_CODE, EDGE_CODE)).all():
            raise ConsistencyError("mask cells must be blob (0) or edge (1)")
        object.__setattr__(self, "classes", _frozen(self.classes.astype(np.uint8)))
        if self.group_ids is not None:
            if self.group_ids.shape != self.classes.shape:
                raise ConsistencyError("group id grid shape differs from class grid")
            object.__setattr__(self, "group_ids", _frozen(self.group_ids))


def rgb_to_gray(rgb: np.ndarray) -> np.ndarray:
    """Luminance with 0.299/0.587/0.114 weights, rounded half-up, as uint8."""
    r = rgb[..., 0].astype(np.int64)
    g = rgb[..., 1].astype(np.int64)
    b = rgb[..., 2].astype(np.int64)
    return ((299 * r + 587 * g + 114 * b + 500) // 1000).astype(np.uint8)


def load_image(path) -> GrayImage:
    """Read a PNG or PGM file as grayscale.

    Raises UnreadableFileError for missing/undecodable files,
    UnsupportedImageError for anything but 8-bit gray/RGB (e.g. 16-bit or
    alpha images), and EmptyImageError for zero-sized images.
    """
    try:
        with Image.open(path) as handle:
            handle.load()
            mode = handle.mode
            if mode not in _SUPPORTED_MODES:
                raise UnsupportedImageError(
                    f"{path}: mode {mode!r} unsupported; need 8-bit grayscale or RGB"
                )
            img = handle.convert("RGB") if mode == "P" else handle
            arr = np.asarray(img)
    except FileNotFoundError as exc:
        raise UnreadableFileError(f"{path}: file not found") from exc
    except UnidentifiedImageError as exc:
        raise UnreadableFileError(f"{path}: not a decodable image") from exc
    except OSError as exc:
        raise UnreadableFileError(f"{path}: {exc}") from exc
    if arr.size == 0:
        raise EmptyImageError(f"{path}: image has a zero dimension")
    if arr.ndim == 3:
        arr = rgb_to_gray(arr)
    return GrayImage(arr)


def gaussian_kernel(kernel_size: int) -> np.ndarray:
    """Normalized 1-D Gaussian taps with sigma = kernel_size / 6.

    The +-3 sigma support of that sigma matches the kernel extent, so the
    single size knob fully determines the filter.
    """
    sigma = kernel_size / 6.0
    offsets = np.arange(kernel_size, dtype=np.float64) - kernel_size // 2
    weights = np.exp(-(offsets**2) / (2.0 * sigma * sigma))
    return weights / weights.sum()


def gaussian_blur(img: GrayImage, kernel_size: int) -> GrayImage:
    """Separable Gaussian smoothing with replicated borders.

    Both passes run in float64 and the result is rounded half-up exactly
    once, then clipped to [0, 255].  kernel_size must be odd; 1 is the
    identity.
    """
    if kernel_size < 1 or kernel_size % 2 == 0:
        raise ParameterError(f"kernel size must be odd and positive, got {kernel_size}")
    if kernel_size > min(img.width, img.height):
        raise ParameterError(
            f"kernel size {kernel_size} exceeds image extent {img.width}x{img.height}"
        )
    if kernel_size == 1:
        return img
    weights = gaussian_kernel(kernel_size)
    pad = kernel_size // 2
    acc = img.pixels.astype(np.float64)
    for axis in (1, 0):
        padded = np.pad(acc, [(0, 0), (pad, pad)] if axis == 1 else [(pad, pad), (0, 0)], mode="edge")
        acc = np.zeros_like(img.pixels, dtype=np.float64)
        for k, w in enumerate(weights):
            if axis == 1:
                acc += w * padded[:, k : k + img.width]
            else:
                acc += w * padded[k : k + img.height, :]
    rounded = np.clip(np.floor(acc + 0.5), 0, 255).astype(np.uint8)
    return GrayImage(rounded)


def quantize(img: GrayImage, bin_width: int) -> QuantizedImage:
    """Map intensities to bins by floor division.

    Groups near-equal intensities into one value so neighbouring patches of
    the same texture reduce to matching polynomials.
    """
    if not 1 <= bin_width <= 255:
        raise ParameterError(f"bin width {bin_width} outside [1, 255]")
    return QuantizedImage((img.pixels // bin_width).astype(np.uint8), bin_width)


def render_masks(mask: MaskImage, grid, base: GrayImage) -> tuple[np.ndarray, np.ndarray]:
    """Full-resolution mask and 50% overlay, both RGB uint8.

    Blob patches paint blue, edge patches white; the overlay averages the
    mask with the base image (integer, half-up) so it is reproducible
    byte-for-byte.
    """
    if mask.classes.shape != (grid.grid_rows, grid.grid_cols):
        raise ConsistencyError(
            f"mask grid {mask.classes.shape} does not match patch grid "
            f"{(grid.grid_rows, grid.grid_cols)}"
        )
    if (base.height, base.width) != (grid.image_height, grid.image_width):
        raise ConsistencyError(
            f"base image {base.width}x{base.height} does not match grid plan "
            f"{grid.image_width}x{grid.image_height}"
        )
    mask_rgb = np.empty((base.height, base.width, 3), dtype=np.uint8)
    flat = mask.classes.ravel()
    for rect, code in zip(grid.rects, flat):
        color = EDGE_COLOR if code == EDGE_CODE else BLOB_COLOR
        mask_rgb[rect.y : rect.y + rect.h, rect.x : rect.x + rect.w] = color
    base_rgb = np.repeat(base.pixels[:, :, None], 3, axis=2).astype(np.uint16)
    overlay = ((mask_rgb.astype(np.uint16) + base_rgb + 1) // 2).astype(np.uint8)
    return mask_rgb, overlay


def write_png(path, array: np.ndarray) -> None:
    """Write a uint8 grayscale or RGB array as PNG, atomically."""
    if array.dtype != np.uint8 or array.ndim not in (2, 3):
        raise ParameterError("PNG writer expects a uint8 gray or RGB array")
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".png.tmp")
    try:
        with os.fdopen(fd, "wb") as handle:
            Image.fromarray(array).save(handle, format="PNG")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_text(path, text: str) -> None:
    """Write a text file (JSON, CSV) atomically alongside the images."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".txt.tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
