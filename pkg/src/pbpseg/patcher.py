"""Non-overlapping patch grids over quantized images.

Images are tiled by ceiling division.  A leftover strip of thickness 1
would always reduce to a degree-0 polynomial no matter its content, so it
is merged into the neighbouring patch row/column instead; border patches
may therefore be up to one pixel thicker than requested, and every patch
keeps both dimensions >= 2.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import NamedTuple

from .errors import ConsistencyError, ParameterError
from .pbp import CostMatrix

_MIN_PATCH = 2
_MAX_PATCH = 64


class Rect(NamedTuple):
    """Pixel rectangle: top-left corner plus size."""

    x: int
    y: int
    w: int
    h: int


@dataclass(frozen=True)
class PatchSpec:
    """Requested patch size in pixels (height x width)."""

    h: int
    w: int

    def __post_init__(self) -> None:
        for side in (self.h, self.w):
            if not _MIN_PATCH <= side <= _MAX_PATCH:
                raise ParameterError(
                    f"patch sides must be in [{_MIN_PATCH}, {_MAX_PATCH}], got {self.h}x{self.w}"
                )

    @classmethod
    def parse(cls, text: str) -> "PatchSpec":
        """Parse the CLI form ``HxW``, e.g. ``4x4`` or ``6x8``."""
        match = re.fullmatch(r"(\d+)[xX](\d+)", text.strip())
        if match is None:
            raise ParameterError(f"patch spec must look like HxW, got {text!r}")
        return cls(int(match.group(1)), int(match.group(2)))

    def __str__(self) -> str:
        return f"{self.h}x{self.w}"


@dataclass(frozen=True)
class PatchGrid:
    """Tiling of a width x height image into disjoint covering rectangles."""

    image_width: int
    image_height: int
    spec: PatchSpec
    grid_rows: int
    grid_cols: int
    rects: tuple[Rect, ...]  # row-major

    def rect_at(self, row: int, col: int) -> Rect:
        if not (0 <= row < self.grid_rows and 0 <= col < self.grid_cols):
            raise ParameterError(
                f"patch ({row}, {col}) outside grid {self.grid_rows}x{self.grid_cols}"
            )
        return self.rects[row * self.grid_cols + col]


def _side_lengths(total: int, step: int) -> list[int]:
    # Ceil tiling; a thickness-1 remainder joins the previous patch.
    count, rem = divmod(total, step)
    sizes = [step] * count
    if rem == 1:
        sizes[-1] += 1
    elif rem > 1:
        sizes.append(rem)
    return sizes


def plan_grid(width: int, height: int, spec: PatchSpec) -> PatchGrid:
    """Plan the patch tiling for an image of the given pixel size."""
    if width < spec.w or height < spec.h:
        raise ParameterError(
            f"image {width}x{height} smaller than one {spec} patch"
        )
    col_sizes = _side_lengths(width, spec.w)
    row_sizes = _side_lengths(height, spec.h)
    rects = []
    y = 0
    for h in row_sizes:
        x = 0
        for w in col_sizes:
            rects.append(Rect(x, y, w, h))
            x += w
        y += h
    return PatchGrid(width, height, spec, len(row_sizes), len(col_sizes), tuple(rects))


def extract(img, rect: Rect) -> CostMatrix:
    """Copy one patch rectangle of a quantized image into a cost matrix."""
    pixels = img.pixels
    height, width = pixels.shape
    if rect.x < 0 or rect.y < 0 or rect.x + rect.w > width or rect.y + rect.h > height:
        raise ConsistencyError(f"rect {rect} outside {width}x{height} image")
    block = pixels[rect.y : rect.y + rect.h, rect.x : rect.x + rect.w]
    return CostMatrix(tuple(tuple(row) for row in block.tolist()))


def transpose(c: CostMatrix) -> CostMatrix:
    """Swap rows and columns; applying it twice returns the original."""
    return CostMatrix(tuple(zip(*c.cells)))
