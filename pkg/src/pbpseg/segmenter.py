"""Patch classification and blob grouping on top of the polynomial engine.

Each patch is reduced in both orientations; the larger of the two degrees
decides edge vs blob against the threshold, which removes the bias toward
contours parallel to one axis (a vertical step leaves every column
constant and is only visible after transposition).

Blob patches carry the canonical polynomial of their untransposed matrix;
grouping partitions them by equivalence key and then splits each partition
into 4-connected components.  All per-patch work is pure, so the grid can
be classified by any number of worker processes with bit-identical output.
"""

from __future__ import annotations

import json
import multiprocessing as mp
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .errors import ConsistencyError, ParameterError
from .imaging import BLOB_CODE, EDGE_CODE, MaskImage, QuantizedImage
from .patcher import PatchGrid, Rect, extract
from .pbp import (
    CostMatrix,
    PseudoBooleanPolynomial,
    _masks_to_terms,
    _reduce_columns,
    max_column_degree,
    reduce,
)

_PARALLEL_MIN_PATCHES = 4096  # below this, pool startup outweighs the work


class PatchClass(Enum):
    BLOB = "blob"
    EDGE = "edge"


class Grouping(Enum):
    """How blob equivalence is compared before the connectivity split."""

    STRICT = "strict"  # whole polynomial, constant included
    MODULO_CONSTANT = "modconst"  # ignore the constant (brightness shift)
    CONNECTIVITY = "connect"  # adjacency only

    @classmethod
    def from_name(cls, name: str) -> "Grouping":
        for member in cls:
            if member.value == name:
                return member
        raise ParameterError(f"unknown grouping mode {name!r}")


class RefineMode(Enum):
    NONE = "none"
    FAVOR_EDGE = "favor-edge"
    FAVOR_BLOB = "favor-blob"

    @classmethod
    def from_name(cls, name: str) -> "RefineMode":
        for member in cls:
            if member.value == name:
                return member
        raise ParameterError(f"unknown refinement mode {name!r}")


@dataclass(frozen=True)
class PatchRecord:
    """Classification outcome for one patch.

    `poly` is the canonical polynomial of the untransposed patch and is
    kept only for blob patches, where it feeds equivalence grouping.
    Standalone classifications (outside a grid) have row/col/rect of None.
    """

    degree_normal: int
    degree_transposed: int
    patch_class: PatchClass
    poly: PseudoBooleanPolynomial | None
    row: int | None = None
    col: int | None = None
    rect: Rect | None = None

    @property
    def effective_degree(self) -> int:
        return max(self.degree_normal, self.degree_transposed)

    def equivalence_key(self, include_constant: bool = True) -> str | None:
        if self.poly is None:
            return None
        return self.poly.equivalence_key(include_constant)


def _classify_cells(columns, rows, p: int):
    """Shared classification core on raw column/row lists.

    Returns (degree_normal, degree_transposed, blob_items) where blob_items
    is the canonical (term, coeff) tuple for blob patches and None for edge
    patches.  Degrees come from the sorted-scan shortcut; non-negative
    coefficients guarantee it matches the degree of the full reduction.
    """
    m = len(rows)
    n = len(columns)
    deg_n = max_column_degree(columns, m)
    deg_t = max_column_degree(rows, n)
    if max(deg_n, deg_t) >= p:
        return deg_n, deg_t, None
    acc = _reduce_columns(columns, m)
    items = tuple(sorted(_masks_to_terms(acc, m).items()))
    return deg_n, deg_t, items


def classify_patch(c: CostMatrix, p: int) -> PatchRecord:
    """Classify one cost matrix as edge (effective degree >= p) or blob."""
    if p < 1:
        raise ParameterError(f"classification threshold must be >= 1, got {p}")
    columns = [c.column(j) for j in range(c.cols)]
    deg_n, deg_t, items = _classify_cells(columns, c.cells, p)
    if items is None:
        return PatchRecord(deg_n, deg_t, PatchClass.EDGE, None)
    return PatchRecord(deg_n, deg_t, PatchClass.BLOB, PseudoBooleanPolynomial(c.rows, dict(items)))


def _classify_span(pixels: np.ndarray, rects, p: int, span: tuple[int, int]) -> list:
    lo, hi = span
    out = []
    for i in range(lo, hi):
        x, y, w, h = rects[i]
        tile = pixels[y : y + h, x : x + w]
        out.append(_classify_cells(tile.T.tolist(), tile.tolist(), p))
    return out


# Worker-process context for pooled classification: (pixels, rects, threshold).
# Only pool workers touch it; the serial path passes arguments directly.
_WORK_CTX = None


def _work_init(pixels: np.ndarray, rects, p: int) -> None:
    global _WORK_CTX
    _WORK_CTX = (pixels, rects, p)


def _work_span(span: tuple[int, int]) -> list:
    pixels, rects, p = _WORK_CTX
    return _classify_span(pixels, rects, p, span)


def _classify_grid(img: QuantizedImage, grid: PatchGrid, p: int, workers: int) -> list:
    total = len(grid.rects)
    if workers <= 1 or total < 2:
        return _classify_span(img.pixels, grid.rects, p, (0, total))
    step = max(1, -(-total // (workers * 8)))
    spans = [(lo, min(lo + step, total)) for lo in range(0, total, step)]
    method = "fork" if "fork" in mp.get_all_start_methods() else None
    ctx = mp.get_context(method)
    with ctx.Pool(processes=workers, initializer=_work_init,
                  initargs=(img.pixels, grid.rects, p)) as pool:
        parts = pool.map(_work_span, spans)
    return [item for part in parts for item in part]


def _records_from_raw(raw, grid: PatchGrid) -> tuple[tuple[PatchRecord, ...], ...]:
    records = []
    for idx, (deg_n, deg_t, items) in enumerate(raw):
        row, col = divmod(idx, grid.grid_cols)
        rect = grid.rects[idx]
        if items is None:
            rec = PatchRecord(deg_n, deg_t, PatchClass.EDGE, None, row, col, rect)
        else:
            poly = PseudoBooleanPolynomial(rect.h, dict(items))
            rec = PatchRecord(deg_n, deg_t, PatchClass.BLOB, poly, row, col, rect)
        records.append(rec)
    rows = grid.grid_rows
    cols = grid.grid_cols
    return tuple(tuple(records[r * cols : (r + 1) * cols]) for r in range(rows))


def group_blobs(records, mode: Grouping):
    """Label blob patches with group ids.

    Key-based modes partition by equivalence key first; every partition is
    then split into 4-connected components.  Connectivity mode merges all
    touching blobs.  Ids are dense from 0, ordered by each group's first
    patch in raster order.  Edge cells get -1.

    Returns (group_id_grid, groups) with groups a tuple of member-position
    tuples.
    """
    rows = len(records)
    cols = len(records[0]) if rows else 0
    keys: list[str | None] = []
    for r in range(rows):
        for c in range(cols):
            rec = records[r][c]
            if rec.patch_class is PatchClass.EDGE:
                keys.append(None)
            elif mode is Grouping.STRICT:
                keys.append(rec.equivalence_key(include_constant=True))
            elif mode is Grouping.MODULO_CONSTANT:
                keys.append(rec.equivalence_key(include_constant=False))
            else:
                keys.append("")

    parent = list(range(rows * cols))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for r in range(rows):
        for c in range(cols):
            i = r * cols + c
            if keys[i] is None:
                continue
            if r > 0 and keys[i - cols] == keys[i]:
                parent[find(i)] = find(i - cols)
            if c > 0 and keys[i - 1] == keys[i]:
                parent[find(i)] = find(i - 1)

    group_ids = np.full((rows, cols), -1, dtype=np.int64)
    members: dict[int, list[tuple[int, int]]] = {}
    order: list[int] = []
    for r in range(rows):
        for c in range(cols):
            i = r * cols + c
            if keys[i] is None:
                continue
            root = find(i)
            if root not in members:
                members[root] = []
                order.append(root)
            members[root].append((r, c))
    groups = []
    for gid, root in enumerate(order):
        groups.append(tuple(members[root]))
        for r, c in members[root]:
            group_ids[r, c] = gid
    group_ids.setflags(write=False)
    return group_ids, tuple(groups)


@dataclass(frozen=True, eq=False)
class SegmentationResult:
    """Classified grid plus blob grouping and the parameters that made it."""

    grid: PatchGrid
    records: tuple[tuple[PatchRecord, ...], ...]
    group_ids: np.ndarray
    groups: tuple[tuple[tuple[int, int], ...], ...]
    parameters: dict
    grouping: Grouping
    source: QuantizedImage

    def class_grid(self) -> np.ndarray:
        out = np.empty((self.grid.grid_rows, self.grid.grid_cols), dtype=np.uint8)
        for r, row in enumerate(self.records):
            for c, rec in enumerate(row):
                out[r, c] = EDGE_CODE if rec.patch_class is PatchClass.EDGE else BLOB_CODE
        return out

    def degree_grid(self) -> np.ndarray:
        out = np.empty((self.grid.grid_rows, self.grid.grid_cols), dtype=np.int64)
        for r, row in enumerate(self.records):
            for c, rec in enumerate(row):
                out[r, c] = rec.effective_degree
        return out

    def to_mask_image(self) -> MaskImage:
        return MaskImage(self.class_grid(), self.group_ids)

    def edge_count(self) -> int:
        return int((self.class_grid() == EDGE_CODE).sum())

    def patch_count(self) -> int:
        return self.grid.grid_rows * self.grid.grid_cols

    def summary(self) -> dict:
        patches = self.patch_count()
        edges = self.edge_count()
        return {
            "patches": patches,
            "edges": edges,
            "edge_percent": round(100.0 * edges / patches, 4),
            "groups": len(self.groups),
        }

    def to_json_obj(self) -> dict:
        patches = []
        for row in self.records:
            for rec in row:
                entry = {
                    "row": rec.row,
                    "col": rec.col,
                    "rect": list(rec.rect),
                    "degree_normal": rec.degree_normal,
                    "degree_transposed": rec.degree_transposed,
                    "effective_degree": rec.effective_degree,
                    "class": rec.patch_class.value,
                    "group": None,
                }
                if rec.patch_class is PatchClass.BLOB:
                    entry["group"] = int(self.group_ids[rec.row, rec.col])
                    entry["key"] = rec.equivalence_key(
                        include_constant=self.grouping is not Grouping.MODULO_CONSTANT
                    )
                patches.append(entry)
        groups = [
            {"id": gid, "size": len(g), "members": [list(pos) for pos in g]}
            for gid, g in enumerate(self.groups)
        ]
        return {
            "parameters": dict(self.parameters),
            "image": {"width": self.grid.image_width, "height": self.grid.image_height},
            "grid": {"rows": self.grid.grid_rows, "cols": self.grid.grid_cols},
            "patches": patches,
            "groups": groups,
            "summary": self.summary(),
        }

    def to_json_text(self) -> str:
        return json.dumps(self.to_json_obj(), indent=2) + "\n"


def segment(
    img: QuantizedImage,
    grid: PatchGrid,
    p: int,
    *,
    grouping: Grouping = Grouping.MODULO_CONSTANT,
    workers: int = 1,
    extra_parameters: dict | None = None,
) -> SegmentationResult:
    """Classify every patch of the grid and group the blobs.

    `workers` > 1 fans the per-patch classification out to that many
    processes; the output is byte-identical for any worker count.  The
    parameter echo stored on the result never includes the worker count
    for exactly that reason.
    """
    if p < 1:
        raise ParameterError(f"classification threshold must be >= 1, got {p}")
    if workers < 0:
        raise ParameterError(f"worker count must be >= 0, got {workers}")
    if (grid.image_height, grid.image_width) != img.pixels.shape:
        raise ConsistencyError(
            f"grid planned for {grid.image_width}x{grid.image_height} but image is "
            f"{img.width}x{img.height}"
        )
    resolved = workers
    if resolved == 0:
        resolved = mp.cpu_count() if len(grid.rects) >= _PARALLEL_MIN_PATCHES else 1
    resolved = max(1, min(resolved, len(grid.rects)))
    raw = _classify_grid(img, grid, p, resolved)
    records = _records_from_raw(raw, grid)
    group_ids, groups = group_blobs(records, grouping)
    parameters = dict(extra_parameters or {})
    parameters.update(
        bin_width=img.bin_width,
        patch=str(grid.spec),
        threshold=p,
        grouping=grouping.value,
        refine=RefineMode.NONE.value,
        refine_k=None,
    )
    return SegmentationResult(grid, records, group_ids, groups, parameters, grouping, img)


def refine(result: SegmentationResult, mode: RefineMode, k: int) -> SegmentationResult:
    """One synchronous neighbour-voting pass over the classified grid.

    favor-edge flips a blob to edge when at least k of its 4-neighbours are
    edges; favor-blob does the symmetric flip.  All votes are counted
    against the incoming state, so flips never cascade within the pass.
    Blob grouping is recomputed afterwards to keep the partition valid.
    """
    if not 1 <= k <= 4:
        raise ParameterError(f"neighbour threshold must be in [1, 4], got {k}")
    if mode is RefineMode.NONE:
        return result
    before = result.class_grid()
    losing = EDGE_CODE if mode is RefineMode.FAVOR_EDGE else BLOB_CODE
    flipping_from = BLOB_CODE if mode is RefineMode.FAVOR_EDGE else EDGE_CODE
    votes = np.zeros_like(before, dtype=np.int64)
    votes[1:, :] += before[:-1, :] == losing
    votes[:-1, :] += before[1:, :] == losing
    votes[:, 1:] += before[:, :-1] == losing
    votes[:, :-1] += before[:, 1:] == losing
    new_rows = []
    for r, row in enumerate(result.records):
        new_row = []
        for c, rec in enumerate(row):
            if before[r, c] == flipping_from and votes[r, c] >= k:
                if mode is RefineMode.FAVOR_EDGE:
                    new_row.append(replace(rec, patch_class=PatchClass.EDGE, poly=None))
                else:
                    poly = reduce(extract(result.source, rec.rect))
                    new_row.append(replace(rec, patch_class=PatchClass.BLOB, poly=poly))
            else:
                new_row.append(rec)
        new_rows.append(tuple(new_row))
    records = tuple(new_rows)
    group_ids, groups = group_blobs(records, result.grouping)
    parameters = dict(result.parameters)
    parameters["refine"] = mode.value
    parameters["refine_k"] = k
    return SegmentationResult(
        result.grid, records, group_ids, groups, parameters, result.grouping, result.source
    )
