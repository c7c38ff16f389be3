"""Command-line front end: segment an image, inspect one patch, sweep knobs.

Exit discipline: 0 on success, 2 for I/O failures, 3 for parameter
violations (including bad flag syntax), 4 for internal consistency errors.
Every failure message is tagged with the pipeline stage that raised it,
and partially written outputs are removed.
"""

from __future__ import annotations

import argparse
import itertools
import os
import sys
import time

from .errors import ConsistencyError, ImageLoadError, ParameterError, PbpSegError
from .imaging import gaussian_blur, load_image, quantize, render_masks, write_png, write_text
from .patcher import PatchSpec, extract, plan_grid
from .pbp import (
    column_pack,
    delta_matrix,
    permutation_matrix,
    reduce,
    sorted_matrix,
    terms_matrix,
)
from .pipeline import PipelineConfig, run
from .segmenter import Grouping, RefineMode, classify_patch

EXIT_OK = 0
EXIT_IO = 2
EXIT_PARAM = 3
EXIT_INTERNAL = 4

_DEFAULTS = {
    "patch": "4x4",
    "bin": "40",
    "gaussian": "0",
    "threshold": "1",
    "refine": "none",
    "refine-k": "3",
    "grouping": "modconst",
    "workers": "0",
    "out": "pbpseg_out",
}


class _Failure(Exception):
    """Carries an exit code and a stage-tagged message to main()."""

    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _code_for(exc: Exception) -> int:
    if isinstance(exc, ParameterError):
        return EXIT_PARAM
    if isinstance(exc, (ImageLoadError, OSError)):
        return EXIT_IO
    if isinstance(exc, (ConsistencyError, PbpSegError)):
        return EXIT_INTERNAL
    return EXIT_INTERNAL


def _fail(stage: str, exc: Exception) -> _Failure:
    return _Failure(_code_for(exc), f"[{stage}] {exc}")


class _Parser(argparse.ArgumentParser):
    # Flag syntax problems are parameter errors (exit 3), not argparse's 2.
    def error(self, message):
        raise ParameterError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="pbpseg", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("input", help="input image (8-bit gray/RGB PNG, or PGM)")
        p.add_argument("--config", help="key=value file; explicit flags win")
        p.add_argument("--patch", help=f"patch size HxW (default {_DEFAULTS['patch']})")
        p.add_argument("--bin", help=f"intensity bin width (default {_DEFAULTS['bin']})")
        p.add_argument("--gaussian", help="odd Gaussian kernel size, 0 = off (default 0)")
        p.add_argument("--threshold", help="edge degree threshold (default 1)")
        p.add_argument("--refine", help="none | favor-edge | favor-blob (default none)")
        p.add_argument("--refine-k", dest="refine_k", help="neighbour votes to flip, 1..4 (default 3)")
        p.add_argument("--grouping", help="strict | modconst | connect (default modconst)")
        p.add_argument("--workers", help="classification processes, 0 = auto (default 0)")
        p.add_argument("--out", help=f"output directory (default {_DEFAULTS['out']})")

    seg = sub.add_parser("segment", help="segment an image into blob/edge patches")
    add_common(seg)

    ins = sub.add_parser("inspect", help="print every reduction artifact of one patch")
    add_common(ins)
    ins.add_argument("--coord", required=True, help="patch grid position ROW,COL (0-based)")

    swp = sub.add_parser("sweep", help="run a cross product of parameter values")
    add_common(swp)
    return parser


def _read_config_file(path: str) -> dict[str, str]:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            lines = handle.readlines()
    except OSError as exc:
        raise _fail("config", exc)
    values: dict[str, str] = {}
    for lineno, line in enumerate(lines, 1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        if "=" not in text:
            raise _fail("config", ParameterError(f"{path}:{lineno}: expected key=value"))
        key, _, value = text.partition("=")
        key = key.strip()
        if key not in _DEFAULTS:
            raise _fail("config", ParameterError(f"{path}:{lineno}: unknown key {key!r}"))
        values[key] = value.strip()
    return values


def _merge_settings(args) -> dict[str, str]:
    file_values = _read_config_file(args.config) if args.config else {}
    merged = dict(_DEFAULTS)
    merged.update(file_values)
    flags = {
        "patch": args.patch,
        "bin": args.bin,
        "gaussian": args.gaussian,
        "threshold": args.threshold,
        "refine": args.refine,
        "refine-k": args.refine_k,
        "grouping": args.grouping,
        "workers": args.workers,
        "out": args.out,
    }
    for key, value in flags.items():
        if value is not None:
            merged[key] = value
    return merged


def _parse_int(name: str, text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ParameterError(f"{name} must be an integer, got {text!r}")


def _config_from_settings(settings: dict[str, str]) -> PipelineConfig:
    try:
        return PipelineConfig(
            kernel_size=_parse_int("gaussian", settings["gaussian"]),
            bin_width=_parse_int("bin", settings["bin"]),
            patch=PatchSpec.parse(settings["patch"]),
            threshold=_parse_int("threshold", settings["threshold"]),
            grouping=Grouping.from_name(settings["grouping"]),
            refine=RefineMode.from_name(settings["refine"]),
            refine_k=_parse_int("refine-k", settings["refine-k"]),
            workers=_parse_int("workers", settings["workers"]),
        )
    except ParameterError as exc:
        raise _fail("parameters", exc)


def _load(path: str):
    try:
        return load_image(path)
    except PbpSegError as exc:
        raise _fail("load", exc)


def _write_outputs(result, gray, outdir: str) -> None:
    written = []
    try:
        os.makedirs(outdir, exist_ok=True)
        mask_rgb, overlay = render_masks(result.to_mask_image(), result.grid, gray)
        for name, payload in (("mask.png", mask_rgb), ("overlay.png", overlay)):
            path = os.path.join(outdir, name)
            write_png(path, payload)
            written.append(path)
        path = os.path.join(outdir, "result.json")
        write_text(path, result.to_json_text())
        written.append(path)
    except Exception as exc:
        for path in written:
            try:
                os.unlink(path)
            except OSError:
                pass
        raise _fail("write", exc)


def _run_pipeline(gray, cfg: PipelineConfig):
    try:
        return run(gray, cfg)
    except PbpSegError as exc:
        raise _fail("pipeline", exc)


def cmd_segment(args) -> int:
    settings = _merge_settings(args)
    cfg = _config_from_settings(settings)
    started = time.perf_counter()
    gray = _load(args.input)
    result = _run_pipeline(gray, cfg)
    _write_outputs(result, gray, settings["out"])
    wall_ms = int(round((time.perf_counter() - started) * 1000))
    info = result.summary()
    print(
        f"patches={info['patches']} edge_percent={info['edge_percent']:.2f} "
        f"groups={info['groups']} wall_ms={wall_ms}"
    )
    return EXIT_OK


def _format_matrix(rows) -> str:
    cells = [[str(v) for v in row] for row in rows]
    width = max(len(s) for row in cells for s in row)
    return "\n".join("  " + " ".join(s.rjust(width) for s in row) for row in cells)


def _format_terms(grid) -> str:
    cells = [["1" if not t else "".join(f"y{i}" for i in t) for t in row] for row in grid]
    width = max(len(s) for row in cells for s in row)
    return "\n".join("  " + " ".join(s.ljust(width) for s in row) for row in cells)


def cmd_inspect(args) -> int:
    settings = _merge_settings(args)
    cfg = _config_from_settings(settings)
    try:
        row_s, _, col_s = args.coord.partition(",")
        coord = (_parse_int("coord row", row_s), _parse_int("coord col", col_s))
    except ParameterError as exc:
        raise _fail("parameters", exc)
    gray = _load(args.input)
    try:
        smoothed = gray if cfg.kernel_size == 0 else gaussian_blur(gray, cfg.kernel_size)
        quantized = quantize(smoothed, cfg.bin_width)
        grid = plan_grid(quantized.width, quantized.height, cfg.patch)
        rect = grid.rect_at(*coord)
        cm = extract(quantized, rect)
    except PbpSegError as exc:
        raise _fail("pipeline", exc)

    pi = permutation_matrix(cm)
    record = classify_patch(cm, cfg.threshold)
    poly = record.poly if record.poly is not None else reduce(cm)
    packing = column_pack(poly)
    print(f"patch ({coord[0]}, {coord[1]}) rect x={rect.x} y={rect.y} w={rect.w} h={rect.h}")
    print("cost matrix:")
    print(_format_matrix(cm.cells))
    print("permutation matrix:")
    print(_format_matrix(pi))
    print("sorted matrix:")
    print(_format_matrix(sorted_matrix(cm, pi)))
    print("delta matrix:")
    print(_format_matrix(delta_matrix(cm, pi)))
    print("terms matrix:")
    print(_format_terms(terms_matrix(pi)))
    print(f"polynomial: {poly.to_text()}")
    print(f"packed columns: {packing.width}")
    print(
        f"degree: normal={record.degree_normal} transposed={record.degree_transposed} "
        f"effective={record.effective_degree}"
    )
    print(f"class: {record.patch_class.value}")
    return EXIT_OK


_SWEEP_CAP = 64


def _split_list(name: str, text: str) -> list[str]:
    values = [v.strip() for v in text.split(",") if v.strip()]
    if not values:
        raise ParameterError(f"{name} range is empty")
    return values


def cmd_sweep(args) -> int:
    settings = _merge_settings(args)
    try:
        patches = _split_list("patch", settings["patch"])
        bins = _split_list("bin", settings["bin"])
        gaussians = _split_list("gaussian", settings["gaussian"])
        thresholds = _split_list("threshold", settings["threshold"])
        combos = list(itertools.product(patches, bins, gaussians, thresholds))
        if len(combos) > _SWEEP_CAP:
            raise ParameterError(f"{len(combos)} combinations exceed the cap of {_SWEEP_CAP}")
    except ParameterError as exc:
        raise _fail("parameters", exc)

    gray = _load(args.input)
    outdir = settings["out"]
    rows = []
    for patch, bin_width, gaussian, threshold in combos:
        combo_settings = dict(settings)
        combo_settings.update(
            {"patch": patch, "bin": bin_width, "gaussian": gaussian, "threshold": threshold}
        )
        cfg = _config_from_settings(combo_settings)
        subdir = os.path.join(outdir, f"patch{patch}_bin{bin_width}_g{gaussian}_p{threshold}")
        started = time.perf_counter()
        result = _run_pipeline(gray, cfg)
        _write_outputs(result, gray, subdir)
        wall_ms = int(round((time.perf_counter() - started) * 1000))
        info = result.summary()
        rows.append(
            f"{patch},{bin_width},{gaussian},{threshold},"
            f"{info['patches']},{info['edge_percent']:.4f},{info['groups']},{wall_ms}"
        )
        print(f"{subdir}: patches={info['patches']} edge_percent={info['edge_percent']:.2f} "
              f"groups={info['groups']} wall_ms={wall_ms}")
    csv_text = (
        "patch,bin_width,kernel_size,threshold,patches,edge_percent,groups,wall_ms\n"
        + "\n".join(rows)
        + "\n"
    )
    try:
        os.makedirs(outdir, exist_ok=True)
        write_text(os.path.join(outdir, "sweep.csv"), csv_text)
    except OSError as exc:
        raise _fail("write", exc)
    print(f"wrote {os.path.join(outdir, 'sweep.csv')} ({len(rows)} rows)")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "segment":
            return cmd_segment(args)
        if args.command == "inspect":
            return cmd_inspect(args)
        return cmd_sweep(args)
    except _Failure as failure:
        print(f"pbpseg: {failure}", file=sys.stderr)
        return failure.code
    except ParameterError as exc:
        print(f"pbpseg: [arguments] {exc}", file=sys.stderr)
        return EXIT_PARAM
    except PbpSegError as exc:
        print(f"pbpseg: {exc}", file=sys.stderr)
        return _code_for(exc)


if __name__ == "__main__":
    sys.exit(main())
