"""Command-line front end.

Subcommands mirror the pipeline stages so each step can run standalone:

    register    align frames to the anchor, write aligned PPMs + transforms
    train       preprocess frames and train a map on the anchor frame
    score       apply a saved map to preprocessed frames, write QE rows
    stats       fit year trends for covariate columns or a QE row file
    correlate   correlate a QE row file with covariate columns
    plot        render SVG scatter plots from a QE row file
    run         the whole pipeline into one output directory

Exit codes: 0 success, 1 unusable input, 2 computation failure (currently
only registration that does not converge).  Errors print exactly one line
to stderr of the form 'somqe: error: <category>: <message>'.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .errors import ComputationError, InputError
from .pipeline import (
    Manifest,
    RunConfig,
    apply_config_entries,
    apply_year_fix,
    correlate,
    emit_csv,
    emit_svg_plots,
    ingest_covariates,
    load_config_file,
    load_frames,
    prepare_frames,
    qe_rows_csv,
    read_manifest,
    read_qe_csv,
    run_pipeline,
    slugify,
    QeReport,
    QeRow,
)
from .raster import atomic_write_bytes, save_image
from .register import write_transform_sidecar
from .som import empty_model_count, fit_som, load_grid, quantization_error, save_grid
from .stats import Series, linear_fit, regression_csv_row


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on usage errors; that code is reserved
    # for computation failures here, so usage problems become InputError
    def error(self, message):
        raise InputError(message)


def _add_common_flags(sub):
    sub.add_argument("--config", type=Path, help="key=value settings file")
    sub.add_argument("--seed", type=int, help="run seed (default 0)")
    sub.add_argument("--grid", help="map size as WxH (default 4x4)")
    sub.add_argument("--iterations", type=int, help="training presentations")
    sub.add_argument("--alpha", help="learning rate (default 0.2)")
    sub.add_argument("--radius", help="neighborhood radius (default 1.2)")
    sub.add_argument("--decay", choices=["constant", "linear"],
                     help="schedule for alpha and radius")
    sub.add_argument("--mode", choices=["translation", "rigid"],
                     help="registration model")
    sub.add_argument("--out", type=Path, help="output directory")
    sub.add_argument("--covariates", type=Path, help="covariate CSV")
    sub.add_argument("--year-fix", choices=["as-printed", "relabel-1990"],
                     dest="year_fix", help="how to resolve duplicated years")


def _config_from_args(args) -> RunConfig:
    config = RunConfig()
    if getattr(args, "config", None):
        config = apply_config_entries(config, load_config_file(args.config))
    overrides = {}
    for flag, key in [
        ("seed", "seed"),
        ("grid", "grid"),
        ("iterations", "iterations"),
        ("alpha", "alpha"),
        ("radius", "radius"),
        ("decay", "decay"),
        ("mode", "mode"),
        ("year_fix", "year_fix"),
    ]:
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = str(value)
    if getattr(args, "out", None) is not None:
        overrides["out"] = str(args.out)
    if getattr(args, "covariates", None) is not None:
        overrides["covariates"] = str(args.covariates)
    return apply_config_entries(config, overrides)


def _out_dir(config: RunConfig) -> Path:
    config.out_dir.mkdir(parents=True, exist_ok=True)
    return config.out_dir


def _require(args, name: str):
    value = getattr(args, name, None)
    if value is None:
        raise InputError(f"--{name.replace('_', '-')} is required for this command")
    return value


# ---------------------------------------------------------------------------
# handlers

def _cmd_register(args) -> int:
    config = _config_from_args(args)
    manifest = read_manifest(_require(args, "manifest"))
    frames = load_frames(manifest)
    transforms, aligned, residuals = prepare_frames(
        frames, manifest.anchor_index, config
    )
    out = _out_dir(config)
    manifest_lines = ["# path\tlabel\tyear"]
    for i, (entry, frame) in enumerate(zip(manifest.entries, aligned)):
        name = f"{i:03d}_{slugify(entry.label)}.ppm"
        save_image(frame, out / name)
        manifest_lines.append(f"{name}\t{entry.label}\t{entry.year:.10g}")
    write_transform_sidecar(
        out / "transforms.txt",
        [(i, t, r) for i, (t, r) in enumerate(zip(transforms, residuals))],
    )
    atomic_write_bytes(
        out / "registered_manifest.tsv",
        ("\n".join(manifest_lines) + "\n").encode("utf-8"),
    )
    print(f"aligned {len(aligned)} frames into {out}")
    return 0


def _cmd_train(args) -> int:
    config = _config_from_args(args)
    manifest = read_manifest(_require(args, "manifest"))
    frames = load_frames(manifest)
    _, processed, _ = prepare_frames(frames, manifest.anchor_index, config)
    anchor = processed[manifest.anchor_index]
    grid = fit_som(
        anchor, config.grid_width, config.grid_height, config.training_params()
    )
    out = _out_dir(config)
    save_grid(grid, out / "grid.txt")
    result = quantization_error(anchor, grid)
    print(
        f"trained {config.grid_width}x{config.grid_height} map on "
        f"{manifest.entries[manifest.anchor_index].label}: "
        f"anchor qe {result.qe:.6g}, {empty_model_count(result)} empty models, "
        f"grid written to {out / 'grid.txt'}"
    )
    return 0


def _cmd_score(args) -> int:
    config = _config_from_args(args)
    grid = load_grid(_require(args, "grid_file"))
    manifest = read_manifest(_require(args, "manifest"))
    frames = load_frames(manifest)
    _, processed, _ = prepare_frames(frames, manifest.anchor_index, config)
    rows = []
    for entry, frame in zip(manifest.entries, processed):
        result = quantization_error(frame, grid)
        rows.append(
            QeRow(entry.label, entry.year, result.qe, empty_model_count(result))
        )
    text = f"# roi: {manifest.roi_name}\n" + qe_rows_csv(rows)
    if args.out is not None:
        out = _out_dir(config)
        atomic_write_bytes(out / "qe.csv", text.encode("utf-8"))
        print(f"wrote {out / 'qe.csv'}")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_stats(args) -> int:
    config = _config_from_args(args)
    lines = ["# regression: label,slope,intercept,r2,t,df,p"]
    if getattr(args, "qe", None) is not None:
        roi, rows = read_qe_csv(args.qe)
        series = apply_year_fix(
            Series(
                roi or "qe",
                np.array([r.year for r in rows]),
                np.array([r.qe for r in rows]),
            ),
            config.year_fix,
        )
        lines.append(regression_csv_row(series.label, linear_fit(series)))
    elif config.covariates is not None:
        for series in ingest_covariates(config.covariates):
            fixed = apply_year_fix(series, config.year_fix)
            lines.append(regression_csv_row(fixed.label, linear_fit(fixed)))
    else:
        raise InputError("stats needs --covariates or --qe")
    text = "\n".join(lines) + "\n"
    if args.out is not None:
        out = _out_dir(config)
        atomic_write_bytes(out / "stats.csv", text.encode("utf-8"))
        print(f"wrote {out / 'stats.csv'}")
    else:
        sys.stdout.write(text)
    return 0


def _build_report_from_qe(args, config: RunConfig) -> QeReport:
    roi, rows = read_qe_csv(_require(args, "qe"))
    series = Series(
        roi or "qe",
        np.array([r.year for r in rows]),
        np.array([r.qe for r in rows]),
    )
    report = QeReport(
        roi_name=series.label,
        rows=tuple(rows),
        grid=None,
        regression=linear_fit(series),
    )
    if config.covariates is not None:
        report = correlate(report, ingest_covariates(config.covariates))
    return report


def _cmd_correlate(args) -> int:
    config = _config_from_args(args)
    if config.covariates is None:
        raise InputError("correlate needs --covariates")
    report = _build_report_from_qe(args, config)
    lines = ["# correlations: label,r,t,df,p"]
    from .stats import correlation_csv_row

    for entry in report.correlations:
        lines.append(correlation_csv_row(entry.label, entry.result))
    text = "\n".join(lines) + "\n"
    if args.out is not None:
        out = _out_dir(config)
        atomic_write_bytes(out / "correlations.csv", text.encode("utf-8"))
        print(f"wrote {out / 'correlations.csv'}")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_plot(args) -> int:
    config = _config_from_args(args)
    report = _build_report_from_qe(args, config)
    out = _out_dir(config)
    written = emit_svg_plots(report, out)
    print(f"wrote {len(written)} plots to {out}")
    return 0


def _cmd_run(args) -> int:
    config = _config_from_args(args)
    manifest = read_manifest(_require(args, "manifest"))
    report = run_pipeline(manifest, config)
    if config.covariates is not None:
        report = correlate(report, ingest_covariates(config.covariates))
    out = _out_dir(config)
    emit_csv(report, out / "report.csv", config)
    if report.grid is not None:
        save_grid(report.grid, out / "grid.txt")
    write_transform_sidecar(
        out / "transforms.txt",
        [
            (i, t, r)
            for i, (t, r) in enumerate(zip(report.transforms, report.residuals))
        ],
    )
    plots = emit_svg_plots(report, out / "plots")
    print(
        f"{report.roi_name}: {len(report.rows)} frames, trend slope "
        f"{report.regression.slope:.6g} per year (r2 {report.regression.r2:.4f}, "
        f"p {report.regression.p:.3g}); report, grid, transforms and "
        f"{len(plots)} plots in {out}"
    )
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="somqe",
        description="Structural-change scoring for image time series "
        "via self-organizing-map quantization error.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, handler, help_text, extra=()):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--manifest", type=Path, help="frame manifest (TSV)")
        for flag, kwargs in extra:
            p.add_argument(flag, **kwargs)
        _add_common_flags(p)
        p.set_defaults(handler=handler)
        return p

    add("register", _cmd_register, "align frames and write them out")
    add("train", _cmd_train, "train a map on the anchor frame")
    add("score", _cmd_score, "score frames against a saved map",
        extra=[("--grid-file", dict(type=Path, dest="grid_file",
                                    help="saved map from 'train'"))])
    add("stats", _cmd_stats, "fit year trends",
        extra=[("--qe", dict(type=Path, help="QE row file from 'score'"))])
    add("correlate", _cmd_correlate, "correlate QE rows with covariates",
        extra=[("--qe", dict(type=Path, help="QE row file from 'score'"))])
    add("plot", _cmd_plot, "render SVG plots from QE rows",
        extra=[("--qe", dict(type=Path, help="QE row file from 'score'"))])
    add("run", _cmd_run, "full pipeline into an output directory")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.handler(args)
    except InputError as exc:
        return _fail(1, "input", exc)
    except OSError as exc:
        return _fail(1, "input", exc)
    except ComputationError as exc:
        return _fail(2, "computation", exc)


def _fail(code: int, category: str, exc: BaseException) -> int:
    message = " ".join(str(exc).split())
    print(f"somqe: error: {category}: {message}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
