"""
``floodscope`` command line.

Exit status: 0 on success, 1 when the run fails on its data, 2 on a usage
error. Settings are taken from flags first, then a ``--config`` JSON file,
then built-in defaults; the provenance record notes which one applied.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import sys
from dataclasses import fields
from pathlib import Path
from typing import Optional, Sequence

from floodscope import __version__
from floodscope.errors import FloodscopeError
from floodscope.geotiff import atomic_write_bytes
from floodscope.pipeline import (
    CLASSIFIER_KINDS,
    STAGES,
    Pipeline,
    PipelineConfig,
    config_from_dict,
    run_stages,
)

PIPELINE_COMMANDS = tuple(STAGES)
COMMANDS = (*PIPELINE_COMMANDS, "synth")

HELP = {
    "index": "write NDVI, NDWI and EVI rasters for every optical scene",
    "mask": "write the flood mask (permanent water excluded)",
    "train": "fit a classifier on labeled samples and write the model and metrics",
    "classify": "write the crop/land class map of the latest pre-flood scene",
    "overlay": "write per-region flood impact areas (overlay.csv)",
    "crops": "write per-period crop areas (crops.csv)",
    "timeseries": "write monthly regional NDVI series (and anomalies against a baseline)",
    "moisture": "write soil-moisture differences, regional series and sowing readiness",
    "report": "write every CSV report",
    "all": "run the full chain: index, mask, train, classify and all reports",
    "synth": "generate a synthetic scene with ground truth",
}

# commands that cannot run without these settings
REQUIRES = {
    "index": ("manifest",),
    "mask": ("manifest",),
    "train": ("samples",),
    "classify": ("manifest", ("samples", "model")),
    "overlay": ("manifest", ("samples", "model")),
    "crops": ("manifest", ("samples", "model")),
    "timeseries": ("manifest",),
    "moisture": ("manifest",),
    "report": ("manifest", ("samples", "model")),
    "all": ("manifest", ("samples", "model")),
}


class UsageError(Exception):
    """Bad command line: unknown command, missing argument or invalid value."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _comma_list(text: str) -> tuple:
    items = tuple(s.strip() for s in text.split(",") if s.strip())
    if not items:
        raise argparse.ArgumentTypeError("expected a comma-separated list")
    return items


def _fraction(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    return value


def _pipeline_options(p: argparse.ArgumentParser) -> None:
    io = p.add_argument_group("inputs and outputs")
    io.add_argument("--config", type=Path, help="JSON file of settings (flags take precedence)")
    io.add_argument("--manifest", type=Path, help="scene manifest")
    io.add_argument("--regions", type=Path, help="region polygons (overrides the manifest's regions line)")
    io.add_argument("--out", type=Path, help="output directory (default: out)")
    io.add_argument("--samples", type=Path, help="labeled training samples CSV")
    io.add_argument("--model", type=Path, help="trained model file (skips training)")
    io.add_argument("--baseline", type=Path, help="baseline NDVI series CSV for anomalies")

    rule = p.add_argument_group("flood rule and masks")
    rule.add_argument("--ndwi-threshold", type=_fraction)
    rule.add_argument("--ndvi-threshold", type=_fraction)
    rule.add_argument("--ndwi-comparator", choices=("less", "greater_equal"))
    rule.add_argument("--water-threshold", type=_fraction, help="NDWI at or above which a pre-flood pixel is water")
    rule.add_argument("--water-fraction", type=_fraction, help="share of pre-flood scenes that must show water")
    rule.add_argument("--low-ndvi-threshold", type=_fraction, help="pixels below this NDVI are not classified")

    cls = p.add_argument_group("classification")
    cls.add_argument("--classifier", choices=(*CLASSIFIER_KINDS, "all"))
    cls.add_argument(
        "--param", action="append", default=None, metavar="KIND.NAME=VALUE",
        help="classifier hyperparameter, e.g. forest.n_trees=50 (repeatable)",
    )
    cls.add_argument("--features", type=_comma_list, help="feature bands, comma-separated")
    cls.add_argument("--crops", type=_comma_list, help="crops of interest for crops.csv")
    cls.add_argument("--validation-fraction", type=_fraction)
    cls.add_argument("--seed", type=int)

    hyd = p.add_argument_group("soil moisture and time series")
    hyd.add_argument("--readiness-threshold", type=_fraction, help="moisture fraction at which sowing is feasible")
    hyd.add_argument("--moisture-epochs", type=_comma_list, metavar="A,B", help="difference A minus B")
    p.add_argument("--threads", type=int, help="worker threads (0 = all cores; default FLOODSCOPE_THREADS)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="floodscope", description="Flood-impact assessment on multispectral rasters.")
    parser.add_argument("--version", action="version", version=f"floodscope {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    for name in PIPELINE_COMMANDS:
        _pipeline_options(sub.add_parser(name, help=HELP[name], description=HELP[name]))
    s = sub.add_parser("synth", help=HELP["synth"], description=HELP["synth"])
    s.add_argument("--out", type=Path, required=True, help="directory to write the scene into")
    s.add_argument("--spec", type=Path, help="scene description file (default: built-in four-tehsil layout)")
    s.add_argument("--width", type=int, default=1024)
    s.add_argument("--height", type=int, default=1024)
    s.add_argument("--pixel-size", type=float, default=30.0)
    s.add_argument("--sigma", type=float, default=0.0, help="reflectance noise standard deviation")
    s.add_argument("--seed", type=int, default=42)
    s.add_argument("--ndwi-comparator", choices=("less", "greater_equal"), default="less")
    s.add_argument("--per-class", type=int, default=1000, help="training samples per class")
    s.add_argument("--no-moisture", action="store_true", help="skip soil-moisture grids")
    return parser


FLAG_TO_FIELD = {"features": "feature_bands", "param": "classifier_params"}


def _parse_params(items) -> dict:
    params: dict = {}
    for item in items:
        key, sep, raw = item.partition("=")
        kind, dot, name = key.partition(".")
        if not sep or not dot or kind not in CLASSIFIER_KINDS or not name:
            raise UsageError(f"--param expects KIND.NAME=VALUE with KIND in {CLASSIFIER_KINDS}, got {item!r}")
        try:
            value = json.loads(raw)
        except ValueError:
            value = raw
        params.setdefault(kind, {})[name] = value
    return params


def parse_args(argv: Sequence[str]):
    """
    Returns ``(command, config, sources)``; ``config`` is a PipelineConfig,
    or the argparse namespace for ``synth``. Raises UsageError.
    """
    parser = build_parser()
    if not argv:
        raise UsageError(parser.format_usage().strip())
    args = parser.parse_args(list(argv))
    if args.command is None:
        raise UsageError("floodscope: no command given")
    if args.command == "synth":
        return "synth", args, {}

    field_names = {f.name for f in fields(PipelineConfig)}
    file_values: dict = {}
    if args.config is not None:
        try:
            file_values = json.loads(Path(args.config).read_text())
        except FileNotFoundError:
            raise UsageError(f"config file {args.config} not found") from None
        except ValueError as exc:
            raise UsageError(f"config file {args.config} is not valid JSON: {exc}") from None
        if not isinstance(file_values, dict):
            raise UsageError(f"config file {args.config} must hold a JSON object")
        unknown = sorted(set(file_values) - field_names)
        if unknown:
            raise UsageError(f"config file {args.config} has unknown keys {unknown}")

    flag_values = {}
    for key, value in vars(args).items():
        if key in ("command", "config") or value is None:
            continue
        name = FLAG_TO_FIELD.get(key, key)
        flag_values[name] = _parse_params(value) if key == "param" else value

    sources = {name: "default" for name in field_names}
    sources.update({k: "config" for k in file_values})
    sources.update({k: "flag" for k in flag_values})
    # a config file's relative paths are taken relative to the file itself
    if args.config is not None:
        for key in ("manifest", "regions", "out", "samples", "model", "baseline"):
            if isinstance(file_values.get(key), str):
                file_values[key] = str(Path(args.config).parent / file_values[key])
    try:
        config = config_from_dict({**file_values, **flag_values})
    except (ValueError, TypeError) as exc:
        raise UsageError(f"invalid value: {exc}") from None

    for need in REQUIRES[args.command]:
        options = need if isinstance(need, tuple) else (need,)
        if all(getattr(config, o) is None for o in options):
            flags = " or ".join(f"--{o}" for o in options)
            raise UsageError(f"floodscope {args.command}: missing required argument {flags}")
    return args.command, config, sources


def _run_synth(args) -> list[Path]:
    from floodscope.synth import default_scene_spec, export_scene, read_scene_spec
    from floodscope.spectral import FloodRule

    rule = FloodRule(ndwi_comparator=args.ndwi_comparator)
    if args.spec is not None:
        spec = read_scene_spec(args.spec)
    else:
        spec = default_scene_spec(
            args.width, args.height, sigma=args.sigma, seed=args.seed, flood_rule=rule,
            pixel_size=args.pixel_size,
        )
    files = export_scene(spec, per_class=args.per_class, moisture=not args.no_moisture)
    written = []
    for name in sorted(files):
        atomic_write_bytes(args.out / name, files[name])
        written.append(args.out / name)
    record = {
        "tool": "floodscope", "version": __version__, "command": "synth", "seed": spec.seed,
        "parameters": {
            k: (str(v) if isinstance(v, Path) else v) for k, v in sorted(vars(args).items()) if k != "command"
        },
        "outputs": sorted(files),
    }
    atomic_write_bytes(args.out / "provenance_synth.json", (json.dumps(record, indent=2, sort_keys=True) + "\n").encode())
    return written


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        command, config, sources = parse_args(argv)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        print("run 'floodscope --help' for usage", file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    try:
        if command == "synth":
            written = _run_synth(config)
        else:
            pipeline = Pipeline(config)
            run_stages(pipeline, command)
            stamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
            written = pipeline.commit(command, sources, stamp)
            for note in pipeline.notes:
                print(f"note: {note}", file=sys.stderr)
    except (FloodscopeError, OSError, ValueError) as exc:
        print(f"floodscope {command}: error: {exc}", file=sys.stderr)
        return 1
    print(f"floodscope {command}: wrote {len(written)} files")
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
