"""Command-line entry point: cohort generation, training, alpha sweeps,
and report rendering, all reproducible from explicit seeds.

Exit codes are a stable scripting contract: 0 success, 2 usage error,
3 I/O or file-format failure, 4 numerical failure (non-finite loss).
The THC_LOG environment variable ({error, info, debug}) controls
logging verbosity on stderr.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .datagen import (
    ENCODED_DIM,
    PRESETS,
    CohortConfig,
    compute_normalization_stats,
    generate_cohort,
    load_cohort,
    write_cohort,
)
from .entropy import Alpha
from .errors import (
    BadMagic,
    DomainError,
    InvalidConfig,
    InvalidK,
    NonFiniteLoss,
    VersionMismatch,
)
from .experiment import (
    _SHUFFLE_SALT,
    SweepConfig,
    run_sweep,
    to_training_set,
)
from .net import ModelConfig, TrainConfig, build_model, save_model, train, write_trace_csv
from .report import (
    format_report,
    parse_sweep_csv,
    render_sweep_figure,
    render_trace_figure,
    sweep_rows_to_csv,
)

log = logging.getLogger(__name__)

EXIT_USAGE = 2
EXIT_IO = 3
EXIT_NUMERIC = 4


class UsageError(Exception):
    pass


def _configure_logging():
    level = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}.get(
        os.environ.get("THC_LOG", "error").lower(), logging.ERROR
    )
    logging.basicConfig(
        level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s"
    )


def _digest(config: dict) -> str:
    return hashlib.sha256(
        json.dumps(config, sort_keys=True, default=str).encode("utf-8")
    ).hexdigest()


def _write_manifest(out_dir: Path, command: str, config: dict, seeds, artifacts) -> Path:
    manifest = {
        "command": command,
        "tool_version": __version__,
        "config_digest": _digest(config),
        "seeds": [int(s) for s in seeds],
        "artifacts": [str(a) for a in artifacts],
    }
    path = out_dir / "run_manifest.json"
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _parse_int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from None


def _parse_float_pair(text: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise UsageError(f"expected two comma-separated numbers, got {text!r}")
    return float(parts[0]), float(parts[1])


def parse_alpha_grid(grid: str | None, alphas: str | None) -> list[float]:
    """--grid start:stop:step (endpoints inclusive within 1e-9) or
    --alphas comma-separated list."""
    if (grid is None) == (alphas is None):
        raise UsageError("provide exactly one of --grid or --alphas")
    if alphas is not None:
        try:
            values = [float(v) for v in alphas.split(",")]
        except ValueError:
            raise UsageError(f"bad --alphas list {alphas!r}") from None
    else:
        parts = grid.split(":")
        if len(parts) != 3:
            raise UsageError(f"--grid must be start:stop:step, got {grid!r}")
        try:
            start, stop, step = (float(v) for v in parts)
        except ValueError:
            raise UsageError(f"bad --grid values {grid!r}") from None
        if step <= 0 or stop < start:
            raise UsageError("--grid requires step > 0 and stop >= start")
        values = []
        i = 0
        while (v := start + i * step) <= stop + 1e-9:
            values.append(round(v, 9))
            i += 1
    for v in values:
        try:
            Alpha(v)
        except DomainError as exc:
            raise UsageError(str(exc)) from None
    if not any(abs(v - 1.0) < 1e-6 for v in values):
        raise UsageError("alpha grid must contain the Shannon baseline 1.0")
    return values


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="thcnet",
        description="THC-entropy loss experiments on synthetic cohorts",
    )
    parser.add_argument("--version", action="version", version=f"thcnet {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic cohort")
    p.add_argument("--preset", choices=sorted(PRESETS), default="head-neck-like")
    p.add_argument("--n", type=int, default=None, help="number of patients")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--image-size", type=int, default=32)
    p.add_argument("--signal-strength", type=float, default=None)
    p.add_argument("--label-noise", type=float, default=None)

    p = sub.add_parser("train", help="train one model on a cohort")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--channels", default="2,4,8")
    p.add_argument("--dense", default="16")
    p.add_argument("--weights", default="1,1", help="loss weights w_rec,w_pred")
    p.add_argument("--optimizer", choices=("adam", "sgd"), default="adam")

    p = sub.add_parser("sweep", help="five-fold cross-validated alpha sweep")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--grid", default=None, help="alpha grid as start:stop:step")
    p.add_argument("--alphas", default=None, help="explicit alpha list, comma-separated")
    p.add_argument("--folds", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--parallel-folds", type=int, default=1)
    p.add_argument("--channels", default=None)
    p.add_argument("--dense", default=None)
    p.add_argument("--test-kind", choices=("welch", "student", "paired"), default=None)
    p.add_argument("--config", default=None, help="JSON sweep config file")

    p = sub.add_parser("report", help="re-render a stored sweep file")
    p.add_argument("--sweep", required=True, help="path to a sweep result CSV")
    p.add_argument("--format", choices=("markdown", "csv"), default="markdown")
    p.add_argument("--out", default=None, help="directory for rendered files (default: stdout)")
    return parser


def _ensure_out_dir(path_str: str) -> Path:
    out = Path(path_str)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_gen_data(args) -> int:
    preset = dict(PRESETS[args.preset])
    if args.n is not None:
        preset["n_patients"] = args.n
    if args.signal_strength is not None:
        preset["signal_strength"] = args.signal_strength
    if args.label_noise is not None:
        preset["label_noise"] = args.label_noise
    config = CohortConfig(
        image_shape=(args.image_size, args.image_size, 1),
        seed=args.seed,
        **preset,
    )
    try:
        config.validate()
    except InvalidConfig as exc:
        raise UsageError(str(exc)) from None

    records = generate_cohort(config)
    out = _ensure_out_dir(args.out)
    csv_path = write_cohort(records, out)
    manifest = _write_manifest(
        out, "gen-data", asdict(config), [config.seed], [csv_path.name, "volumes"]
    )
    print(manifest)
    return 0


def _model_config_for(records, channels: tuple[int, ...], dense: tuple[int, ...], seed: int):
    return ModelConfig(
        input_shape=tuple(records[0].volume.shape),
        encoder_levels=len(channels),
        channels_per_level=channels,
        clinical_dim=ENCODED_DIM,
        dense_widths=dense,
        seed=seed,
    )


def cmd_train(args) -> int:
    try:
        alpha = Alpha(args.alpha)
    except DomainError as exc:
        raise UsageError(str(exc)) from None
    channels = _parse_int_list(args.channels)
    dense = _parse_int_list(args.dense)
    weights = _parse_float_pair(args.weights)

    records = load_cohort(args.data)
    stats = compute_normalization_stats(records)
    dataset = to_training_set(records, stats)

    model_config = _model_config_for(records, channels, dense, args.seed)
    train_config = TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.lr,
        alpha=alpha.value,
        loss_weights=weights,
        seed=args.seed ^ _SHUFFLE_SALT,
        optimizer=args.optimizer,
    )
    try:
        model_config.validate()
        train_config.validate()
    except InvalidConfig as exc:
        raise UsageError(str(exc)) from None

    result = train(build_model(model_config), dataset, train_config)

    out = _ensure_out_dir(args.out)
    ckpt = out / "checkpoint.thcm"
    trace_csv = out / "trace.csv"
    trace_png = out / "trace.png"
    save_model(result.model, ckpt)
    write_trace_csv(result.trace, trace_csv)
    render_trace_figure(result.trace, trace_png)
    _write_manifest(
        out,
        "train",
        {"model": asdict(model_config), "train": asdict(train_config), "data": str(args.data)},
        [args.seed],
        [ckpt.name, trace_csv.name, trace_png.name],
    )
    print(ckpt)
    return 0


_SWEEP_FILE_KEYS = {"alpha_grid", "k", "base_seed", "train", "model", "test_kind", "cohort_path"}
_TRAIN_FILE_KEYS = {"epochs", "batch_size", "learning_rate", "loss_weights", "optimizer"}
_MODEL_FILE_KEYS = {"encoder_levels", "channels_per_level", "dense_widths", "input_shape"}


def _load_sweep_file(path: str) -> dict:
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise UsageError(f"{path}: invalid JSON sweep config: {exc}") from None
    if not isinstance(raw, dict):
        raise UsageError(f"{path}: sweep config must be a JSON object")
    for key, allowed in (
        (None, _SWEEP_FILE_KEYS),
        ("train", _TRAIN_FILE_KEYS),
        ("model", _MODEL_FILE_KEYS),
    ):
        section = raw if key is None else raw.get(key, {})
        unknown = set(section) - allowed
        if unknown:
            where = "sweep config" if key is None else f"'{key}' section"
            raise UsageError(f"{path}: unknown {where} keys: {sorted(unknown)}")
    return raw


def cmd_sweep(args) -> int:
    file_cfg = _load_sweep_file(args.config) if args.config else {}

    if args.grid is not None or args.alphas is not None:
        grid = parse_alpha_grid(args.grid, args.alphas)
    elif "alpha_grid" in file_cfg:
        grid = [float(v) for v in file_cfg["alpha_grid"]]
        if not any(abs(v - 1.0) < 1e-6 for v in grid):
            raise UsageError("alpha grid must contain the Shannon baseline 1.0")
    else:
        raise UsageError("provide --grid, --alphas, or alpha_grid in --config")

    def resolve(flag, file_key, default, section=None):
        if flag is not None:
            return flag
        source = file_cfg.get(section, {}) if section else file_cfg
        return source.get(file_key, default)

    k = int(resolve(args.folds, "k", 5))
    base_seed = int(resolve(args.seed, "base_seed", 0))
    test_kind = resolve(args.test_kind, "test_kind", "welch")
    epochs = int(resolve(args.epochs, "epochs", 100, "train"))
    batch_size = int(resolve(args.batch_size, "batch_size", 8, "train"))
    lr = float(resolve(args.lr, "learning_rate", 1e-3, "train"))
    weights = tuple(file_cfg.get("train", {}).get("loss_weights", (1.0, 1.0)))
    optimizer = file_cfg.get("train", {}).get("optimizer", "adam")
    channels = (
        _parse_int_list(args.channels)
        if args.channels is not None
        else tuple(file_cfg.get("model", {}).get("channels_per_level", (2, 4, 8)))
    )
    dense = (
        _parse_int_list(args.dense)
        if args.dense is not None
        else tuple(file_cfg.get("model", {}).get("dense_widths", (16,)))
    )
    if args.parallel_folds < 1:
        raise UsageError("--parallel-folds must be >= 1")

    records = load_cohort(args.data)
    config = SweepConfig(
        alpha_grid=grid,
        k=k,
        base_seed=base_seed,
        train=TrainConfig(
            epochs=epochs,
            batch_size=batch_size,
            learning_rate=lr,
            loss_weights=weights,
            seed=base_seed,
            optimizer=optimizer,
        ),
        model=_model_config_for(records, channels, dense, base_seed),
        test_kind=test_kind,
        cohort_path=str(args.data),
    )
    try:
        config.validate()
        config.train.validate()
    except (InvalidConfig, InvalidK) as exc:
        raise UsageError(str(exc)) from None

    rows = run_sweep(records, config, parallel_folds=args.parallel_folds)

    out = _ensure_out_dir(args.out)
    sweep_csv = out / "sweep.csv"
    sweep_md = out / "sweep.md"
    sweep_png = out / "sweep.png"
    sweep_csv.write_text(sweep_rows_to_csv(rows))
    sweep_md.write_text(format_report(rows, "markdown"))
    render_sweep_figure(rows, sweep_png)
    _write_manifest(
        out,
        "sweep",
        {
            "alpha_grid": grid,
            "k": k,
            "base_seed": base_seed,
            "test_kind": test_kind,
            "train": asdict(config.train),
            "model": asdict(config.model),
            "data": str(args.data),
        },
        [base_seed],
        [sweep_csv.name, sweep_md.name, sweep_png.name],
    )
    print(sweep_csv)
    return 0


def cmd_report(args) -> int:
    try:
        text = Path(args.sweep).read_text()
        rows = parse_sweep_csv(text)
    except (OSError, ValueError) as exc:
        print(f"thcnet report: {exc}", file=sys.stderr)
        return EXIT_IO
    rendered = format_report(rows, args.format)
    if args.out is None:
        sys.stdout.write(rendered)
        return 0
    out = _ensure_out_dir(args.out)
    ext = "md" if args.format == "markdown" else "csv"
    target = out / f"report.{ext}"
    target.write_text(rendered)
    render_sweep_figure(rows, out / "report.png")
    print(target)
    return 0


_HANDLERS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "sweep": cmd_sweep,
    "report": cmd_report,
}


def main(argv=None) -> int:
    _configure_logging()
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except UsageError as exc:
        print(f"thcnet {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NonFiniteLoss as exc:
        print(f"thcnet {args.command}: non-finite loss at epoch {exc.epoch}", file=sys.stderr)
        return EXIT_NUMERIC
    except (BadMagic, VersionMismatch, OSError, ValueError) as exc:
        print(f"thcnet {args.command}: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
