"""Command-line front end: fit the forecaster on a features CSV and write
the prediction file consumed by the pricing engine's compare command.

Settings come from an optional ``--config <json>`` document (a flat object
with a ``schema_version`` field); any flag given on the command line
overrides the config value. Exit codes: 0 success, 1 numerical failure
(training divergence), 2 configuration or input error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import DivergenceError, ValidationError
from .model import DEFAULT_WINDOW, LstmConfig, build_windows, load_features, predict_to_file, train

SCHEMA_VERSION = 1
CONFIG_KEYS = {
    "schema_version", "features", "out", "window",
    "hidden_units", "layers", "epochs", "learning_rate", "seed",
}


def _load_config(path: str) -> dict:
    config_path = Path(path)
    if not config_path.exists():
        raise ValidationError(f"config file not found: {config_path}")
    try:
        data = json.loads(config_path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"invalid JSON in {config_path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ValidationError("config must be a JSON object")
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ValidationError(
            f"unsupported schema_version {version!r}, expected {SCHEMA_VERSION}"
        )
    unknown = sorted(set(data) - CONFIG_KEYS)
    if unknown:
        raise ValidationError(f"unknown config keys: {', '.join(unknown)}")
    return data


def _resolve(args: argparse.Namespace, config: dict, key: str, default=None):
    flag_value = getattr(args, key)
    if flag_value is not None:
        return flag_value
    return config.get(key, default)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lstm-baseline",
        description="Train a windowed LSTM on a feature table and write predictions.",
    )
    parser.add_argument("--config", help="JSON settings file; flags override it")
    parser.add_argument("--features", help="input CSV: quote_id,date,close,sigma,r")
    parser.add_argument("--out", help="output CSV: quote_id,predicted_price")
    parser.add_argument("--window", type=int, help=f"window length (default {DEFAULT_WINDOW})")
    parser.add_argument("--hidden-units", type=int, dest="hidden_units")
    parser.add_argument("--layers", type=int)
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--learning-rate", type=float, dest="learning_rate")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--json", action="store_true", help="emit a JSON record")
    return parser


def run(args: argparse.Namespace) -> int:
    config = _load_config(args.config) if args.config else {}
    features_path = _resolve(args, config, "features")
    out_path = _resolve(args, config, "out")
    if not features_path:
        raise ValidationError("a features path is required (--features or config)")
    if not out_path:
        raise ValidationError("an out path is required (--out or config)")
    window = int(_resolve(args, config, "window", DEFAULT_WINDOW))
    model_config = LstmConfig(
        hidden_units=int(_resolve(args, config, "hidden_units", 64)),
        layers=int(_resolve(args, config, "layers", 1)),
        epochs=int(_resolve(args, config, "epochs", 50)),
        learning_rate=float(_resolve(args, config, "learning_rate", 1e-3)),
        seed=int(_resolve(args, config, "seed", 0)),
    )
    table = load_features(features_path)
    dataset = build_windows(table, window=window)
    model, history = train(dataset, model_config)
    rows = predict_to_file(model, dataset, out_path)
    record = {
        "command": "fit-predict",
        "features": str(features_path),
        "out": str(out_path),
        "samples": len(dataset),
        "train_count": dataset.train_count,
        "window": window,
        "epochs": model_config.epochs,
        "initial_loss": history[0] if history else None,
        "final_loss": history[-1] if history else None,
        "rows_written": rows,
    }
    if args.json:
        print(json.dumps(record))
    else:
        print(
            f"wrote {rows} predictions to {out_path} "
            f"(train MSE {record['initial_loss']} -> {record['final_loss']})"
        )
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return run(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DivergenceError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entrypoint()
