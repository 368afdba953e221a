"""Command-line entry point: ``python -m covertlink <command> [options]``.

Every command reads an optional JSON ``--config`` whose keys are the fields
of the command's config dataclass; any field can also be overridden by a flag
of the same name (``--nbar-alpha 0.3``, ``--grid 0.1,0.2,0.3``).  ``--out``
chooses CSV or JSON by extension and defaults to CSV on stdout.

Exit codes: 0 success, 2 configuration error, 3 ingestion error,
4 domain or numeric error.  ``COVERTLINK_LOG`` sets the log level.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

from covertlink.dataio import config_hash, format_csv, write_table
from covertlink.errors import (
    ConfigError,
    CovertLinkError,
    DomainError,
    IngestionError,
    NumericError,
    StructuralError,
)
from covertlink.experiment import (
    ExperimentConfig,
    QreOracleConfig,
    RangingConfig,
    SweepConfig,
    qre_oracle_table,
    ranging_table,
    run_experiment,
    run_sweep,
    tau_table,
)

log = logging.getLogger("covertlink")

EXIT_OK, EXIT_CONFIG, EXIT_INGEST, EXIT_DOMAIN = 0, 2, 3, 4

_ETA_GRID = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)

# command -> (config class, defaults that differ from the class, runner)
COMMANDS = {
    "tau-bound": (SweepConfig, {"sweep": "nbar_alpha", "grid": (0.25, 0.5, 1.0, 2.0, 4.0)}, tau_table),
    "covert-capacity": (
        SweepConfig,
        {"scheme": "bpsk-homodyne", "sweep": "nbar_alpha", "grid": (0.25, 0.5, 1.0, 2.0, 4.0)},
        run_sweep,
    ),
    "correlator-throughput": (
        SweepConfig,
        {"scheme": "correlator", "sweep": "eta2", "grid": _ETA_GRID, "nbar_s": 0.01, "nbar_B2": 1e-4, "M": 10**4, "n": 10**12},
        run_sweep,
    ),
    "ranging-sim": (RangingConfig, {}, ranging_table),
    "analyze-experiment": (ExperimentConfig, {"synthetic_powers_dbm": tuple(range(-52, -31))}, run_experiment),
    "qre-oracle": (QreOracleConfig, {}, qre_oracle_table),
}


HELP = {
    "tau-bound": "largest per-slot transmission probability and the relative entropy it spends",
    "covert-capacity": "homodyne BPSK error rate, capacity and covert constant L over a sweep",
    "correlator-throughput": "click-correlator capacity and total covert bits over a sweep",
    "ranging-sim": "exact and analytic ranging success bounds with Monte Carlo trials",
    "analyze-experiment": "covert constant L from OSA and oscilloscope traces",
    "qre-oracle": "quartic relative-entropy formula against the truncated Fock-space value",
}


def _scalar(text: str):
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    if text.lower() in ("none", "null"):
        return None
    return text


def _coerce(name: str, value, default):
    """Bring a JSON or command-line value to the type of the field default."""
    try:
        if isinstance(default, tuple):
            if isinstance(value, str):
                value = [_scalar(v) for v in value.split(",") if v.strip()]
            if value is None:
                return ()
            items = value if isinstance(value, (list, tuple)) else [value]
            return tuple(v for v in items if v is not None)
        if isinstance(value, str):
            value = _scalar(value)
        if value is None:
            return None
        if isinstance(default, bool):
            return bool(value)
        if isinstance(default, int):
            if float(value) != int(float(value)):
                raise ValueError(f"{value} is not an integer")
            return int(float(value))
        if isinstance(default, float):
            return float(value)
        return value
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {name}: {exc}") from exc


def build_config(command: str, file_values: dict, overrides: dict):
    cls, extra, _ = COMMANDS[command]
    known = {f.name: f for f in dataclasses.fields(cls)}
    merged = {}
    for source in (extra, file_values, overrides):
        for key, value in source.items():
            if key not in known:
                raise ConfigError(f"unknown option {key!r} for {command}")
            default = extra.get(key, known[key].default)
            merged[key] = _coerce(key, value, default)
    return cls(**merged)


def _parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="covertlink", description=__doc__.splitlines()[0])
    sub = top.add_subparsers(dest="command", required=True)
    for name, (cls, extra, runner) in COMMANDS.items():
        p = sub.add_parser(name, help=HELP[name], description=HELP[name])
        p.add_argument("--config", type=Path, help="JSON file with config fields")
        p.add_argument("--out", type=Path, help="output path (.csv or .json); stdout when omitted")
        for f in dataclasses.fields(cls):
            default = extra.get(f.name, f.default)
            p.add_argument(
                "--" + f.name.replace("_", "-"),
                dest="opt_" + f.name,
                metavar=f.name.upper(),
                default=argparse.SUPPRESS,
                help=f"default: {default!r}",
            )
    return top


def run(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("COVERTLINK_LOG", "WARNING").upper(), format="%(levelname)s %(message)s")
    args = _parser().parse_args(argv)
    try:
        file_values = {}
        if args.config is not None:
            try:
                file_values = json.loads(args.config.read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot load config {args.config}: {exc}") from exc
            if not isinstance(file_values, dict):
                raise ConfigError("config file must hold a JSON object")
        overrides = {k[4:]: v for k, v in vars(args).items() if k.startswith("opt_")}
        cfg = build_config(args.command, file_values, overrides)
        log.info("running %s with %s", args.command, cfg)
        columns, rows = COMMANDS[args.command][2](cfg)
        cfg_dict = dataclasses.asdict(cfg)
        meta = {
            "command": args.command,
            "config_hash": config_hash(cfg_dict),
            "seed": cfg_dict.get("master_seed", ""),
        }
        if args.out is None:
            sys.stdout.write(format_csv(columns, rows, meta))
        else:
            write_table(args.out, columns, rows, meta)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IngestionError as exc:
        print(f"ingestion error: {exc}", file=sys.stderr)
        return EXIT_INGEST
    except (DomainError, NumericError, StructuralError) as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except CovertLinkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    return EXIT_OK


def main() -> None:
    sys.exit(run())
