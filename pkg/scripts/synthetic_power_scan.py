#!/usr/bin/env python3
"""Covert constant L against input power on the synthetic instrument fixture.

Writes the fixture traces to a directory (OSA and scope CSVs plus the label
sidecars), runs the file-based analysis on them and prints the table.  The
written files double as worked examples of the input formats.
"""

import argparse
import json
import sys
from pathlib import Path

from covertlink.dataio import format_csv, write_osa_csv, write_scope_csv
from covertlink.experiment import ExperimentConfig, run_experiment
from covertlink.synthetic import power_sweep_fixtures


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dir", type=Path, default=Path("synthetic_traces"))
    ap.add_argument("--powers", default="-52,-48,-44,-42,-40,-38,-34", help="input powers in dBm")
    ap.add_argument("--samples", type=int, default=12288, help="scope samples per bit class")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    powers = [float(p) for p in args.powers.split(",")]
    args.dir.mkdir(parents=True, exist_ok=True)
    osa, scope, labels = [], [], []
    fixtures = power_sweep_fixtures(powers, n_per_class=args.samples, seed=args.seed)
    for i, (sig, noise, sc) in enumerate(fixtures):
        osa.append(str(args.dir / f"osa_{i:02d}.csv"))
        scope.append(str(args.dir / f"scope_{i:02d}.csv"))
        labels.append(str(args.dir / f"labels_{i:02d}.csv"))
        write_osa_csv(osa[-1], sig)
        write_scope_csv(scope[-1], labels[-1], sc)
    write_osa_csv(args.dir / "osa_noise.csv", fixtures[0][1])
    conf = {"osa_signal": osa, "osa_noise": str(args.dir / "osa_noise.csv"), "scope": scope, "labels": labels}
    (args.dir / "experiment.json").write_text(json.dumps(conf, indent=1) + "\n")
    cols, rows = run_experiment(ExperimentConfig(**{k: tuple(v) if isinstance(v, list) else v for k, v in conf.items()}))
    sys.stdout.write(format_csv(cols, rows, {"script": "synthetic_power_scan", "seed": args.seed}))


if __name__ == "__main__":
    main()
