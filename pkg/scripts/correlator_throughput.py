#!/usr/bin/env python3
"""Correlator covert throughput versus return transmittance, with a Monte Carlo column.

Thin wrapper over the ``correlator-throughput`` CLI command that also
prints a short human-readable summary to stderr.
"""

import argparse
import sys

from covertlink.dataio import format_csv
from covertlink.experiment import SweepConfig, run_sweep


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nbar-s", type=float, default=0.01)
    ap.add_argument("--nbar-B2", type=float, default=1e-4)
    ap.add_argument("--M", type=int, default=10**4)
    ap.add_argument("--n", type=int, default=10**12)
    ap.add_argument("--mc-symbols", type=int, default=0, help="simulated symbols per point (0 = none)")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args(argv)

    cfg = SweepConfig(
        scheme="correlator",
        sweep="eta2",
        grid=tuple(i / 10 for i in range(1, 10)),
        nbar_s=args.nbar_s,
        nbar_B2=args.nbar_B2,
        M=args.M,
        n=args.n,
        mc_symbols=args.mc_symbols,
        master_seed=args.seed,
        workers=args.workers,
    )
    cols, rows = run_sweep(cfg)
    sys.stdout.write(format_csv(cols, rows, {"script": "correlator_throughput", "seed": args.seed}))
    for r in rows:
        d = dict(zip(cols, r))
        print(f"eta2={d['eta2']:.1f}  threshold={d['threshold']}  C={d['capacity']:.4f} bits  "
              f"bits={d['total_bits']:.4g}", file=sys.stderr)


if __name__ == "__main__":
    main()
