#!/usr/bin/env python3
"""Normalised transmission bound tau*sqrt(n) and covert constant L on a 2-D grid.

Rows cover every (eta2, nbar_alpha) pair for a coherent probe; the output is
plot-ready CSV on stdout or in ``--out``.
"""

import argparse
import sys

import numpy as np

from covertlink.bosonic import ChannelParams, ProbeState
from covertlink.covertness import CovertnessBudget, tau_times_sqrt_n
from covertlink.dataio import format_csv, write_table
from covertlink.receivers import bpsk_capacity, homodyne_ber
from covertlink.signaling import covert_capacity_closed_form


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--eta2", default="0.3,0.5,0.7,0.9", help="comma-separated return transmittances")
    ap.add_argument("--nbar-alpha-min", type=float, default=0.05)
    ap.add_argument("--nbar-alpha-max", type=float, default=5.0)
    ap.add_argument("--points", type=int, default=25)
    ap.add_argument("--nbar-B2", type=float, default=1.0)
    ap.add_argument("--delta-qre", type=float, default=0.05)
    ap.add_argument("--out", help="CSV or JSON path; stdout when omitted")
    args = ap.parse_args(argv)

    budget = CovertnessBudget(args.delta_qre, 10**6)
    cols = ["eta2", "nbar_alpha", "tau_sqrt_n", "ber", "capacity", "L"]
    rows = []
    for eta2 in (float(v) for v in args.eta2.split(",")):
        ch2 = ChannelParams(eta2, args.nbar_B2)
        for na in np.geomspace(args.nbar_alpha_min, args.nbar_alpha_max, args.points):
            ts = tau_times_sqrt_n(ProbeState(float(na), 0.0, 1), ch2, budget)
            ber = homodyne_ber(eta2, float(na), args.nbar_B2)
            cap = bpsk_capacity(ber)
            rows.append([eta2, float(na), ts, ber, cap, covert_capacity_closed_form(ch2, float(na), args.delta_qre, cap)])
    meta = {"script": "tau_sqrt_n_grid"}
    if args.out:
        write_table(args.out, cols, rows, meta)
    else:
        sys.stdout.write(format_csv(cols, rows, meta))


if __name__ == "__main__":
    main()
