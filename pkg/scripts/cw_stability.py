"""Multiscale CW autocorrelation with and without a shelving state.

Prints g2 in logarithmic delay bins from 10 ns up to 1 s (at most a quarter of the record) for a two-level
emitter and for one that is shelved after a fraction of its emissions.

    python scripts/cw_stability.py --duration 4 --shelving-prob 0.1
"""

import argparse

import numpy as np

from gcsim.correlator import multiscale_g2, normalize_g2
from gcsim.detection import DetectorParams
from gcsim.emitter import EmitterParams, Metastable, cw_g2_rate_equations
from gcsim.pipelines import CwOptions, simulate_cw_g2


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rate", type=float, default=1e7, help="excitation rate, 1/s")
    ap.add_argument("--duration", type=float, default=1.0, help="s")
    ap.add_argument("--shelving-prob", type=float, default=0.1)
    ap.add_argument("--shelf-lifetime", type=float, default=100e-9)
    ap.add_argument("--seed", type=int, default=3)
    args = ap.parse_args(argv)

    shelf = Metastable(args.shelving_prob, args.shelf_lifetime)
    runs = {"two-level": EmitterParams(), "shelving": EmitterParams(metastable=shelf)}
    # keep the longest delay well inside the record
    top = min(0.0, float(np.log10(args.duration / 4)))
    cols = {}
    for label, e in runs.items():
        tags = simulate_cw_g2(e, DetectorParams(), args.seed, CwOptions(rate=args.rate, duration=args.duration)).tags
        h = normalize_g2(multiscale_g2(tags.on(0), tags.on(1), (-8.0, top), 3), "cw")
        cols[label] = h
    tau = np.sqrt(h.bin_edges[:-1] * h.bin_edges[1:]) / 1e12
    model = cw_g2_rate_equations(tau, runs["shelving"], args.rate)
    print(f"{'tau [s]':>10} {'two-level':>16} {'shelving':>16} {'rate eqs':>9}")
    for i, t in enumerate(tau):
        a, b = cols["two-level"], cols["shelving"]
        print(f"{t:10.2e} {a.g2[i]:8.4f}+-{a.g2_sigma[i]:.4f} {b.g2[i]:8.4f}+-{b.g2_sigma[i]:.4f} {model[i]:9.4f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
