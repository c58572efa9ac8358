"""Power-dependent count rate and the saturation fit.

Draws Poisson counts around the saturation law for several seeds and prints
the fitted R_sat and P_sat with their relative errors.

    python scripts/saturation_scan.py --seeds 10
"""

import argparse

import numpy as np

from gcsim.analysis import fit_saturation
from gcsim.pipelines import SaturationOptions, simulate_saturation


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--integration", type=float, default=1.0, help="s per power")
    args = ap.parse_args(argv)

    o = SaturationOptions(integration_time=args.integration)
    rows = []
    for seed in range(args.seeds):
        P, rate, sigma = simulate_saturation(seed, o)
        r = fit_saturation(P, rate, sigma)
        rows.append((r.params["R_sat"], r.params["P_sat"], r.params["alpha"]))
        print(f"seed {seed:3d}: R_sat {rows[-1][0] / 1e3:7.2f} kcps  P_sat {rows[-1][1] * 1e6:6.3f} uW"
              f"  alpha {rows[-1][2]:9.3g} cps/W")
    rows = np.array(rows)
    err = np.abs(rows[:, :2] / [o.R_sat, o.P_sat] - 1)
    print(f"worst relative error: R_sat {err[:, 0].max():.2%}, P_sat {err[:, 1].max():.2%}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
