"""Fabry-Perot scan of the zero-phonon line.

Sweeps the cavity across the line, fits a Lorentzian to the transmitted
counts and subtracts the cavity width to get the emitter linewidth.

    python scripts/spectrum_scan.py --dwell 0.05
"""

import argparse
import math

from gcsim.analysis import deconvolve_lorentzian, fit_lorentzian
from gcsim.detection import DetectorParams
from gcsim.emitter import EmitterParams
from gcsim.optics import FpParams
from gcsim.pipelines import ScanOptions, simulate_spectrum_scan


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=81)
    ap.add_argument("--dwell", type=float, default=50e-3, help="s per step")
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args(argv)

    e, fp = EmitterParams(), FpParams()
    nu, counts = simulate_spectrum_scan(e, fp, DetectorParams(), args.seed, ScanOptions(args.steps, dwell=args.dwell))
    r = fit_lorentzian(nu / (2 * math.pi), counts)
    fwhm, s_fwhm = r.params["fwhm"], r.sigmas["fwhm"]
    kappa = fp.linewidth_kappa / (2 * math.pi)
    emitter = deconvolve_lorentzian(fwhm, kappa)
    print(f"total counts {counts.sum()}, peak {counts.max()}")
    print(f"measured FWHM {fwhm / 1e9:.3f} +- {s_fwhm / 1e9:.3f} GHz")
    print(f"cavity {kappa / 1e9:.2f} GHz -> emitter {emitter / 1e9:.3f} GHz"
          f" (set {e.linewidth_Gamma / (2 * math.pi) / 1e9:.2f} GHz)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
