"""Depth uniformity of the annealed implant versus time and temperature.

Prints the uniformity (min/max over the layer) on a grid of anneal times at
the reference temperature, and the time needed to reach a target
uniformity at a few temperatures (bisection on the anneal time).

    python scripts/anneal_study.py --target 0.9
"""

import argparse

import numpy as np
from scipy.optimize import brentq

from gcsim.diffusion import AnnealSchedule, diffusion_length, diffusivity, evolve, initial_profile, uniformity_metric


def uniformity_after(p0, T, t):
    return uniformity_metric(evolve(p0, AnnealSchedule(T, t), dx=2.0))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--temperature", type=float, default=1273.15, help="K")
    ap.add_argument("--target", type=float, default=0.9)
    args = ap.parse_args(argv)

    p0 = initial_profile(dx=2.0)
    T = args.temperature
    print(f"D({T:.2f} K) = {diffusivity(T):.4e} cm^2/s")
    print(f"{'t [s]':>8} {'L_D [nm]':>9} {'uniformity':>11}")
    for t in (0, 5, 10, 20, 40, 80, 160, 320):
        L = diffusion_length(diffusivity(T), t)
        print(f"{t:8.0f} {L:9.1f} {uniformity_after(p0, T, t):11.4f}")

    print(f"\ntime to uniformity {args.target}:")
    for Tc in (950.0, 1000.0, 1050.0, 1100.0):
        Tk = Tc + 273.15
        hi = 10.0
        while uniformity_after(p0, Tk, hi) < args.target and hi < 1e6:
            hi *= 2
        if hi >= 1e6:
            print(f"  {Tc:6.0f} C: beyond 1e6 s")
            continue
        t = brentq(lambda t: uniformity_after(p0, Tk, t) - args.target, 0.0, hi, xtol=0.1)
        print(f"  {Tc:6.0f} C: {t:8.1f} s (L_D = {diffusion_length(diffusivity(Tk), t):.0f} nm)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
