"""Implanted-carbon redistribution during a rapid thermal anneal.

One-dimensional Fick diffusion ``dc/dt = D(T) d2c/dx2`` in a device layer
of finite thickness, solved with an explicit forward-time centered-space
scheme. Both interfaces are reflecting (zero flux): segregation into or
out-diffusion through the oxide and cap are neglected, so the implanted
dose is conserved.

Depths are in nm, concentrations in cm^-3, doses in cm^-2.
"""

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.stats import norm

from .errors import ParameterError

K_B_EV = 8.617333262e-5  # eV/K
D0_CM2 = 0.33  # cm^2/s
EA_EV = 2.92  # eV
NM_PER_CM = 1e7
NM2_PER_CM2 = 1e14

LAYER_NM = 220.0
SRIM_MEAN_NM = 112.0
SRIM_STRAGGLE_NM = 41.0
FLUENCE_CM2 = 1e12


@dataclass(frozen=True)
class Profile:
    depth_grid: np.ndarray  # nm, uniform
    concentration: np.ndarray  # cm^-3
    dose: float  # cm^-2, the target integral

    def __post_init__(self):
        x = np.asarray(self.depth_grid, dtype=float)
        c = np.asarray(self.concentration, dtype=float)
        if x.ndim != 1 or x.shape != c.shape or len(x) < 3:
            raise ParameterError("depth grid and concentration must be 1-D arrays of equal length >= 3")
        steps = np.diff(x)
        if not np.all(steps > 0) or np.ptp(steps) > 1e-9 * steps[0]:
            raise ParameterError("depth grid must be uniform and increasing")
        if np.any(c < 0):
            raise ParameterError("concentration must be non-negative")
        object.__setattr__(self, "depth_grid", x)
        object.__setattr__(self, "concentration", c)

    @property
    def dx(self):
        return float(self.depth_grid[1] - self.depth_grid[0])

    @property
    def thickness(self):
        return float(self.depth_grid[-1] - self.depth_grid[0])

    def integral(self):
        """Trapezoidal depth integral in cm^-2."""
        return float(np.trapezoid(self.concentration, self.depth_grid) / NM_PER_CM)


@dataclass(frozen=True)
class AnnealSchedule:
    temperature: float = 1273.15  # K
    duration: float = 20.0  # s

    def __post_init__(self):
        if not self.temperature > 0:
            raise ParameterError("temperature must be positive (kelvin)")
        if not self.duration >= 0:
            raise ParameterError("duration must be non-negative")


@dataclass(frozen=True)
class ImplantParams:
    """Implant and grid settings for a diffusion run."""

    mean: float = SRIM_MEAN_NM
    straggle: float = SRIM_STRAGGLE_NM
    dose: float = FLUENCE_CM2
    thickness: float = LAYER_NM
    dx: float = 1.0
    safety: float = 0.25

    def __post_init__(self):
        if not self.straggle > 0:
            raise ParameterError("straggle must be positive")
        if not 0 < self.safety <= 0.5:
            raise ParameterError("safety must lie in (0, 0.5]")
        depth_grid(self.thickness, self.dx)


def run_anneal(ip: ImplantParams, s: AnnealSchedule):
    """Initial implant profile and the profile after the anneal."""
    p0 = initial_profile(ip.mean, ip.straggle, ip.dose, ip.dx, ip.thickness)
    return p0, evolve(p0, s, safety=ip.safety)


def depth_grid(thickness=LAYER_NM, dx=1.0):
    n = thickness / dx
    if not dx > 0 or abs(n - round(n)) > 1e-9 * max(n, 1):
        raise ParameterError(f"dx={dx} nm does not divide the {thickness} nm layer")
    return np.linspace(0.0, thickness, int(round(n)) + 1)


def initial_profile(mean=SRIM_MEAN_NM, straggle=SRIM_STRAGGLE_NM, dose=FLUENCE_CM2, dx=1.0, thickness=LAYER_NM):
    """Implant profile: a Gaussian truncated to the layer and rescaled so its
    trapezoidal integral equals ``dose``."""
    if not straggle > 0:
        raise ParameterError("straggle must be positive")
    if not dose >= 0:
        raise ParameterError("dose must be non-negative")
    if not 0 <= mean <= thickness:
        warnings.warn(f"implant mean depth {mean} nm lies outside the {thickness} nm layer", stacklevel=2)
    x = depth_grid(thickness, dx)
    c = norm.pdf(x, mean, straggle)
    area = np.trapezoid(c, x) / NM_PER_CM
    if area <= 0:
        raise ParameterError("profile vanishes on the grid; mean is too far outside the layer")
    return Profile(x, c * (dose / area), float(dose))


def diffusivity(T):
    """Arrhenius carbon diffusivity in silicon, cm^2/s."""
    T = np.asarray(T, dtype=float)
    if np.any(T <= 0):
        raise ParameterError("temperature must be positive (kelvin)")
    with np.errstate(over="ignore", under="ignore"):
        out = D0_CM2 * np.exp(-EA_EV / (K_B_EV * T))
    return out if out.ndim else float(out)


def diffusion_length(D_cm2, t):
    """``sqrt(2 D t)`` in nm."""
    return math.sqrt(2.0 * D_cm2 * NM2_PER_CM2 * t)


def _ftcs(c, r_full, n_full, r_last):
    c = c.copy()
    for r in [r_full] * n_full + ([r_last] if r_last > 0 else []):
        lap = np.empty_like(c)
        lap[1:-1] = c[2:] - 2.0 * c[1:-1] + c[:-2]
        # mirror ghost nodes: c[-1] = c[1] and c[N+1] = c[N-1]
        lap[0] = 2.0 * (c[1] - c[0])
        lap[-1] = 2.0 * (c[-2] - c[-1])
        c += r * lap
    return c


def evolve(p: Profile, s: AnnealSchedule, dx=None, safety=0.25):
    """Explicit FTCS anneal with reflecting boundaries.

    ``dt = safety * dx**2 / (2 D)``; the last step is shortened to land on
    ``s.duration`` exactly. ``dx`` defaults to the profile spacing and must
    equal it when given. The mirrored-ghost boundary stencil conserves the
    trapezoidal dose to rounding error.
    """
    if not 0 < safety <= 0.5:
        raise ParameterError(f"safety factor {safety} violates the FTCS stability bound (0, 0.5]")
    if dx is not None and abs(dx - p.dx) > 1e-9 * p.dx:
        raise ParameterError(f"dx={dx} nm differs from the profile spacing {p.dx} nm")
    D = diffusivity(s.temperature) * NM2_PER_CM2  # nm^2/s
    if D == 0 or s.duration == 0:
        return p
    h = p.dx
    dt = safety * h * h / (2.0 * D)
    n_full = int(s.duration // dt)
    rest = s.duration - n_full * dt
    if rest < 1e-12 * dt:
        rest = 0.0
    c = _ftcs(p.concentration, D * dt / h**2, n_full, D * rest / h**2)
    return replace(p, concentration=c)


def uniformity_metric(p: Profile):
    """min/max of the concentration over the layer (1 for a flat profile)."""
    top = float(np.max(p.concentration))
    return float(np.min(p.concentration)) / top if top > 0 else 1.0


def heat_kernel(x, center, sigma0, D_cm2, t, dose=1.0):
    """Free-space solution for a Gaussian initial profile, cm^-3."""
    s2 = sigma0**2 + 2.0 * D_cm2 * NM2_PER_CM2 * t
    return dose * NM_PER_CM * np.exp(-0.5 * (np.asarray(x) - center) ** 2 / s2) / math.sqrt(2 * math.pi * s2)
