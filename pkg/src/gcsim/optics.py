"""Passive optics: time-delayed Mach-Zehnder interferometer, polarization
overlap, and the scanning Fabry-Perot analysis cavity.

Non-interfering photons are routed classically. A long-arm photon from one
pulse and a short-arm photon from the pulse ``path_delay`` later reach the
second beamsplitter together; those pairs are resolved jointly by
``gcsim.interference`` (see ``resolve_pairs`` there).
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import rng as _rng
from .errors import ParameterError

SHORT, LONG = 0, 1
PORT_A, PORT_B = 0, 1
ABSORBED = -1


@dataclass(frozen=True)
class MziParams:
    path_delay: float = 25e-9
    bs1_transmittance: float = 0.5
    bs2_transmittance: float = 0.5
    polarization_rotation: float = 0.0
    arm_losses: tuple = (0.0, 0.0)

    def __post_init__(self):
        if not self.path_delay > 0:
            raise ParameterError("path_delay must be positive")
        for name in ("bs1_transmittance", "bs2_transmittance"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise ParameterError(f"{name} must lie in [0, 1], got {v}")
        if len(self.arm_losses) != 2 or not all(0 <= x <= 1 for x in self.arm_losses):
            raise ParameterError("arm_losses must be two factors in [0, 1]")

    @property
    def delay_ps(self):
        return int(round(self.path_delay * _rng.PS_PER_S))


@dataclass(frozen=True)
class FpParams:
    linewidth_kappa: float = 2 * np.pi * 3.4e9
    center: float = 0.0
    peak_transmission: float = 1.0

    def __post_init__(self):
        if not self.linewidth_kappa > 0:
            raise ParameterError("linewidth_kappa must be positive")
        if not 0 < self.peak_transmission <= 1:
            raise ParameterError("peak_transmission must lie in (0, 1]")


@dataclass(frozen=True)
class RoutedPhoton:
    pulse_index: int
    pulse_time: int
    arm: int
    port: Optional[int]
    arrival_time: Optional[int]


@dataclass
class RoutedStream:
    """Columnar routing result; ``port`` is ABSORBED for lost photons."""

    arm: np.ndarray
    port: np.ndarray
    arrival_time: np.ndarray

    def __len__(self):
        return len(self.arm)


def mzi_route_many(emit_time, polarization, m: MziParams, rng):
    """Route photons through the interferometer (classical BS2 for all).

    Returns the routing record and the updated polarization angles. Port
    assignment for photons that belong to an interfering pair is redone by
    the interference module.
    """
    emit_time = np.asarray(emit_time, dtype=np.int64)
    n = len(emit_time)
    arm = (rng.random(n) >= m.bs1_transmittance).astype(np.int8)
    loss = np.where(arm == LONG, m.arm_losses[1], m.arm_losses[0])
    lost = rng.random(n) < loss
    # short arm enters BS2 so that transmission goes to A; long arm reflects to A
    to_a_prob = np.where(arm == SHORT, m.bs2_transmittance, 1.0 - m.bs2_transmittance)
    port = np.where(rng.random(n) < to_a_prob, PORT_A, PORT_B).astype(np.int8)
    port[lost] = ABSORBED
    arrival = emit_time + arm.astype(np.int64) * m.delay_ps
    pol = np.asarray(polarization, dtype=float) + arm * m.polarization_rotation
    return RoutedStream(arm, port, arrival), pol


def mzi_route(photon, m: MziParams, rng, slot_ps=None):
    """Route one photon. Returns ``(port, arrival_time, arm)``; port and
    arrival are None when an arm loss absorbs the photon."""
    routed, _ = mzi_route_many([photon.emit_time], [photon.polarization], m, rng)
    arm = "long" if routed.arm[0] == LONG else "short"
    if routed.port[0] == ABSORBED:
        return None, None, arm
    port = "A" if routed.port[0] == PORT_A else "B"
    return port, int(routed.arrival_time[0]), arm


def interfering_pair_predicate(r1: RoutedPhoton, r2: RoutedPhoton, m: MziParams):
    """True when the two photons overlap at BS2: their exciting pulses are
    exactly ``path_delay`` apart, the earlier one took the long arm and the
    later one the short arm."""
    if r1.pulse_index == r2.pulse_index:
        return False
    early, late = (r1, r2) if r1.pulse_time < r2.pulse_time else (r2, r1)
    return late.pulse_time - early.pulse_time == m.delay_ps and early.arm == LONG and late.arm == SHORT


def find_interfering_pairs(pulse_time, arm, present, delay_ps):
    """Vectorized predicate: index pairs ``(i_long, j_short)`` that interfere.

    ``pulse_time`` must be unique per photon (one photon per excitation).
    ``present`` masks photons that survived the arm losses.
    """
    pulse_time = np.asarray(pulse_time, dtype=np.int64)
    idx = np.flatnonzero(present)
    pt = pulse_time[idx]
    order = np.argsort(pt, kind="stable")
    idx, pt = idx[order], pt[order]
    longs = idx[arm[idx] == LONG]
    target = pulse_time[longs] + delay_ps
    pos = np.searchsorted(pt, target)
    pos_c = np.minimum(pos, len(pt) - 1) if len(pt) else pos
    hit = (pos < len(pt)) & (pt[pos_c] == target) if len(pt) else np.zeros(0, bool)
    j = idx[pos_c[hit]] if len(pt) else np.zeros(0, np.int64)
    i = longs[hit]
    ok = arm[j] == SHORT
    return i[ok], j[ok]


def fp_transmission(nu_offset, fp: FpParams):
    """Lorentzian cavity transmission at detuning ``nu_offset`` from ``fp.center``."""
    hw = 0.5 * fp.linewidth_kappa
    d = np.asarray(nu_offset, dtype=float) - fp.center
    out = fp.peak_transmission * hw**2 / (d**2 + hw**2)
    return out if out.ndim else float(out)


def lorentzian_convolved_width(w1, w2):
    """FWHM of the convolution of two Lorentzians: widths add."""
    if w1 < 0 or w2 < 0:
        raise ParameterError("widths must be non-negative")
    return w1 + w2


def polarization_overlap(rotation):
    """Mode overlap ``cos^2`` of the relative polarization angle."""
    out = np.cos(np.asarray(rotation, dtype=float)) ** 2
    return out if out.ndim else float(out)
