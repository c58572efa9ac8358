"""End-to-end experiment simulations.

Each pipeline is a pure function of its parameter objects and the seed:
all randomness comes from named substreams of that seed.
"""

from dataclasses import dataclass, field

import numpy as np

from . import rng as _rng
from .detection import DetectorParams, TagStream, detect_channels
from .emitter import EmitterParams, PulseTrainParams, cw_emission_stream, pulsed_emission_stream, saturation_rate
from .errors import ParameterError
from .interference import resolve_pairs
from .optics import (
    ABSORBED,
    LONG,
    PORT_A,
    PORT_B,
    FpParams,
    MziParams,
    find_interfering_pairs,
    fp_transmission,
    mzi_route_many,
    polarization_overlap,
)

CH_A, CH_B = 0, 1


@dataclass(frozen=True)
class HomOptions:
    """``mode_overlap`` is the intrinsic two-photon overlap apart from
    spectral diffusion and polarization; ``zpl_only`` thins photons by the
    ZPL branching ratio (spectral filtering)."""

    mode_overlap: float = 1.0
    zpl_only: bool = False

    def __post_init__(self):
        if not 0 <= self.mode_overlap <= 1:
            raise ParameterError("mode_overlap must lie in [0, 1]")


@dataclass(frozen=True)
class HbtOptions:
    splitter_transmittance: float = 0.5
    zpl_only: bool = False

    def __post_init__(self):
        if not 0 <= self.splitter_transmittance <= 1:
            raise ParameterError("splitter_transmittance must lie in [0, 1]")


@dataclass(frozen=True)
class CwOptions:
    rate: float = 1e7  # excitation rate, 1/s
    duration: float = 1e-3  # s
    splitter_transmittance: float = 0.5

    def __post_init__(self):
        if not self.rate > 0:
            raise ParameterError("rate must be positive")
        if self.duration < 0:
            raise ParameterError("duration must be non-negative")
        if not 0 <= self.splitter_transmittance <= 1:
            raise ParameterError("splitter_transmittance must lie in [0, 1]")


@dataclass(frozen=True)
class ScanOptions:
    """Fabry-Perot sweep: ``n_steps`` cavity detunings spread over
    ``+-span/2`` (rad/s), ``dwell`` seconds each, under CW excitation at
    ``rate``."""

    n_steps: int = 81
    span: float = 2 * np.pi * 40e9
    dwell: float = 50e-3
    rate: float = 2e6

    def __post_init__(self):
        if self.n_steps < 2:
            raise ParameterError("n_steps must be >= 2")
        if not (self.span > 0 and self.dwell > 0 and self.rate > 0):
            raise ParameterError("span, dwell and rate must be positive")


@dataclass(frozen=True)
class SaturationOptions:
    """Synthetic power series: Poisson counts over ``integration_time``
    around the printed saturation law."""

    powers: tuple = tuple(float(x) for x in np.round(np.linspace(0.25e-6, 20e-6, 40), 12))
    R_sat: float = 35e3
    P_sat: float = 2.4e-6
    alpha: float = 0.0
    integration_time: float = 1.0

    def __post_init__(self):
        if len(self.powers) < 4 or any(p < 0 for p in self.powers):
            raise ParameterError("need at least four non-negative powers")
        if not (self.R_sat > 0 and self.P_sat > 0 and self.integration_time > 0):
            raise ParameterError("R_sat, P_sat and integration_time must be positive")


@dataclass
class SimResult:
    tags: TagStream
    info: dict = field(default_factory=dict)


def _split(emit_ps, T, rng):
    """Classical beamsplitter: channel A with probability ``T``."""
    to_a = rng.random(len(emit_ps)) < T
    return [emit_ps[to_a], emit_ps[~to_a]]


def simulate_hom(e: EmitterParams, p: PulseTrainParams, m: MziParams, d: DetectorParams, seed, o=HomOptions()):
    """Pulsed emission through the delayed interferometer, two detectors.

    Interfering pairs (long arm of pulse n with short arm of pulse n +
    path_delay) leave BS2 according to the two-photon cross-port
    probability with overlap ``mode_overlap * cos^2(polarization)`` and
    their own frequency detuning; every other photon is split classically.
    Channel 0 is port A, channel 1 port B.
    """
    s = pulsed_emission_stream(e, p, seed, zpl_only=o.zpl_only)
    g = _rng.substream(seed, _rng.ROUTING)
    if m.delay_ps % p.slot_ps:
        raise ParameterError("path_delay must be a whole number of laser slots")
    routed, pol = mzi_route_many(s.emit_time, s.polarization, m, g)
    present = routed.port != ABSORBED
    i, j = find_interfering_pairs(s.pulse_time, routed.arm, present, m.delay_ps)
    port = routed.port.copy()
    if len(i):
        tau = (routed.arrival_time[j] - routed.arrival_time[i]) / _rng.PS_PER_S
        delta = s.frequency_offset[i] - s.frequency_offset[j]
        chi = o.mode_overlap * polarization_overlap(pol[i] - pol[j])
        first, second = resolve_pairs(g, tau, delta, chi, m.bs2_transmittance)
        port[i], port[j] = first, second
    arrivals = [routed.arrival_time[port == PORT_A], routed.arrival_time[port == PORT_B]]
    duration = 2 * p.n_pulses * p.slot_ps / _rng.PS_PER_S
    tags = detect_channels(arrivals, [d, d], seed, duration=duration)
    info = {
        "photons": len(s),
        "interfering_pairs": int(len(i)),
        "pairs_long_arm_first": int(np.sum(routed.arm[i] == LONG)),
        "duration_s": duration,
    }
    return SimResult(tags, info)


def simulate_pulsed_g2(e: EmitterParams, p: PulseTrainParams, d: DetectorParams, seed, o=HbtOptions()):
    """Hanbury Brown-Twiss: pulsed photons on a beamsplitter, two detectors."""
    s = pulsed_emission_stream(e, p, seed, zpl_only=o.zpl_only)
    arrivals = _split(s.emit_time, o.splitter_transmittance, _rng.substream(seed, _rng.ROUTING))
    duration = 2 * p.n_pulses * p.slot_ps / _rng.PS_PER_S
    tags = detect_channels(arrivals, [d, d], seed, duration=duration)
    return SimResult(tags, {"photons": len(s), "duration_s": duration})


def simulate_cw_g2(e: EmitterParams, d: DetectorParams, seed, o=CwOptions()):
    """Hanbury Brown-Twiss under continuous-wave excitation."""
    s = cw_emission_stream(e, o.rate, o.duration, seed)
    arrivals = _split(s.emit_time, o.splitter_transmittance, _rng.substream(seed, _rng.ROUTING))
    tags = detect_channels(arrivals, [d, d], seed, duration=o.duration)
    return SimResult(tags, {"photons": len(s), "duration_s": o.duration})


def scan_detunings(o: ScanOptions):
    return np.linspace(-0.5 * o.span, 0.5 * o.span, o.n_steps)


def simulate_spectrum_scan(e: EmitterParams, fp: FpParams, d: DetectorParams, seed, o=ScanOptions()):
    """Counts transmitted by the swept cavity at each detuning step.

    Returns ``(detuning_rad_s, counts)``. Dark counts accumulate over each
    dwell; timing jitter is irrelevant here and ignored.
    """
    centers = scan_detunings(o)
    s = cw_emission_stream(e, o.rate, o.n_steps * o.dwell, seed, zpl_only=True)
    dwell_ps = int(round(o.dwell * _rng.PS_PER_S))
    step = np.minimum(s.emit_time // dwell_ps, o.n_steps - 1)
    trans = fp_transmission(s.frequency_offset - centers[step] - fp.center, fp)
    g = _rng.substream(seed, _rng.ROUTING)
    passed = g.random(len(step)) < trans
    gd = _rng.substream(seed, _rng.DETECTION)
    clicked = passed & (gd.random(len(step)) < d.efficiency)
    counts = np.bincount(step[clicked], minlength=o.n_steps).astype(np.int64)
    counts += _rng.substream(seed, _rng.DARK).poisson(d.dark_rate * o.dwell, o.n_steps)
    return centers, counts


def simulate_saturation(seed, o=SaturationOptions()):
    """Returns ``(power, rate, rate_sigma)`` with Poisson noise on the counts."""
    P = np.asarray(o.powers, dtype=float)
    mean = saturation_rate(P, o.R_sat, o.P_sat, o.alpha) * o.integration_time
    counts = _rng.substream(seed, _rng.DETECTION).poisson(mean)
    rate = counts / o.integration_time
    sigma = np.sqrt(np.maximum(counts, 1)) / o.integration_time
    return P, rate, sigma
