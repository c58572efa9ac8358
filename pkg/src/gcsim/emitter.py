"""Stochastic photon emission from a spectrally diffusing two-level emitter.

Units: times in seconds, angular frequencies in rad/s, except photon
timestamps which are int64 picoseconds (half-to-even rounding).

Spectral diffusion uses a two-scale model. Each photon's frequency offset is

    omega_i = c_block(i) + eps_i

where ``eps_i`` is i.i.d. Lorentzian with FWHM ``pair_fwhm / 2`` and
``c_block`` is a slow center redrawn every ``drift_block`` seconds with FWHM
``Gamma - pair_fwhm / 2``. Lorentzian widths add under convolution, so the
time-integrated line has FWHM ``Gamma`` while the detuning between two
photons in the same block has FWHM ``pair_fwhm``. The decomposition needs
``pair_fwhm <= 2 * Gamma``.
"""

from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np
from scipy.linalg import expm

from . import rng as _rng
from .errors import ParameterError

TWO_PI = 2.0 * np.pi
#: ZPL at 1278 nm as an angular frequency.
ZPL_OMEGA = TWO_PI * 299_792_458.0 / 1278e-9
#: Default truncation of Lorentzian draws, in units of the FWHM.
DEFAULT_TRUNCATION = 50.0


@dataclass(frozen=True)
class Metastable:
    shelving_prob: float = 0.0
    shelf_lifetime: float = 100e-9

    def __post_init__(self):
        if not 0.0 <= self.shelving_prob <= 1.0:
            raise ParameterError(f"shelving_prob must lie in [0, 1], got {self.shelving_prob}")
        if self.shelf_lifetime <= 0:
            raise ParameterError(f"shelf_lifetime must be positive, got {self.shelf_lifetime}")


@dataclass(frozen=True)
class EmitterParams:
    """Physical emitter configuration.

    ``hom_linewidth_GammaHOM`` follows ``hom_width_convention``: with
    ``"hwhm"`` (default) it is the scale of the pair-detuning Lorentzian, so
    the interference envelope decays as ``exp(-GammaHOM * |tau|)`` and the
    pair FWHM is ``2 * GammaHOM``; with ``"fwhm"`` it is the pair FWHM itself.
    The reported uncertainty on GammaHOM/2pi in the source data reads
    "0.4 +- 1 GHz", which is probably a typo for +- 0.1 GHz; the default
    here is the fitted decay time 0.42 ns, i.e. GammaHOM = 1 / 0.42 ns.
    """

    lifetime_T1: float = 4.6e-9
    zpl_frequency: float = ZPL_OMEGA
    linewidth_Gamma: float = TWO_PI * 2.8e9
    hom_linewidth_GammaHOM: float = 1.0 / 0.42e-9
    hom_width_convention: str = "hwhm"
    branching_zpl: float = 0.18
    quantum_efficiency: float = 1.0
    metastable: Optional[Metastable] = None
    drift_block: float = 1e-3
    truncation: Optional[float] = DEFAULT_TRUNCATION

    def __post_init__(self):
        if not self.lifetime_T1 > 0:
            raise ParameterError(f"lifetime_T1 must be positive, got {self.lifetime_T1}")
        if self.linewidth_Gamma < 0 or self.hom_linewidth_GammaHOM < 0:
            raise ParameterError("linewidths must be non-negative")
        if self.hom_width_convention not in ("hwhm", "fwhm"):
            raise ParameterError(f"unknown width convention {self.hom_width_convention!r}")
        if self.pair_fwhm > 2.0 * self.linewidth_Gamma * (1 + 1e-12):
            raise ParameterError(
                "pair detuning FWHM exceeds twice the single-photon linewidth "
                f"({self.pair_fwhm:.4g} > 2 * {self.linewidth_Gamma:.4g})"
            )
        if not 0 < self.quantum_efficiency <= 1:
            raise ParameterError(f"quantum_efficiency must lie in (0, 1], got {self.quantum_efficiency}")
        if not 0 < self.branching_zpl <= 1:
            raise ParameterError(f"branching_zpl must lie in (0, 1], got {self.branching_zpl}")
        if self.drift_block <= 0:
            raise ParameterError("drift_block must be positive")
        if self.truncation is not None and self.truncation <= 0:
            raise ParameterError("truncation must be positive or None")

    @property
    def pair_fwhm(self):
        """FWHM of the detuning between two photons in one drift block."""
        if self.hom_width_convention == "hwhm":
            return 2.0 * self.hom_linewidth_GammaHOM
        return self.hom_linewidth_GammaHOM

    @property
    def shelving_prob(self):
        return 0.0 if self.metastable is None else self.metastable.shelving_prob


@dataclass(frozen=True)
class PulseTrainParams:
    """Downsampled pulse train.

    The underlying laser fires every ``repetition_period / 2``. Even slots are
    the kept pulses; odd slots are the suppressed pulses that leak through
    with ``10 ** (-extinction_dB / 10)`` of the kept-pulse excitation
    probability. ``n_pulses`` counts kept pulses, so a train spans
    ``2 * n_pulses`` slots.
    """

    repetition_period: float = 25e-9
    n_pulses: int = 1000
    extinction_dB: float = 8.0
    excitation_prob: float = 1.0

    def __post_init__(self):
        if not self.repetition_period > 0:
            raise ParameterError("repetition_period must be positive")
        if self.extinction_dB < 0:
            raise ParameterError("extinction_dB must be >= 0")
        if self.n_pulses < 0:
            raise ParameterError("n_pulses must be >= 0")
        if not 0 <= self.excitation_prob <= 1:
            raise ParameterError("excitation_prob must lie in [0, 1]")
        if self.period_ps % 2:
            raise ParameterError("repetition_period must be an even number of picoseconds")

    @property
    def period_ps(self):
        return int(round(self.repetition_period * _rng.PS_PER_S))

    @property
    def slot_ps(self):
        return self.period_ps // 2

    @property
    def leak_fraction(self):
        if np.isinf(self.extinction_dB):
            return 0.0
        return 10.0 ** (-self.extinction_dB / 10.0)


@dataclass(frozen=True)
class PhotonRecord:
    emit_time: int
    frequency_offset: float
    pulse_index: int
    polarization: float = 0.0


@dataclass
class PhotonStream:
    """Columnar photon records.

    ``pulse_index`` is the laser slot index for pulsed streams (even = kept
    pulse) and -1 for CW streams. Records are in generation order, which for
    pulsed streams is pulse order; emission times need not be monotone.
    """

    emit_time: np.ndarray
    frequency_offset: np.ndarray
    pulse_index: np.ndarray
    polarization: np.ndarray
    slot_ps: int = 0
    seed: Optional[int] = None
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.emit_time)

    def __getitem__(self, i):
        return PhotonRecord(
            int(self.emit_time[i]),
            float(self.frequency_offset[i]),
            int(self.pulse_index[i]),
            float(self.polarization[i]),
        )

    def __iter__(self) -> Iterator[PhotonRecord]:
        for i in range(len(self)):
            yield self[i]

    @property
    def pulse_time(self):
        """Time of the exciting laser slot, in ps (pulsed streams only)."""
        return self.pulse_index * np.int64(self.slot_ps)

    def select(self, mask):
        return PhotonStream(
            self.emit_time[mask],
            self.frequency_offset[mask],
            self.pulse_index[mask],
            self.polarization[mask],
            self.slot_ps,
            self.seed,
            dict(self.meta),
        )

    def sorted_by_time(self):
        order = np.argsort(self.emit_time, kind="stable")
        return self.select(order)


# ---------------------------------------------------------------------------
# samplers


def emission_delay_from_uniform(u, T1):
    """Inverse-CDF map ``-T1 * ln(u)`` for ``u`` in (0, 1]."""
    return -T1 * np.log(u)


def sample_emission_delay(rng, T1, size=None):
    """Exponential emission delay with mean ``T1``."""
    if not T1 > 0:
        raise ParameterError(f"T1 must be positive, got {T1}")
    # 1 - U(0,1) lies in (0, 1], so log never sees zero
    u = 1.0 - rng.random(size)
    return emission_delay_from_uniform(u, T1)


def _truncated_cdf_bounds(truncation):
    if truncation is None:
        return 0.0, 1.0
    # CDF of a unit-FWHM Lorentzian at +-truncation
    lo = 0.5 + np.arctan(-2.0 * truncation) / np.pi
    return lo, 1.0 - lo


def lorentzian_quantile(q, center, fwhm, truncation=DEFAULT_TRUNCATION):
    """Quantile function of a (possibly truncated) Lorentzian."""
    lo, hi = _truncated_cdf_bounds(truncation)
    p = lo + np.asarray(q, dtype=float) * (hi - lo)
    return center + 0.5 * fwhm * np.tan(np.pi * (p - 0.5))


def sample_zpl_frequency(rng, center, fwhm, size=None, truncation=DEFAULT_TRUNCATION):
    """Lorentzian draw with the given FWHM, truncated at ``+-truncation * fwhm``.

    Uses the exact inverse CDF of the truncated distribution, so no draw is
    ever rejected. ``fwhm == 0`` returns ``center`` exactly.
    """
    if fwhm < 0:
        raise ParameterError(f"fwhm must be non-negative, got {fwhm}")
    if fwhm == 0:
        if size is None:
            return float(center)
        return np.full(size, float(center))
    return lorentzian_quantile(rng.random(size), center, fwhm, truncation)


def spectral_offsets(rng, e: EmitterParams, times_ps):
    """Frequency offsets for photons emitted at ``times_ps`` (two-scale model)."""
    times_ps = np.asarray(times_ps, dtype=np.int64)
    n = len(times_ps)
    if n == 0:
        return np.zeros(0)
    pair = e.pair_fwhm
    center_fwhm = max(e.linewidth_Gamma - 0.5 * pair, 0.0)
    block_ps = max(int(round(e.drift_block * _rng.PS_PER_S)), 1)
    blocks = times_ps // block_ps
    b0 = int(blocks.min())
    n_blocks = int(blocks.max()) - b0 + 1
    centers = sample_zpl_frequency(rng, 0.0, center_fwhm, n_blocks, e.truncation)
    eps = sample_zpl_frequency(rng, 0.0, 0.5 * pair, n, e.truncation)
    return centers[blocks - b0] + eps


# ---------------------------------------------------------------------------
# streams


def pulsed_emission_stream(e: EmitterParams, p: PulseTrainParams, seed, zpl_only=False):
    """Photon stream under pulsed excitation.

    Each laser slot excites the emitter at most once and yields at most one
    photon. Kept (even) slots fire with ``excitation_prob``; suppressed (odd)
    slots with ``excitation_prob * 10 ** (-extinction_dB / 10)``. With
    ``zpl_only`` photons are additionally thinned by the ZPL branching ratio.
    """
    g_em = _rng.substream(seed, _rng.EMISSION)
    g_fr = _rng.substream(seed, _rng.FREQUENCY)
    n_slots = 2 * p.n_pulses
    slots = np.arange(n_slots, dtype=np.int64)
    fire = np.where(slots % 2 == 0, p.excitation_prob, p.excitation_prob * p.leak_fraction)
    keep_prob = fire * e.quantum_efficiency * (e.branching_zpl if zpl_only else 1.0)
    u = g_em.random(n_slots)
    idx = slots[u < keep_prob]
    delay = sample_emission_delay(g_em, e.lifetime_T1, len(idx))
    emit = idx * np.int64(p.slot_ps) + _rng.to_ps(delay)
    freq = spectral_offsets(g_fr, e, idx * np.int64(p.slot_ps))
    return PhotonStream(
        emit,
        freq,
        idx,
        np.zeros(len(idx)),
        slot_ps=p.slot_ps,
        seed=seed,
        meta={"kind": "pulsed", "n_slots": n_slots},
    )


def cw_emission_stream(e: EmitterParams, rate, duration, seed, zpl_only=False):
    """Photon stream under continuous-wave excitation.

    Renewal process: after each decay the emitter waits an exponential
    excitation time (mean ``1 / rate``), then decays after an exponential
    lifetime. With probability ``shelving_prob`` the decay goes to the
    metastable shelf instead of emitting, and the emitter stays dark for an
    exponential ``shelf_lifetime`` before it can be excited again. Other
    decays emit a photon with probability ``quantum_efficiency``.
    """
    if not rate > 0:
        raise ParameterError(f"rate must be positive, got {rate}")
    if duration < 0:
        raise ParameterError("duration must be non-negative")
    g_em = _rng.substream(seed, _rng.EMISSION)
    g_fr = _rng.substream(seed, _rng.FREQUENCY)
    p_shelf = e.shelving_prob
    tau_s = e.metastable.shelf_lifetime if e.metastable is not None else 0.0
    mean_cycle = 1.0 / rate + e.lifetime_T1 + p_shelf * tau_s
    chunk = int(min(max(duration / mean_cycle * 1.05 + 64, 64), 2_000_000))
    pieces = []
    t0 = 0.0
    prev_shelved = False
    while duration > 0:
        dt = g_em.exponential(1.0 / rate, chunk) + g_em.exponential(e.lifetime_T1, chunk)
        if p_shelf > 0:
            shelved = g_em.random(chunk) < p_shelf
            dark = g_em.exponential(tau_s, chunk)
            # a shelving decay delays the next excitation by the shelf time
            dt[1:] += np.where(shelved[:-1], dark[1:], 0.0)
            if prev_shelved:
                dt[0] += dark[0]
            prev_shelved = bool(shelved[-1])
        else:
            shelved = np.zeros(chunk, dtype=bool)
        t = t0 + np.cumsum(dt)
        inside = t < duration
        pieces.append(t[inside & ~shelved])
        if not inside.all():
            break
        t0 = t[-1]
    times = np.concatenate(pieces) if pieces else np.zeros(0)
    if e.quantum_efficiency < 1 or zpl_only:
        keep = e.quantum_efficiency * (e.branching_zpl if zpl_only else 1.0)
        times = times[g_em.random(len(times)) < keep]
    emit = _rng.to_ps(times)
    freq = spectral_offsets(g_fr, e, emit)
    return PhotonStream(
        emit,
        freq,
        np.full(len(emit), -1, dtype=np.int64),
        np.zeros(len(emit)),
        seed=seed,
        meta={"kind": "cw", "rate": rate, "duration": duration},
    )


def cw_g2_rate_equations(tau, e: EmitterParams, rate):
    """g2(tau) of the CW three-level model from its rate equations.

    States (ground, excited, shelf). The excited state decays at 1/T1, to
    the shelf with probability p and radiatively to ground otherwise, so a
    photon always leaves the system in ground. g2(tau) is the excited-state
    population at ``tau`` after starting in ground, divided by its
    steady-state value.
    """
    tau = np.abs(np.atleast_1d(np.asarray(tau, dtype=float)))
    p = e.shelving_prob
    g = 1.0 / e.lifetime_T1
    if p == 0:
        return 1.0 - np.exp(-(rate + g) * tau)
    ks = 1.0 / e.metastable.shelf_lifetime
    # columns: from-state; d/dt x = M x
    M = np.array(
        [
            [-rate, (1 - p) * g, ks],
            [rate, -g, 0.0],
            [0.0, p * g, -ks],
        ]
    )
    w, v = np.linalg.eig(M)
    # steady state: eigenvector of the zero eigenvalue
    k0 = int(np.argmin(np.abs(w)))
    ss = np.real(v[:, k0])
    ss = ss / ss.sum()
    x0 = np.array([1.0, 0.0, 0.0])
    out = np.empty_like(tau)
    for i, t in enumerate(tau):
        out[i] = (expm(M * t) @ x0)[1] / ss[1]
    return out


def saturation_rate(P, R_sat, P_sat, alpha=0.0, form="printed"):
    """Emission rate versus excitation power.

    ``form="printed"`` evaluates ``R_sat / (1 + P / P_sat) + alpha * P``, the
    expression as published; note it equals ``R_sat`` at ``P = 0``.
    ``form="standard"`` evaluates the textbook saturation curve
    ``R_sat / (1 + P_sat / P) + alpha * P``.
    """
    if not P_sat > 0:
        raise ParameterError(f"P_sat must be positive, got {P_sat}")
    P = np.asarray(P, dtype=float)
    if np.any(P < 0):
        raise ParameterError("power must be non-negative")
    if form == "printed":
        out = R_sat / (1.0 + P / P_sat) + alpha * P
    elif form == "standard":
        with np.errstate(divide="ignore"):
            out = R_sat * P / (P + P_sat) + alpha * P
    else:
        raise ParameterError(f"unknown saturation form {form!r}")
    return out if out.ndim else float(out)
