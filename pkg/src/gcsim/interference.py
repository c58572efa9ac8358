"""Time-resolved two-photon interference of exponential wavepackets.

Two photons with lifetime ``T1`` and detuning ``delta`` meet at a 50:50
beamsplitter. Their cross-port joint detection density is

    P(t0, t0 + tau) = exp(-(2 t0 + tau) / T1) / (2 T1**2) * (1 - chi cos(delta tau))

and integrating over ``t0`` gives ``exp(-|tau|/T1) / (4 T1) * (1 - chi cos(delta tau))``.
Averaging the cosine over a Lorentzian detuning of half-width ``gamma_hom``
turns it into ``exp(-gamma_hom |tau|)``; the measured curve is that
envelope blurred by Gaussian timing jitter plus a flat background.

All times share one unit (seconds in the pipelines), and ``delta`` and
``gamma_hom`` are in radians per that unit.
"""

from dataclasses import dataclass

import numpy as np

from .emitter import DEFAULT_TRUNCATION, lorentzian_quantile, sample_emission_delay
from .errors import ParameterError


@dataclass(frozen=True)
class HomModelParams:
    T1: float = 4.6e-9
    chi: float = 1.0
    gamma_hom: float = 1.0 / 0.42e-9
    jitter_sigma: float = 252e-12
    background: float = 0.0

    def __post_init__(self):
        if not 0 <= self.chi <= 1:
            raise ParameterError(f"chi must lie in [0, 1], got {self.chi}")
        if not self.T1 > 0:
            raise ParameterError("T1 must be positive")
        if self.gamma_hom < 0 or self.jitter_sigma < 0 or self.background < 0:
            raise ParameterError("rates, jitter and background must be non-negative")


def joint_density(t0, tau, delta, T1, chi):
    """Cross-port joint detection density at times ``t0`` and ``t0 + tau``.

    Zero outside the support ``t0 >= 0, t0 + tau >= 0``.
    """
    t0 = np.asarray(t0, dtype=float)
    tau = np.asarray(tau, dtype=float)
    inside = (t0 >= 0) & (t0 + tau >= 0)
    with np.errstate(over="ignore"):
        val = np.exp((-2.0 * t0 - tau) / T1) / (2.0 * T1**2) * (1.0 - chi * np.cos(delta * tau))
    out = np.where(inside, val, 0.0)
    return out if out.ndim else float(out)


def p_joint_tau(tau, delta, T1, chi):
    """Cross-port coincidence density versus detection separation (symmetric in tau)."""
    if not T1 > 0:
        raise ParameterError("T1 must be positive")
    tau = np.asarray(tau, dtype=float)
    out = np.exp(-np.abs(tau) / T1) / (4.0 * T1) * (1.0 - chi * np.cos(delta * tau))
    return out if out.ndim else float(out)


def g2_hom_unconvolved(tau, T1, chi, gamma_hom):
    """Detuning-averaged coincidence density, before jitter."""
    a = np.abs(np.asarray(tau, dtype=float))
    return np.exp(-a / T1) / (4.0 * T1) * (1.0 - chi * np.exp(-gamma_hom * a))


def default_grid_step(T1, jitter_sigma):
    if jitter_sigma > 0:
        return min(jitter_sigma / 10.0, T1 / 100.0)
    return T1 / 100.0


def jitter_kernel(jitter_sigma, step=None, n_sigma=6.0):
    """Quadrature nodes and weights of the Gaussian jitter kernel.

    Weights are normalized to sum to one, so convolving preserves area.
    """
    if step is None:
        step = jitter_sigma / 10.0
    half = int(np.ceil(n_sigma * jitter_sigma / step))
    s = np.arange(-half, half + 1) * step
    w = np.exp(-0.5 * (s / jitter_sigma) ** 2)
    w[0] *= 0.5
    w[-1] *= 0.5
    return s, w / w.sum()


def g2_hom_model(tau, m: HomModelParams, grid_step=None):
    """Jitter-convolved interference curve plus background.

    The Gaussian convolution is a dense trapezoid quadrature on a grid of
    step ``grid_step`` (default ``min(sigma/10, T1/100)``) covering +-6 sigma.
    """
    tau = np.asarray(tau, dtype=float)
    if m.jitter_sigma == 0:
        out = g2_hom_unconvolved(tau, m.T1, m.chi, m.gamma_hom) + m.background
        return out if out.ndim else float(out)
    step = grid_step or default_grid_step(m.T1, m.jitter_sigma)
    s, w = jitter_kernel(m.jitter_sigma, step)
    flat = np.atleast_1d(tau).ravel()
    out = np.empty_like(flat)
    # chunk to bound the temporary (n_tau x n_kernel) array
    for lo in range(0, len(flat), 4096):
        t = flat[lo : lo + 4096]
        out[lo : lo + 4096] = g2_hom_unconvolved(t[:, None] - s[None, :], m.T1, m.chi, m.gamma_hom) @ w
    out = out.reshape(tau.shape) + m.background
    return out if out.ndim else float(out)


def g2_hom_binned(edges, m: HomModelParams, subsamples=8, grid_step=None):
    """Bin-averaged model: mean of ``g2_hom_model`` over each ``[lo, hi)``."""
    edges = np.asarray(edges, dtype=float)
    lo, hi = edges[:-1], edges[1:]
    frac = (np.arange(subsamples) + 0.5) / subsamples
    pts = lo[:, None] + (hi - lo)[:, None] * frac[None, :]
    return g2_hom_model(pts, m, grid_step).mean(axis=1)


def lorentzian_pair_detuning(rng, gamma_hom, size=None, convention="hwhm", truncation=DEFAULT_TRUNCATION):
    """Pair detuning drawn from a Lorentzian centered at zero.

    With the default ``"hwhm"`` convention ``gamma_hom`` is the half width,
    so the FWHM is ``2 * gamma_hom`` and the mean of ``cos(delta tau)`` is
    ``exp(-gamma_hom |tau|)``. Draws are truncated at ``+-truncation * FWHM``.
    """
    if gamma_hom < 0:
        raise ParameterError("gamma_hom must be non-negative")
    if convention not in ("hwhm", "fwhm"):
        raise ParameterError(f"unknown width convention {convention!r}")
    fwhm = 2.0 * gamma_hom if convention == "hwhm" else gamma_hom
    if fwhm == 0:
        return 0.0 if size is None else np.zeros(size)
    return lorentzian_quantile(rng.random(size), 0.0, fwhm, truncation)


def cross_port_probability(delta, tau, chi, bs_transmittance=0.5):
    """Probability that two photons entering opposite BS inputs exit opposite ports.

    ``T**2 + R**2 - 2 R T chi cos(delta tau)``; equals
    ``(1 - chi cos(delta tau)) / 2`` for a balanced splitter.
    """
    T = bs_transmittance
    R = 1.0 - T
    return T * T + R * R - 2.0 * R * T * chi * np.cos(np.asarray(delta) * np.asarray(tau))


def sample_coincidence(rng, delta, T1, chi, size=None):
    """Rejection-sampling realization of the cross-port density.

    Draws independent exponential detection times ``t_a, t_b`` and accepts
    the pair as a cross-port coincidence with probability
    ``(1 - chi cos(delta (t_b - t_a))) / 2``. Returns ``tau = t_b - t_a`` on
    acceptance and None otherwise; with ``size`` returns ``(tau, accepted)``
    arrays.
    """
    n = 1 if size is None else size
    ta = sample_emission_delay(rng, T1, n)
    tb = sample_emission_delay(rng, T1, n)
    tau = tb - ta
    acc = rng.random(n) < cross_port_probability(delta, tau, chi)
    if size is None:
        return float(tau[0]) if acc[0] else None
    return tau, acc


def resolve_pairs(rng, tau, delta, chi, bs_transmittance=0.5):
    """Output ports for interfering pairs at the second beamsplitter.

    The first photon is the long-arm one, which reaches port A by
    reflection. Returns ``(port_first, port_second)`` arrays (0 = A, 1 = B).
    Cross-port events put the photons on opposite ports, the first on A with
    probability ``R**2 / (R**2 + T**2)``; otherwise both leave through the
    same port, A or B with equal probability.
    """
    tau = np.asarray(tau, dtype=float)
    n = len(tau)
    T = bs_transmittance
    R = 1.0 - T
    cross = rng.random(n) < cross_port_probability(delta, tau, chi, T)
    u = rng.random(n)
    p_first_a = np.where(cross, R * R / (R * R + T * T), 0.5)
    first = np.where(u < p_first_a, 0, 1).astype(np.int8)
    second = np.where(cross, 1 - first, first).astype(np.int8)
    return first, second


def visibility(g2_par_0, g2_perp_0):
    """Two-photon interference visibility ``1 - g2_par(0) / g2_perp(0)``."""
    if not g2_perp_0 > 0:
        raise ParameterError("g2_perp_0 must be positive")
    return 1.0 - g2_par_0 / g2_perp_0
