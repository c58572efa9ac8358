"""Linear decomposition of pulsed correlation histograms into peaks.

Neighbouring peaks overlap when the exponential tails are comparable to the
peak spacing, so window sums mix them. Here every peak is modelled by the
same shape (two-sided exponential of the lifetime, blurred by the pair
jitter) and the peak areas plus a flat background are found by weighted
linear least squares.
"""

import numpy as np

from ..errors import ParameterError
from ..interference import HomModelParams, g2_hom_binned
from ..rng import PS_PER_S


def peak_template(edges_ps, center_ps, T1, pair_jitter):
    """Fraction of a unit-area peak at ``center_ps`` falling in each bin."""
    e = (np.asarray(edges_ps, dtype=float) - center_ps) / PS_PER_S
    # chi = 0 gives exp(-|t|/T1) / (4 T1), i.e. half a unit-area Laplace peak
    m = HomModelParams(T1, 0.0, 0.0, pair_jitter, 0.0)
    return 2.0 * g2_hom_binned(e, m, subsamples=4) * np.diff(e)


def fit_peak_amplitudes(h, spacing_ps, T1, pair_jitter, margin=None, mask=None, all_peaks=False):
    """Areas of the peaks at ``k * spacing_ps`` and the flat background per bin.

    Returns ``(ks, areas, area_sigmas, background, background_sigma)``.
    Peaks centered up to ``margin`` (default ``6 T1``) outside the histogram
    are included so their tails are accounted for; they are returned only
    with ``all_peaks``. ``mask`` selects the bins entering the fit, e.g. to
    leave out a peak whose shape differs from the template.
    """
    if spacing_ps <= 0:
        raise ParameterError("spacing must be positive")
    margin = 6 * T1 * PS_PER_S if margin is None else margin
    lo, hi = h.bin_edges[0], h.bin_edges[-1]
    ks = np.arange(int(np.ceil((lo - margin) / spacing_ps)), int(np.floor((hi + margin) / spacing_ps)) + 1)
    cols = [peak_template(h.bin_edges, k * spacing_ps, T1, pair_jitter) for k in ks]
    cols.append(np.ones(h.n_bins))
    A = np.column_stack(cols)
    y = h.counts.astype(float)
    w = 1.0 / np.sqrt(np.maximum(y, 1.0))
    if mask is not None:
        w = np.where(mask, w, 0.0)
    Aw = A * w[:, None]
    coef, *_ = np.linalg.lstsq(Aw, y * w, rcond=None)
    cov = np.linalg.pinv(Aw.T @ Aw)
    sig = np.sqrt(np.clip(np.diag(cov), 0, None))
    inside = np.ones(len(ks), bool) if all_peaks else (ks * spacing_ps >= lo) & (ks * spacing_ps < hi)
    return ks[inside], coef[:-1][inside], sig[:-1][inside], float(coef[-1]), float(sig[-1])


def leak_fraction_from_ratio(rho):
    """Invert ``rho = 2 r / (1 + r**2)`` for ``r`` in [0, 1].

    ``rho`` is the area of a peak at an odd multiple of the laser slot over
    the area of a peak at an even multiple (away from zero delay), and ``r``
    the per-pulse excitation ratio of suppressed to kept pulses.
    """
    if not 0 <= rho <= 1:
        raise ParameterError(f"area ratio must lie in [0, 1], got {rho}")
    # rationalized root; (1 - sqrt(1 - rho**2)) / rho cancels for small rho
    return float(rho / (1.0 + np.sqrt(1.0 - rho * rho)))


def peak_sum(edges_ps, ks, areas, spacing_ps, T1, pair_jitter):
    """Expected counts per bin from peaks of the given areas."""
    out = np.zeros(len(edges_ps) - 1)
    for k, a in zip(ks, areas):
        out += a * peak_template(edges_ps, k * spacing_ps, T1, pair_jitter)
    return out
