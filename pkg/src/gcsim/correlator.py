"""Exact coincidence histograms between two time-tag streams.

Delay convention: ``tau = t_b - t_a``. Bins are half-open ``[lo, hi)``.

Two exact kernels are used:

* a sliding two-pointer window for linear bins, O(N * w) with ``w`` the
  mean number of partner tags inside ``+-max_delay``;
* a cumulative counter for arbitrary (e.g. logarithmic) edges: for each
  edge ``e`` it counts pairs with ``tau < e`` in one merge-like pass, so the
  cost is O(n_edges * (N_a + N_b)) regardless of how far the edges reach.
  This is what makes delays of seconds affordable.

Neither kernel approximates; both agree with all-pairs counting exactly.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numba
import numpy as np

from . import rng as _rng
from .errors import DataError, NormalizationError, ParameterError


@dataclass
class CorrelationHistogram:
    """Coincidence counts versus delay.

    ``norm_factor`` is the per-bin divisor that maps counts to g2 (None while
    raw); ``g2_sigma`` holds the matching one-sigma uncertainty.
    """

    bin_edges: np.ndarray
    counts: np.ndarray
    channel_pair: tuple = (0, 1)
    total_tags: tuple = (0, 0)
    acquisition_span: int = 0
    normalization: str = "raw"
    norm_factor: Optional[np.ndarray] = None
    g2_sigma: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    @property
    def n_bins(self):
        return len(self.counts)

    @property
    def bin_widths(self):
        return np.diff(self.bin_edges)

    @property
    def bin_centers(self):
        e = self.bin_edges
        if self.meta.get("binning") == "log":
            return np.sqrt(e[:-1] * e[1:])
        return 0.5 * (e[:-1] + e[1:])

    @property
    def g2(self):
        if self.norm_factor is None:
            return None
        return self.counts / self.norm_factor

    def restrict(self, lo, hi):
        """Sub-histogram of the bins lying entirely inside ``[lo, hi]``."""
        e = self.bin_edges
        keep = np.flatnonzero((e[:-1] >= lo) & (e[1:] <= hi))
        if len(keep) == 0:
            raise ParameterError("no bins inside the requested range")
        s = slice(keep[0], keep[-1] + 1)
        return replace(
            self,
            bin_edges=e[keep[0] : keep[-1] + 2],
            counts=self.counts[s],
            norm_factor=None if self.norm_factor is None else np.broadcast_to(self.norm_factor, e[:-1].shape)[s],
            g2_sigma=None if self.g2_sigma is None else self.g2_sigma[s],
            meta=dict(self.meta),
        )


# ---------------------------------------------------------------------------
# kernels


@numba.njit(cache=True, nogil=True)
def _window_kernel(a, b, lo2, width2, nbins, counts):
    # lo2, width2: twice the lower edge and bin width, so half-integer edges
    # stay in integer arithmetic
    nb = len(b)
    span2 = nbins * width2
    j0 = 0
    for i in range(len(a)):
        ta = a[i]
        while j0 < nb and 2 * (b[j0] - ta) < lo2:
            j0 += 1
        j = j0
        while j < nb:
            d2 = 2 * (b[j] - ta) - lo2
            if d2 >= span2:
                break
            counts[d2 // width2] += 1
            j += 1


@numba.njit(cache=True, nogil=True)
def _cumulative_kernel(a, b, thresholds, out):
    # out[k] = #{(i, j): b[j] - a[i] < thresholds[k]}
    nb = len(b)
    for k in range(len(thresholds)):
        c = thresholds[k]
        j = 0
        total = 0
        for i in range(len(a)):
            lim = a[i] + c
            while j < nb and b[j] < lim:
                j += 1
            total += j
        out[k] = total


def _check_sorted(x, name):
    if len(x) > 1 and np.any(x[1:] < x[:-1]):
        raise DataError(f"stream {name} is not sorted")


def _as_ts(x):
    if hasattr(x, "timestamp"):
        x = x.timestamp
    return np.ascontiguousarray(x, dtype=np.int64)


def _chunks(n, parts):
    parts = max(1, min(int(parts), max(n, 1)))
    bounds = np.linspace(0, n, parts + 1).astype(int)
    return list(zip(bounds[:-1], bounds[1:]))


def _run_parallel(fn, pieces, threads):
    if threads <= 1 or len(pieces) == 1:
        return [fn(p) for p in pieces]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, pieces))


def linear_edges(bin_width, max_delay):
    """Edges of the ``2K + 1`` bins centered on multiples of ``bin_width``."""
    K = max_delay // bin_width
    return (np.arange(-K, K + 2) - 0.5) * bin_width


def _span(a, b, span):
    if span is not None:
        return int(span)
    ts = [x for x in (a, b) if len(x)]
    if not ts:
        return 0
    return int(max(x[-1] for x in ts) - min(x[0] for x in ts))


def cross_correlate(a, b, bin_width, max_delay, threads=1, channel_pair=(0, 1), span=None):
    """Histogram of ``t_b - t_a`` in bins of ``bin_width`` ps centered on
    ``k * bin_width`` for ``|k| <= max_delay / bin_width``.

    Inputs are sorted int64 ps arrays (or TagStreams). With ``threads > 1``
    stream ``a`` is split into contiguous chunks correlated concurrently and
    the partial histograms summed; the result is identical.
    """
    a, b = _as_ts(a), _as_ts(b)
    bin_width, max_delay = int(bin_width), int(max_delay)
    if bin_width <= 0:
        raise ParameterError("bin_width must be positive")
    if max_delay < 0 or max_delay % bin_width:
        raise ParameterError("max_delay must be a non-negative multiple of bin_width")
    _check_sorted(a, "a")
    _check_sorted(b, "b")
    K = max_delay // bin_width
    nbins = 2 * K + 1
    lo2 = -(2 * K + 1) * bin_width

    def work(rng_):
        c = np.zeros(nbins, dtype=np.int64)
        _window_kernel(a[rng_[0] : rng_[1]], b, np.int64(lo2), np.int64(2 * bin_width), nbins, c)
        return c

    parts = _run_parallel(work, _chunks(len(a), threads), threads)
    counts = np.sum(parts, axis=0) if parts else np.zeros(nbins, dtype=np.int64)
    return CorrelationHistogram(
        linear_edges(bin_width, max_delay),
        counts.astype(np.int64),
        tuple(channel_pair),
        (len(a), len(b)),
        _span(a, b, span),
        meta={"binning": "linear", "bin_width_ps": bin_width, "max_delay_ps": max_delay},
    )


def histogram_edges(a, b, edges, threads=1, channel_pair=(0, 1), span=None):
    """Exact counts of ``t_b - t_a`` in arbitrary sorted edges (ps)."""
    a, b = _as_ts(a), _as_ts(b)
    edges = np.asarray(edges, dtype=float)
    if len(edges) < 2 or np.any(np.diff(edges) <= 0):
        raise ParameterError("edges must be strictly increasing")
    _check_sorted(a, "a")
    _check_sorted(b, "b")
    # tau is integral, so tau < e  <=>  tau < ceil(e)
    thresholds = np.ceil(edges).astype(np.int64)

    def work(rng_):
        out = np.zeros(len(thresholds), dtype=np.int64)
        _cumulative_kernel(a[rng_[0] : rng_[1]], b, thresholds, out)
        return out

    parts = _run_parallel(work, _chunks(len(a), threads), threads)
    cum = np.sum(parts, axis=0) if parts else np.zeros(len(thresholds), dtype=np.int64)
    return CorrelationHistogram(
        edges,
        np.diff(cum).astype(np.int64),
        tuple(channel_pair),
        (len(a), len(b)),
        _span(a, b, span),
        meta={"binning": "edges"},
    )


def log_edges(decades, points_per_decade):
    """Logarithmic edges in integer ps spanning ``10**d0 .. 10**d1`` seconds."""
    d0, d1 = decades
    if not d1 > d0:
        raise ParameterError("decades must be increasing")
    if points_per_decade < 1:
        raise ParameterError("points_per_decade must be >= 1")
    n = int(round((d1 - d0) * points_per_decade)) + 1
    e = np.unique(np.round(np.logspace(d0, d1, n) * _rng.PS_PER_S))
    e = e[e >= 1]
    if len(e) < 2:
        raise ParameterError("decade range too narrow for picosecond edges")
    return e


def multiscale_g2(a, b, decades, points_per_decade=10, threads=1, channel_pair=(0, 1), span=None):
    """Exact coincidences in logarithmic delay bins (positive delays).

    ``decades = (d0, d1)`` gives the range ``10**d0 .. 10**d1`` seconds. Swap
    the streams for negative delays.
    """
    h = histogram_edges(a, b, log_edges(decades, points_per_decade), threads, channel_pair, span)
    h.meta.update({"binning": "log", "decades": tuple(decades), "points_per_decade": points_per_decade})
    return h


def brute_force_counts(a, b, edges):
    """All-pairs reference count, O(N_a * N_b). For tests and fixtures."""
    a, b = _as_ts(a), _as_ts(b)
    if len(a) == 0 or len(b) == 0:
        return np.zeros(len(edges) - 1, dtype=np.int64)
    tau = (b[None, :] - a[:, None]).ravel()
    k = np.searchsorted(np.asarray(edges, dtype=float), tau, side="right") - 1
    k = k[(k >= 0) & (k < len(edges) - 1)]
    return np.bincount(k, minlength=len(edges) - 1).astype(np.int64)


# ---------------------------------------------------------------------------
# normalization


def _overlap_integral(lo, hi, T):
    """Integral of ``max(T - |tau|, 0)`` over ``[lo, hi]``."""

    def F(x):
        # antiderivative of T - |x| on |x| <= T, clamped beyond
        x = np.clip(x, -T, T)
        return T * x - 0.5 * x * np.abs(x)

    return F(hi) - F(lo)


def normalize_g2(
    h: CorrelationHistogram,
    mode="cw",
    period=None,
    half_window=None,
    exclude=2,
    min_far_peaks=10,
    finite_span=True,
):
    """Normalize a raw histogram to g2.

    ``cw``: divide by the accidental level ``N_a N_b / T**2 * integral of
    (T - |tau|)`` over each bin (``finite_span=False`` uses the plain
    ``r_a r_b w T``). The uncertainty combines pair-count shot noise with the
    rate fluctuations of the two streams,
    ``sigma_g2**2 = 1/E + 1/N_a + 1/N_b`` at the accidental level ``E``.

    ``pulsed``: divide by the mean area of side peaks with ``|k| > exclude``
    (peaks at ``k * period``, integrated over ``+-half_window``); at least
    ``min_far_peaks`` such peaks must be in range.
    """
    na, nb = h.total_tags
    if mode == "cw":
        T = float(h.acquisition_span)
        if na == 0 or nb == 0 or T <= 0:
            raise NormalizationError("cw normalization needs non-zero rates and span")
        lo, hi = h.bin_edges[:-1], h.bin_edges[1:]
        if finite_span:
            expo = na * nb / T**2 * _overlap_integral(lo, hi, T)
        else:
            expo = na * nb / T * (hi - lo)
        if np.any(expo <= 0):
            raise NormalizationError("bins beyond the acquisition span")
        sigma = np.sqrt(1.0 / expo + 1.0 / na + 1.0 / nb)
        return replace(h, normalization="normalized", norm_factor=expo, g2_sigma=sigma, meta={**h.meta, "mode": "cw"})
    if mode == "pulsed":
        if period is None or half_window is None:
            raise ParameterError("pulsed normalization needs period and half_window")
        areas = peak_areas(h, period, half_window, use_g2=False)
        far = [a for k, a in areas if abs(k) > exclude]
        if len(far) < min_far_peaks:
            raise NormalizationError(f"only {len(far)} far side peaks in range, need {min_far_peaks}")
        ref = float(np.mean(far))
        if ref <= 0:
            raise NormalizationError("far side peaks are empty")
        factor = np.full(h.n_bins, ref)
        sigma = np.sqrt(np.maximum(h.counts, 1)) / ref
        meta = {**h.meta, "mode": "pulsed", "period_ps": period, "half_window_ps": half_window, "far_peak_area": ref}
        return replace(h, normalization="normalized", norm_factor=factor, g2_sigma=sigma, meta=meta)
    raise ParameterError(f"unknown normalization mode {mode!r}")


def peak_areas(h: CorrelationHistogram, period, half_window, use_g2=True, with_errors=False):
    """Integrate the histogram over ``[k*period - half_window, k*period + half_window)``.

    Bins are assigned by their centers. Returns ``[(k, area), ...]`` (or
    ``(k, area, sigma)`` with ``with_errors``) for every peak whose window
    lies inside the histogram. Uses g2 values when normalized and
    ``use_g2`` is set, raw counts otherwise.
    """
    if period <= 0 or half_window <= 0:
        raise ParameterError("period and half_window must be positive")
    if 2 * half_window > period:
        raise ParameterError("peak windows overlap (2 * half_window > period)")
    centers = h.bin_centers
    vals = h.counts.astype(float)
    var = h.counts.astype(float)
    if use_g2 and h.norm_factor is not None:
        f = np.broadcast_to(h.norm_factor, vals.shape)
        vals = vals / f
        var = var / f**2
    lo, hi = h.bin_edges[0], h.bin_edges[-1]
    kmin = int(np.ceil((lo + half_window) / period))
    kmax = int(np.floor((hi - half_window) / period))
    out = []
    for k in range(kmin, kmax + 1):
        c = k * period
        m = (centers >= c - half_window) & (centers < c + half_window)
        if with_errors:
            out.append((k, float(vals[m].sum()), float(np.sqrt(var[m].sum()))))
        else:
            out.append((k, float(vals[m].sum())))
    return out
