"""Curve models and their fitters: lifetime, saturation, Lorentzian line,
two-photon interference, and a Gaussian for jitter calibration."""

import numpy as np

from ..emitter import saturation_rate
from ..interference import HomModelParams, g2_hom_model
from .fitting import Model, fit_curve, register


# ---------------------------------------------------------------------------
# model functions


def exponential_decay(x, amplitude, T1, background):
    return amplitude * np.exp(-np.asarray(x) / T1) + background


def saturation(x, R_sat, P_sat, alpha):
    return saturation_rate(np.asarray(x, dtype=float), R_sat, P_sat, alpha)


def lorentzian(x, amplitude, center, fwhm, background):
    hw = 0.5 * fwhm
    return amplitude * hw**2 / ((np.asarray(x) - center) ** 2 + hw**2) + background


def gaussian(x, amplitude, mu, sigma, background):
    return amplitude * np.exp(-0.5 * ((np.asarray(x) - mu) / sigma) ** 2) + background


def hom(x, T1, chi, gamma_hom, jitter_sigma, background, scale):
    m = HomModelParams(T1, min(max(chi, 0.0), 1.0), gamma_hom, jitter_sigma, 0.0)
    return scale * g2_hom_model(x, m) + background


# ---------------------------------------------------------------------------
# initialization heuristics


def _init_lifetime(x, y):
    n = len(y)
    bg = float(np.median(y[-max(n // 10, 1) :]))
    s = y - bg
    top = s.max()
    # log-linear regression over the part well above background
    m = s > 0.05 * top
    if m.sum() >= 2:
        slope, icpt = np.polyfit(x[m], np.log(s[m]), 1)
        T1 = -1.0 / slope if slope < 0 else (x.max() - x.min()) / 3
        amp = float(np.exp(icpt))
    else:
        T1, amp = (x.max() - x.min()) / 3, float(top)
    return {"amplitude": max(amp, 1e-12 * abs(top) + 1e-300), "T1": float(T1), "background": bg}


def _init_saturation(x, y):
    order = np.argsort(x)
    x, y = x[order], y[order]
    tail = slice(int(len(x) * 0.8), None)
    alpha = float(np.polyfit(x[tail], y[tail], 1)[0]) if len(x[tail]) >= 2 else 0.0
    alpha = max(alpha, 0.0)
    resid = y - alpha * x
    R0 = float(resid[0]) if resid[0] > 0 else float(np.max(y))
    below = np.flatnonzero(resid <= 0.5 * R0)
    P_sat = float(x[below[0]]) if len(below) and x[below[0]] > 0 else float(np.median(x[x > 0]))
    return {"R_sat": R0, "P_sat": P_sat, "alpha": alpha}


def _half_max_width(x, s):
    k = int(np.argmax(s))
    half = 0.5 * s[k]
    left = np.flatnonzero(s[:k] < half)
    right = np.flatnonzero(s[k:] < half)
    xl = x[left[-1]] if len(left) else x[0]
    xr = x[k + right[0]] if len(right) else x[-1]
    return max(float(xr - xl), float(np.min(np.diff(x))) if len(x) > 1 else 1.0)


def _init_peak(x, y):
    order = np.argsort(x)
    x, y = x[order], y[order]
    bg = float(np.min(y))
    s = y - bg
    return float(s.max()) or 1.0, float(x[np.argmax(s)]), _half_max_width(x, s), bg


def _init_lorentzian(x, y):
    a, c, w, bg = _init_peak(x, y)
    return {"amplitude": a, "center": c, "fwhm": w, "background": bg}


def _init_gaussian(x, y):
    a, c, w, bg = _init_peak(x, y)
    return {"amplitude": a, "mu": c, "sigma": w / 2.3548, "background": bg}


def _init_hom(x, y):
    # assumes x in seconds around zero delay; T1 and jitter are usually fixed
    T1 = 4.6e-9
    ymax = float(np.max(y))
    y0 = float(y[np.argmin(np.abs(x))])
    chi = float(np.clip(1.0 - y0 / ymax, 0.05, 0.95)) if ymax > 0 else 0.5
    return {
        "T1": T1,
        "chi": chi,
        "gamma_hom": 10.0 / T1,
        "jitter_sigma": 252e-12,
        "background": 0.0,
        "scale": max(ymax * 4 * T1 / 0.5, 1e-300),
    }


LIFETIME = register(
    Model("lifetime", exponential_decay, ("amplitude", "T1", "background"),
          {"amplitude": "positive", "T1": "positive"}, _init_lifetime)
)
SATURATION = register(
    Model("saturation", saturation, ("R_sat", "P_sat", "alpha"),
          {"R_sat": "positive", "P_sat": "positive"}, _init_saturation, {"alpha": "y/x"})
)
LORENTZIAN = register(
    Model("lorentzian", lorentzian, ("amplitude", "center", "fwhm", "background"),
          {"amplitude": "positive", "fwhm": "positive"}, _init_lorentzian, {"center": "x"})
)
GAUSSIAN = register(
    Model("gaussian", gaussian, ("amplitude", "mu", "sigma", "background"),
          {"amplitude": "positive", "sigma": "positive"}, _init_gaussian, {"mu": "x"})
)
HOM = register(
    Model("hom", hom, ("T1", "chi", "gamma_hom", "jitter_sigma", "background", "scale"),
          {"T1": "positive", "chi": "unit", "gamma_hom": "positive", "jitter_sigma": "positive",
           "scale": "positive"}, _init_hom)
)


# ---------------------------------------------------------------------------
# wrappers


def fit_exponential_lifetime(t, counts, sigma=None, **kw):
    """Fit ``A exp(-t/T1) + bg`` to a decay histogram (Poisson weights by default)."""
    return fit_curve(LIFETIME, t, counts, sigma, **kw)


def fit_saturation(P, rate, sigma=None, **kw):
    """Fit the printed saturation model ``R_sat / (1 + P/P_sat) + alpha P``."""
    return fit_curve(SATURATION, P, rate, sigma, **kw)


def fit_lorentzian(nu, counts, sigma=None, **kw):
    return fit_curve(LORENTZIAN, nu, counts, sigma, **kw)


def fit_gaussian(x, y, sigma=None, **kw):
    return fit_curve(GAUSSIAN, x, y, sigma, **kw)


def _project_linear(tau, y, sigma, start, fixed, user):
    """Starting chi, scale and background for the interference fit.

    The model is linear in scale and background, so for each trial chi they
    follow from weighted linear least squares; the trial with the smallest
    chi-square wins. A poor scale guess otherwise lets the first
    Levenberg-Marquardt step throw chi onto the flat end of its logistic map.
    """
    y = np.asarray(y, dtype=float)
    w = 1.0 / (np.sqrt(np.maximum(y, 1.0)) if sigma is None else np.broadcast_to(np.asarray(sigma, float), y.shape))
    p = {**start, **fixed, **user}
    chis = [p["chi"]] if "chi" in fixed or "chi" in user else [0.1, 0.3, 0.5, 0.7, 0.9]
    best, out = np.inf, {}
    for chi in chis:
        m = HomModelParams(p["T1"], chi, p["gamma_hom"], p["jitter_sigma"], 0.0)
        basis = g2_hom_model(tau, m)
        # solve only for the linear coefficients that are free
        lin = [n for n in ("scale", "background") if n not in fixed]
        known = fixed.get("scale", 0.0) * basis + fixed.get("background", 0.0)
        if lin:
            A = np.column_stack([basis if n == "scale" else np.ones_like(basis) for n in lin]) * w[:, None]
            coef, *_ = np.linalg.lstsq(A, (y - known) * w, rcond=None)
        else:
            A, coef = np.zeros((len(y), 0)), np.zeros(0)
        sol = dict(zip(lin, coef.tolist()))
        if sol.get("scale", 1.0) <= 0:
            continue
        c2 = float(np.sum((A @ coef - (y - known) * w) ** 2))
        if c2 < best:
            best, out = c2, {"chi": chi, **sol}
    return out


def fit_hom(tau, g2, sigma=None, T1=4.6e-9, jitter_sigma=252e-12, scale=None, init=None, **kw):
    """Fit the jitter-convolved interference model with ``T1`` and jitter held fixed.

    ``scale`` multiplies the model density; pass a number to pin it (e.g. 1
    for histograms normalized to the far-peak area per unit delay) or None
    to fit it.
    """
    fixed = {"T1": T1, "jitter_sigma": jitter_sigma}
    if scale is not None:
        fixed["scale"] = scale
    fixed.update(kw.pop("fixed", {}) or {})
    start = {"T1": T1, "jitter_sigma": jitter_sigma}
    tau = np.asarray(tau, dtype=float)
    start.update({k: v for k, v in _init_hom(tau, np.asarray(g2, dtype=float)).items() if k not in ("T1", "jitter_sigma")})
    start["gamma_hom"] = 10.0 / T1
    start.update(_project_linear(tau, g2, sigma, start, fixed, init or {}))
    start.update(init or {})
    return fit_curve(HOM, tau, g2, sigma, init=start, fixed=fixed, **kw)
