"""Weighted nonlinear least squares with reparameterized bounds.

Parameters with a declared domain are optimized in an unconstrained
coordinate ``u``:

* ``positive``: ``theta = s * softplus(u)`` with ``s`` the magnitude of
  the initial value, so amplitudes of very different size condition alike;
* ``unit``: ``theta = sigmoid(u)`` for parameters confined to [0, 1];
* ``free``: ``theta = s * u`` with ``s`` at least the parameter's data
  scale (x span for locations, max |y| for offsets).

The optimizer is MINPACK's Levenberg-Marquardt (``scipy.optimize.least_squares``
with ``method="lm"``). Uncertainties come from the linearized covariance
``(J^T W J)^-1`` evaluated in the physical coordinates at the optimum.
"""

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, Optional, Sequence

import numpy as np
from scipy.optimize import brentq, least_squares

from ..errors import FitError, ParameterError


@dataclass
class FitResult:
    params: Dict[str, float]
    sigmas: Dict[str, float]
    residual_norm: float
    converged: bool
    n_iter: int
    model: str = ""
    dof: int = 0
    fixed: Dict[str, float] = field(default_factory=dict)
    message: str = ""

    @property
    def chi2(self):
        return self.residual_norm**2

    @property
    def reduced_chi2(self):
        return self.chi2 / self.dof if self.dof > 0 else float("nan")

    def to_json(self, **extra):
        d = asdict(self)
        d.update(extra)
        return json.dumps(_finite(d), indent=2, sort_keys=True)


def _finite(obj):
    # JSON has no NaN/inf; encode them as strings
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


@dataclass(frozen=True)
class Model:
    name: str
    func: Callable
    param_names: Sequence[str]
    domains: Dict[str, str]
    init: Optional[Callable] = None
    #: what a free parameter is measured in ("x", "y" or "y/x"); sets its
    #: optimizer scale (a floor for free parameters)
    units: Dict[str, str] = field(default_factory=dict)

    def __call__(self, x, **p):
        return self.func(x, **p)


# ---------------------------------------------------------------------------
# transforms


def _softplus(u):
    return np.logaddexp(0.0, u)


def _softplus_inv(t):
    # log(expm1(t)), stable for large t
    return t + np.log(-np.expm1(-t))


def _sigmoid(u):
    return 0.5 * (1.0 + np.tanh(0.5 * u))


class _Transform:
    def __init__(self, domain, init, fallback_scale=1.0):
        self.domain = domain
        if domain == "free":
            # a location parameter near zero must still move on the data scale
            self.scale = max(abs(init), fallback_scale)
        else:
            self.scale = abs(init) if init != 0 else fallback_scale
        if domain == "positive" and init <= 0:
            raise ParameterError(f"initial value {init} outside the positive domain")
        if domain == "unit" and not 0 < init < 1:
            init = min(max(init, 1e-6), 1 - 1e-6)
        self.u0 = self.to_u(init)

    def to_theta(self, u):
        if self.domain == "positive":
            return self.scale * _softplus(u)
        if self.domain == "unit":
            return _sigmoid(u)
        return self.scale * u

    def to_u(self, theta):
        if self.domain == "positive":
            return float(_softplus_inv(theta / self.scale))
        if self.domain == "unit":
            theta = min(max(theta, 1e-15), 1 - 1e-15)
            return float(math.log(theta / (1 - theta)))
        return theta / self.scale


# ---------------------------------------------------------------------------
# core


def poisson_sigma(y):
    """Counting uncertainty ``sqrt(max(y, 1))``."""
    return np.sqrt(np.maximum(np.asarray(y, dtype=float), 1.0))


def _prepare(x, y, sigma):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    sigma = poisson_sigma(y) if sigma is None else np.broadcast_to(np.asarray(sigma, dtype=float), y.shape)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y)) and np.all(np.isfinite(sigma))):
        raise ParameterError("fit data must be finite")
    if np.any(sigma <= 0):
        raise ParameterError("sigma_y must be positive")
    return x, y, sigma


def _numeric_jacobian(fun, theta, scales, rel=1e-6):
    # steps follow each parameter's typical magnitude, so a value sitting
    # near zero (a line center, say) is still probed on its natural scale
    theta = np.asarray(theta, dtype=float)
    f0 = fun(theta)
    J = np.empty((len(f0), len(theta)))
    for k in range(len(theta)):
        h = rel * max(abs(theta[k]), scales[k], 1e-300)
        tp, tm = theta.copy(), theta.copy()
        tp[k] += h
        tm[k] -= h
        J[:, k] = (fun(tp) - fun(tm)) / (2 * h)
    return J


def fit_curve(model, x, y, sigma=None, init=None, fixed=None, max_iter=2000, tol=1e-14, absolute_sigma=True):
    """Fit ``model`` to ``(x, y, sigma)``.

    ``model`` is a registered model name or a ``Model``. ``init`` overrides
    the model's initialization heuristic per parameter; ``fixed`` pins
    parameters. Non-convergence within ``max_iter`` function evaluations is
    reported through ``converged=False``; a singular Jacobian at the optimum
    raises ``FitError`` with the singular values in ``diagnostics``.
    """
    if isinstance(model, str):
        model = get_model(model)
    x, y, sigma = _prepare(x, y, sigma)
    fixed = dict(fixed or {})
    start = dict(model.init(x, y) if model.init else {})
    start.update(init or {})
    free = [n for n in model.param_names if n not in fixed]
    missing = [n for n in free if n not in start]
    if missing:
        raise ParameterError(f"no initial value for {missing}")
    if len(y) < len(free):
        raise ParameterError(f"{len(y)} data points cannot constrain {len(free)} parameters")
    xs = float(np.ptp(x)) or 1.0
    ys = float(np.max(np.abs(y))) or 1.0
    unit_scale = {"x": xs, "y": ys, "y/x": ys / xs}
    tf = [
        _Transform(model.domains.get(n, "free"), float(start[n]), unit_scale[model.units.get(n, "y")])
        for n in free
    ]

    def theta_of(u):
        return {n: t.to_theta(v) for n, t, v in zip(free, tf, u)}

    def resid_theta(theta_vec):
        p = dict(fixed)
        p.update(zip(free, theta_vec))
        return (model(x, **p) - y) / sigma

    def resid_u(u):
        p = dict(fixed)
        p.update(theta_of(u))
        r = (model(x, **p) - y) / sigma
        if not np.all(np.isfinite(r)):
            return np.full_like(y, 1e150)
        return r

    u0 = np.array([t.u0 for t in tf])
    if len(free) == 0:
        r = resid_theta(np.zeros(0))
        return FitResult(dict(fixed), {}, float(np.linalg.norm(r)), True, 0, model.name, len(y), dict(fixed))
    # u is O(1) by construction; MINPACK's own steps are relative to |u|
    # and vanish for a parameter that starts near zero
    ones = [1.0] * len(free)
    sol = least_squares(
        resid_u,
        u0,
        jac=lambda u: _numeric_jacobian(resid_u, u, ones),
        method="lm",
        x_scale="jac",
        xtol=tol,
        ftol=tol,
        gtol=tol,
        max_nfev=max_iter,
    )
    theta = theta_of(sol.x)
    theta_vec = np.array([theta[n] for n in free])
    r = resid_theta(theta_vec)
    norm = float(np.linalg.norm(r))
    converged = bool(sol.status > 0) and math.isfinite(norm)

    J = _numeric_jacobian(resid_theta, theta_vec, [t.scale if t.domain != "unit" else 1.0 for t in tf])
    # judge rank on unit-norm columns so parameter units do not matter
    cn = np.linalg.norm(J, axis=0)
    sv = np.linalg.svd(J / np.where(cn > 0, cn, 1.0), compute_uv=False) if np.all(cn > 0) else np.zeros(1)
    if sv.size == 0 or sv[-1] <= sv[0] * 1e-10 or not np.all(np.isfinite(J)):
        raise FitError(
            f"singular Jacobian fitting {model.name!r}",
            {"singular_values": sv.tolist(), "params": theta, "free": free},
        )
    cov = np.linalg.inv(J.T @ J)
    dof = len(y) - len(free)
    if not absolute_sigma and dof > 0:
        cov = cov * norm**2 / dof
    sig = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    params = dict(fixed)
    params.update(theta)
    sigmas = {n: float(s) for n, s in zip(free, sig)}
    sigmas.update({n: 0.0 for n in fixed})
    return FitResult(
        {n: float(v) for n, v in params.items()},
        sigmas,
        norm,
        converged,
        int(sol.nfev),
        model.name,
        dof,
        dict(fixed),
        sol.message,
    )


def profile_sigma(model, x, y, sigma, result: FitResult, name, delta_chi2=1.0):
    """Half-width of the profile-likelihood interval ``chi2 <= chi2_min + delta_chi2``.

    The other free parameters are re-optimized at every trial value of ``name``.
    """
    if isinstance(model, str):
        model = get_model(model)
    best = result.params[name]
    chi2_min = result.chi2
    step = result.sigmas[name] or abs(best) * 1e-3 or 1e-3
    others = {k: v for k, v in result.params.items() if k != name and k not in result.fixed}

    def excess(val):
        fixed = dict(result.fixed)
        fixed[name] = val
        r = fit_curve(model, x, y, sigma, init=others, fixed=fixed)
        return r.chi2 - chi2_min - delta_chi2

    def bracket(sign):
        k = 1.0
        while k < 64:
            val = best + sign * k * step
            if model.domains.get(name) == "positive" and val <= 0:
                val = best * 0.5 ** k
            if excess(val) > 0:
                return val
            k *= 2
        raise FitError(f"profile of {name!r} does not close", {"best": best})

    hi = brentq(excess, best, bracket(+1), xtol=abs(step) * 1e-4)
    lo = brentq(excess, bracket(-1), best, xtol=abs(step) * 1e-4)
    return 0.5 * (hi - lo)


# ---------------------------------------------------------------------------
# registry

_MODELS: Dict[str, Model] = {}


def register(model: Model):
    _MODELS[model.name] = model
    return model


def get_model(name) -> Model:
    try:
        return _MODELS[name]
    except KeyError:
        raise ParameterError(f"unknown model {name!r}; known: {sorted(_MODELS)}") from None


def model_names():
    return sorted(_MODELS)
