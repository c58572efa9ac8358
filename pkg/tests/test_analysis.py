import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gcsim.analysis import (
    REFERENCE_CHAIN,
    EfficiencyChain,
    beta_factor,
    cooperativity_estimate,
    deconvolve_lorentzian,
    efficiency_budget,
    fit_curve,
    fit_exponential_lifetime,
    fit_gaussian,
    fit_hom,
    fit_lorentzian,
    fit_peak_amplitudes,
    fit_saturation,
    get_model,
    leak_fraction_from_ratio,
    peak_template,
    profile_sigma,
)
from gcsim.analysis.models import exponential_decay, lorentzian, saturation
from gcsim.analysis.peaks import peak_sum
from gcsim.correlator import CorrelationHistogram, linear_edges
from gcsim.errors import FitError, ParameterError
from gcsim.interference import HomModelParams, g2_hom_binned, g2_hom_model

LIFE = {"amplitude": 5e4, "T1": 4.6e-9, "background": 30.0}
SAT = {"R_sat": 35e3, "P_sat": 2.4e-6, "alpha": 1.5e8}
LOR = {"amplitude": 900.0, "center": 1.2e8, "fwhm": 6.2e9, "background": 15.0}
HOM_TRUE = {"chi": 0.9, "gamma_hom": 1 / 0.42e-9, "background": 0.05, "scale": 1.0}


def gen(seed=0):
    return np.random.Generator(np.random.Philox(seed))


def _close(params, truth, rel):
    for k, v in truth.items():
        assert params[k] == pytest.approx(v, rel=rel), k


# ---------------------------------------------------------------------------
# noiseless recovery


def test_noiseless_lifetime():
    t = np.arange(0, 25e-9, 1e-10)
    y = exponential_decay(t, **LIFE)
    r = fit_exponential_lifetime(t, y)
    assert r.converged
    _close(r.params, LIFE, 1e-6)


def test_noiseless_saturation():
    P = np.linspace(0.05e-6, 20e-6, 60)
    r = fit_saturation(P, saturation(P, **SAT))
    _close(r.params, SAT, 1e-6)


def test_noiseless_saturation_without_linear_term():
    P = np.linspace(0.05e-6, 20e-6, 60)
    r = fit_saturation(P, saturation(P, 35e3, 2.4e-6, 0.0), fixed={"alpha": 0.0})
    _close(r.params, {"R_sat": 35e3, "P_sat": 2.4e-6}, 1e-9)
    assert r.residual_norm < 1e-6


def test_noiseless_lorentzian():
    nu = np.linspace(-25e9, 25e9, 201)
    r = fit_lorentzian(nu, lorentzian(nu, **LOR))
    _close(r.params, LOR, 1e-6)


def test_noiseless_hom():
    tau = np.linspace(-6e-9, 6e-9, 121)
    m = HomModelParams(4.6e-9, 0.9, 1 / 0.42e-9, 252e-12, 0.0)
    y = g2_hom_model(tau, m) + 0.05
    r = fit_hom(tau, y, np.full_like(y, 1e-3), T1=4.6e-9, jitter_sigma=252e-12)
    _close(r.params, HOM_TRUE, 1e-6)


def test_full_visibility_with_free_scale():
    # the dip reaches the jitter floor and the amplitude is far from the
    # peak-height guess; the linear starting values keep chi off its bound
    tau = np.linspace(-5e-9, 5e-9, 41)
    pj = math.sqrt(2) * 252e-12
    truth = {"chi": 1.0, "gamma_hom": 1 / 0.42e-9, "background": 0.0, "scale": 0.37}
    m = HomModelParams(4.6e-9, 1.0, truth["gamma_hom"], pj, 0.0)
    y = 0.37 * g2_hom_model(tau, m)
    r = fit_hom(tau, y, np.full_like(y, 1e-3 * y.max()), T1=4.6e-9, jitter_sigma=pj, scale=None)
    assert r.params["chi"] > 0.999
    _close(r.params, {"gamma_hom": truth["gamma_hom"], "scale": 0.37}, 1e-4)


def test_init_at_truth_is_fixed_point():
    t = np.arange(0, 25e-9, 1e-10)
    r = fit_exponential_lifetime(t, exponential_decay(t, **LIFE), init=LIFE)
    _close(r.params, LIFE, 1e-12)
    assert r.residual_norm < 1e-8


# ---------------------------------------------------------------------------
# noisy recovery


def test_lifetime_poisson_within_two_percent():
    t = np.arange(0, 25e-9, 1e-10)
    lam = exponential_decay(t, 1e6 * 1e-10 / 4.6e-9, 4.6e-9, 5.0)  # ~1e6 decay counts
    ests = [fit_exponential_lifetime(t, gen(s).poisson(lam)).params["T1"] for s in range(5)]
    assert np.all(np.abs(np.array(ests) / 4.6e-9 - 1) < 0.02)


def test_saturation_five_percent_noise():
    # with 5% point noise a 40-point scan pins P_sat only to ~6%; a dense
    # scan makes the 5% bound a 3 sigma statement
    P = np.linspace(0.1e-6, 20e-6, 1000)
    clean = saturation(P, **SAT)
    for s in range(5):
        y = clean * (1 + 0.05 * gen(s).standard_normal(len(P)))
        r = fit_saturation(P, y, 0.05 * clean)
        assert 3 * r.sigmas["P_sat"] < 0.05 * r.params["P_sat"]
        assert r.params["R_sat"] == pytest.approx(35e3, rel=0.05)
        assert r.params["P_sat"] == pytest.approx(2.4e-6, rel=0.05)


def test_saturation_poisson_counts():
    # 1 s per point at the measured count rates
    P = np.linspace(0.1e-6, 20e-6, 40)
    y = gen(7).poisson(saturation(P, **SAT)).astype(float)
    r = fit_saturation(P, y)
    assert r.params["R_sat"] == pytest.approx(35e3, rel=0.05)
    assert r.params["P_sat"] == pytest.approx(2.4e-6, rel=0.05)


def test_hom_decay_from_synthetic_histogram():
    # Poisson counts drawn around the analytic curve
    edges = np.linspace(-6e-9, 6e-9, 49)
    m = HomModelParams(4.6e-9, 0.85, 1 / 0.42e-9, 252e-12, 0.0)
    w = np.diff(edges)
    lam = 4000 * (g2_hom_binned(edges, m) + 0.02) * w / w[0] * 4.6e-9
    y = gen(8).poisson(lam)
    tau = 0.5 * (edges[1:] + edges[:-1])
    r = fit_hom(tau, y, np.sqrt(np.maximum(y, 1)), T1=4.6e-9, jitter_sigma=252e-12)
    assert 1e9 / r.params["gamma_hom"] == pytest.approx(0.42, rel=0.25)


def test_profile_sigma_matches_bootstrap():
    P = np.linspace(0.1e-6, 20e-6, 40)
    g = gen(9)
    clean = saturation(P, **SAT)
    sig = 0.05 * clean
    y = clean + sig * g.standard_normal(len(P))
    r = fit_saturation(P, y, sig)
    prof = profile_sigma("saturation", P, y, sig, r, "P_sat")
    fit_y = saturation(P, **{k: r.params[k] for k in SAT})
    boot = [
        fit_saturation(P, fit_y + sig * g.standard_normal(len(P)), sig, init=r.params).params["P_sat"]
        for _ in range(200)
    ]
    assert prof == pytest.approx(np.std(boot), rel=0.3)
    assert prof == pytest.approx(r.sigmas["P_sat"], rel=0.3)


@settings(deadline=None, max_examples=20)
@given(st.floats(1e-3, 1e3))
def test_fit_is_scale_equivariant(c):
    t = np.arange(0, 25e-9, 2e-10)
    y = gen(10).poisson(exponential_decay(t, 800.0, 4.6e-9, 3.0)).astype(float)
    s = np.sqrt(np.maximum(y, 1))
    a = fit_exponential_lifetime(t, y, s)
    b = fit_exponential_lifetime(t, c * y, c * s)
    assert b.params["T1"] == pytest.approx(a.params["T1"], rel=1e-6)
    assert b.params["amplitude"] == pytest.approx(c * a.params["amplitude"], rel=1e-6)


def test_singular_jacobian_raises_with_diagnostics():
    # amplitude and background are indistinguishable when T1 is huge and fixed
    t = np.linspace(0, 1e-9, 30)
    with pytest.raises(FitError) as err:
        fit_exponential_lifetime(t, np.full(30, 10.0), fixed={"T1": 1e6})
    assert "singular_values" in err.value.diagnostics


def test_nonconvergence_is_flagged_not_raised():
    t = np.arange(0, 25e-9, 1e-10)
    y = gen(11).poisson(exponential_decay(t, **LIFE))
    r = fit_exponential_lifetime(t, y, max_iter=2)
    assert not r.converged


def test_fit_result_json_round_trip():
    import json

    t = np.arange(0, 25e-9, 1e-10)
    r = fit_exponential_lifetime(t, exponential_decay(t, **LIFE))
    d = json.loads(r.to_json())
    assert set(d["params"]) == set(LIFE) and d["converged"]


def test_model_registry():
    assert get_model("lifetime").param_names == ("amplitude", "T1", "background")
    with pytest.raises(ParameterError):
        get_model("voigt")
    with pytest.raises(ParameterError):
        fit_curve("lorentzian", [1.0, 2.0], [1.0, 2.0])


def test_gaussian_recovery():
    x = np.linspace(-2000, 2000, 201)
    y = 500 * np.exp(-0.5 * ((x - 40) / 356.4) ** 2) + 2
    r = fit_gaussian(x, y)
    assert r.params["sigma"] == pytest.approx(356.4, rel=1e-6)


# ---------------------------------------------------------------------------
# budget and scalars


def test_deconvolution():
    assert deconvolve_lorentzian(6.2e9, 3.4e9) == pytest.approx(2.8e9, rel=1e-9)
    assert deconvolve_lorentzian(5.0, 0.0) == 5.0
    with pytest.raises(ParameterError):
        deconvolve_lorentzian(3.0, 3.4)


def test_reference_budget():
    b = efficiency_budget(REFERENCE_CHAIN, 4.6e-9)
    assert b["eta_qe_bound"] == pytest.approx(0.0179, abs=5e-4)
    assert b["tau_r_upper"] == pytest.approx(257e-9, abs=5e-9)
    assert b["eta_qe_bound"] < 0.02 and b["tau_r_upper"] < 260e-9


def test_budget_with_exact_filter_product():
    b = efficiency_budget(EfficiencyChain(), 4.6e-9)
    assert b["eta_filter"] == pytest.approx(0.144)
    assert b["eta_qe_bound"] == pytest.approx(0.4e-3 / (0.8 * 0.144 * 0.2))


def test_budget_consistency_at_unit_efficiency():
    c = EfficiencyChain(eta_system=0.8 * 0.18 * 0.8 * 0.2)
    assert efficiency_budget(c, 1.0)["eta_qe_bound"] == pytest.approx(1.0)


def test_network_remainder():
    assert REFERENCE_CHAIN.network_remainder == pytest.approx(0.2 / 0.3)


factor = st.floats(0.05, 1.0)


@given(factor, factor, factor, factor, st.floats(0.1, 0.99))
def test_budget_monotone(wg, br, bp, net, shrink):
    base = EfficiencyChain(eta_system=1e-4, eta_wg=wg, branching_zpl=br, bp_transmission=bp, eta_network=net)
    ref = efficiency_budget(base, 1.0)["eta_qe_bound"]
    for name in ("eta_wg", "branching_zpl", "bp_transmission", "eta_network"):
        kw = {"eta_system": 1e-4, "eta_wg": wg, "branching_zpl": br, "bp_transmission": bp, "eta_network": net}
        kw[name] *= shrink
        assert efficiency_budget(EfficiencyChain(**kw), 1.0)["eta_qe_bound"] > ref


def test_chain_validation():
    with pytest.raises(ParameterError):
        EfficiencyChain(eta_wg=0.0)
    with pytest.raises(ParameterError):
        efficiency_budget(REFERENCE_CHAIN, 0.0)


def test_cooperativity_and_beta():
    two_pi = 2 * math.pi
    assert cooperativity_estimate(two_pi * 0.5e6, two_pi * 380e6) == pytest.approx(1.3e-3, abs=0.05e-3)
    assert cooperativity_estimate(3.0, 3.0) == 1.0
    with pytest.raises(ParameterError):
        cooperativity_estimate(1.0, 0.0)
    gamma_g = 1 / 4.6e-9
    assert beta_factor(0.014 * gamma_g, gamma_g) == pytest.approx(0.014)


# ---------------------------------------------------------------------------
# peak decomposition


def test_peak_template_is_unit_area():
    e = linear_edges(100, 120_000)  # +-26 lifetimes, tail mass below 1e-11
    assert peak_template(e, 0, 4.6e-9, 356e-12).sum() == pytest.approx(1.0, abs=1e-6)


def test_peak_amplitudes_recovered_exactly():
    e = linear_edges(200, 100_000)
    ks = np.arange(-8, 9)
    areas = np.where(ks % 2, 300.0, 1000.0)
    areas[ks == 0] = 150.0
    counts = peak_sum(e, ks, areas, 12_500, 4.6e-9, 356e-12) + 4.0
    h = CorrelationHistogram(e, counts, (0, 1), (1, 1), 1)
    got_k, got_a, _, bg, _ = fit_peak_amplitudes(h, 12_500, 4.6e-9, 356e-12)
    want = dict(zip(ks, areas))
    for k, a in zip(got_k, got_a):
        assert a == pytest.approx(want[k], rel=1e-6)
    assert bg == pytest.approx(4.0, rel=1e-6)


@given(st.floats(0, 1))
def test_leak_ratio_inversion(r):
    rho = 2 * r / (1 + r * r)
    assert leak_fraction_from_ratio(rho) == pytest.approx(r, abs=1e-9)


def test_leak_ratio_at_eight_db():
    r = 10 ** -0.8
    assert leak_fraction_from_ratio(2 * r / (1 + r * r)) == pytest.approx(r, rel=1e-12)
    with pytest.raises(ParameterError):
        leak_fraction_from_ratio(1.2)
