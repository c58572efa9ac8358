import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from gcsim.analysis import deconvolve_lorentzian, fit_lorentzian
from gcsim.correlator import cross_correlate, peak_areas
from gcsim.detection import DetectorParams
from gcsim.emitter import EmitterParams, PulseTrainParams
from gcsim.errors import ParameterError
from gcsim.optics import (
    ABSORBED,
    LONG,
    PORT_A,
    PORT_B,
    SHORT,
    FpParams,
    MziParams,
    RoutedPhoton,
    find_interfering_pairs,
    fp_transmission,
    interfering_pair_predicate,
    lorentzian_convolved_width,
    mzi_route,
    mzi_route_many,
    polarization_overlap,
)
from gcsim.pipelines import HomOptions, ScanOptions, simulate_hom, simulate_spectrum_scan

N = 1_000_000


def gen(seed=0):
    return np.random.Generator(np.random.Philox(seed))


def test_full_transmission_always_short():
    r, _ = mzi_route_many(np.arange(1000), np.zeros(1000), MziParams(bs1_transmittance=1.0), gen())
    assert np.all(r.arm == SHORT)


def test_balanced_arms_and_exact_delay():
    t = np.arange(N, dtype=np.int64) * 7
    r, _ = mzi_route_many(t, np.zeros(N), MziParams(), gen(1))
    n_long = np.sum(r.arm == LONG)
    assert abs(n_long - N / 2) < 3 * math.sqrt(N / 4)
    assert np.all(r.arrival_time - t == np.where(r.arm == LONG, 25_000, 0))


def test_single_photon_route():
    class P:
        emit_time = 100
        polarization = 0.0

    port, arrival, arm = mzi_route(P, MziParams(bs1_transmittance=0.0, arm_losses=(0.0, 0.0)), gen())
    assert arm == "long" and arrival == 25_100 and port in ("A", "B")
    port, arrival, arm = mzi_route(P, MziParams(arm_losses=(1.0, 1.0)), gen())
    assert port is None and arrival is None


def test_routing_probabilities_sum_to_one():
    m = MziParams(bs1_transmittance=0.4, bs2_transmittance=0.7, arm_losses=(0.2, 0.3))
    r, _ = mzi_route_many(np.zeros(N, np.int64), np.zeros(N), m, gen(2))
    p_abs = 0.4 * 0.2 + 0.6 * 0.3
    p_a = 0.4 * 0.8 * 0.7 + 0.6 * 0.7 * 0.3
    p_b = 1 - p_abs - p_a
    for port, p in ((ABSORBED, p_abs), (PORT_A, p_a), (PORT_B, p_b)):
        assert abs(np.mean(r.port == port) - p) < 3 * math.sqrt(p * (1 - p) / N)


def test_lossless_conserves_photons():
    r, _ = mzi_route_many(np.arange(10_000), np.zeros(10_000), MziParams(), gen(3))
    assert np.all(r.port != ABSORBED)


def test_polarization_rotation_applies_to_long_arm():
    m = MziParams(polarization_rotation=math.pi / 2)
    r, pol = mzi_route_many(np.arange(1000), np.zeros(1000), m, gen(4))
    assert np.allclose(pol, np.where(r.arm == LONG, math.pi / 2, 0.0))


# ---------------------------------------------------------------------------
# interfering pairs


def _rp(i, arm):
    return RoutedPhoton(i, i * 25_000, arm, PORT_A, 0)


def test_predicate_definition():
    m = MziParams()
    assert not interfering_pair_predicate(_rp(3, LONG), _rp(3, SHORT), m)
    assert interfering_pair_predicate(_rp(3, LONG), _rp(4, SHORT), m)
    assert interfering_pair_predicate(_rp(4, SHORT), _rp(3, LONG), m)
    assert not interfering_pair_predicate(_rp(3, SHORT), _rp(4, LONG), m)
    assert not interfering_pair_predicate(_rp(3, LONG), _rp(5, SHORT), m)


def test_predicate_rate_is_product_of_arm_probabilities():
    n = 100_000
    m = MziParams(bs1_transmittance=0.3)
    t = np.arange(2 * n, dtype=np.int64) * 25_000
    r, _ = mzi_route_many(t, np.zeros(2 * n), m, gen(5))
    hits = [
        interfering_pair_predicate(RoutedPhoton(2 * k, t[2 * k], r.arm[2 * k], 0, 0),
                                   RoutedPhoton(2 * k + 1, t[2 * k + 1], r.arm[2 * k + 1], 0, 0), m)
        for k in range(n)
    ]
    p = 0.7 * 0.3
    assert abs(np.mean(hits) - p) < 3 * math.sqrt(p * (1 - p) / n)


def test_vectorized_pairs_match_predicate():
    g = gen(6)
    n = 3000
    slots = np.sort(g.choice(10 * n, n, replace=False)).astype(np.int64)
    pt = slots * 12_500
    arm = (g.random(n) < 0.5).astype(np.int8)
    present = g.random(n) < 0.9
    i, j = find_interfering_pairs(pt, arm, present, 25_000)
    got = set(zip(i.tolist(), j.tolist()))
    m = MziParams()
    want = set()
    for a in range(n):
        for b in range(a + 1, min(a + 4, n)):
            if present[a] and present[b] and interfering_pair_predicate(
                RoutedPhoton(a, pt[a], arm[a], 0, 0), RoutedPhoton(b, pt[b], arm[b], 0, 0), m
            ):
                want.add((a, b))
    assert got == want


def test_distinguishable_peak_areas_match_enumeration():
    e = EmitterParams(lifetime_T1=1e-9)
    p = PulseTrainParams(n_pulses=300_000, extinction_dB=math.inf)
    d = DetectorParams(efficiency=1.0, jitter_sigma=0.0, dark_rate=0.0)
    m = MziParams(polarization_rotation=math.pi / 2)
    tags = simulate_hom(e, p, m, d, 7, HomOptions()).tags
    h = cross_correlate(tags.on(0), tags.on(1), 500, 100_000)
    areas = dict((k, (a, s)) for k, a, s in peak_areas(h, 25_000, 12_500, with_errors=True))
    w = oracles.mzi_peak_weights(0.5, 0.5, 4)
    # the expected far-peak area per pulse pair is the train length times w
    n_pairs = p.n_pulses
    for k in range(-3, 4):
        expect = n_pairs * w[k]
        a, s = areas[k]
        assert abs(a - expect) < 3 * math.sqrt(expect), (k, a, expect)


# ---------------------------------------------------------------------------
# Fabry-Perot and widths


def test_fp_transmission_points():
    fp = FpParams(peak_transmission=0.8)
    assert fp_transmission(0.0, fp) == 0.8
    assert fp_transmission(fp.linewidth_kappa / 2, fp) == pytest.approx(0.4)
    assert fp_transmission(-fp.linewidth_kappa / 2, fp) == pytest.approx(0.4)


def test_fp_param_validation():
    with pytest.raises(ParameterError):
        FpParams(linewidth_kappa=0.0)
    with pytest.raises(ParameterError):
        FpParams(peak_transmission=0.0)


def test_scan_recovers_summed_width():
    det, counts = simulate_spectrum_scan(EmitterParams(), FpParams(), DetectorParams(), 8, ScanOptions())
    r = fit_lorentzian(det / (2 * math.pi), counts)
    assert r.converged
    assert r.params["fwhm"] == pytest.approx(6.2e9, abs=0.1e9)
    assert deconvolve_lorentzian(r.params["fwhm"], 3.4e9) == pytest.approx(2.8e9, abs=0.1e9)


def test_convolved_width_values():
    assert lorentzian_convolved_width(2.8, 3.4) == pytest.approx(6.2)
    assert lorentzian_convolved_width(1.7, 0) == 1.7
    assert lorentzian_convolved_width(1.0, 2.0) == pytest.approx(oracles.lorentzian_conv_numeric(1.0, 2.0), abs=5e-3)
    with pytest.raises(ParameterError):
        lorentzian_convolved_width(-1.0, 1.0)


widths = st.floats(0, 1e12, allow_nan=False)


@given(widths, widths, widths)
def test_convolved_width_commutative_associative(a, b, c):
    assert lorentzian_convolved_width(a, b) == lorentzian_convolved_width(b, a)
    lhs = lorentzian_convolved_width(lorentzian_convolved_width(a, b), c)
    rhs = lorentzian_convolved_width(a, lorentzian_convolved_width(b, c))
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-300)


@given(widths, widths)
def test_deconvolve_then_convolve_identity(instrument, extra):
    measured = lorentzian_convolved_width(instrument, extra)
    back = lorentzian_convolved_width(deconvolve_lorentzian(measured, instrument), instrument)
    assert back == pytest.approx(measured, rel=1e-12, abs=1e-3)


@pytest.mark.parametrize("angle, expect", [(0.0, 1.0), (math.pi / 2, 0.0), (math.pi / 4, 0.5)])
def test_polarization_overlap(angle, expect):
    assert polarization_overlap(angle) == pytest.approx(expect, abs=1e-15)


def test_mzi_param_validation():
    with pytest.raises(ParameterError):
        MziParams(path_delay=0.0)
    with pytest.raises(ParameterError):
        MziParams(bs2_transmittance=1.2)
    with pytest.raises(ParameterError):
        MziParams(arm_losses=(0.1,))
