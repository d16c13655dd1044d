import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from stdpgram.analytic import (
    BRUTEFORCE_MAX_ETA,
    Scenario,
    dirichlet_kernel,
    fejer_kernel,
    gamma_tc,
    gamma_tm,
    gamma_white_assumed,
    noncentrality,
    noncentrality_dft,
    pdet_tc,
    pdet_tc_bruteforce,
    pdet_tm,
    pfa_ar_approx,
    pfa_tc,
    pfa_tm,
    pfa_white_assumed,
    phi_f,
    roc_tc,
    roc_tm,
)
from stdpgram.noisegen import ar6_model, noise_psd, solar_proxy_psd
from stdpgram.sigmodel import Sinusoid, SinusoidModel, render_signal


def _scenario(n, L, sig=(), psd=None):
    if psd is None:
        psd = solar_proxy_psd(np.arange(n // 2 + 1) / n)
    return Scenario(n, L, psd, SinusoidModel(sig))


def _random_signal(rng, n, n_s, on_grid=False):
    comps = []
    for _ in range(n_s):
        f = rng.integers(1, n // 2) / n if on_grid else rng.uniform(0.2 / n, 0.5 - 0.2 / n)
        comps.append(Sinusoid(rng.uniform(0.1, 3.0), f, rng.uniform(0, 2 * np.pi)))
    return comps


def test_dirichlet_limits():
    assert dirichlet_kernel(0.0, 16) == pytest.approx(1.0)
    assert dirichlet_kernel(3.0, 16) == pytest.approx(1.0)
    for m in (1, 5, 15, 17):
        assert abs(dirichlet_kernel(m / 16, 16)) < 1e-13


@settings(max_examples=100, deadline=None)
@given(st.floats(-3, 3), st.integers(1, 300))
def test_dirichlet_matches_direct_sum(nu, n):
    j = np.arange(1, n + 1)
    direct = np.exp(2j * np.pi * nu * j).mean()
    assert abs(dirichlet_kernel(nu, n) - direct) <= 1e-12 * max(1.0, n * 1e-2)


def test_fejer_kernel():
    assert fejer_kernel(0.0, 10) == pytest.approx(1.0)
    assert fejer_kernel(0.3, 10) == pytest.approx(0.0, abs=1e-28)
    nu = np.random.default_rng(1).uniform(-1, 1, 20)
    assert np.allclose(fejer_kernel(nu, 37), np.abs(dirichlet_kernel(nu, 37)) ** 2)


def test_noncentrality_empty_signal():
    assert np.array_equal(noncentrality(_scenario(64, 5)), np.zeros(31))


def test_noncentrality_on_grid_single_sinusoid():
    n, k0, a = 128, 9, 1.7
    sc = _scenario(n, 3, [Sinusoid(a, k0 / n, 0.4)])
    lam = noncentrality(sc)
    assert lam[k0 - 1] == pytest.approx(n * a**2 / (2 * sc.noise_psd[k0]), rel=1e-12)
    assert np.max(np.abs(np.delete(lam, k0 - 1))) < 1e-20 * lam[k0 - 1] + 1e-25


@pytest.mark.parametrize("n", [64, 256, 1110])
def test_noncentrality_matches_dft_oracle(n):
    rng = np.random.default_rng(n)
    for on_grid in (False, True):
        sc = _scenario(n, 1, _random_signal(rng, n, 3, on_grid))
        lam = noncentrality(sc, full=True)
        ref = noncentrality_dft(sc, render_signal(sc.signal, n), full=True, method="direct")
        assert np.max(np.abs(lam - ref)) <= 1e-9 * ref.max()


def test_noncentrality_psd_scale_invariance():
    n = 200
    rng = np.random.default_rng(5)
    sig = _random_signal(rng, n, 2)
    a = _scenario(n, 1, sig)
    b = Scenario(n, 1, 3.5 * a.noise_psd, a.signal)
    assert np.allclose(noncentrality(b) * 3.5, noncentrality(a), rtol=1e-12)


def test_scenario_validation():
    with pytest.raises(ValueError):
        Scenario(7, 1, 1.0)
    with pytest.raises(ValueError):
        Scenario(8, 0, 1.0)
    with pytest.raises(ValueError):
        Scenario(8, 1, np.ones(4))
    with pytest.raises(ValueError):
        Scenario(8, 1, np.r_[1.0, 0.0, 1.0, 1.0, 1.0])
    with pytest.raises(ValueError):
        Scenario(8, 1, 1.0, SinusoidModel([Sinusoid(1.0, 0.5)]))
    assert Scenario(8, 1, 1.0).eta == 3


def test_phi_f_limits():
    g = np.linspace(0, 10, 11)
    assert np.allclose(phi_f(g, math.inf), -np.expm1(-g))
    assert np.allclose(phi_f(g, 5), 1 - (5 / (5 + g)) ** 5)
    assert phi_f(3.0, math.inf, 2.0) == pytest.approx(stats.ncx2(2, 2.0).cdf(6.0), rel=1e-10)


def test_pfa_tm_examples():
    assert pfa_tm(0.0, 64, 5) == 1.0
    assert gamma_tm(0.5, 4, 1) == pytest.approx(1.0, rel=1e-14)
    assert gamma_tm(1 - 1e-9, 4, 3) < 1e-8


@pytest.mark.parametrize("L", [1, 2, 20, 100, math.inf])
def test_tm_roundtrip(L):
    pfa = np.logspace(-4, math.log10(0.5), 30)
    for n in (16, 1024, 1110):
        back = pfa_tm(gamma_tm(pfa, n, L), n, L)
        assert np.max(np.abs(back / pfa - 1)) <= 1e-12


def test_gamma_tm_domain():
    for bad in (0.0, 1.0, -0.1):
        with pytest.raises(ValueError):
            gamma_tm(bad, 64, 2)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 600).map(lambda h: 2 * h), st.sampled_from([1, 3, 20, math.inf]))
def test_pfa_decreasing_in_gamma(n, L):
    g = np.linspace(0.01, 60, 80)
    p = pfa_tm(g, n, L)
    assert np.all((p >= 0) & (p <= 1))
    assert np.all(np.diff(p) <= 0)
    q = [pfa_tc(x, n, L, min(3, n // 2 - 1)) for x in g]
    assert np.all(np.diff(q) <= 1e-15)


def test_pfa_tc_reduces_to_tm():
    g = np.linspace(0.5, 30, 25)
    for L in (1, 7, math.inf):
        assert np.allclose([pfa_tc(x, 256, L, 1) for x in g], pfa_tm(g, 256, L), rtol=1e-12, atol=1e-300)


def test_pfa_tc_binomial_oracle():
    n, L, n_c, g = 64, 5, 3, 4.0
    eta = n // 2 - 1
    u = (L / (g + L)) ** L
    direct = 1.0 - sum(math.comb(eta, k) * u**k * (1 - u) ** (eta - k) for k in range(n_c))
    assert pfa_tc(g, n, L, n_c) == pytest.approx(direct, rel=1e-12)
    assert pfa_tc(0.0, n, L, n_c) == pytest.approx(1.0)


@pytest.mark.parametrize("L", [1, 20, math.inf])
def test_tc_threshold_roundtrip(L):
    for pfa in (1e-4, 0.013, 0.3):
        g = gamma_tc(pfa, 1024, L, 5)
        assert pfa_tc(g, 1024, L, 5) == pytest.approx(pfa, rel=1e-10)


def test_pdet_equals_pfa_without_signal():
    sc = _scenario(128, 4)
    for g in (2.0, 8.0):
        assert pdet_tm(g, sc) == pytest.approx(pfa_tm(g, 128, 4), rel=1e-12)
        assert pdet_tc(g, sc, 3) == pytest.approx(pfa_tc(g, 128, 4, 3), rel=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([1, 5, math.inf]), st.floats(1.0, 25.0))
def test_pdet_dominates_pfa_and_grows_with_amplitude(seed, L, g):
    rng = np.random.default_rng(seed)
    sc = _scenario(96, L, _random_signal(rng, 96, 2))
    p1 = pdet_tm(g, sc)
    p2 = pdet_tm(g, sc.with_signal(sc.signal.scaled(2.0)))
    assert pfa_tm(g, 96, L) <= p1 + 1e-12
    assert p1 <= p2 + 1e-12
    assert pfa_tc(g, 96, L, 2) <= pdet_tc(g, sc, 2) + 1e-12


def test_pdet_tc_one_is_pdet_tm():
    rng = np.random.default_rng(3)
    sc = _scenario(128, 6, _random_signal(rng, 128, 3))
    for g in (3.0, 9.0):
        assert pdet_tc(g, sc, 1) == pytest.approx(pdet_tm(g, sc), rel=1e-10)


def test_pdet_tc_matches_enumeration_n16():
    rng = np.random.default_rng(16)
    for _ in range(20):
        lam = rng.exponential(3.0, 7) * (rng.random(7) < 0.6)
        sc = _scenario(16, int(rng.integers(1, 30)))
        g = rng.uniform(0.5, 10)
        for n_c in (1, 2, 3):
            assert abs(pdet_tc(g, sc, n_c, lam) - pdet_tc_bruteforce(g, sc, n_c, lam)) <= 1e-10


def test_bruteforce_hand_checks():
    sc = _scenario(8, 2)
    g = 3.0
    u = (2 / (2 + g)) ** 2
    assert pdet_tc_bruteforce(g, sc, 2, np.zeros(3)) == pytest.approx(pfa_tc(g, 8, 2, 2), rel=1e-12)
    lam = np.array([0.0, 4.0, 0.0])
    p = 1 - phi_f(g, 2, 4.0)
    # N_C = 1: one minus the product of the three non-exceedance probabilities
    assert pdet_tc_bruteforce(g, sc, 1, lam) == pytest.approx(1 - (1 - u) ** 2 * (1 - p), rel=1e-12)
    with pytest.raises(ValueError):
        pdet_tc_bruteforce(g, _scenario(2 * BRUTEFORCE_MAX_ETA + 4, 1), 1)


def test_roc_curves():
    rng = np.random.default_rng(4)
    sc = _scenario(256, 10, _random_signal(rng, 256, 3))
    grid = np.linspace(0.01, 0.9, 25)
    r = roc_tm(grid, sc)
    assert np.all(np.diff(r) >= -1e-12)
    assert roc_tm([1.0], sc)[0] == 1.0
    null = _scenario(256, 10)
    assert np.allclose(roc_tm(grid, null), grid, rtol=1e-10)
    assert np.allclose(roc_tc(grid, null, 4), grid, rtol=1e-8)


def test_white_assumed_rates():
    assert pfa_white_assumed(0.0, 64, "TM") == 1.0
    assert pfa_white_assumed(0.0, 64, "TC", 3) == pytest.approx(1.0)
    g = gamma_white_assumed(0.01, 1024)
    assert g == pytest.approx(2 * gamma_tm(0.01, 1024, math.inf))
    assert pfa_white_assumed(g, 1024, "TM") == pytest.approx(0.01, rel=1e-12)
    assert pfa_white_assumed(gamma_white_assumed(0.05, 1024, "TC", 4), 1024, "TC", 4) == pytest.approx(0.05)
    with pytest.raises(ValueError):
        pfa_white_assumed(1.0, 64, "HC")


def test_ar_approx_identity():
    g = np.linspace(0, 12, 13)
    assert pfa_ar_approx(0.0, 1024, 5) == pytest.approx(1.0)
    assert np.allclose(pfa_ar_approx(g, 1024, 5), pfa_white_assumed(2 * g, 1024, "TC", 5), rtol=1e-12)
    # threshold for an approximate rate of 0.013 with N_C = 5 at N = 1024
    assert gamma_tc(0.013, 1024, math.inf, 5) == pytest.approx(5.92, abs=0.01)


def test_psd_of_ar6_is_usable_in_scenario():
    sc = Scenario(1024, 20, noise_psd(ar6_model(), 1024))
    assert sc.noise_psd.shape == (513,)
