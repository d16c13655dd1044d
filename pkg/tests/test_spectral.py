import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import stats

from stdpgram.noisegen import NoiseModel, RngSeed, ar6_model, gen_noise, gen_training_set, noise_psd
from stdpgram.spectral import (
    DegenerateReferenceError,
    GridMismatchError,
    IndexSet,
    PeriodogramVec,
    TimeSeries,
    TrainingSet,
    averaged_periodogram,
    periodogram,
    periodogram_ordinates,
    standardize,
)
from stdpgram.specfun import f_cdf_2_2L


def _two_sided(p_full, n):
    # ordinates k = 1..N/2-1 appear twice on the full grid 0..N-1
    return p_full[0] + p_full[-1] + 2.0 * p_full[1:-1].sum()


def test_constant_series():
    p = periodogram(TimeSeries(np.ones(4)), IndexSet.FULL)
    assert p.ordinates == pytest.approx([4.0, 0.0, 0.0], abs=1e-14)


def test_on_grid_cosine():
    x = np.cos(2 * np.pi * np.arange(1, 9) / 8)
    p = periodogram(x)
    assert p.ordinates[0] == pytest.approx(2.0)
    assert np.allclose(p.ordinates[1:], 0.0, atol=1e-14)


def test_parseval_random():
    x = np.random.default_rng(3).standard_normal(64)
    p = periodogram(x, IndexSet.FULL).ordinates
    assert _two_sided(p, 64) == pytest.approx(np.sum(x**2), rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(
    st.integers(2, 300).flatmap(
        lambda h: arrays(np.float64, 2 * h, elements=st.floats(-1e3, 1e3))
    )
)
def test_parseval_property(x):
    p = periodogram_ordinates(x)
    total = np.sum(x**2)
    assert abs(_two_sided(p, x.size) - total) <= 1e-9 * max(total, 1e-300) + 1e-12


@settings(max_examples=40, deadline=None)
@given(
    st.integers(2, 200).flatmap(lambda h: arrays(np.float64, 2 * h, elements=st.floats(-10, 10))),
    st.floats(-50, 50),
)
def test_mean_shift_only_moves_dc(x, c):
    a = periodogram_ordinates(x)
    b = periodogram_ordinates(x + c)
    assert np.allclose(a[1:], b[1:], rtol=1e-9, atol=1e-9 * (1 + np.sum(x**2) + x.size * c**2))


@pytest.mark.parametrize("n", [8, 64, 1110, 1024, 2050])
def test_fft_matches_direct_sum(n):
    x = np.random.default_rng(n).standard_normal(n)
    a = periodogram_ordinates(x, "fft")
    b = periodogram_ordinates(x, "direct")
    assert np.max(np.abs(a - b)) <= 1e-9 * a.max()


def test_odd_length_rejected():
    with pytest.raises(ValueError):
        periodogram_ordinates(np.ones(7))
    with pytest.raises(ValueError):
        TimeSeries(np.ones(7))


def test_timeseries_validation():
    with pytest.raises(ValueError):
        TimeSeries(np.ones(2))
    with pytest.raises(ValueError):
        TimeSeries(np.array([1.0, np.nan, 0.0, 1.0]))
    with pytest.raises(ValueError):
        TimeSeries(np.ones(4), dt=0.0)
    ts = TimeSeries(np.ones(4), dt=0.5)
    assert ts.times.tolist() == [0.5, 1.0, 1.5, 2.0]
    with pytest.raises(ValueError):
        ts.samples[0] = 3.0


def test_periodogram_vec_shapes():
    p = periodogram(np.arange(10.0), IndexSet.FULL)
    assert p.k.tolist() == list(range(6))
    q = p.restrict(IndexSet.OMEGA)
    assert q.k.tolist() == [1, 2, 3, 4]
    assert np.allclose(q.freqs, np.arange(1, 5) / 10)
    with pytest.raises(ValueError):
        q.restrict(IndexSet.FULL)
    with pytest.raises(ValueError):
        PeriodogramVec(np.ones(3), 10)


def test_averaged_single_series():
    x = np.random.default_rng(1).standard_normal(32)
    a = averaged_periodogram([x])
    assert np.array_equal(a.ordinates, periodogram(x).ordinates)


def test_averaged_sign_invariance():
    x = np.random.default_rng(2).standard_normal(32)
    a = averaged_periodogram([x, -x])
    assert np.allclose(a.ordinates, periodogram(x).ordinates, rtol=1e-14)


def test_averaged_white_mean_is_variance():
    rng = np.random.default_rng(5)
    ts = TrainingSet(tuple(TimeSeries(rng.standard_normal(256)) for _ in range(200)))
    a = averaged_periodogram(ts)
    # each ordinate is Exp(1); its 200-series mean has standard error 1/sqrt(200)
    assert np.all(np.abs(a.ordinates - 1.0) < 5 / np.sqrt(200))


def test_training_grid_mismatch():
    with pytest.raises(GridMismatchError):
        TrainingSet((TimeSeries(np.ones(8)), TimeSeries(np.ones(10))))
    with pytest.raises(GridMismatchError):
        TrainingSet((TimeSeries(np.ones(8), 1.0), TimeSeries(np.ones(8), 2.0)))


def test_standardize_self_is_one():
    p = periodogram(np.random.default_rng(4).standard_normal(64))
    assert np.allclose(standardize(p, p).ordinates, 1.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(1e-6, 1e6))
def test_standardize_scale_invariant(c):
    rng = np.random.default_rng(8)
    x, y = rng.standard_normal(64), rng.standard_normal(64)
    a = standardize(periodogram(x), periodogram(y)).ordinates
    b = standardize(periodogram(c * x), periodogram(c * y)).ordinates
    assert np.allclose(a, b, rtol=1e-9)


def test_standardize_errors():
    p = periodogram(np.random.default_rng(4).standard_normal(64))
    with pytest.raises(GridMismatchError):
        standardize(p, periodogram(np.ones(32)))
    zero = PeriodogramVec(np.zeros(31), 64)
    with pytest.raises(DegenerateReferenceError):
        standardize(p, zero)


def test_standardized_marginal_is_f_2_40():
    n, L = 1024, 20
    m = NoiseModel.white()
    x = gen_noise(m, n, RngSeed(10, 0))
    ts = gen_training_set(m, n, L, RngSeed(10, 1))
    z = standardize(periodogram(x), averaged_periodogram(ts)).ordinates
    assert stats.kstest(z, lambda g: f_cdf_2_2L(g, L)).pvalue > 0.01


def test_pooled_null_f_marginal_under_colored_noise():
    n, L = 256, 5
    # exact synthesis from the AR(6) PSD, free of finite-N leakage
    m = NoiseModel.tabulated(np.arange(n // 2 + 1) / n, noise_psd(ar6_model(), n))
    pooled = []
    for t in range(80):
        x = gen_noise(m, n, RngSeed(77, 7 * t))
        ts = gen_training_set(m, n, L, RngSeed(77, 7 * t + 1))
        pooled.append(standardize(periodogram(x), averaged_periodogram(ts)).ordinates)
    z = np.concatenate(pooled)
    assert z.size > 10_000
    assert stats.kstest(z, lambda g: f_cdf_2_2L(g, L)).pvalue > 0.01
