"""Test statistics on (standardized) periodogram ordinates and on p-value vectors.

Every statistic accepts a 1-D vector or a 2-D batch (one row per trial);
batches return an array of values instead of a :class:`TestStatistic`.
"""

import threading
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .specfun import chi2_cdf, f_cdf, reg_inc_beta
from .spectral import IndexSet, PeriodogramVec

__all__ = [
    "TestName",
    "TestStatistic",
    "PValueVec",
    "Decision",
    "t_max",
    "t_fisher",
    "t_c",
    "pvalues_standardized",
    "pvalues_whitenoise",
    "hc_star",
    "bj",
    "decide",
    "calibrate_threshold",
    "DEFAULT_ALPHA0",
    "PVALUE_FLOOR",
]

DEFAULT_ALPHA0 = 0.5
PVALUE_FLOOR = 1e-300
CALIBRATION_TRIALS = 100_000
_BELOW_ONE = np.nextafter(1.0, 0.0)


class TestName(str, Enum):
    __test__ = False  # not a pytest class

    TM = "TM"
    TF = "TF"
    TC = "TC"
    HC = "HC"
    BJ = "BJ"


class Decision(str, Enum):
    H0 = "H0"
    H1 = "H1"


@dataclass(frozen=True)
class TestStatistic:
    __test__ = False

    name: TestName
    value: float
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "name", TestName(self.name))
        if not np.isfinite(self.value):
            raise ValueError(f"{self.name.value} statistic is not finite")


@dataclass(frozen=True)
class PValueVec:
    """p-values in (0, 1] with a tag naming the null law that produced them."""

    values: np.ndarray
    null_model: str

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.size == 0 or np.any(~(v > 0)) or np.any(v > 1):
            raise ValueError("p-values must lie in (0, 1]")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


def _z(z):
    z = np.asarray(z.ordinates if isinstance(z, PeriodogramVec) else z, dtype=float)
    if z.shape[-1] == 0:
        raise ValueError("statistic needs a nonempty vector")
    return z


def _wrap(name, value, **params):
    if np.ndim(value) == 0:
        return TestStatistic(name, float(value), params)
    return value


def t_max(z):
    """Largest ordinate."""
    return _wrap(TestName.TM, _z(z).max(axis=-1))


def t_fisher(z):
    """Largest ordinate over the sum of ordinates."""
    z = _z(z)
    if np.any(z < 0):
        raise ValueError("Fisher's statistic needs nonnegative ordinates")
    total = z.sum(axis=-1)
    if np.any(total == 0):
        raise ValueError("Fisher's statistic is undefined for an all-zero vector")
    return _wrap(TestName.TF, z.max(axis=-1) / total)


def t_c(z, n_c):
    """The N_C-th largest ordinate."""
    z = _z(z)
    n = z.shape[-1]
    if not 1 <= n_c <= n:
        raise ValueError(f"N_C must lie in 1..{n}, got {n_c}")
    value = np.partition(z, n - n_c, axis=-1)[..., n - n_c]
    return _wrap(TestName.TC, value, n_c=int(n_c))


def pvalues_standardized(p_std, L):
    """v_k = 1 - Phi_F(p_k; 2, 2L), or F(1, L) at the DC/Nyquist ordinates."""
    if not isinstance(p_std, PeriodogramVec):
        p_std = np.asarray(p_std, dtype=float)
        return np.maximum(_f_sf_2_2L(p_std, L), PVALUE_FLOOR)
    v = _f_sf_2_2L(p_std.ordinates, L)
    if p_std.index_set is IndexSet.FULL:
        edges = [0, -1]
        v[edges] = 1.0 - f_cdf(p_std.ordinates[edges], 1, L)
    return PValueVec(np.maximum(v, PVALUE_FLOOR), f"F(2,{2 * L})")


def _f_sf_2_2L(x, L):
    # survival of F(2, 2L) in closed form; L = inf gives the chi2_2 / 2 limit
    x = np.asarray(x, dtype=float)
    if np.isinf(L):
        return np.exp(-x)
    return np.exp(-L * np.log1p(x / L))


def pvalues_whitenoise(p, sigma2):
    """v_k = 1 - Phi_chi2_2(2 P_k / sigma2), chi2_1 at the DC/Nyquist ordinates."""
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    if not isinstance(p, PeriodogramVec):
        return np.maximum(np.exp(-np.asarray(p, dtype=float) / sigma2), PVALUE_FLOOR)
    v = np.exp(-p.ordinates / sigma2)
    if p.index_set is IndexSet.FULL:
        edges = [0, -1]
        v[edges] = 1.0 - chi2_cdf(p.ordinates[edges] / sigma2, 1)
    return PValueVec(np.maximum(v, PVALUE_FLOOR), "chi2_2/2")


def _sorted_p(v):
    v = np.asarray(v.values if isinstance(v, PValueVec) else v, dtype=float)
    if v.shape[-1] == 0:
        raise ValueError("empty p-value vector")
    return np.sort(np.clip(v, PVALUE_FLOOR, 1.0), axis=-1)


def _k_max(n_v, alpha0):
    if not 0 < alpha0 <= 1:
        raise ValueError("alpha0 must lie in (0, 1]")
    k = int(np.floor(alpha0 * n_v + 1e-9))
    if k < 1:
        raise ValueError("alpha0 * N_v must be at least 1")
    return k


def hc_star(v, alpha0=DEFAULT_ALPHA0):
    """Higher Criticism over the ordered p-values v_(1..floor(alpha0 N_v))."""
    vs = _sorted_p(v)
    n_v = vs.shape[-1]
    km = _k_max(n_v, alpha0)
    # v = 1 gives a nonpositive numerator over a zero denominator; capping it
    # one ulp below 1 keeps such terms finite and very negative
    vk = np.minimum(vs[..., :km], _BELOW_ONE)
    k = np.arange(1, km + 1)
    terms = np.sqrt(n_v) * (k / n_v - vk) / np.sqrt(vk * (1.0 - vk))
    value = terms.max(axis=-1)
    return _wrap(TestName.HC, value, alpha0=alpha0)


def bj(v, alpha0=DEFAULT_ALPHA0):
    """Berk-Jones: max_k I_{1 - v_(k)}(N_v - k + 1, k) over k <= alpha0 N_v."""
    vs = _sorted_p(v)
    n_v = vs.shape[-1]
    km = _k_max(n_v, alpha0)
    k = np.arange(1, km + 1)
    terms = reg_inc_beta(1.0 - vs[..., :km], n_v - k + 1.0, k.astype(float))
    value = np.max(terms, axis=-1)
    return _wrap(TestName.BJ, value, alpha0=alpha0)


def decide(stat, threshold):
    """H1 iff the statistic strictly exceeds the threshold."""
    value = stat.value if isinstance(stat, TestStatistic) else stat
    return Decision.H1 if value > threshold else Decision.H0


_cal_lock = threading.Lock()
_cal_cache = {}


def _null_statistics(name, n_v, alpha0, trials, seed, L):
    rng = np.random.default_rng(
        np.random.SeedSequence(seed, spawn_key=(n_v, int(round(alpha0 * 1e6)), 0 if L is None else int(L)))
    )
    out = np.empty(trials)
    chunk = max(1, 2_000_000 // n_v)
    for s in range(0, trials, chunk):
        m = min(chunk, trials - s)
        if name is TestName.TF:
            # standardized ordinates under the null: Exp(1) over Gamma(L, 1) / L
            z = rng.standard_exponential((m, n_v)) / (rng.standard_gamma(L, (m, n_v)) / L)
            out[s : s + m] = t_fisher(z)
            continue
        u = 1.0 - rng.random((m, n_v))  # (0, 1]
        out[s : s + m] = hc_star(u, alpha0) if name is TestName.HC else bj(u, alpha0)
    return out


def calibrate_threshold(
    name, n_v, pfa, alpha0=DEFAULT_ALPHA0, trials=CALIBRATION_TRIALS, seed=0, L=None
):
    """Monte-Carlo threshold of HC, BJ or TF at false-alarm rate ``pfa``.

    Under the null the standardized p-values are i.i.d. uniform whatever the
    noise PSD, so HC/BJ thresholds depend only on (N_v, alpha0); TF needs the
    training size L.  Null samples are computed once per
    (test, N_v, alpha0, L, trials, seed) and cached.
    """
    name = TestName(name)
    if name not in (TestName.HC, TestName.BJ, TestName.TF):
        raise ValueError("Monte-Carlo calibration is provided for HC, BJ and TF")
    if name is TestName.TF:
        if L is None or not L >= 1:
            raise ValueError("calibrating TF needs the training size L")
        alpha0 = 1.0
    else:
        L = None
    if not 0 < pfa < 1:
        raise ValueError("pfa must lie in (0, 1)")
    if pfa * trials < 10:
        raise ValueError(f"pfa={pfa} needs at least {int(np.ceil(10 / pfa))} calibration trials")
    key = (name, n_v, float(alpha0), L, trials, seed)
    with _cal_lock:
        null = _cal_cache.get(key)
    if null is None:
        null = np.sort(_null_statistics(name, n_v, alpha0, trials, seed, L))
        null.setflags(write=False)
        with _cal_lock:
            null = _cal_cache.setdefault(key, null)
    idx = min(trials - 1, int(np.ceil(trials * (1.0 - pfa))) - 1)
    return float(null[idx])
