"""Closed-form false-alarm and detection probabilities of T_M and T_C.

Thresholds ``gamma`` act on standardized ordinates P / P_bar_L (or on
P / S_E when L is infinite).  ``L = math.inf`` selects the known-PSD limit
in which F(2, 2L) becomes chi2_2 / 2.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import gammaln

from .sigmodel import SinusoidModel
from .specfun import chi2_cdf, f_cdf, reg_inc_beta
from .spectral import periodogram_ordinates

__all__ = [
    "Scenario",
    "LAMBDA_FLOOR",
    "BRUTEFORCE_MAX_ETA",
    "dirichlet_kernel",
    "fejer_kernel",
    "noncentrality",
    "noncentrality_dft",
    "phi_f",
    "pfa_tm",
    "gamma_tm",
    "pdet_tm",
    "roc_tm",
    "pfa_tc",
    "gamma_tc",
    "pdet_tc",
    "pdet_tc_bruteforce",
    "roc_tc",
    "pfa_white_assumed",
    "gamma_white_assumed",
    "pfa_ar_approx",
]

LAMBDA_FLOOR = 1e-12
BRUTEFORCE_MAX_ETA = 20


@dataclass(frozen=True)
class Scenario:
    """Observation setting: N samples at step dt, L training series, noise PSD on k = 0..N/2.

    Signal frequencies are in cycles per unit time; the grid frequency of
    index k is k / (N dt).
    """

    N: int
    L: float
    noise_psd: np.ndarray = field(repr=False)
    signal: SinusoidModel = SinusoidModel()
    dt: float = 1.0

    def __post_init__(self):
        if self.N < 4 or self.N % 2:
            raise ValueError("N must be even and >= 4")
        if not (self.L >= 1):
            raise ValueError("L must be >= 1 (math.inf for a known PSD)")
        s = np.array(self.noise_psd, dtype=float)
        if s.ndim == 0:
            s = np.full(self.N // 2 + 1, float(s))
        if s.shape != (self.N // 2 + 1,):
            raise ValueError(f"noise_psd needs N/2 + 1 = {self.N // 2 + 1} values")
        if not np.all(np.isfinite(s)) or np.any(s <= 0):
            raise ValueError("noise PSD must be strictly positive")
        s.setflags(write=False)
        object.__setattr__(self, "noise_psd", s)
        if not isinstance(self.signal, SinusoidModel):
            raise TypeError("Scenario.signal must be a SinusoidModel")
        for c in self.signal.components:
            if c.freq * self.dt >= 0.5:
                raise ValueError("signal frequency at or above Nyquist")

    @property
    def eta(self):
        return self.N // 2 - 1

    def with_signal(self, signal):
        return Scenario(self.N, self.L, self.noise_psd, signal, self.dt)

    def with_L(self, L):
        return Scenario(self.N, L, self.noise_psd, self.signal, self.dt)


def _ratio_sin(nu, n):
    """sin(N pi nu) / (N sin(pi nu)), continuous at integer nu."""
    nu = np.asarray(nu, dtype=float)
    m = np.rint(nu)
    r = nu - m  # reduce first: sin(pi nu) near an integer loses digits otherwise
    # shifting nu by an integer m multiplies the ratio by (-1)^(m (N - 1))
    sign = np.where((m.astype(np.int64) * (n - 1)) % 2 == 0, 1.0, -1.0)
    on = np.abs(r) < 1e-13
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.sin(n * np.pi * r) / (n * np.sin(np.pi * r))
    return sign * np.where(on, 1.0, ratio)


def dirichlet_kernel(nu, n):
    """D_N(nu) = (1/N) sum_{j=1..N} exp(i 2 pi nu j)."""
    if n < 1:
        raise ValueError("N must be >= 1")
    nu = np.asarray(nu, dtype=float)
    out = _ratio_sin(nu, n) * np.exp(1j * (n + 1) * np.pi * nu)
    return complex(out) if out.ndim == 0 else out


def fejer_kernel(nu, n):
    """|D_N(nu)|^2."""
    r = _ratio_sin(nu, n) ** 2
    return float(r) if np.ndim(r) == 0 else r


def _z_components(sc, k):
    """kappa_q, theta_q for each sinusoid (rows) at each index k (columns)."""
    nu = np.asarray(k, dtype=float)[None, :] / sc.N
    comps = sc.signal.components
    f = np.array([c.freq * sc.dt for c in comps])[:, None]
    phi = np.array([c.phase for c in comps])[:, None]
    n = sc.N
    x_p = _ratio_sin(f - nu, n)
    x_m = _ratio_sin(f + nu, n)
    th_p = (n + 1) * np.pi * (f - nu) + phi - np.pi / 2
    th_m = -((n + 1) * np.pi * (f + nu) + phi + np.pi / 2)
    z = x_p * np.exp(1j * th_p) - x_m * np.exp(1j * th_m)
    return np.abs(z), np.angle(z)


def noncentrality(sc, full=False):
    """lambda_k on Omega (or on k = 0..N/2 with ``full``) for the scenario's sinusoids.

    Evaluated from the modulus/phase decomposition of each sinusoid's
    leakage, summed with explicit cross terms.  The DC and Nyquist values
    are halved.
    """
    k = np.arange(0, sc.N // 2 + 1) if full else np.arange(1, sc.N // 2)
    if sc.signal.n_s == 0:
        return np.zeros(k.size)
    kappa, theta = _z_components(sc, k)
    alpha = np.array([c.alpha for c in sc.signal.components])[:, None]
    ak = alpha * kappa
    total = (ak**2).sum(axis=0)
    nq = ak.shape[0]
    for q in range(nq):
        for l in range(q + 1, nq):
            total += 2.0 * ak[q] * ak[l] * np.cos(theta[q] - theta[l])
    lam = sc.N / (2.0 * sc.noise_psd[k]) * np.maximum(total, 0.0)
    if full:
        lam[0] *= 0.5
        lam[-1] *= 0.5
    return lam


def noncentrality_dft(sc, samples, full=False, method="fft"):
    """lambda_k = 2 N |mu_k|^2 / S_E(nu_k) from the DFT of noiseless samples (N |mu|^2 / S at the edges).

    With mu_k = (1/N) sum_j R_j exp(-i 2 pi nu_k j), 2 N |mu_k|^2 is twice
    the periodogram of the noiseless signal.
    """
    lam = 2.0 * periodogram_ordinates(samples, method=method) / sc.noise_psd
    lam[0] *= 0.5
    lam[-1] *= 0.5
    return lam if full else lam[1:-1]


def _check_L(L):
    if not L >= 1:
        raise ValueError("L must be >= 1")


def phi_f(gamma, L, lam=0.0):
    """CDF at gamma of the standardized ordinate: F_lam(2, 2L), or chi2_{2,lam} / 2 for L = inf."""
    _check_L(L)
    gamma = np.asarray(gamma, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if np.isinf(L):
        if not np.any(lam):
            return -np.expm1(-gamma) + 0 * lam
        return chi2_cdf(2.0 * gamma, 2, lam)
    if not np.any(lam):
        return -np.expm1(-L * np.log1p(gamma / L)) + 0 * lam
    return f_cdf(gamma, 2, 2 * L, lam)


def _survival_central(gamma, L):
    """u = 1 - Phi_F(gamma, 2, 2L) = (L / (gamma + L))^L."""
    gamma = np.asarray(gamma, dtype=float)
    if np.isinf(L):
        return np.exp(-gamma)
    return np.exp(-L * np.log1p(gamma / L))


def _float(x):
    return float(x) if np.ndim(x) == 0 else x


def pfa_tm(gamma, n, L):
    """1 - (1 - u)^eta with u = (L/(gamma+L))^L."""
    _check_L(L)
    if np.any(np.asarray(gamma) < 0):
        raise ValueError("gamma must be >= 0")
    eta = n // 2 - 1
    u = _survival_central(gamma, L)
    with np.errstate(divide="ignore"):
        return _float(-np.expm1(eta * np.log1p(-u)))


def gamma_tm(pfa, n, L):
    """Threshold of T_M for a target false-alarm rate (inverse of :func:`pfa_tm`)."""
    _check_L(L)
    pfa = np.asarray(pfa, dtype=float)
    if np.any((pfa <= 0) | (pfa >= 1)):
        raise ValueError("pfa must lie strictly between 0 and 1")
    eta = n // 2 - 1
    u = -np.expm1(np.log1p(-pfa) / eta)  # per-ordinate exceedance probability
    if np.isinf(L):
        return _float(-np.log(u))
    return _float(L * np.expm1(-np.log(u) / L))


def pdet_tm(gamma, sc, lam=None):
    """1 - prod_k Phi_{F_lam_k}(gamma, 2, 2L) over Omega."""
    if lam is None:
        lam = noncentrality(sc)
    scalar = np.ndim(gamma) == 0
    gamma = np.atleast_1d(np.asarray(gamma, dtype=float))
    out = np.empty(gamma.shape)
    big = lam > LAMBDA_FLOOR
    n0 = int((~big).sum())
    for i, g in enumerate(gamma):
        log_cdf = n0 * np.log1p(-_survival_central(g, sc.L)) if n0 else 0.0
        if big.any():
            with np.errstate(divide="ignore"):
                log_cdf = log_cdf + np.sum(np.log(np.asarray(phi_f(g, sc.L, lam[big]))))
        out[i] = -np.expm1(log_cdf)
    return float(out[0]) if scalar else out


def roc_tm(pfa_grid, sc):
    """P_DET of T_M at the thresholds matching each target false-alarm rate."""
    pfa_grid = np.asarray(pfa_grid, dtype=float)
    lam = noncentrality(sc)
    out = np.empty(pfa_grid.shape)
    for i, p in enumerate(pfa_grid.flat):
        if p >= 1:
            out.flat[i] = 1.0
        elif p <= 0:
            out.flat[i] = 0.0
        else:
            out.flat[i] = pdet_tm(gamma_tm(p, sc.N, sc.L), sc, lam)
    return out


def _check_nc(n, n_c):
    eta = n // 2 - 1
    if not 1 <= n_c <= eta:
        raise ValueError(f"N_C must lie in 1..{eta}")


def pfa_tc(gamma, n, L, n_c):
    """I_u(N_C, N/2 - N_C) with u = (L/(gamma+L))^L."""
    _check_L(L)
    _check_nc(n, n_c)
    u = _survival_central(gamma, L)
    return _float(reg_inc_beta(np.clip(u, 0.0, 1.0), float(n_c), float(n // 2 - n_c)))


def gamma_tc(pfa, n, L, n_c):
    """Threshold of T_C for a target false-alarm rate, by root finding on :func:`pfa_tc`."""
    _check_nc(n, n_c)
    if not 0 < pfa < 1:
        raise ValueError("pfa must lie strictly between 0 and 1")
    # work with the per-ordinate exceedance u, then map back to gamma
    target = math.log(pfa)

    def g(log_u):
        return math.log(max(reg_inc_beta(math.exp(log_u), float(n_c), float(n // 2 - n_c)), 1e-320)) - target

    lo = -1.0
    while g(lo) > 0:
        lo *= 2.0
        if lo < -1400:
            raise ArithmeticError("threshold search for T_C did not bracket the target")
    log_u = brentq(g, lo, 0.0, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    if np.isinf(L):
        return -log_u
    return L * math.expm1(-log_u / L)


def _binom_pmf_head(m, p, kmax):
    """Binomial(m, p) pmf at 0..kmax."""
    k = np.arange(kmax + 1)
    out = np.zeros(kmax + 1)
    ok = k <= m
    kk = k[ok]
    if p <= 0:
        out[0] = 1.0
        return out
    if p >= 1:
        if m <= kmax:
            out[m] = 1.0
        return out
    logc = gammaln(m + 1) - gammaln(kk + 1) - gammaln(m - kk + 1)
    out[ok] = np.exp(logc + kk * math.log(p) + (m - kk) * math.log1p(-p))
    return out


def _exceed_probs(gamma, sc, lam):
    return 1.0 - np.asarray(phi_f(gamma, sc.L, lam), dtype=float)


def pdet_tc(gamma, sc, n_c, lam=None):
    """Pr(K >= N_C) with K the number of ordinates above gamma (Poisson-binomial).

    Indices with lambda_k <= 1e-12 are pooled into a binomial block with the
    central exceedance probability; the rest enter a truncated
    convolution recursion.
    """
    _check_nc(sc.N, n_c)
    if lam is None:
        lam = noncentrality(sc)
    big = lam > LAMBDA_FLOOR
    m0 = int((~big).sum())
    u0 = float(_survival_central(gamma, sc.L))
    head = _binom_pmf_head(m0, u0, n_c - 1)  # truncated pmf of the bulk count
    if big.any():
        for p in _exceed_probs(gamma, sc, lam[big]):
            shifted = np.r_[0.0, head[:-1]]
            head = head * (1.0 - p) + shifted * p
    return float(min(1.0, max(0.0, 1.0 - head.sum())))


def pdet_tc_bruteforce(gamma, sc, n_c, lam=None):
    """Literal sum over every subset of Omega with at least N_C exceedances (eta <= 20)."""
    eta = sc.eta
    if eta > BRUTEFORCE_MAX_ETA:
        raise ValueError(f"enumeration oracle is limited to eta <= {BRUTEFORCE_MAX_ETA}")
    _check_nc(sc.N, n_c)
    if lam is None:
        lam = noncentrality(sc)
    p = np.where(lam > 0, _exceed_probs(gamma, sc, np.maximum(lam, 0)), _survival_central(gamma, sc.L))
    masks = np.arange(1 << eta, dtype=np.int64)
    bits = (masks[:, None] >> np.arange(eta)) & 1
    keep = bits.sum(axis=1) >= n_c
    b = bits[keep].astype(bool)
    terms = np.where(b, p, 1.0 - p).prod(axis=1)
    return float(terms.sum())


def roc_tc(pfa_grid, sc, n_c):
    lam = noncentrality(sc)
    return np.array(
        [pdet_tc(gamma_tc(p, sc.N, sc.L, n_c), sc, n_c, lam) for p in np.asarray(pfa_grid, dtype=float)]
    )


def pfa_white_assumed(gamma, n, test="TM", n_c=1):
    """False-alarm rate a detector assuming white noise claims for thresholds on Z = 2 P / sigma2.

    Per-ordinate exceedance is 1 - Phi_chi2_2(gamma) = exp(-gamma / 2).
    """
    u = np.exp(-np.asarray(gamma, dtype=float) / 2.0)
    if str(test) in ("TM", "TestName.TM"):
        eta = n // 2 - 1
        with np.errstate(divide="ignore"):
            return _float(-np.expm1(eta * np.log1p(-u)))
    if str(test) in ("TC", "TestName.TC"):
        _check_nc(n, n_c)
        return _float(reg_inc_beta(u, float(n_c), float(n // 2 - n_c)))
    raise ValueError(f"white-noise rate is defined for TM and TC, not {test}")


def gamma_white_assumed(pfa, n, test="TM", n_c=1):
    """Threshold on Z = 2 P / sigma2 with nominal white-noise false-alarm rate ``pfa``."""
    if str(test) in ("TC", "TestName.TC"):
        return 2.0 * gamma_tc(pfa, n, math.inf, n_c)
    return 2.0 * gamma_tm(pfa, n, math.inf)


def pfa_ar_approx(gamma, n, n_c):
    """I_u(N_C, N/2 - N_C) with u = exp(-gamma): the rate obtained if the fitted AR PSD were exact."""
    _check_nc(n, n_c)
    u = np.exp(-np.asarray(gamma, dtype=float))
    return _float(reg_inc_beta(u, float(n_c), float(n // 2 - n_c)))
