"""Special functions needed by the detection formulas.

Regularized incomplete beta and gamma functions (continued fractions and
series, vectorized over numpy arrays), the central and noncentral F and
chi-squared CDFs built on them, and the closed-form F(2, 2L) CDF.

Only ``scipy.special.gammaln`` is borrowed, as the log-gamma primitive.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

__all__ = [
    "ConvergenceError",
    "DistParams",
    "reg_inc_beta",
    "reg_inc_gamma",
    "f_cdf",
    "f_cdf_2_2L",
    "chi2_cdf",
    "poisson_window",
]

MAX_ITER = 500
REL_TOL = 1e-14
SERIES_TAIL = 1e-14
SERIES_CAP = 200_000
_TINY = 1e-300


class ConvergenceError(ArithmeticError):
    """Raised when an iterative evaluation exceeds its iteration cap."""


@dataclass(frozen=True)
class DistParams:
    """Degrees of freedom and noncentrality of an F law."""

    d1: int
    d2: int
    lam: float = 0.0

    def __post_init__(self):
        if self.d1 < 1 or self.d2 < 1:
            raise ValueError(f"degrees of freedom must be >= 1, got ({self.d1}, {self.d2})")
        if not self.lam >= 0:
            raise ValueError(f"noncentrality must be >= 0, got {self.lam}")


def _betacf(a, b, x):
    """Modified Lentz evaluation of the incomplete-beta continued fraction.

    All inputs are 1-D arrays of equal length with x < (a+1)/(a+b+2).
    """
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = np.ones_like(x)
    d = 1.0 - qab * x / qap
    d = np.where(np.abs(d) < _TINY, _TINY, d)
    d = 1.0 / d
    h = d.copy()
    active = np.ones(x.shape, dtype=bool)
    for m in range(1, MAX_ITER + 1):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            return h
        aa_, bb_, xx = a[idx], b[idx], x[idx]
        cc, dd, hh = c[idx], d[idx], h[idx]
        m2 = 2 * m
        # even step
        num = m * (bb_ - m) * xx / ((qam[idx] + m2) * (aa_ + m2))
        dd = 1.0 + num * dd
        dd = np.where(np.abs(dd) < _TINY, _TINY, dd)
        cc = 1.0 + num / cc
        cc = np.where(np.abs(cc) < _TINY, _TINY, cc)
        dd = 1.0 / dd
        hh = hh * dd * cc
        # odd step
        num = -(aa_ + m) * (qab[idx] + m) * xx / ((aa_ + m2) * (qap[idx] + m2))
        dd = 1.0 + num * dd
        dd = np.where(np.abs(dd) < _TINY, _TINY, dd)
        cc = 1.0 + num / cc
        cc = np.where(np.abs(cc) < _TINY, _TINY, cc)
        dd = 1.0 / dd
        delta = dd * cc
        hh = hh * delta
        c[idx], d[idx], h[idx] = cc, dd, hh
        active[idx] = np.abs(delta - 1.0) > REL_TOL
    if active.any():
        raise ConvergenceError(
            f"incomplete beta continued fraction did not converge in {MAX_ITER} iterations"
        )
    return h


def reg_inc_beta(x, a, b):
    """Regularized incomplete beta function I_x(a, b).

    Parameters
    ----------
    x : array_like
        Points in [0, 1].
    a, b : array_like
        Positive shape parameters; broadcast against ``x``.

    Returns
    -------
    ndarray or float
        I_x(a, b), same broadcast shape as the inputs (a float for scalar input).
    """
    x, a, b = np.broadcast_arrays(
        np.asarray(x, dtype=float), np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    )
    scalar = x.ndim == 0
    if np.any(~(x >= 0.0) | ~(x <= 1.0)):
        raise ValueError("reg_inc_beta: x must lie in [0, 1]")
    if np.any(~(a > 0.0)) or np.any(~(b > 0.0)):
        raise ValueError("reg_inc_beta: a and b must be positive")
    xf, af, bf = x.ravel(), a.ravel(), b.ravel()
    out = np.empty(xf.shape)
    out[xf == 0.0] = 0.0
    out[xf == 1.0] = 1.0
    inner = (xf > 0.0) & (xf < 1.0)
    direct = inner & (xf < (af + 1.0) / (af + bf + 2.0))
    mirror = inner & ~direct
    if direct.any():
        out[direct] = _beta_front_cf(xf[direct], af[direct], bf[direct])
    if mirror.any():
        out[mirror] = 1.0 - _beta_front_cf(1.0 - xf[mirror], bf[mirror], af[mirror])
    out = out.reshape(x.shape)
    return float(out) if scalar else out


def _beta_front_cf(x, a, b):
    log_front = (
        gammaln(a + b) - gammaln(a) - gammaln(b) + a * np.log(x) + b * np.log1p(-x)
    )
    return np.exp(log_front) * _betacf(a, b, x) / a


def reg_inc_gamma(s, x):
    """Regularized lower incomplete gamma function P(s, x).

    Series expansion for x < s + 1, Lentz continued fraction for the upper
    function otherwise.
    """
    s, x = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(x, dtype=float))
    scalar = x.ndim == 0
    if np.any(~(x >= 0.0)):
        raise ValueError("reg_inc_gamma: x must be >= 0")
    if np.any(~(s > 0.0)):
        raise ValueError("reg_inc_gamma: s must be positive")
    sf, xf = s.ravel(), x.ravel()
    out = np.zeros(xf.shape)
    pos = xf > 0.0
    series = pos & (xf < sf + 1.0)
    frac = pos & ~series
    if series.any():
        out[series] = _gamma_series(sf[series], xf[series])
    if frac.any():
        out[frac] = 1.0 - _gamma_cf(sf[frac], xf[frac])
    out = np.clip(out, 0.0, 1.0).reshape(x.shape)
    return float(out) if scalar else out


def _gamma_series(s, x):
    term = 1.0 / s
    total = term.copy()
    ap = s.copy()
    active = np.ones(x.shape, dtype=bool)
    for _ in range(MAX_ITER * 4):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        ap[idx] += 1.0
        term[idx] *= x[idx] / ap[idx]
        total[idx] += term[idx]
        active[idx] = np.abs(term[idx]) > np.abs(total[idx]) * REL_TOL
    else:
        if active.any():
            raise ConvergenceError("incomplete gamma series did not converge")
    return total * np.exp(-x + s * np.log(x) - gammaln(s))


def _gamma_cf(s, x):
    b = x + 1.0 - s
    c = np.full(x.shape, 1.0 / _TINY)
    d = 1.0 / b
    h = d.copy()
    active = np.ones(x.shape, dtype=bool)
    for i in range(1, MAX_ITER + 1):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        an = -i * (i - s[idx])
        b[idx] += 2.0
        dd = an * d[idx] + b[idx]
        dd = np.where(np.abs(dd) < _TINY, _TINY, dd)
        cc = b[idx] + an / c[idx]
        cc = np.where(np.abs(cc) < _TINY, _TINY, cc)
        dd = 1.0 / dd
        delta = dd * cc
        h[idx] *= delta
        c[idx], d[idx] = cc, dd
        active[idx] = np.abs(delta - 1.0) > REL_TOL
    else:
        if active.any():
            raise ConvergenceError("incomplete gamma continued fraction did not converge")
    return np.exp(-x + s * np.log(x) - gammaln(s)) * h


def poisson_window(mu, tail=SERIES_TAIL, cap=SERIES_CAP):
    """Indices and Poisson(mu) weights carrying all but ``tail`` of the mass.

    The window starts at the modal index and grows in both directions until
    the neglected mass is below ``tail``.

    Returns
    -------
    j : ndarray of int
    w : ndarray of float
    """
    mu = float(mu)
    if mu == 0.0:
        return np.zeros(1, dtype=int), np.ones(1)
    mode = int(np.floor(mu))
    half = int(np.ceil(12.0 * np.sqrt(mu) + 45.0))
    if 2 * half > cap:
        raise ConvergenceError(
            f"noncentral series would need more than {cap} terms (noncentrality {2 * mu:g})"
        )
    lo = max(0, mode - half)
    j = np.arange(lo, mode + half + 1)
    logw = j * np.log(mu) - mu - gammaln(j + 1.0)
    w = np.exp(logw - logw.max())
    # the +-12 sigma window misses far less than `tail`; renormalize away
    # the rounding error of the log-gamma evaluation
    w /= w.sum()
    # grow outward from the mode until the captured mass is within tail of 1
    order = np.argsort(-w, kind="stable")
    captured = np.cumsum(w[order])
    n_keep = int(np.searchsorted(captured, 1.0 - tail)) + 1
    if n_keep > order.size or captured[-1] < 1.0 - tail:
        raise ConvergenceError(
            f"Poisson window for noncentrality {2 * mu:g} misses more than {tail:g} of the mass"
        )
    keep = np.sort(order[:n_keep])
    return j[keep], w[keep]


def _poisson_mixture(term_cdf, x, lam):
    """sum_j Pois(j; lam/2) * term_cdf(j, x), flattened over broadcast (x, lam)."""
    x, lam = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(lam, dtype=float))
    xf, lf = x.ravel(), lam.ravel()
    out = np.empty(xf.shape)
    js, ws, owner = [], [], []
    for i, (xi, li) in enumerate(zip(xf, lf)):
        j, w = poisson_window(li / 2.0)
        js.append(j)
        ws.append(w)
        owner.append(np.full(j.size, i))
    j = np.concatenate(js)
    w = np.concatenate(ws)
    owner = np.concatenate(owner)
    vals = term_cdf(j, xf[owner]) * w
    out[:] = np.bincount(owner, weights=vals, minlength=xf.size)
    return np.clip(out, 0.0, 1.0).reshape(x.shape)


def f_cdf(x, d1, d2, lam=0.0):
    """CDF of the (noncentral) F(d1, d2) law with noncentrality ``lam``.

    ``x`` and ``lam`` broadcast; ``d1`` and ``d2`` are scalars.  The
    noncentral case is the Poisson(lam/2) mixture of central beta CDFs.
    """
    DistParams(int(d1), int(d2), float(np.min(lam)) if np.size(lam) else 0.0)
    x = np.asarray(x, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if np.any(~(x >= 0.0)):
        raise ValueError("f_cdf: x must be >= 0")
    scalar = x.ndim == 0 and lam.ndim == 0
    x_b, lam_b = np.broadcast_arrays(x, lam)
    with np.errstate(invalid="ignore"):
        y = d1 * x_b / (d1 * x_b + d2)
    y = np.where(np.isinf(x_b), 1.0, y)
    out = np.empty(x_b.shape)
    central = lam_b == 0.0
    if central.any():
        out[central] = reg_inc_beta(y[central], d1 / 2.0, d2 / 2.0)
    if (~central).any():
        yy = y[~central]
        out[~central] = _poisson_mixture(
            lambda j, yv: reg_inc_beta(yv, d1 / 2.0 + j, d2 / 2.0), yy, lam_b[~central]
        )
    return float(out) if scalar else out


def f_cdf_2_2L(gamma, L):
    """Closed-form CDF of F(2, 2L): 1 - (L / (L + gamma))**L."""
    gamma = np.asarray(gamma, dtype=float)
    if np.any(~(gamma >= 0.0)):
        raise ValueError("f_cdf_2_2L: gamma must be >= 0")
    if L < 1:
        raise ValueError("f_cdf_2_2L: L must be >= 1")
    out = -np.expm1(-L * np.log1p(gamma / L))
    return float(out) if out.ndim == 0 else out


def chi2_cdf(x, dof, lam=0.0):
    """CDF of the (noncentral) chi-squared law with ``dof`` degrees of freedom."""
    if dof < 1:
        raise ValueError("chi2_cdf: dof must be >= 1")
    x = np.asarray(x, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if np.any(~(x >= 0.0)):
        raise ValueError("chi2_cdf: x must be >= 0")
    if np.any(~(lam >= 0.0)):
        raise ValueError("chi2_cdf: noncentrality must be >= 0")
    scalar = x.ndim == 0 and lam.ndim == 0
    x_b, lam_b = np.broadcast_arrays(x, lam)
    out = np.empty(x_b.shape)
    central = lam_b == 0.0
    if central.any():
        out[central] = reg_inc_gamma(np.full(central.sum(), dof / 2.0), x_b[central] / 2.0)
    if (~central).any():
        out[~central] = _poisson_mixture(
            lambda j, xv: reg_inc_gamma(dof / 2.0 + j, xv / 2.0), x_b[~central], lam_b[~central]
        )
    return float(out) if scalar else out
