"""Yule-Walker AR fits pooled over training series, FPE order selection, AR standardization."""

import json
from dataclasses import dataclass, field

import numpy as np

from .noisegen import NoiseModel, ar_psd, check_stationary
from .spectral import PeriodogramVec, TimeSeries, TrainingSet

__all__ = [
    "ArFit",
    "SingularAutocovarianceError",
    "pooled_autocovariance",
    "levinson_durbin",
    "fit_ar_yw",
    "select_order_fpe",
    "default_max_order",
    "ar_standardize",
]


class SingularAutocovarianceError(ValueError):
    """The autocovariance sequence admits no AR fit (e.g. constant input)."""


@dataclass(frozen=True)
class ArFit:
    order: int
    coeffs: tuple
    innovation_var: float
    criterion_trace: tuple = field(default=())  # (order, FPE) pairs
    n_samples: int = 0

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coeffs)
        if len(coeffs) != self.order:
            raise ValueError("order does not match the number of coefficients")
        if not self.innovation_var > 0:
            raise ValueError("innovation variance must be positive")
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(
            self, "criterion_trace", tuple((int(o), float(v)) for o, v in self.criterion_trace)
        )

    def model(self):
        return NoiseModel.ar(self.coeffs, self.innovation_var)

    def psd(self, freqs):
        return ar_psd(self.model(), freqs)

    def to_json(self):
        return json.dumps(
            {
                "order": self.order,
                "coeffs": list(self.coeffs),
                "innovation_var": self.innovation_var,
                "criterion_trace": [list(t) for t in self.criterion_trace],
                "n_samples": self.n_samples,
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        return cls(
            int(d["order"]),
            tuple(d["coeffs"]),
            float(d["innovation_var"]),
            tuple(tuple(t) for t in d.get("criterion_trace", ())),
            int(d.get("n_samples", 0)),
        )


def _as_matrix(data):
    if isinstance(data, TrainingSet):
        return data.as_array()
    if isinstance(data, TimeSeries):
        return data.samples[None, :]
    x = np.asarray(data, dtype=float)
    return x[None, :] if x.ndim == 1 else x


def pooled_autocovariance(data, max_lag):
    """Biased autocovariance r(0..max_lag), each series demeaned, averaged over series."""
    x = _as_matrix(data)
    n = x.shape[-1]
    if max_lag >= n:
        raise ValueError(f"lag {max_lag} needs more than {n} samples")
    x = x - x.mean(axis=-1, keepdims=True)
    nfft = 1 << int(np.ceil(np.log2(2 * n)))
    spec = np.fft.rfft(x, nfft, axis=-1)
    acov = np.fft.irfft(spec.real**2 + spec.imag**2, nfft, axis=-1)[:, : max_lag + 1] / n
    return acov.mean(axis=0)


def levinson_durbin(r, order):
    """Solve the Yule-Walker equations recursively.

    Returns the list of (coeffs, innovation variance) for orders 0..order,
    with coefficients in the x_t + sum c_j x_{t-j} = e_t sign convention.
    """
    r = np.asarray(r, dtype=float)
    if not r[0] > 0:
        raise SingularAutocovarianceError("zero variance: input is constant")
    a = np.zeros(0)
    v = r[0]
    out = [(a.copy(), v)]
    for m in range(1, order + 1):
        k = -(r[m] + a @ r[m - 1 : 0 : -1]) / v
        a = np.r_[a + k * a[::-1], k]
        v = v * (1.0 - k * k)
        if not v > 0 or abs(k) >= 1.0:
            raise SingularAutocovarianceError(f"autocovariance is singular at order {m}")
        out.append((a.copy(), v))
    return out


def _n_eff(data):
    x = _as_matrix(data)
    return x.shape[0] * x.shape[1], x.shape[1]


def fit_ar_yw(data, order):
    """Yule-Walker AR(order) fit; several series are pooled through their autocovariances."""
    total, n = _n_eff(data)
    if not 0 <= order < n:
        raise ValueError(f"AR order must satisfy 0 <= order < N={n}")
    coeffs, var = levinson_durbin(pooled_autocovariance(data, order), order)[order]
    check_stationary(coeffs)
    return ArFit(order, tuple(coeffs), float(var), n_samples=total)


def default_max_order(n):
    return int(min(30, n // 10))


def select_order_fpe(data, max_order=None):
    """Fit orders 0..max_order and keep the FPE minimizer.

    FPE(o) = s2(o) (M + o + 1) / (M - o - 1), with M the pooled sample count
    over all training series.
    """
    total, n = _n_eff(data)
    if max_order is None:
        max_order = default_max_order(n)
    if not 0 <= max_order < n / 2:
        raise ValueError(f"max_order must satisfy 0 <= max_order < N/2 = {n / 2}")
    fits = levinson_durbin(pooled_autocovariance(data, max_order), max_order)
    trace = [(o, v * (total + o + 1) / (total - o - 1)) for o, (_, v) in enumerate(fits)]
    best = min(range(len(trace)), key=lambda o: trace[o][1])
    coeffs, var = fits[best]
    return ArFit(best, tuple(coeffs), float(var), tuple(trace), total)


def ar_standardize(p, fit):
    """P(nu_k) / S_hat_AR(nu_k) on the grid of ``p``."""
    return PeriodogramVec(p.ordinates / fit.psd(p.freqs), p.n, p.index_set)
