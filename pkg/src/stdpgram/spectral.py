"""Periodograms on the Fourier grid, training-set averages and standardization."""

from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache

import numpy as np

__all__ = [
    "IndexSet",
    "TimeSeries",
    "PeriodogramVec",
    "TrainingSet",
    "GridMismatchError",
    "DegenerateReferenceError",
    "index_range",
    "periodogram",
    "periodogram_ordinates",
    "averaged_periodogram",
    "standardize",
]

DIRECT_MAX_N = 4096


class GridMismatchError(ValueError):
    """Two objects that must share a sampling grid do not."""


class DegenerateReferenceError(ValueError):
    """A reference spectrum has a zero or negative ordinate."""


class IndexSet(str, Enum):
    FULL = "full"  # k = 0 .. N/2
    OMEGA = "omega"  # k = 1 .. N/2 - 1


def index_range(n, index_set=IndexSet.OMEGA):
    """Fourier indices k covered by ``index_set`` for ``n`` samples."""
    if IndexSet(index_set) is IndexSet.FULL:
        return np.arange(0, n // 2 + 1)
    return np.arange(1, n // 2)


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TimeSeries:
    """Evenly sampled real series; ``dt`` is the sampling step."""

    samples: np.ndarray
    dt: float = 1.0

    def __post_init__(self):
        x = _readonly(self.samples)
        if x.ndim != 1:
            raise ValueError("TimeSeries samples must be one-dimensional")
        n = x.size
        if n < 4 or n % 2:
            raise ValueError(f"TimeSeries needs an even length >= 4, got {n}")
        if not np.all(np.isfinite(x)):
            raise ValueError("TimeSeries samples must be finite")
        if not self.dt > 0:
            raise ValueError("TimeSeries dt must be positive")
        object.__setattr__(self, "samples", x)

    @property
    def n(self):
        return self.samples.size

    @property
    def times(self):
        """Sample epochs t_j = j * dt, j = 1..N."""
        return self.dt * np.arange(1, self.n + 1)


@dataclass(frozen=True)
class PeriodogramVec:
    """Periodogram-like ordinates on a subset of the Fourier grid of ``n`` samples.

    ``freqs`` are in cycles per sample (nu_k = k / n).
    """

    ordinates: np.ndarray
    n: int
    index_set: IndexSet = IndexSet.OMEGA
    freqs: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "index_set", IndexSet(self.index_set))
        p = _readonly(self.ordinates)
        k = index_range(self.n, self.index_set)
        if p.shape != k.shape:
            raise ValueError(
                f"{p.size} ordinates do not match index set {self.index_set.value} for N={self.n}"
            )
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise ValueError("periodogram ordinates must be finite and nonnegative")
        object.__setattr__(self, "ordinates", p)
        object.__setattr__(self, "freqs", _readonly(k / self.n))

    @property
    def k(self):
        return index_range(self.n, self.index_set)

    def restrict(self, index_set):
        """Return the ordinates on a smaller index set (FULL -> OMEGA)."""
        index_set = IndexSet(index_set)
        if index_set is self.index_set:
            return self
        if self.index_set is IndexSet.OMEGA:
            raise ValueError("cannot widen an OMEGA periodogram to the FULL set")
        return PeriodogramVec(self.ordinates[1:-1], self.n, IndexSet.OMEGA)

    def same_grid(self, other):
        return self.n == other.n and self.index_set is other.index_set


@dataclass(frozen=True)
class TrainingSet:
    """L independent noise-only series on the observation grid."""

    series: tuple

    def __post_init__(self):
        series = tuple(self.series)
        if len(series) < 1:
            raise ValueError("a training set needs at least one series")
        n0, dt0 = series[0].n, series[0].dt
        for s in series[1:]:
            if s.n != n0 or not np.isclose(s.dt, dt0, rtol=1e-9, atol=0.0):
                raise GridMismatchError("training series must share N and dt")
        object.__setattr__(self, "series", series)

    @property
    def L(self):
        return len(self.series)

    @property
    def n(self):
        return self.series[0].n

    @property
    def dt(self):
        return self.series[0].dt

    def as_array(self):
        return np.stack([s.samples for s in self.series])


@lru_cache(maxsize=4)
def _dft_matrix(n):
    k = np.arange(n // 2 + 1)[:, None]
    j = np.arange(1, n + 1)[None, :]
    return np.exp(-2j * np.pi * ((k * j) % n) / n)


def _direct_dft(x):
    """sum_j x_j exp(-i 2 pi k j / N), j = 1..N, for k = 0..N/2 (rows of x)."""
    n = x.shape[-1]
    if n <= 1200:
        return x @ _dft_matrix(n).T
    out = np.empty(x.shape[:-1] + (n // 2 + 1,), dtype=complex)
    j = np.arange(1, n + 1)
    for k in range(n // 2 + 1):
        out[..., k] = x @ np.exp(-2j * np.pi * ((k * j) % n) / n)
    return out


def periodogram_ordinates(x, method="fft"):
    """Raw periodogram |DFT|^2 / N on k = 0..N/2 for the last axis of ``x``.

    ``method="direct"`` evaluates the O(N^2) sum literally and is the
    reference; ``"fft"`` (any even N) must agree with it to 1e-9 relative.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    if n % 2:
        raise ValueError(f"periodogram needs an even number of samples, got {n}")
    if method == "direct":
        if n > DIRECT_MAX_N:
            raise ValueError(f"direct DFT is limited to N <= {DIRECT_MAX_N}")
        spec = _direct_dft(x)
    elif method == "fft":
        spec = np.fft.rfft(x, axis=-1)
    else:
        raise ValueError(f"unknown periodogram method {method!r}")
    return (spec.real**2 + spec.imag**2) / n


def periodogram(x, index_set=IndexSet.OMEGA, method="fft"):
    """Periodogram P(nu_k) = |sum_j x_j exp(-i 2 pi nu_k j)|^2 / N.

    The unit-step convention is used internally: ``x.dt`` only matters for
    presentation (see the CLI).
    """
    if not isinstance(x, TimeSeries):
        x = TimeSeries(np.asarray(x, dtype=float))
    index_set = IndexSet(index_set)
    p = periodogram_ordinates(x.samples, method=method)
    return PeriodogramVec(p[index_range(x.n, index_set)], x.n, index_set)


def averaged_periodogram(ts, index_set=IndexSet.OMEGA, method="fft"):
    """Pointwise mean of the periodograms of the training series."""
    if not isinstance(ts, TrainingSet):
        ts = TrainingSet(tuple(s if isinstance(s, TimeSeries) else TimeSeries(s) for s in ts))
    index_set = IndexSet(index_set)
    p = periodogram_ordinates(ts.as_array(), method=method).mean(axis=0)
    return PeriodogramVec(p[index_range(ts.n, index_set)], ts.n, index_set)


def standardize(p, ref):
    """Frequency-wise ratio P(nu_k) / ref(nu_k)."""
    if not p.same_grid(ref):
        raise GridMismatchError(
            f"grids differ: N={p.n}/{ref.n}, index sets {p.index_set.value}/{ref.index_set.value}"
        )
    if np.any(ref.ordinates <= 0):
        bad = ref.k[ref.ordinates <= 0]
        raise DegenerateReferenceError(
            f"reference spectrum is not positive at k={bad[:5].tolist()} (degenerate training set)"
        )
    return PeriodogramVec(p.ordinates / ref.ordinates, p.n, p.index_set)

