"""Stationary Gaussian colored noise: AR(p) recursion and exact spectral synthesis.

Random streams
--------------
Every generator takes an :class:`RngSeed` ``(master_seed, stream_index)``.
The numpy generator for a pair is ``PCG64(SeedSequence(master_seed,
spawn_key=(stream_index,)))``, so distinct stream indices give independent,
reproducible streams that can be consumed in any order or on any worker.
A training set seeded with ``(m, s)`` uses streams ``s, s+1, ..., s+L-1``.
"""

import csv
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from .spectral import GridMismatchError, TimeSeries, TrainingSet

__all__ = [
    "NoiseKind",
    "NoiseModel",
    "RngSeed",
    "AR6_COEFFS",
    "ar6_model",
    "ar_psd",
    "ar_variance",
    "check_stationary",
    "gen_ar_noise",
    "gen_psd_noise",
    "gen_noise",
    "gen_training_set",
    "spectral_coefficients",
    "solar_proxy_psd",
    "solar_proxy_model",
    "g2_proxy_psd",
    "load_psd_table",
    "write_psd_table",
    "noise_psd",
]

STATIONARITY_MARGIN = 1e-9

# AR(6) with poles at radius/frequency (0.9, 0.01), (0.8, 0.12), (0.75, 0.46):
# strong low-frequency excess, a shoulder near 0.12 and a valley around
# 0.25-0.4 cycles/sample.  Innovation variance 1, process variance ~100.9.
AR6_COEFFS = (
    -1.50992317,
    -0.19678735,
    1.38981383,
    -0.53037887,
    -0.42496918,
    0.2916,
)

SOLAR_PROXY_FILE = "solar_proxy_psd_n1110.csv"
SOLAR_PROXY_N = 1110


class NoiseKind(str, Enum):
    AR = "AR"
    TABULATED = "TABULATED"


@dataclass(frozen=True)
class RngSeed:
    master_seed: int
    stream_index: int = 0

    def __post_init__(self):
        if not 0 <= int(self.master_seed) < 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        if int(self.stream_index) < 0:
            raise ValueError("stream_index must be nonnegative")

    def generator(self):
        ss = np.random.SeedSequence(int(self.master_seed), spawn_key=(int(self.stream_index),))
        return np.random.Generator(np.random.PCG64(ss))

    def offset(self, k):
        return RngSeed(self.master_seed, self.stream_index + k)


def _as_seed(seed):
    if isinstance(seed, RngSeed):
        return seed
    return RngSeed(int(seed), 0)


@dataclass(frozen=True)
class NoiseModel:
    """Colored-noise specification.

    AR models are x_t + sum_j c_j x_{t-j} = e_t with Var(e_t) =
    ``innovation_var``.  Tabulated models carry S_E(nu_k) for k = 0..N/2 of
    one specific N.
    """

    kind: NoiseKind
    ar_coeffs: tuple = ()
    innovation_var: float = 1.0
    psd_freqs: np.ndarray = field(default=None, repr=False)
    psd_values: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        kind = NoiseKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind is NoiseKind.AR:
            coeffs = tuple(float(c) for c in self.ar_coeffs)
            object.__setattr__(self, "ar_coeffs", coeffs)
            if not self.innovation_var > 0:
                raise ValueError("innovation variance must be positive")
            check_stationary(coeffs)
        else:
            f = np.array(self.psd_freqs, dtype=float)
            s = np.array(self.psd_values, dtype=float)
            if f.ndim != 1 or f.shape != s.shape or f.size < 3:
                raise ValueError("PSD table needs matching 1-D frequency and value columns")
            if not np.all(np.isfinite(s)) or np.any(s <= 0):
                raise ValueError("tabulated PSD must be strictly positive everywhere")
            f.setflags(write=False)
            s.setflags(write=False)
            object.__setattr__(self, "psd_freqs", f)
            object.__setattr__(self, "psd_values", s)

    @classmethod
    def ar(cls, coeffs, innovation_var=1.0):
        return cls(NoiseKind.AR, tuple(coeffs), float(innovation_var))

    @classmethod
    def white(cls, variance=1.0):
        return cls(NoiseKind.AR, (), float(variance))

    @classmethod
    def tabulated(cls, freqs, values):
        return cls(NoiseKind.TABULATED, psd_freqs=freqs, psd_values=values)

    @property
    def order(self):
        return len(self.ar_coeffs)

    @property
    def table_n(self):
        """Sample count N whose grid the table covers (tabulated models)."""
        return 2 * (self.psd_freqs.size - 1)

    def scaled(self, factor):
        if self.kind is NoiseKind.AR:
            return NoiseModel.ar(self.ar_coeffs, self.innovation_var * factor)
        return NoiseModel.tabulated(self.psd_freqs, self.psd_values * factor)


def check_stationary(coeffs):
    """Reject AR coefficients whose polynomial has a root within 1 + 1e-9 of the unit circle."""
    if len(coeffs) == 0:
        return
    # roots of 1 + c1 z + ... + cp z^p are the reciprocals of the poles, the
    # roots of the monic z^p + c1 z^(p-1) + ... + cp (better conditioned)
    poles = np.roots(np.r_[1.0, np.asarray(coeffs, dtype=float)])
    modulus = np.abs(poles).max() if poles.size else 0.0
    if modulus * (1.0 + STATIONARITY_MARGIN) >= 1.0:
        raise ValueError(
            f"AR coefficients are not stationary (min root modulus {1.0 / modulus:.6g})"
        )


def ar6_model():
    return NoiseModel.ar(AR6_COEFFS, 1.0)


def ar_psd(model, freqs):
    """S(nu) = sigma^2 / |1 + sum_j c_j exp(-2 pi i j nu)|^2 for AR models."""
    if model.kind is not NoiseKind.AR:
        raise ValueError("ar_psd needs an AR noise model")
    freqs = np.asarray(freqs, dtype=float)
    c = np.asarray(model.ar_coeffs)
    if c.size == 0:
        return np.full(freqs.shape, model.innovation_var)
    j = np.arange(1, c.size + 1)
    h = 1.0 + np.exp(-2j * np.pi * freqs[..., None] * j) @ c
    return model.innovation_var / (h.real**2 + h.imag**2)


def ar_variance(model):
    """Process variance of an AR model (autocovariance at lag 0)."""
    p = model.order
    if p == 0:
        return model.innovation_var
    # integral of the PSD over one period; the integrand is a trigonometric
    # rational function, so a fine uniform rule converges geometrically
    nu = (np.arange(1 << 16) + 0.5) / (1 << 16) - 0.5
    return float(ar_psd(model, nu).mean())


def noise_psd(model, n):
    """S_E(nu_k) for k = 0..N/2 under any noise model."""
    nu = np.arange(n // 2 + 1) / n
    if model.kind is NoiseKind.AR:
        return ar_psd(model, nu)
    _check_table_grid(model, n)
    return np.array(model.psd_values)


def _check_table_grid(model, n):
    expected = np.arange(n // 2 + 1) / n
    if model.psd_freqs.shape != expected.shape or not np.allclose(
        model.psd_freqs, expected, rtol=0, atol=1e-9
    ):
        raise GridMismatchError(
            f"PSD table covers N={model.table_n}, not the Fourier grid of N={n}"
        )


def gen_ar_noise(model, n, seed):
    """Gaussian AR(p) path of length N after a burn-in of max(10 p, 1000) samples."""
    if model.kind is not NoiseKind.AR:
        raise ValueError("gen_ar_noise needs an AR noise model")
    return TimeSeries(_ar_paths(model, n, [_as_seed(seed)])[0])


def _ar_paths(model, n, seeds):
    p = model.order
    burn = max(10 * p, 1000)
    e = np.stack([s.generator().standard_normal(n + burn) for s in seeds])
    e *= np.sqrt(model.innovation_var)
    if p == 0:
        return e[:, burn:]
    x = lfilter([1.0], np.r_[1.0, model.ar_coeffs], e, axis=-1)
    return x[:, burn:]


def spectral_coefficients(psd, n, rng):
    """Random DFT coefficients X_k, k = 0..N/2, of exact-synthesis noise.

    |X_k|^2 / N equals S_k * chi2_2 / 2 on 1..N/2-1 and S_k * chi2_1 at the
    edge frequencies.
    """
    psd = np.asarray(psd, dtype=float)
    m = n // 2 + 1
    z = rng.standard_normal((2, m))
    X = np.sqrt(n * psd / 2.0) * (z[0] + 1j * z[1])
    X[0] = np.sqrt(n * psd[0]) * z[0, 0]
    X[-1] = np.sqrt(n * psd[-1]) * z[0, -1]
    return X


def gen_psd_noise(model, n, seed):
    """Exact frequency-domain synthesis of noise with a tabulated PSD.

    Independent circular Gaussian DFT coefficients with variance N S_E(nu_k)
    (real ones at k = 0, N/2), Hermitian symmetry, inverse transform.
    """
    if model.kind is not NoiseKind.TABULATED:
        raise ValueError("gen_psd_noise needs a tabulated noise model")
    _check_table_grid(model, n)
    X = spectral_coefficients(model.psd_values, n, _as_seed(seed).generator())
    return TimeSeries(_synthesize(X, n))


def _synthesize(X, n):
    # the periodogram sums over j = 1..N; a one-sample rotation keeps the
    # series' DFT equal to X under that convention
    return np.roll(np.fft.irfft(X, n=n), 1)


def gen_noise(model, n, seed):
    if model.kind is NoiseKind.AR:
        return gen_ar_noise(model, n, seed)
    return gen_psd_noise(model, n, seed)


def gen_training_set(model, n, L, seed):
    """L independent noise series from streams seed, seed+1, ..., seed+L-1."""
    if L < 1:
        raise ValueError("L must be >= 1")
    seed = _as_seed(seed)
    seeds = [seed.offset(l) for l in range(L)]
    if model.kind is NoiseKind.AR:
        paths = _ar_paths(model, n, seeds)
        return TrainingSet(tuple(TimeSeries(x) for x in paths))
    return TrainingSet(tuple(gen_psd_noise(model, n, s) for s in seeds))


def solar_proxy_psd(nu):
    """Smooth colored PSD standing in for a solar RV noise spectrum.

    Units are (m/s)^2 per cycle/sample at a 30 min cadence: a steep
    low-frequency rise, a broad shoulder and a small bump near 0.4.
    """
    nu = np.abs(np.asarray(nu, dtype=float))
    return (
        0.1
        + 3.0 / (1.0 + (nu / 0.01) ** 2)
        + 0.8 / (1.0 + (nu / 0.08) ** 4)
        + 0.2 * np.exp(-0.5 * ((nu - 0.4) / 0.03) ** 2)
    )


def solar_proxy_model(n=SOLAR_PROXY_N):
    """Tabulated proxy noise; the committed table is used for N = 1110."""
    if n == SOLAR_PROXY_N:
        with resources.as_file(resources.files("stdpgram.data") / SOLAR_PROXY_FILE) as path:
            return load_psd_table(path)
    nu = np.arange(n // 2 + 1) / n
    return NoiseModel.tabulated(nu, solar_proxy_psd(nu))


def g2_proxy_psd(nu, dt):
    """Discrete-time PSD at step ``dt`` (seconds) of a G2-star-like RV noise.

    The physical spectrum (m/s)^2/Hz is a low-frequency Harvey profile over
    a white floor; the sampled PSD is S_phys(nu / dt) / dt.  The level is set
    so that a K = 0.54 m/s, 3.23 d circular orbit observed 1500 times at a
    4 h cadence with L = 100 is detected by T_M at P_FA = 0.01 with
    probability close to 0.9.
    """
    f = np.abs(np.asarray(nu, dtype=float)) / dt
    s_phys = 1.57e5 / (1.0 + (f / 2.0e-6) ** 2) + 4.72e4
    return s_phys / dt


def load_psd_table(path):
    """Read a two-column CSV (frequency, psd_value) with a header line."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty PSD table")
    try:
        float(rows[0][0])
    except ValueError:
        rows = rows[1:]
    else:
        raise ValueError(f"{path}: PSD table needs a header line")
    data = np.array([[float(r[0]), float(r[1])] for r in rows if r], dtype=float)
    return NoiseModel.tabulated(data[:, 0], data[:, 1])


def write_psd_table(path, model):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["frequency", "psd_value"])
        for f, s in zip(model.psd_freqs, model.psd_values):
            w.writerow([f"{f:.17g}", f"{s:.17g}"])
