"""Deterministic signals under the alternative: sinusoid sums and Keplerian RV curves."""

from dataclasses import dataclass

import numpy as np

from .spectral import TimeSeries

__all__ = [
    "Sinusoid",
    "SinusoidModel",
    "KeplerianModel",
    "MultiPlanetModel",
    "sinusoid_signal",
    "solve_kepler",
    "true_anomaly",
    "keplerian_rv",
    "multi_planet_rv",
    "render_signal",
]

KEPLER_TOL = 1e-12
_NEWTON_TOL = 1e-14  # iterate past KEPLER_TOL so the unreduced residual keeps the bound
KEPLER_MAX_ITER = 100


@dataclass(frozen=True)
class Sinusoid:
    alpha: float
    freq: float  # cycles per unit time
    phase: float = 0.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"sinusoid amplitude must be positive, got {self.alpha}")
        if not self.freq > 0:
            raise ValueError(f"sinusoid frequency must be positive, got {self.freq}")


@dataclass(frozen=True)
class SinusoidModel:
    """Sum of N_s sinusoids alpha_q sin(2 pi f_q t + phi_q).

    Frequencies are in cycles per unit time; with the default dt = 1 this
    is cycles per sample.
    """

    components: tuple = ()

    def __post_init__(self):
        comps = tuple(c if isinstance(c, Sinusoid) else Sinusoid(*c) for c in self.components)
        object.__setattr__(self, "components", comps)

    @property
    def n_s(self):
        return len(self.components)

    def scaled(self, factor):
        return SinusoidModel(tuple(Sinusoid(c.alpha * factor, c.freq, c.phase) for c in self.components))


def sinusoid_signal(m, n, dt=1.0):
    """Render the model at t_j = j * dt, j = 1..N."""
    for c in m.components:
        if c.freq * dt >= 0.5:
            raise ValueError(f"frequency {c.freq} is at or above Nyquist for dt={dt}")
    t = dt * np.arange(1, n + 1)
    x = np.zeros(n)
    for c in m.components:
        x += c.alpha * np.sin(2 * np.pi * c.freq * t + c.phase)
    return TimeSeries(x, dt)


@dataclass(frozen=True)
class KeplerianModel:
    """One planet's RV signature.

    K is the semi-amplitude, ``period`` and ``t0`` share the time unit of the
    sampling grid, ``omega`` is in radians.  ``mass`` is carried as metadata
    only; K is the operative amplitude.
    """

    K: float
    period: float
    e: float = 0.0
    omega: float = 0.0
    t0: float = 0.0
    gamma0: float = 0.0
    mass: float = None

    def __post_init__(self):
        if not self.K >= 0:
            raise ValueError("K must be >= 0")
        if not self.period > 0:
            raise ValueError("period must be positive")
        if not 0 <= self.e < 1:
            raise ValueError("eccentricity must lie in [0, 1)")


@dataclass(frozen=True)
class MultiPlanetModel:
    planets: tuple

    def __post_init__(self):
        planets = tuple(self.planets)
        if not planets:
            raise ValueError("a multi-planet model needs at least one planet")
        g0 = planets[0].gamma0
        if any(p.gamma0 != g0 for p in planets):
            raise ValueError("all planets of one system must share gamma0")
        object.__setattr__(self, "planets", planets)

    @property
    def gamma0(self):
        return self.planets[0].gamma0

    def scaled(self, factor):
        return MultiPlanetModel(
            tuple(
                KeplerianModel(p.K * factor, p.period, p.e, p.omega, p.t0, p.gamma0, p.mass)
                for p in self.planets
            )
        )


def solve_kepler(M, e):
    """Eccentric anomaly E solving E - e sin E = M.

    Newton iteration safeguarded by bisection on the bracket [M - e, M + e].
    """
    if not 0 <= e < 1:
        raise ValueError("eccentricity must lie in [0, 1)")
    M = np.asarray(M, dtype=float)
    scalar = M.ndim == 0
    Mf = np.atleast_1d(M).ravel()
    turns = np.floor((Mf + np.pi) / (2 * np.pi))
    m = Mf - 2 * np.pi * turns  # in [-pi, pi)
    lo, hi = m - e, m + e
    E = np.where(e > 0.8, np.sign(m) * np.pi * 0.5 + m * 0.5, m + e * np.sin(m))
    E = np.clip(E, lo, hi)
    for _ in range(KEPLER_MAX_ITER):
        f = E - e * np.sin(E) - m
        done = np.abs(f) <= _NEWTON_TOL
        if done.all():
            break
        lo = np.where(f < 0, E, lo)
        hi = np.where(f > 0, E, hi)
        step = f / (1.0 - e * np.cos(E))
        En = E - step
        outside = (En <= lo) | (En >= hi)
        En = np.where(outside, 0.5 * (lo + hi), En)
        E = np.where(done, E, En)
    else:
        f = E - e * np.sin(E) - m
        if np.any(np.abs(f) > KEPLER_TOL):
            raise ArithmeticError("Kepler solver failed to converge")
    E = E + 2 * np.pi * turns
    E = E.reshape(np.shape(M))
    return float(E) if scalar else E


def true_anomaly(E, e):
    return 2.0 * np.arctan2(np.sqrt(1 + e) * np.sin(E / 2), np.sqrt(1 - e) * np.cos(E / 2))


def keplerian_rv(m, times):
    """v(t) = gamma0 + K [cos(omega + nu(t)) + e cos(omega)]."""
    times = np.asarray(times, dtype=float)
    M = 2 * np.pi * (times - m.t0) / m.period
    nu = true_anomaly(solve_kepler(M, m.e), m.e)
    return m.gamma0 + m.K * (np.cos(m.omega + nu) + m.e * np.cos(m.omega))


def multi_planet_rv(m, times):
    """Superposed planet signatures; the shared systemic velocity enters once."""
    times = np.asarray(times, dtype=float)
    v = np.full(times.shape, m.gamma0)
    for p in m.planets:
        v += keplerian_rv(p, times) - p.gamma0
    return v


def render_signal(source, n, dt=1.0):
    """Noiseless samples of any signal source (or zeros for ``None``)."""
    if source is None:
        return np.zeros(n)
    if isinstance(source, SinusoidModel):
        return sinusoid_signal(source, n, dt).samples.copy()
    t = dt * np.arange(1, n + 1)
    if isinstance(source, KeplerianModel):
        return keplerian_rv(source, t)
    if isinstance(source, MultiPlanetModel):
        return multi_planet_rv(source, t)
    raise TypeError(f"unsupported signal source {type(source).__name__}")
