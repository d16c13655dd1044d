"""Monte-Carlo estimation of false-alarm and detection rates, ROC curves and dispersion studies.

Random streams
--------------
Trial ``t`` of an experiment with master seed ``s`` draws its observation
noise from stream ``t * 2**20`` and its training series from streams
``t * 2**20 + 1 + l`` (l = 0..L-1).  Results therefore depend only on
(experiment, seed), never on how trials are split across workers.
"""

import csv
import json
import math
import os
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum

import numpy as np

from . import __version__
from .analytic import Scenario, gamma_tm, pdet_tm, pfa_ar_approx
from .arfit import select_order_fpe
from .detectors import TestName, bj, hc_star, t_c, t_fisher, t_max
from .noisegen import (
    NoiseKind,
    NoiseModel,
    RngSeed,
    ar_variance,
    gen_noise,
    gen_training_set,
    noise_psd,
    spectral_coefficients,
)
from .sigmodel import KeplerianModel, MultiPlanetModel, SinusoidModel, render_signal
from .spectral import periodogram_ordinates

__all__ = [
    "ROLE_STRIDE",
    "Standardization",
    "Route",
    "TestSpec",
    "Experiment",
    "RateEstimate",
    "CurveResult",
    "DispersionResult",
    "run_trial",
    "simulate",
    "estimate_rate",
    "rate_from_values",
    "roc_empirical",
    "calibrate_scale",
    "ar_dispersion_study",
    "detectability_study",
    "on_grid_step",
    "write_manifest",
]

ROLE_STRIDE = 1 << 20
MIN_EXCEEDANCES = 10
BATCH = 256


class Standardization(str, Enum):
    AVERAGED = "AVERAGED"  # P / P_bar_L from a fresh training set
    AR_FIT = "AR_FIT"  # P / S_hat_AR fitted on a fresh training set
    NONE = "NONE"  # P / sigma2, the white-noise assumption
    TRUE_PSD = "TRUE_PSD"  # P / S_E


class Route(str, Enum):
    TIME = "time"  # synthesize series, then take periodograms
    SPECTRAL = "spectral"  # draw DFT coefficients of the same law directly


@dataclass(frozen=True)
class TestSpec:
    __test__ = False  # not a pytest class

    name: TestName
    n_c: int = 1
    alpha0: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "name", TestName(self.name))
        if self.n_c < 1:
            raise ValueError("N_C must be >= 1")
        if not 0 < self.alpha0 <= 1:
            raise ValueError("alpha0 must lie in (0, 1]")

    @property
    def label(self):
        if self.name is TestName.TC:
            return f"TC(N_C={self.n_c})"
        if self.name in (TestName.HC, TestName.BJ):
            return f"{self.name.value}(alpha0={self.alpha0:g})"
        return self.name.value


@dataclass(frozen=True)
class Experiment:
    """A null or alternative simulation setting.

    Statistics are computed on z_k = P(nu_k) / ref(nu_k) over Omega, where
    ``ref`` is set by ``standardization``.  ``sigma2`` (NONE only) defaults to
    the noise variance.
    """

    n: int
    noise: NoiseModel
    signal: object = None
    tests: tuple = (TestSpec(TestName.TM),)
    trials: int = 10_000
    seed: int = 0
    standardization: Standardization = Standardization.AVERAGED
    L: int = 1
    max_order: int = None
    dt: float = 1.0
    route: Route = Route.TIME
    sigma2: float = None

    def __post_init__(self):
        object.__setattr__(self, "standardization", Standardization(self.standardization))
        object.__setattr__(self, "route", Route(self.route))
        tests = tuple(t if isinstance(t, TestSpec) else TestSpec(*t) for t in self.tests)
        if not tests:
            raise ValueError("an experiment needs at least one test")
        object.__setattr__(self, "tests", tests)
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.n < 4 or self.n % 2:
            raise ValueError("N must be even and >= 4")
        if not 1 <= self.L < ROLE_STRIDE - 1:
            raise ValueError("L out of range")
        if self.route is Route.SPECTRAL and self.standardization is Standardization.AR_FIT:
            raise ValueError("AR fits need time-domain training series (route='time')")
        if self.signal is not None and not isinstance(
            self.signal, (SinusoidModel, KeplerianModel, MultiPlanetModel)
        ):
            raise TypeError("unsupported signal source")
        for t in tests:
            if t.name is TestName.TC and t.n_c > self.n // 2 - 1:
                raise ValueError("N_C exceeds the number of Omega ordinates")

    def scenario(self):
        """Analytic counterpart (sinusoid signals only)."""
        sig = self.signal if self.signal is not None else SinusoidModel()
        if not isinstance(sig, SinusoidModel):
            raise TypeError("analytic formulas need a sinusoid signal model")
        L = math.inf if self.standardization is Standardization.TRUE_PSD else self.L
        return Scenario(self.n, L, noise_psd(self.noise, self.n), sig, self.dt)

    def replace(self, **kw):
        d = {f: getattr(self, f) for f in self.__dataclass_fields__}
        d.update(kw)
        return Experiment(**d)

    def describe(self):
        """JSON-friendly echo of the experiment."""
        noise = {"kind": self.noise.kind.value}
        if self.noise.kind is NoiseKind.AR:
            noise.update(ar_coeffs=list(self.noise.ar_coeffs), innovation_var=self.noise.innovation_var)
        else:
            noise.update(table_n=self.noise.table_n)
        return {
            "n": self.n,
            "dt": self.dt,
            "noise": noise,
            "signal": _describe_signal(self.signal),
            "tests": [{"name": t.name.value, "n_c": t.n_c, "alpha0": t.alpha0} for t in self.tests],
            "trials": self.trials,
            "seed": self.seed,
            "standardization": self.standardization.value,
            "L": self.L,
            "max_order": self.max_order,
            "route": self.route.value,
            "sigma2": self.sigma2,
        }


def _describe_signal(sig):
    if sig is None:
        return None
    if isinstance(sig, SinusoidModel):
        return {"sinusoids": [asdict(c) for c in sig.components]}
    if isinstance(sig, KeplerianModel):
        return {"planets": [asdict(sig)]}
    return {"planets": [asdict(p) for p in sig.planets]}


@dataclass(frozen=True)
class RateEstimate:
    rate: float
    stderr: float
    trials: int

    @classmethod
    def from_count(cls, count, trials):
        r = count / trials
        return cls(r, math.sqrt(r * (1.0 - r) / trials), trials)


@dataclass
class CurveResult:
    label: str
    abscissa_label: str
    abscissa: np.ndarray
    ordinate_label: str
    values: np.ndarray
    stderr: np.ndarray = None  # None for analytic curves
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.abscissa = np.asarray(self.abscissa, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.abscissa.shape != self.values.shape:
            raise ValueError("abscissa and ordinate lengths differ")
        if np.any(np.diff(self.abscissa) <= 0):
            raise ValueError("abscissa must be strictly increasing")
        if self.stderr is not None:
            self.stderr = np.asarray(self.stderr, dtype=float)

    @property
    def kind(self):
        return "analytic" if self.stderr is None else "empirical"

    def rows(self):
        se = self.stderr if self.stderr is not None else [math.nan] * self.values.size
        return [(a, v, s, self.kind) for a, v, s in zip(self.abscissa, self.values, se)]

    def to_csv(self, path_or_file):
        own = not hasattr(path_or_file, "write")
        fh = open(path_or_file, "w", newline="") if own else path_or_file
        try:
            w = csv.writer(fh)
            w.writerow([self.abscissa_label, self.ordinate_label, "stderr", "kind"])
            for a, v, s, k in self.rows():
                w.writerow([f"{a:.17g}", f"{v:.17g}", "" if math.isnan(s) else f"{s:.17g}", k])
        finally:
            if own:
                fh.close()

    def to_dict(self):
        return {
            "label": self.label,
            "kind": self.kind,
            "abscissa_label": self.abscissa_label,
            "abscissa": self.abscissa.tolist(),
            "ordinate_label": self.ordinate_label,
            "values": self.values.tolist(),
            "stderr": None if self.stderr is None else self.stderr.tolist(),
            "meta": self.meta,
        }


# --------------------------------------------------------------------------
# single trials


@dataclass(frozen=True)
class _Prepared:
    psd: np.ndarray
    signal: np.ndarray
    signal_dft: np.ndarray
    sigma2: float


def _prepare(ex):
    psd = noise_psd(ex.noise, ex.n)
    sig = render_signal(ex.signal, ex.n, ex.dt)
    # DFT with the sum running over j = 1..N, matching the periodogram
    dft = np.fft.rfft(sig) * np.exp(-2j * np.pi * np.arange(ex.n // 2 + 1) / ex.n)
    sigma2 = ex.sigma2
    if sigma2 is None:
        if ex.noise.kind is NoiseKind.AR:
            sigma2 = ar_variance(ex.noise)
        else:
            full = np.r_[psd, psd[1:-1][::-1]]
            sigma2 = float(full.mean())
    return _Prepared(psd, sig, dft, float(sigma2))


def _trial_z(ex, prep, t):
    """Standardized Omega ordinates of trial t."""
    data_seed = RngSeed(ex.seed, t * ROLE_STRIDE)
    train_seed = RngSeed(ex.seed, t * ROLE_STRIDE + 1)
    n, L = ex.n, ex.L
    std = ex.standardization
    if ex.route is Route.SPECTRAL:
        X = spectral_coefficients(prep.psd, n, data_seed.generator()) + prep.signal_dft
        p = (X.real**2 + X.imag**2) / n
        if std is Standardization.AVERAGED:
            rng = train_seed.generator()
            g = rng.standard_gamma(L, size=n // 2 + 1) / L
            g[[0, -1]] = rng.chisquare(L, size=2) / L
            ref = prep.psd * g
        elif std is Standardization.TRUE_PSD:
            ref = prep.psd
        else:
            ref = np.full_like(p, prep.sigma2)
    else:
        x = gen_noise(ex.noise, n, data_seed).samples + prep.signal
        p = periodogram_ordinates(x)
        if std is Standardization.AVERAGED:
            ts = gen_training_set(ex.noise, n, L, train_seed)
            ref = periodogram_ordinates(ts.as_array()).mean(axis=0)
        elif std is Standardization.AR_FIT:
            ts = gen_training_set(ex.noise, n, L, train_seed)
            fit = select_order_fpe(ts, ex.max_order)
            ref = fit.psd(np.arange(n // 2 + 1) / n)
        elif std is Standardization.TRUE_PSD:
            ref = prep.psd
        else:
            ref = np.full_like(p, prep.sigma2)
    return p[1:-1] / ref[1:-1]


def _pvalues(ex, z):
    if ex.standardization is Standardization.AVERAGED:
        return np.exp(-ex.L * np.log1p(z / ex.L))
    return np.exp(-z)


def _statistics(ex, z):
    """(trials, tests) matrix of statistic values for a batch of z rows."""
    out = np.empty((z.shape[0], len(ex.tests)))
    v = None
    for j, t in enumerate(ex.tests):
        if t.name is TestName.TM:
            out[:, j] = t_max(z)
        elif t.name is TestName.TC:
            out[:, j] = t_c(z, t.n_c)
        elif t.name is TestName.TF:
            out[:, j] = t_fisher(z)
        else:
            if v is None:
                v = np.maximum(_pvalues(ex, z), 1e-300)
            out[:, j] = hc_star(v, t.alpha0) if t.name is TestName.HC else bj(v, t.alpha0)
    return out


def run_trial(ex, trial_index):
    """Statistic values (one per test of ``ex``) of one full pipeline pass."""
    prep = _prepare(ex)
    z = _trial_z(ex, prep, trial_index)
    return _statistics(ex, z[None, :])[0]


def _run_range(ex, start, stop):
    prep = _prepare(ex)
    out = np.empty((stop - start, len(ex.tests)))
    for b in range(start, stop, BATCH):
        e = min(stop, b + BATCH)
        z = np.stack([_trial_z(ex, prep, t) for t in range(b, e)])
        out[b - start : e - start] = _statistics(ex, z)
    return out


def default_jobs():
    try:
        return max(1, int(os.environ.get("STDPGRAM_JOBS", "1")))
    except ValueError:
        return 1


def simulate(ex, jobs=None, trials=None):
    """Statistic values of every trial, shape (trials, len(tests)).

    The output is identical for any ``jobs``: each chunk regenerates its own
    trial streams.
    """
    trials = ex.trials if trials is None else trials
    jobs = default_jobs() if jobs is None else max(1, int(jobs))
    if jobs == 1 or trials < 2 * BATCH:
        return _run_range(ex, 0, trials)
    bounds = np.linspace(0, trials, min(jobs * 4, trials // BATCH + 1) + 1).astype(int)
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        parts = list(pool.map(_run_range, [ex] * (len(bounds) - 1), bounds[:-1], bounds[1:]))
    return np.concatenate(parts, axis=0)


def rate_from_values(values, threshold):
    values = np.asarray(values)
    return RateEstimate.from_count(int(np.count_nonzero(values > threshold)), values.size)


def estimate_rate(ex, threshold, test=0, jobs=None, values=None):
    """Fraction of trials whose statistic exceeds ``threshold``."""
    if values is None:
        values = simulate(ex, jobs)
    return rate_from_values(np.asarray(values)[:, test], threshold)


# --------------------------------------------------------------------------
# ROC


def _check_pfa_grid(pfa_grid, trials):
    pfa_grid = np.asarray(pfa_grid, dtype=float)
    if np.any((pfa_grid <= 0) | (pfa_grid >= 1)):
        raise ValueError("target false-alarm rates must lie in (0, 1)")
    need = int(math.ceil(MIN_EXCEEDANCES / pfa_grid.min()))
    if trials < need:
        raise ValueError(
            f"{trials} null trials cannot resolve pfa={pfa_grid.min():g}; use at least {need} trials"
        )
    return pfa_grid


def empirical_threshold(null_values, pfa):
    """Smallest observed null value whose exceedance fraction is <= pfa."""
    s = np.sort(np.asarray(null_values))
    n = s.size
    idx = min(n - 1, int(math.ceil(n * (1.0 - pfa))) - 1)
    return float(s[max(idx, 0)])


def roc_empirical(ex_null, ex_alt, pfa_grid, jobs=None, null_values=None, alt_values=None):
    """Empirical ROC of every test of the experiments: one :class:`CurveResult` per test.

    Thresholds are null-trial quantiles, so tests without closed-form
    thresholds are compared on an equal footing.
    """
    if ex_null.tests != ex_alt.tests or ex_null.n != ex_alt.n:
        raise ValueError("null and alternative experiments must share N and tests")
    pfa_grid = _check_pfa_grid(pfa_grid, ex_null.trials)
    order = np.argsort(pfa_grid)
    pfa_grid = pfa_grid[order]
    if null_values is None:
        null_values = simulate(ex_null, jobs)
    if alt_values is None:
        alt_values = simulate(ex_alt, jobs)
    curves = {}
    for j, t in enumerate(ex_null.tests):
        thr = [empirical_threshold(null_values[:, j], p) for p in pfa_grid]
        est = [rate_from_values(alt_values[:, j], h) for h in thr]
        curves[t.label] = CurveResult(
            t.label,
            "pfa",
            pfa_grid,
            "pdet",
            [e.rate for e in est],
            [e.stderr for e in est],
            meta={"thresholds": thr, "trials_null": ex_null.trials, "trials_alt": ex_alt.trials},
        )
    return curves


def calibrate_scale(ex_null, signal, pfa=0.1, target=0.8, seed=None, iters=14, jobs=None):
    """Signal scale at which the most powerful test reaches P_DET ``target`` at false-alarm ``pfa``.

    Geometric bisection on ``signal.scaled(s)``.  Every step reuses one set
    of null and alternative noise draws, so the search is deterministic for
    a given seed; keep that seed apart from the one used for evaluation.
    """
    seed = ex_null.seed if seed is None else seed
    ex_null = ex_null.replace(seed=seed)
    null_values = simulate(ex_null, jobs)
    thr = [empirical_threshold(null_values[:, j], pfa) for j in range(len(ex_null.tests))]
    ex_alt = ex_null.replace(seed=seed + 1)

    def power(s):
        vals = simulate(ex_alt.replace(signal=signal.scaled(s)), jobs)
        return max(rate_from_values(vals[:, j], h).rate for j, h in enumerate(thr))

    lo, hi = 1.0, 1.0
    while power(lo) > target:
        lo /= 4.0
        if lo < 1e-6:
            raise ValueError("target power is reached at vanishing amplitude")
    while power(hi) < target:
        hi *= 4.0
        if hi > 1e6:
            raise ValueError("target power is not reachable")
    for _ in range(iters):
        mid = math.sqrt(lo * hi)
        if power(mid) < target:
            lo = mid
        else:
            hi = mid
    return math.sqrt(lo * hi)


# --------------------------------------------------------------------------
# parametric standardization


@dataclass
class DispersionResult:
    L: int
    thresholds: np.ndarray
    rates: np.ndarray  # (outer, thresholds): per-fit false-alarm rate estimates
    orders: np.ndarray
    inner: int

    @property
    def mean(self):
        return self.rates.mean(axis=0)

    @property
    def std(self):
        return self.rates.std(axis=0, ddof=1) if self.rates.shape[0] > 1 else np.zeros(self.thresholds.size)

    @property
    def envelope(self):
        """(mean - 3 sigma, mean + 3 sigma) across fits."""
        return self.mean - 3 * self.std, self.mean + 3 * self.std

    def curves(self):
        lo, hi = self.envelope
        meta = {"L": self.L, "inner": self.inner, "outer": int(self.rates.shape[0])}
        se = self.std / math.sqrt(self.rates.shape[0])
        return [
            CurveResult(f"mean(L={self.L})", "gamma", self.thresholds, "pfa", self.mean, se, meta),
            CurveResult(f"lo3sigma(L={self.L})", "gamma", self.thresholds, "pfa", lo, se, meta),
            CurveResult(f"hi3sigma(L={self.L})", "gamma", self.thresholds, "pfa", hi, se, meta),
        ]


def _inner_periodograms(noise, n, seed, first, count, route):
    psd = noise_psd(noise, n)
    out = np.empty((count, n // 2 - 1))
    for i in range(count):
        s = RngSeed(seed, (first + i) * ROLE_STRIDE)
        if route is Route.SPECTRAL:
            X = spectral_coefficients(psd, n, s.generator())
            p = (X.real**2 + X.imag**2) / n
        else:
            p = periodogram_ordinates(gen_noise(noise, n, s).samples)
        out[i] = p[1:-1]
    return out


def _dispersion_fit(args):
    noise, n, L, f, seed, max_order, force_true = args
    nu = np.arange(n // 2 + 1) / n
    if force_true:
        return noise_psd(noise, n)[1:-1], noise.order
    ts = gen_training_set(noise, n, L, RngSeed(seed, f * ROLE_STRIDE + 1))
    fit = select_order_fpe(ts, max_order)
    return fit.psd(nu)[1:-1], fit.order


def ar_dispersion_study(
    noise,
    n,
    L_list,
    thresholds,
    outer,
    inner,
    n_c=5,
    max_order=None,
    seed=0,
    route="time",
    common_inner=True,
    force_true=False,
    jobs=None,
):
    """True false-alarm rate of T_C(P / S_hat_AR) across independent AR fits.

    For each L, ``outer`` AR models are fitted (FPE order selection) on
    fresh training sets; each fit's false-alarm rate at every threshold is
    estimated from ``inner`` noise-only trials.  With ``common_inner`` all
    fits are scored on the same inner trials, so differences between fits
    are not blurred by independent binomial noise.  Training sets of fit f
    use streams f * 2**20 + 1 + l; inner trials use trial indices from
    ``outer`` upwards.

    Returns a dict L -> :class:`DispersionResult` plus the key ``"approx"``
    holding the reference curve ``pfa_ar_approx(thresholds)``.
    """
    if noise.kind is not NoiseKind.AR:
        raise ValueError("the dispersion study needs an AR noise model")
    route = Route(route)
    thresholds = np.asarray(thresholds, dtype=float)
    if np.any(np.diff(thresholds) <= 0):
        raise ValueError("thresholds must be strictly increasing")
    jobs = default_jobs() if jobs is None else max(1, int(jobs))
    common = _inner_periodograms(noise, n, seed, outer, inner, route) if common_inner else None
    results = {}
    for L in L_list:
        args = [(noise, n, L, f, seed, max_order, force_true) for f in range(outer)]
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                fits = list(pool.map(_dispersion_fit, args, chunksize=max(1, outer // (4 * jobs))))
        else:
            fits = [_dispersion_fit(a) for a in args]
        rates = np.empty((outer, thresholds.size))
        orders = np.empty(outer, dtype=int)
        for f, (shat, order) in enumerate(fits):
            if common_inner:
                pin = common
            else:
                pin = _inner_periodograms(noise, n, seed, outer + f * inner, inner, route)
            stat = np.partition(pin / shat, pin.shape[1] - n_c, axis=1)[:, pin.shape[1] - n_c]
            stat.sort()
            rates[f] = 1.0 - np.searchsorted(stat, thresholds, side="right") / inner
            orders[f] = order
        results[L] = DispersionResult(L, thresholds, rates, orders, inner)
    results["approx"] = CurveResult(
        "pfa_ar_approx", "gamma", thresholds, "pfa", pfa_ar_approx(thresholds, n, n_c)
    )
    return results


# --------------------------------------------------------------------------
# detectability


def on_grid_step(period, n, dt_nominal):
    """Sampling step closest to ``dt_nominal`` that puts 1/period on the Fourier grid of N samples."""
    k0 = max(1, int(round(n * dt_nominal / period)))
    if k0 >= n // 2:
        raise ValueError("planet period is below the Nyquist period at this cadence")
    return k0 * period / n, k0


def detectability_study(planet, psd_fn, pfa_list, L_list, n_grid, dt_nominal):
    """Analytic P_DET of T_M over a grid of N, for every (pfa, L) pair.

    ``psd_fn(nu, dt)`` returns the discrete-time noise PSD at grid
    frequencies ``nu`` (cycles/sample) for step ``dt``.  For each N the step
    is nudged so the orbital frequency sits exactly on the grid.  L may be
    ``math.inf`` (known PSD).  Returns a dict (pfa, L) -> CurveResult over N.
    """
    if not isinstance(planet, KeplerianModel):
        raise TypeError("detectability studies take one Keplerian planet")
    n_grid = np.asarray(sorted(n_grid), dtype=int)
    lams = []
    meta_dt = []
    for n in n_grid:
        dt, k0 = on_grid_step(planet.period, int(n), dt_nominal)
        psd = np.asarray(psd_fn(np.arange(n // 2 + 1) / n, dt), dtype=float)
        v = render_signal(planet, int(n), dt)
        lam = 2.0 * periodogram_ordinates(v)[1:-1] / psd[1:-1]
        lams.append((Scenario(int(n), 1, psd), lam))
        meta_dt.append((dt, k0))
    out = {}
    for pfa in pfa_list:
        for L in L_list:
            vals = [pdet_tm(gamma_tm(pfa, sc.N, L), sc.with_L(L), lam) for sc, lam in lams]
            out[(pfa, L)] = CurveResult(
                f"pdet(pfa={pfa:g},L={L})",
                "N",
                n_grid,
                "pdet",
                vals,
                None,
                meta={"pfa": pfa, "L": L, "dt": [d for d, _ in meta_dt], "k0": [k for _, k in meta_dt]},
            )
    return out


# --------------------------------------------------------------------------
# manifests


def write_manifest(path, command, experiment=None, extra=None, seed=None):
    """JSON record of what produced an output: command, experiment echo, seed and versions."""
    import scipy

    doc = {
        "command": command,
        "seed": seed,
        "experiment": experiment,
        "versions": {
            "stdpgram": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
    }
    if extra:
        doc.update(extra)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, default=_json_default)
    return doc


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, Enum):
        return o.value
    if isinstance(o, float) and math.isinf(o):
        return "inf"
    raise TypeError(f"not JSON serializable: {type(o).__name__}")
