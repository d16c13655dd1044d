"""Command-line interface: periodograms, detection reports and Monte-Carlo experiments as CSV/JSON.

Exit codes: 0 success, 2 input or configuration error, 3 unsupported mode,
4 numerical failure.
"""

import argparse
import csv
import json
import math
import os
import sys
import warnings
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .analytic import (
    gamma_tc,
    gamma_tm,
    pdet_tc,
    pdet_tm,
    pfa_tc,
    pfa_tm,
    pfa_white_assumed,
    noncentrality,
)
from .arfit import fit_ar_yw, select_order_fpe
from .detectors import (
    TestName,
    bj,
    calibrate_threshold,
    decide,
    hc_star,
    pvalues_standardized,
    t_c,
    t_fisher,
    t_max,
)
from .mcharness import (
    CurveResult,
    Experiment,
    Standardization,
    TestSpec,
    ar_dispersion_study,
    detectability_study,
    rate_from_values,
    roc_empirical,
    simulate,
    write_manifest,
)
from .noisegen import (
    NoiseModel,
    RngSeed,
    ar6_model,
    g2_proxy_psd,
    gen_noise,
    gen_training_set,
    load_psd_table,
    solar_proxy_model,
)
from .sigmodel import KeplerianModel, MultiPlanetModel, Sinusoid, SinusoidModel, render_signal
from .specfun import ConvergenceError
from .spectral import (
    GridMismatchError,
    IndexSet,
    TimeSeries,
    TrainingSet,
    averaged_periodogram,
    periodogram,
    periodogram_ordinates,
    standardize,
)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_UNSUPPORTED = 3
EXIT_NUMERIC = 4
UNIFORM_RTOL = 1e-9
JOBS_ENV = "STDPGRAM_JOBS"


class InputError(Exception):
    """Bad input file, flag or configuration (exit code 2)."""


class UnsupportedError(Exception):
    """Requested mode is not available (exit code 3)."""


def _fmt(x):
    return f"{x:.17g}"


# --------------------------------------------------------------------------
# file input


def _read_rows(path):
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise InputError(f"{path}: empty file")
    try:
        [float(c) for c in rows[0]]
    except ValueError:
        rows = rows[1:]  # header line
    try:
        data = np.array([[float(c) for c in r] for r in rows], dtype=float)
    except ValueError as exc:
        raise InputError(f"{path}: non-numeric value ({exc})") from exc
    if data.ndim != 2 or data.shape[1] < 2:
        raise InputError(f"{path}: expected columns t, value[, value ...]")
    return data


def _step(t, path):
    d = np.diff(t)
    if d.size == 0:
        raise InputError(f"{path}: too few samples")
    dt = float(np.median(d))
    if not dt > 0 or np.any(np.abs(d - dt) > UNIFORM_RTOL * abs(dt)):
        raise InputError(f"{path}: sampling is not uniform; irregular sampling is not supported")
    return dt


def read_series(path):
    """A (t, value) CSV as a TimeSeries with its sampling step."""
    data = _read_rows(path)
    if data.shape[1] != 2:
        raise InputError(f"{path}: expected two columns (t, value)")
    dt = _step(data[:, 0], path)
    try:
        return TimeSeries(data[:, 1], dt)
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from exc


def read_training(path):
    """A directory of (t, value) CSVs or one wide CSV (t, s_1, ..., s_L)."""
    path = Path(path)
    try:
        if path.is_dir():
            files = sorted(path.glob("*.csv"))
            if not files:
                raise InputError(f"{path}: no CSV files in training directory")
            return TrainingSet(tuple(read_series(f) for f in files))
        data = _read_rows(path)
        dt = _step(data[:, 0], path)
        return TrainingSet(tuple(TimeSeries(data[:, j], dt) for j in range(1, data.shape[1])))
    except GridMismatchError as exc:
        raise InputError(f"{path}: {exc}") from exc
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from exc


# --------------------------------------------------------------------------
# configuration


def load_schema():
    text = resources.files("stdpgram.data").joinpath("config.schema.json").read_text()
    return json.loads(text)


def load_config(path):
    import jsonschema

    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read config {path}: {exc}") from exc
    try:
        jsonschema.validate(cfg, load_schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise InputError(f"config {path}: {where}: {exc.message}") from exc
    cfg["_dir"] = str(Path(path).resolve().parent)
    return cfg


def noise_from_config(cfg, n):
    d = cfg.get("noise")
    if d is None:
        raise InputError("config needs a 'noise' section")
    kind = d["kind"]
    try:
        if kind == "AR6":
            m = ar6_model()
        elif kind == "WHITE":
            m = NoiseModel.white(d.get("variance", 1.0))
        elif kind == "AR":
            m = NoiseModel.ar(d.get("ar_coeffs", []), d.get("innovation_var", 1.0))
        elif kind == "SOLAR_PROXY":
            m = solar_proxy_model(n)
        else:
            if "table" not in d:
                raise InputError("TABULATED noise needs a 'table' path")
            table = Path(d["table"])
            if not table.is_absolute():
                table = Path(cfg["_dir"]) / table
            m = load_psd_table(table)
    except (ValueError, OSError) as exc:
        raise InputError(f"noise: {exc}") from exc
    if "scale" in d:
        m = m.scaled(d["scale"])
    return m


def signal_from_config(cfg):
    d = cfg.get("signal")
    if d is None:
        return None
    scale = d.get("scale", 1.0)
    try:
        if "sinusoids" in d:
            comps = tuple(
                Sinusoid(c["alpha"] * scale, c["freq"], c.get("phase", 0.0)) for c in d["sinusoids"]
            )
            return SinusoidModel(comps)
        planets = tuple(
            KeplerianModel(
                p["K"] * scale,
                p["period"],
                p.get("e", 0.0),
                p.get("omega", 0.0),
                p.get("t0", 0.0),
                p.get("gamma0", 0.0),
                p.get("mass"),
            )
            for p in d["planets"]
        )
        return planets[0] if len(planets) == 1 else MultiPlanetModel(planets)
    except ValueError as exc:
        raise InputError(f"signal: {exc}") from exc


def tests_from_config(cfg):
    t = cfg.get("test", {"name": "TM"})
    items = t if isinstance(t, list) else [t]
    return tuple(TestSpec(d["name"], d.get("n_c", 1), d.get("alpha0", 0.5)) for d in items)


def _L_values(sc):
    L = sc.get("L", 1)
    return L if isinstance(L, list) else [L]


def experiment_from_config(cfg, seed, trials=None, L=None, with_signal=True):
    sc = cfg.get("scenario")
    if sc is None:
        raise InputError("config needs a 'scenario' section")
    n = sc["N"]
    ex_cfg = cfg.get("experiment", {})
    try:
        return Experiment(
            n=n,
            noise=noise_from_config(cfg, n),
            signal=signal_from_config(cfg) if with_signal else None,
            tests=tests_from_config(cfg),
            trials=trials or ex_cfg.get("trials", 10_000),
            seed=seed,
            standardization=sc.get("standardization", "AVERAGED"),
            L=L if L is not None else _L_values(sc)[0],
            max_order=sc.get("max_order"),
            dt=sc.get("dt", 1.0),
            route=sc.get("route", "time"),
            sigma2=sc.get("sigma2"),
        )
    except (ValueError, TypeError) as exc:
        raise InputError(f"config: {exc}") from exc


def _jobs(args):
    if args.jobs is not None:
        return args.jobs
    try:
        return max(1, int(os.environ.get(JOBS_ENV, "1")))
    except ValueError:
        raise InputError(f"{JOBS_ENV} must be an integer") from None


def _out_dir(args):
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _safe(label):
    return "".join(c if c.isalnum() or c in "-_.=" else "_" for c in label)


def _write_curves(out, curves, prefix=""):
    names = []
    for c in curves:
        name = f"{prefix}{_safe(c.label)}.csv"
        c.to_csv(out / name)
        names.append(name)
    return names


# --------------------------------------------------------------------------
# commands


def cmd_periodogram(args):
    ts = read_series(args.input)
    index_set = IndexSet.OMEGA if args.omega_only else IndexSet.FULL
    p = periodogram(ts, index_set, method=args.method)
    freqs, power = p.freqs, p.ordinates
    if args.dt_units:
        freqs = p.k / (ts.n * ts.dt)
        power = power / ts.dt
    if args.check:
        full = periodogram_ordinates(ts.samples, method=args.method)
        two_sided = full.sum() + full[1:-1].sum()
        energy = float(np.sum(ts.samples**2))
        rel = abs(two_sided - energy) / max(energy, np.finfo(float).tiny)
        print(f"parseval relative error {rel:.3e}", file=sys.stderr)
        if rel > 1e-9:
            raise ArithmeticError(f"Parseval check failed (relative error {rel:.3e})")
    fh = open(args.output, "w", newline="") if args.output else sys.stdout
    try:
        w = csv.writer(fh)
        w.writerow(["freq", "power"])
        for f, v in zip(freqs, power):
            w.writerow([_fmt(f), _fmt(v)])
    finally:
        if args.output:
            fh.close()
    return EXIT_OK


def _standardized(data_path, training_path, index_set=IndexSet.OMEGA):
    ts = read_series(data_path)
    tr = read_training(training_path)
    if tr.n != ts.n or not np.isclose(tr.dt, ts.dt, rtol=UNIFORM_RTOL, atol=0):
        raise InputError(
            f"training grid (N={tr.n}, dt={tr.dt:g}) differs from data grid (N={ts.n}, dt={ts.dt:g})"
        )
    return ts, tr, standardize(periodogram(ts, index_set), averaged_periodogram(tr, index_set))


def cmd_standardize(args):
    index_set = IndexSet.FULL if args.full else IndexSet.OMEGA
    ts, tr, p = _standardized(args.data, args.training, index_set)
    fh = open(args.output, "w", newline="") if args.output else sys.stdout
    try:
        w = csv.writer(fh)
        w.writerow(["freq", "standardized_power"])
        freqs = p.k / (ts.n * ts.dt) if args.dt_units else p.freqs
        for f, v in zip(freqs, p.ordinates):
            w.writerow([_fmt(f), _fmt(v)])
    finally:
        if args.output:
            fh.close()
    return EXIT_OK


def cmd_arfit(args):
    tr = read_training(args.training)
    try:
        if args.order is not None:
            fit = fit_ar_yw(tr, args.order)
        else:
            fit = select_order_fpe(tr, args.max_order)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    text = fit.to_json()
    if args.output:
        Path(args.output).write_text(text + "\n")
    else:
        print(text)
    return EXIT_OK


def _threshold(test, ex_cfg, n, L, seed):
    """Threshold on standardized ordinates (TM, TC, TF) or on the statistic (HC, BJ)."""
    pfa = ex_cfg.get("pfa", 0.01)
    mode = ex_cfg.get("threshold", "analytic")
    warn = None
    n_v = n // 2 - 1
    cal_trials = ex_cfg.get("calibration_trials", 100_000)
    if test.name is TestName.TM:
        return gamma_tm(pfa, n, L), "analytic", warn
    if test.name is TestName.TC:
        return gamma_tc(pfa, n, L, test.n_c), "analytic", warn
    if test.name is TestName.TF:
        if mode == "analytic":
            raise UnsupportedError("Fisher's test has no closed-form false-alarm rate; use threshold 'mc'")
        warn = "TF threshold is Monte-Carlo calibrated only (no closed form exists)"
        return calibrate_threshold("TF", n_v, pfa, trials=cal_trials, seed=seed, L=L), "mc", warn
    return (
        calibrate_threshold(test.name, n_v, pfa, test.alpha0, trials=cal_trials, seed=seed),
        "mc",
        warn,
    )


def cmd_detect(args):
    cfg = load_config(args.config)
    ts, tr, p = _standardized(args.data, args.training)
    tests = tests_from_config(cfg)
    ex_cfg = cfg.get("experiment", {})
    seed = args.seed if args.seed is not None else ex_cfg.get("seed", 0)
    L = tr.L
    reports = []
    for test in tests:
        thr, mode, warn = _threshold(test, ex_cfg, ts.n, L, seed)
        if warn:
            warnings.warn(warn, stacklevel=1)
        z = p.ordinates
        if test.name is TestName.TM:
            stat = t_max(z)
        elif test.name is TestName.TC:
            stat = t_c(z, test.n_c)
        elif test.name is TestName.TF:
            stat = t_fisher(z)
        else:
            v = pvalues_standardized(p, L)
            stat = hc_star(v, test.alpha0) if test.name is TestName.HC else bj(v, test.alpha0)
        reports.append(
            {
                "test": test.name.value,
                "statistic": stat.value,
                "threshold": thr,
                "threshold_mode": mode,
                "target_pfa": ex_cfg.get("pfa", 0.01),
                "decision": decide(stat, thr).value,
                "L": L,
                "N": ts.n,
                "N_C": test.n_c if test.name is TestName.TC else None,
                "alpha0": test.alpha0 if test.name in (TestName.HC, TestName.BJ) else None,
                "warnings": [warn] if warn else [],
            }
        )
    doc = reports[0] if len(reports) == 1 else {"reports": reports}
    text = json.dumps(doc, indent=2)
    if args.output:
        Path(args.output).write_text(text + "\n")
    else:
        print(text)
    return EXIT_OK


def _analytic_pfa(test, gamma, n, ex):
    if ex.standardization is Standardization.NONE:
        g = 2.0 * np.asarray(gamma)  # thresholds are on P / sigma2, the formula on 2 P / sigma2
        return pfa_white_assumed(g, n, test.name.value, test.n_c)
    L = math.inf if ex.standardization is not Standardization.AVERAGED else ex.L
    if test.name is TestName.TM:
        return pfa_tm(gamma, n, L)
    return pfa_tc(gamma, n, L, test.n_c)


def cmd_pfa_curve(args):
    """False-alarm (and, with a signal, detection) rate versus threshold, analytic and empirical."""
    cfg = load_config(args.config)
    out = _out_dir(args)
    ex_cfg = cfg.get("experiment", {})
    grid = np.asarray(ex_cfg.get("gamma_grid", np.linspace(0.5, 12, 24)), dtype=float)
    if np.any(np.diff(grid) <= 0):
        raise InputError("gamma_grid must be strictly increasing")
    files, echoes = [], []
    for L in _L_values(cfg["scenario"]):
        ex0 = experiment_from_config(cfg, args.seed, args.trials, L, with_signal=False)
        for t in ex0.tests:
            if t.name not in (TestName.TM, TestName.TC):
                raise UnsupportedError("pfa-curve supports TM and TC (closed forms exist only for them)")
        null = simulate(ex0, _jobs(args))
        sig = signal_from_config(cfg)
        alt = None
        if sig is not None:
            ex1 = ex0.replace(signal=sig, seed=args.seed + 1)
            alt = simulate(ex1, _jobs(args))
        echoes.append(ex0.describe())
        curves = []
        for j, t in enumerate(ex0.tests):
            est = [rate_from_values(null[:, j], g) for g in grid]
            tag = f"{t.label}_L={L}"
            curves.append(CurveResult(f"pfa_empirical_{tag}", "gamma", grid, "pfa",
                                      [e.rate for e in est], [e.stderr for e in est]))
            curves.append(CurveResult(f"pfa_analytic_{tag}", "gamma", grid, "pfa",
                                      _analytic_pfa(t, grid, ex0.n, ex0)))
            if alt is not None:
                est = [rate_from_values(alt[:, j], g) for g in grid]
                curves.append(CurveResult(f"pdet_empirical_{tag}", "gamma", grid, "pdet",
                                          [e.rate for e in est], [e.stderr for e in est]))
                if isinstance(sig, SinusoidModel) and ex0.standardization is not Standardization.NONE:
                    sc = ex1.scenario()
                    lam = noncentrality(sc)
                    vals = [pdet_tm(g, sc, lam) if t.name is TestName.TM else pdet_tc(g, sc, t.n_c, lam)
                            for g in grid]
                    curves.append(CurveResult(f"pdet_analytic_{tag}", "gamma", grid, "pdet", vals))
        files += _write_curves(out, curves)
    write_manifest(out / "manifest.json", "pfa-curve", echoes, {"files": files, "config": _clean(cfg)}, args.seed)
    return EXIT_OK


def cmd_roc(args):
    cfg = load_config(args.config)
    out = _out_dir(args)
    ex_cfg = cfg.get("experiment", {})
    pfa_grid = ex_cfg.get("pfa_grid", [0.05, 0.1, 0.2])
    if signal_from_config(cfg) is None:
        raise InputError("roc needs a 'signal' section")
    files, echoes = [], []
    for L in _L_values(cfg["scenario"]):
        ex0 = experiment_from_config(cfg, args.seed, args.trials, L, with_signal=False)
        ex1 = experiment_from_config(cfg, args.seed + 1, args.trials, L)
        try:
            curves = roc_empirical(ex0, ex1, pfa_grid, _jobs(args))
        except ValueError as exc:
            raise InputError(str(exc)) from exc
        out_curves = []
        for label, c in curves.items():
            c.label = f"roc_empirical_{label}_L={L}"
            out_curves.append(c)
        sig = ex1.signal
        if isinstance(sig, SinusoidModel) and ex1.standardization is not Standardization.NONE:
            from .analytic import roc_tm

            grid = np.sort(np.asarray(pfa_grid, dtype=float))
            out_curves.append(CurveResult(f"roc_analytic_TM_L={L}", "pfa", grid, "pdet", roc_tm(grid, ex1.scenario())))
        echoes.append(ex1.describe())
        files += _write_curves(out, out_curves)
    write_manifest(out / "manifest.json", "roc", echoes, {"files": files, "config": _clean(cfg)}, args.seed)
    return EXIT_OK


def cmd_dispersion(args):
    cfg = load_config(args.config)
    out = _out_dir(args)
    sc = cfg["scenario"]
    n = sc["N"]
    noise = noise_from_config(cfg, n)
    d = cfg.get("dispersion", {})
    ex_cfg = cfg.get("experiment", {})
    grid = np.asarray(ex_cfg.get("gamma_grid", np.linspace(2, 10, 17)), dtype=float)
    outer = args.outer or d.get("outer", 300)
    inner = args.trials or d.get("inner", 100)
    try:
        res = ar_dispersion_study(
            noise, n, _L_values(sc), grid, outer, inner,
            n_c=d.get("n_c", 5), max_order=sc.get("max_order"), seed=args.seed,
            route=sc.get("route", "time"), common_inner=d.get("common_inner", True),
            force_true=d.get("force_true", False), jobs=_jobs(args),
        )
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    files = _write_curves(out, [res.pop("approx")])
    for L, r in res.items():
        files += _write_curves(out, r.curves())
        np.savetxt(out / f"per_fit_rates_L={L}.csv", r.rates, delimiter=",", fmt="%.17g",
                   header=",".join(_fmt(g) for g in grid), comments="")
        files.append(f"per_fit_rates_L={L}.csv")
    write_manifest(out / "manifest.json", "dispersion", None,
                   {"files": files, "config": _clean(cfg), "outer": outer, "inner": inner}, args.seed)
    return EXIT_OK


def cmd_detectability(args):
    cfg = load_config(args.config)
    out = _out_dir(args)
    d = cfg.get("detectability")
    if d is None:
        raise InputError("config needs a 'detectability' section")
    sig = signal_from_config(cfg)
    if not isinstance(sig, KeplerianModel):
        raise InputError("detectability needs exactly one planet in 'signal'")
    L_list = [math.inf if L == "inf" else L for L in d["L_list"]]
    res = detectability_study(sig, g2_proxy_psd, d["pfa_list"], L_list, d["n_grid"], d["dt_nominal"])
    files = _write_curves(out, list(res.values()))
    write_manifest(out / "manifest.json", "detectability", None, {"files": files, "config": _clean(cfg)}, None)
    return EXIT_OK


def cmd_simulate(args):
    cfg = load_config(args.config)
    sc = cfg.get("scenario")
    if sc is None:
        raise InputError("config needs a 'scenario' section")
    n, dt = sc["N"], sc.get("dt", 1.0)
    t = dt * np.arange(1, n + 1)
    cols = []
    if args.what in ("noise", "data"):
        x = gen_noise(noise_from_config(cfg, n), n, RngSeed(args.seed, 0)).samples
        if args.what == "data":
            x = x + render_signal(signal_from_config(cfg), n, dt)
        cols = [x]
    elif args.what == "signal":
        cols = [render_signal(signal_from_config(cfg), n, dt)]
    else:
        L = args.L or _L_values(sc)[0]
        cols = list(gen_training_set(noise_from_config(cfg, n), n, L, RngSeed(args.seed, 1)).as_array())
    fh = open(args.output, "w", newline="") if args.output else sys.stdout
    try:
        w = csv.writer(fh)
        w.writerow(["t"] + (["value"] if len(cols) == 1 else [f"s{j + 1}" for j in range(len(cols))]))
        for i in range(n):
            w.writerow([_fmt(t[i])] + [_fmt(c[i]) for c in cols])
    finally:
        if args.output:
            fh.close()
    return EXIT_OK


def _clean(cfg):
    return {k: v for k, v in cfg.items() if not k.startswith("_")}


# --------------------------------------------------------------------------
# parser


def build_parser():
    ap = argparse.ArgumentParser(prog="stdpgram", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("periodogram", help="periodogram of a (t, value) CSV")
    p.add_argument("input")
    p.add_argument("-o", "--output")
    p.add_argument("--omega-only", action="store_true", help="drop the DC and Nyquist ordinates")
    p.add_argument("--dt-units", action="store_true", help="frequencies in 1/time, power divided by dt")
    p.add_argument("--check", action="store_true", help="verify Parseval's identity (exit 4 on failure)")
    p.add_argument("--method", choices=["fft", "direct"], default="fft")
    p.set_defaults(func=cmd_periodogram)

    p = sub.add_parser("standardize", help="data periodogram divided by the training average")
    p.add_argument("data")
    p.add_argument("training", help="directory of CSVs or one wide CSV")
    p.add_argument("-o", "--output")
    p.add_argument("--full", action="store_true", help="keep the DC and Nyquist ordinates")
    p.add_argument("--dt-units", action="store_true")
    p.set_defaults(func=cmd_standardize)

    p = sub.add_parser("arfit", help="Yule-Walker AR fit of training series (FPE order unless --order)")
    p.add_argument("training")
    p.add_argument("-o", "--output")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--order", type=int)
    g.add_argument("--max-order", type=int)
    p.set_defaults(func=cmd_arfit)

    p = sub.add_parser("detect", help="detection report for one data set")
    p.add_argument("data")
    p.add_argument("training")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, help="seed of Monte-Carlo threshold calibration")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_detect)

    for name, func, helptext in [
        ("pfa-curve", cmd_pfa_curve, "false-alarm/detection rate versus threshold"),
        ("roc", cmd_roc, "empirical ROC curves"),
        ("dispersion", cmd_dispersion, "true false-alarm rate spread under AR standardization"),
    ]:
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True)
        p.add_argument("--seed", type=int, required=True)
        p.add_argument("--trials", type=int, help="override the trial count (inner trials for dispersion)")
        p.add_argument("--jobs", type=int, help=f"worker processes (default ${JOBS_ENV} or 1)")
        p.add_argument("--out-dir", required=True)
        if name == "dispersion":
            p.add_argument("--outer", type=int, help="override the number of AR fits")
        p.set_defaults(func=func)

    p = sub.add_parser("detectability", help="analytic detection probability versus N")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_detectability)

    p = sub.add_parser("simulate", help="write noise, signal, data or training series as CSV")
    p.add_argument("what", choices=["noise", "signal", "data", "training"])
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--L", type=int)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_simulate)
    return ap


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "trials", None) is not None and args.trials < 1:
        parser.error("--trials must be >= 1")
    try:
        return args.func(args)
    except UnsupportedError as exc:
        print(f"stdpgram: unsupported: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except (InputError, GridMismatchError) as exc:
        print(f"stdpgram: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ConvergenceError, ArithmeticError, FloatingPointError) as exc:
        print(f"stdpgram: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"stdpgram: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except BrokenPipeError:
        # reader closed early (e.g. piped into head); silence the flush at exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
