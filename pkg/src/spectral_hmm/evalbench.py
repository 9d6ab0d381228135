"""Scoring, seeded experiment grids and log-log slope fits.

Errors are squared Frobenius norms after aligning estimated hidden-state
labels to the truth. The permutation is chosen on ``O`` and reused for ``T``.
Timings cover moment estimation plus the learner (or the full EM run),
never data generation.
"""

from __future__ import annotations

import csv
import itertools
import math
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .ahk import retry_policy
from .baum_welch import BwConfig, baum_welch
from .binning import generate_gaussian_emissions, simple_binning
from .errors import SpectralError
from .hkz import learn_hkz
from .hmm import HmmModel, TripleSet, builtin_model, sample_triples
from .moments import estimate_moments
from .numerics import best_permutation_alignment

DEFAULT_N = (1000, 2500, 5000, 10000, 25000, 50000, 100000)
BW_RANDOM_N = (1000, 2500, 5000)
ALGORITHMS = ("hkz", "ahk", "bw", "ahk+bw")
THREADS_ENV = "SPECTRAL_HMM_JOBS"

RESULT_COLUMNS = ("algorithm", "model", "N", "realization", "seed", "err_O", "err_T",
                  "wall_time_s", "status", "attempts", "clamped_entries", "imag_mass")


@dataclass
class Score:
    err_O: float
    err_T: float
    permutation: np.ndarray


@dataclass
class ExperimentRecord:
    algorithm: str
    model: str
    N: int
    realization: int
    seed: int
    err_O: float = math.nan
    err_T: float = math.nan
    wall_time_s: float = math.nan
    status: str = "ok"
    attempts: int = 1
    clamped_entries: int = 0
    imag_mass: float = 0.0

    @property
    def ok(self) -> bool:
        return self.status == "ok"


@dataclass
class SlopeFit:
    slope: float
    intercept: float
    n_range: tuple


@dataclass
class GridConfig:
    models: dict  # name -> HmmModel
    algorithms: tuple = ("hkz", "ahk")
    n_values: tuple = DEFAULT_N
    realizations: int = 20
    master_seed: int = 0
    jobs: int | None = None
    bw_iterations: int = 3
    sigma: float | None = None  # real-valued emissions + quantile binning when set
    bins: int | None = None  # defaults to d
    cells: list | None = field(default=None, repr=False)  # explicit (algorithm, model, N) list


def score_estimate(O_hat, T_hat, truth: HmmModel) -> Score:
    O_hat = np.asarray(O_hat, dtype=float)
    T_hat = np.asarray(T_hat, dtype=float)
    if O_hat.shape != truth.O.shape or T_hat.shape != truth.T.shape:
        raise ValueError("estimate shapes do not match the true model")
    perm, _, err_O = best_permutation_alignment(O_hat, truth.O)
    T_aligned = T_hat[np.ix_(perm, perm)]
    return Score(err_O, float(((T_aligned - truth.T) ** 2).sum()), perm)


def child_seed(master_seed: int, *key: int) -> int:
    return int(np.random.SeedSequence(master_seed, spawn_key=key).generate_state(1)[0])


def _make_data(model: HmmModel, n: int, seed: int, sigma, bins):
    rng = np.random.default_rng(seed)
    triples = sample_triples(model, n, rng)
    if sigma is None:
        return triples
    values = generate_gaussian_emissions(triples.data, sigma, rng)
    symbols, _ = simple_binning(values, bins or model.d)
    return TripleSet(symbols, bins or model.d)


def run_learner(algorithm: str, triples: TripleSet, k: int, seed: int, bw_iterations: int = 3):
    """Fit one algorithm; returns ``(O_hat, T_hat, info)`` with timing in ``info``."""
    info = {"attempts": 1, "clamped_entries": 0, "imag_mass": 0.0}
    start = time.perf_counter()
    if algorithm == "hkz":
        est = learn_hkz(estimate_moments(triples), k, rng=seed)
    elif algorithm in ("ahk", "ahk+bw"):
        est = retry_policy(estimate_moments(triples), k, seed=seed)
        info["attempts"] = est.attempts
    elif algorithm == "bw":
        est = None
    else:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    if est is not None:
        info["clamped_entries"] = est.diagnostics.get("clamped_entries", 0)
        info["imag_mass"] = est.diagnostics.get("imag_mass", 0.0)
    if algorithm in ("bw", "ahk+bw"):
        init = None
        if est is not None:
            pi0 = np.full(k, 1.0 / k)
            init = HmmModel(est.T_hat, est.O_hat, pi0)
        bw = baum_welch(triples.data, k, triples.d, BwConfig(iterations=bw_iterations, init=init, seed=seed))
        O_hat, T_hat = bw.model.O, bw.model.T
    else:
        O_hat, T_hat = est.O_hat, est.T_hat
    info["wall_time_s"] = time.perf_counter() - start
    return O_hat, T_hat, info


def _run_cell(args):
    algorithm, name, model, n, realization, data_seed, learn_seed, cfg = args
    rec = ExperimentRecord(algorithm, name, n, realization, data_seed)
    try:
        triples = _make_data(model, n, data_seed, cfg["sigma"], cfg["bins"])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            O_hat, T_hat, info = run_learner(algorithm, triples, model.k, learn_seed, cfg["bw_iterations"])
        if O_hat.shape == model.O.shape:
            score = score_estimate(O_hat, T_hat, model)
            rec.err_O, rec.err_T = score.err_O, score.err_T
        else:
            # finer alphabet than the model: only T is comparable
            rec.err_T = min(float(((T_hat[np.ix_(p, p)] - model.T) ** 2).sum())
                            for p in map(list, itertools.permutations(range(model.k))))
        rec.wall_time_s = info["wall_time_s"]
        rec.attempts = info["attempts"]
        rec.clamped_entries = info["clamped_entries"]
        rec.imag_mass = info["imag_mass"]
    except (SpectralError, np.linalg.LinAlgError, ValueError) as exc:
        rec.status = f"error:{type(exc).__name__}"
        rec.attempts = len(getattr(exc, "attempts", [])) or 1
    return rec


def _default_jobs() -> int:
    return int(os.environ.get(THREADS_ENV, "1"))


def run_grid(config: GridConfig) -> list:
    """Every (algorithm, model, N) cell times every realization, in that order.

    Data for a given (model, N, realization) is identical across algorithms,
    so comparisons between algorithms are paired.
    """
    if config.realizations < 1:
        raise ValueError("realizations must be >= 1")
    names = list(config.models)
    cells = config.cells or [(a, m, n) for m in names for a in config.algorithms for n in config.n_values]
    cfg = {"sigma": config.sigma, "bins": config.bins, "bw_iterations": config.bw_iterations}
    tasks = []
    for algorithm, name, n in cells:
        mi = names.index(name)
        for r in range(config.realizations):
            data_seed = child_seed(config.master_seed, mi, int(n), r)
            learn_seed = child_seed(config.master_seed, mi, int(n), r, 1)
            tasks.append((algorithm, name, config.models[name], int(n), r, data_seed, learn_seed, cfg))
    jobs = config.jobs or _default_jobs()
    if jobs <= 1:
        return [_run_cell(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_cell, tasks, chunksize=4))


def bw_comparison(models=None, n_values=DEFAULT_N, realizations: int = 10, master_seed: int = 0,
                  iterations: int = 3, jobs=None) -> list:
    """AHK alone, BW from a random start, BW warm-started from AHK.

    Random-start BW only runs for the three smallest sample sizes.
    """
    models = models or {"k2d3": builtin_model("k2d3")}
    cells = []
    for name in models:
        for n in n_values:
            cells.append(("ahk", name, n))
            cells.append(("ahk+bw", name, n))
            if n in BW_RANDOM_N:
                cells.append(("bw", name, n))
    return run_grid(GridConfig(models=models, realizations=realizations, master_seed=master_seed,
                               bw_iterations=iterations, jobs=jobs, cells=cells))


def fit_loglog_slope(n_values, errors, exclude=(1000,)) -> SlopeFit:
    """OLS of ``log(error)`` on ``log(N)``, dropping the sizes in ``exclude``."""
    n_values = np.asarray(n_values, dtype=float)
    errors = np.asarray(errors, dtype=float)
    keep = ~np.isin(n_values, exclude) & np.isfinite(errors) & (errors > 0)
    if len(np.unique(n_values[keep])) < 3:
        raise ValueError("need at least 3 distinct N after exclusion")
    slope, intercept = np.polyfit(np.log(n_values[keep]), np.log(errors[keep]), 1)
    return SlopeFit(float(slope), float(intercept), (int(n_values[keep].min()), int(n_values[keep].max())))


def summarize(records) -> list:
    """Mean and standard deviation per (algorithm, model, N) over successful runs."""
    groups = {}
    for rec in records:
        groups.setdefault((rec.algorithm, rec.model, rec.N), []).append(rec)
    rows = []
    for (algorithm, model, n), recs in groups.items():
        ok = [r for r in recs if r.ok]
        row = {"algorithm": algorithm, "model": model, "N": n, "runs": len(recs), "failures": len(recs) - len(ok)}
        for col in ("err_O", "err_T", "wall_time_s"):
            vals = np.array([getattr(r, col) for r in ok], dtype=float)
            vals = vals[np.isfinite(vals)]
            mean = float(vals.mean()) if vals.size else math.nan
            row[f"{col}_mean"] = mean
            row[f"{col}_std"] = float(vals.std(ddof=1)) if vals.size > 1 else math.nan
            row[f"log10_{col}_mean"] = math.log10(mean) if mean > 0 else math.nan
        row["log10_N"] = math.log10(n)
        rows.append(row)
    return rows


def slope_fits(records, exclude=(1000,)) -> dict:
    """Slope per (algorithm, model, metric) wherever enough sizes are present."""
    fits = {}
    rows = summarize(records)
    for algorithm, model in sorted({(r["algorithm"], r["model"]) for r in rows}):
        sub = sorted((r for r in rows if r["algorithm"] == algorithm and r["model"] == model), key=lambda r: r["N"])
        for metric in ("err_O", "err_T", "wall_time_s"):
            try:
                fits[(algorithm, model, metric)] = fit_loglog_slope(
                    [r["N"] for r in sub], [r[f"{metric}_mean"] for r in sub], exclude)
            except ValueError:
                pass
    return fits


def write_results_csv(records, path):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=RESULT_COLUMNS)
        writer.writeheader()
        for rec in records:
            writer.writerow({k: v for k, v in asdict(rec).items() if k in RESULT_COLUMNS})


def write_summary_csv(records, path):
    rows = summarize(records)
    if not rows:
        return
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)


def mean_metric(records, algorithm, model, n, metric="err_O") -> float:
    vals = [getattr(r, metric) for r in records
            if r.algorithm == algorithm and r.model == model and r.N == n and r.ok]
    return float(np.mean(vals)) if vals else math.nan
