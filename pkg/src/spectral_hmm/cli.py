"""Command-line front end.

Exit codes: 0 ok, 2 usage, 3 numerical failure, 4 I/O.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import evalbench
from .ahk import retry_policy
from .baum_welch import BwConfig, baum_welch
from .binning import bin_sequence, generate_gaussian_emissions, quantile_bounds, save_binspec
from .errors import DegenerateQuantiles, SpectralError
from .hkz import learn_hkz
from .hmm import (BUILTIN_MODELS, HmmModel, InvalidModel, TripleSet, resolve_model,
                  sample_sequence, sample_triples, sliding_triples)
from .moments import analytic_moments, estimate_moments, load_moments, save_moments
from .numerics import best_permutation_alignment

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4

PRESETS = {
    "thesis-k2": dict(models=("k2d3", "k2d6"), algorithms=("hkz", "ahk")),
    "thesis-k3": dict(models=("k3d8", "k3d10"), algorithms=("hkz", "ahk")),
    "thesis-bw": dict(models=("k2d3",), algorithms=("ahk", "ahk+bw", "bw")),
    "thesis-binning": dict(models=("k2d3", "k2d6"), algorithms=("ahk",)),
}


class UsageError(Exception):
    pass


# -- text formats ------------------------------------------------------------

def read_rows(path) -> list:
    with open(path) as fh:
        return [line.split() for line in fh if line.strip()]


def read_symbols(path, d=None) -> np.ndarray:
    """Integer rows (1-indexed) as a 0-indexed array of shape (rows, width)."""
    rows = read_rows(path)
    if not rows:
        raise UsageError(f"{path}: no data")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise UsageError(f"{path}: rows have differing lengths {sorted(widths)}")
    try:
        arr = np.array(rows, dtype=np.int64) - 1
    except ValueError as exc:
        raise UsageError(f"{path}: expected integer symbols ({exc})") from exc
    if arr.min() < 0 or (d is not None and arr.max() >= d):
        raise UsageError(f"{path}: symbols must lie in 1..{d if d is not None else 'd'}")
    return arr


def write_symbols(arr, path):
    arr = np.atleast_2d(np.asarray(arr) + 1)
    if arr.shape[0] == 1 and arr.shape[1] > 1:
        arr = arr.T
    _write_lines((" ".join(str(int(v)) for v in row) for row in arr), path)


def write_reals(arr, path):
    arr = np.asarray(arr, dtype=float)
    arr = arr[:, None] if arr.ndim == 1 else arr
    _write_lines((" ".join(repr(float(v)) for v in row) for row in arr), path)


def _write_lines(lines, path):
    text = "".join(line + "\n" for line in lines)
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


# -- subcommands -------------------------------------------------------------

def cmd_generate(args) -> int:
    model = resolve_model(args.model)
    rng = np.random.default_rng(args.seed)
    if (args.n is None) == (args.length is None):
        raise UsageError("give exactly one of --n (triples) or --length (one sequence)")
    if args.n is not None:
        data = sample_triples(model, args.n, rng, sliding=args.sliding).data
    else:
        data = sample_sequence(model, args.length, rng)[0]
    if args.sigma is not None:
        if args.sigma <= 0:
            raise UsageError("--sigma must be positive")
        write_reals(generate_gaussian_emissions(data, args.sigma, rng), args.output)
    else:
        write_symbols(data if data.ndim == 2 else data[:, None], args.output)
    return EXIT_OK


def cmd_moments(args) -> int:
    if args.model is not None:
        moments = analytic_moments(resolve_model(args.model))
    elif args.data is not None:
        if args.d is None:
            raise UsageError("--d is required with --data")
        moments = estimate_moments(_load_triples(args.data, args.d, args.sliding))
    else:
        raise UsageError("give --model (analytic moments) or --data (empirical moments)")
    save_moments(moments, args.output)
    return EXIT_OK


def _load_triples(path, d, sliding=False) -> TripleSet:
    arr = read_symbols(path, d)
    if arr.shape[1] == 3 and not sliding:
        return TripleSet(arr, d)
    if arr.shape[1] == 1:
        return TripleSet(sliding_triples(arr[:, 0]), d)
    raise UsageError(f"{path}: expected 3 symbols per line or one symbol per line")


def cmd_learn(args) -> int:
    if args.data is None and args.moments is None:
        raise UsageError("give a data file or --moments")
    if args.algo == "bw" and args.data is None:
        raise UsageError("--algo bw needs sequence data, not moments")

    moments = None
    if args.moments is not None:
        moments = load_moments(args.moments)
        d = args.d or moments.d
        if d != moments.d:
            raise UsageError(f"--d {d} disagrees with moments file (d={moments.d})")
    else:
        if args.d is None:
            raise UsageError("--d is required with a data file")
        d = args.d
    if args.k < 1 or (args.algo != "bw" and args.k > d):
        raise UsageError(f"need 1 <= k <= d for spectral learning (k={args.k}, d={d})")

    extra = {"algorithm": args.algo}
    if args.algo == "bw":
        arr = read_symbols(args.data, d)
        bw = baum_welch(arr, args.k, d, BwConfig(iterations=args.iterations, seed=args.seed))
        O_hat, T_hat, pi_hat = bw.model.O, bw.model.T, bw.model.pi
        extra["loglik_trace"] = bw.loglik_trace
        print("loglik trace: " + " ".join(f"{v:.6f}" for v in bw.loglik_trace))
    else:
        if moments is None:
            moments = estimate_moments(_load_triples(args.data, d, args.sliding))
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            est = learn_hkz(moments, args.k, rng=args.seed) if args.algo == "hkz" \
                else retry_policy(moments, args.k, seed=args.seed)
        O_hat, T_hat, pi_hat = est.O_hat, est.T_hat, est.pi_hat
        diag = {k: v for k, v in est.diagnostics.items() if np.isscalar(v)}
        if args.algo == "ahk":
            diag["attempts"] = est.attempts
        extra["diagnostics"] = diag
        for w in caught:
            print(f"warning: {w.message}")
        print("diagnostics: " + ", ".join(f"{k}={v:.4g}" if isinstance(v, float) else f"{k}={v}"
                                          for k, v in diag.items()))

    payload = {"k": args.k, "d": d, "T": T_hat.tolist(), "O": O_hat.tolist(),
               "pi": None if pi_hat is None else np.asarray(pi_hat).tolist(), **extra}
    if args.output:
        Path(args.output).write_text(json.dumps(payload, indent=2) + "\n")
    print(f"{args.algo}: k={args.k} d={d}")
    if args.truth:
        truth = resolve_model(args.truth)
        perm, O_al, err_O = best_permutation_alignment(O_hat, truth.O)
        T_al = T_hat[np.ix_(perm, perm)]
        print(f"err_O={err_O:.6g} err_T={float(((T_al - truth.T) ** 2).sum()):.6g} "
              f"max_abs_O={np.abs(O_al - truth.O).max():.3g} max_abs_T={np.abs(T_al - truth.T).max():.3g}")
    return EXIT_OK


def cmd_bin(args) -> int:
    rows = read_rows(args.input)
    if not rows:
        raise UsageError(f"{args.input}: no data")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise UsageError(f"{args.input}: rows have differing lengths")
    try:
        values = np.array(rows, dtype=float)
    except ValueError as exc:
        raise UsageError(f"{args.input}: {exc}") from exc
    if args.bins < 2:
        raise UsageError("--bins must be >= 2")
    spec = quantile_bounds(values.ravel(), args.bins)
    write_symbols(bin_sequence(values, spec), args.output)
    spec_path = args.spec_out or (f"{args.output}.bins.json" if args.output not in (None, "-") else None)
    if spec_path:
        save_binspec(spec, spec_path)
    return EXIT_OK


def cmd_bench(args) -> int:
    preset = PRESETS.get(args.preset, {}) if args.preset else {}
    model_names = args.models or preset.get("models")
    if not model_names:
        raise UsageError("give --preset or --models")
    models = {Path(m).stem if m not in BUILTIN_MODELS and m != "A" else m: resolve_model(m)
              for m in model_names}
    if args.preset == "thesis-binning" and args.sigma is None:
        raise UsageError("--preset thesis-binning needs --sigma (e.g. 0.1 or 0.25)")
    n_values = tuple(args.n or evalbench.DEFAULT_N)

    if args.preset == "thesis-bw":
        realizations = args.realizations or (10 if args.full_scale else 5)
        records = evalbench.bw_comparison(models, n_values, realizations, args.seed, args.iterations, args.jobs)
    else:
        realizations = args.realizations or (100 if args.full_scale else 20)
        records = evalbench.run_grid(evalbench.GridConfig(
            models=models, algorithms=tuple(args.algos or preset.get("algorithms", ("hkz", "ahk"))),
            n_values=n_values, realizations=realizations, master_seed=args.seed, jobs=args.jobs,
            bw_iterations=args.iterations, sigma=args.sigma, bins=args.bins))

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    evalbench.write_results_csv(records, out / "results.csv")
    evalbench.write_summary_csv(records, out / "summary.csv")
    failed = sum(not r.ok for r in records)
    print(f"{len(records)} runs, {failed} failed -> {out}")
    for (algorithm, model, metric), fit in evalbench.slope_fits(records).items():
        print(f"slope {algorithm:7s} {model:6s} {metric:12s} {fit.slope:+.3f}  (N {fit.n_range[0]}..{fit.n_range[1]})")
    return EXIT_NUMERIC if records and failed == len(records) else EXIT_OK


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spectral-hmm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="sample triples or a sequence from a model")
    p.add_argument("--model", required=True, help=f"model file or builtin ({', '.join(BUILTIN_MODELS)}, A)")
    p.add_argument("--n", type=int, help="number of independent triples")
    p.add_argument("--length", type=int, help="length of a single sequence")
    p.add_argument("--sliding", action="store_true", help="triples as windows of one sequence")
    p.add_argument("--sigma", type=float, help="emit Gaussian reals around the symbol values")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", help="output file (default stdout)")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("moments", help="export analytic or empirical moments as JSON")
    p.add_argument("--model", help="analytic moments of this model")
    p.add_argument("--data", help="empirical moments of this triple/sequence file")
    p.add_argument("--d", type=int, help="alphabet size (required with data files)")
    p.add_argument("--sliding", action="store_true")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_moments)

    p = sub.add_parser("learn", help="estimate model parameters")
    p.add_argument("data", nargs="?", help="triples (3 symbols per line) or a sequence (1 per line)")
    p.add_argument("--moments", help="learn from a moments JSON file instead of data")
    p.add_argument("--k", type=int, required=True, help="number of hidden states")
    p.add_argument("--d", type=int, help="alphabet size (required with data files)")
    p.add_argument("--algo", choices=("hkz", "ahk", "bw"), default="ahk")
    p.add_argument("--iterations", type=int, default=3, help="Baum-Welch iterations")
    p.add_argument("--sliding", action="store_true", help="treat triple rows as one sequence")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--truth", help="model to score the estimate against")
    p.add_argument("-o", "--output", help="estimated model JSON")
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("bin", help="quantile-bin real-valued data")
    p.add_argument("input", help="real values, one per line")
    p.add_argument("--bins", type=int, required=True, help="number of equal-mass bins")
    p.add_argument("-o", "--output", help="binned symbols (default stdout)")
    p.add_argument("--spec-out", help="bin bounds JSON (default OUTPUT.bins.json)")
    p.set_defaults(func=cmd_bin)

    p = sub.add_parser("bench", help="run an experiment grid and write CSVs")
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--models", nargs="+")
    p.add_argument("--algos", nargs="+", choices=evalbench.ALGORITHMS)
    p.add_argument("--n", type=int, nargs="+", help="sample sizes (default 1000 to 100000)")
    p.add_argument("--realizations", type=int, help="runs per cell (default 20, 5 for thesis-bw)")
    p.add_argument("--full-scale", action="store_true", help="100 realizations per cell (10 for thesis-bw)")
    p.add_argument("--sigma", type=float, help="Gaussian emission noise, then quantile binning")
    p.add_argument("--bins", type=int, help="bins for --sigma runs (default d)")
    p.add_argument("--iterations", type=int, default=3)
    p.add_argument("--jobs", type=int, help=f"worker processes (default ${evalbench.THREADS_ENV} or 1)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="directory for results.csv and summary.csv")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, InvalidModel, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DegenerateQuantiles as exc:
        print(f"error: degenerate quantiles: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except SpectralError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
