"""Command-line front end: ``stutl law|compare-cdf|simulate|estimate``."""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
import time
import warnings
from pathlib import Path

import numpy as np
from scipy import stats

from stutl.config import ConfigError, estimation_model, law_config, load_config, sampling_grid
from stutl.estimate import NU_BOUNDS, SIGMA_BOUNDS, fit
from stutl.model import build_model
from stutl.simulate import PathSet, simulate, substream_seed
from stutl.tlaw import (
    InversionConfig,
    InversionDivergedError,
    Method,
    build_law,
    raw_density,
)

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2
OUTPUT_ENV = "STUTL_OUTPUT_DIR"


def _out_path(arg: str | None, default_name: str) -> Path:
    if arg:
        return Path(arg)
    return Path(os.environ.get(OUTPUT_ENV, ".")) / default_name


def _timed(fn, *args, **kwargs):
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - t0


def _inversion_args(p: argparse.ArgumentParser, with_method: bool = True):
    p.add_argument("--nu", type=float, required=True, help="degrees of freedom of the unit-time law")
    p.add_argument("--h", type=float, default=1.0, help="time step of the increment")
    if with_method:
        p.add_argument("--method", default="LAG", help="LAG, COS or FFT")
    p.add_argument("--up", type=float, default=7.0)
    p.add_argument("--low", type=float, default=-7.0)
    p.add_argument("--N", type=int, default=180, help="nodes, cosine terms or FFT points")
    p.add_argument("--N-grid", dest="n_grid", type=int, default=1000, help="table intervals")
    p.add_argument("--out", help="output CSV path")


def cmd_law(args) -> int:
    config = InversionConfig(Method.parse(args.method), args.up, args.low, args.N, args.n_grid)
    law, secs = _timed(build_law, args.nu, args.h, config)
    path = _out_path(args.out, "law.csv")
    law.to_csv(path)
    print(f"law of J_h: nu={args.nu:g} h={args.h:g} method={config.method.value} "
          f"N={config.n_terms} grid=[{config.low:g}, {config.up:g}] x {config.n_grid}")
    print(f"raw mass {law.raw_mass:.6g}, negative density fraction {law.negative_fraction:.4f}")
    print(f"sec. {secs:.2f} (wall time, non-normative)")
    print(f"wrote {path}")
    return EXIT_OK


def reference_cdf(nu: float, h: float, x):
    """Closed-form CDF of ``J_h`` where one exists (t3 at h=1, Cauchy at any h)."""
    if nu == 1:
        return 0.5 + np.arctan(np.asarray(x) / h) / math.pi
    if nu == 3 and h == 1:
        return stats.t.cdf(x, 3)
    return None


def compare_cdf(nu: float, h: float, n: int, up: float, low: float, points: int = 100001,
                n_grid: int = 1000, n_lag: int | None = None, n_cos: int | None = None):
    """CDFs of the three engines on a common grid plus error and timing summaries.

    ``n`` is used by every engine unless ``n_lag`` or ``n_cos`` override it;
    LAG is capped at 180 nodes.  Returns ``(x, columns, rows)`` where
    ``columns`` maps column names to arrays and ``rows`` holds one summary
    dict per method.
    """
    requested = {Method.LAG: n_lag or n, Method.COS: n_cos or n, Method.FFT: n}
    x = np.linspace(low, up, points)
    ref = reference_cdf(nu, h, x)
    columns, rows = {}, []
    for method in (Method.LAG, Method.COS, Method.FFT):
        note = ""
        n_method = requested[method]
        if method is Method.LAG and n_method > 180:
            n_method = 180
            note = f"N capped at {n_method}"
        config = InversionConfig(method, up, low, n_method, n_grid)
        _, f_raw = raw_density(nu, h, config)
        neg = float(np.mean(f_raw < 0))
        try:
            law, secs = _timed(build_law, nu, h, config)
            col = law.cdf(x)
        except InversionDivergedError as exc:
            secs, col = float("nan"), np.full_like(x, np.nan)
            note = (note + "; " if note else "") + str(exc)
        columns[method.value.lower()] = col
        row = {"method": method.value, "N": n_method, "sec": secs, "negative_fraction": neg, "note": note}
        if ref is not None:
            err = np.abs(col - ref)
            row.update(rmse=float(np.sqrt(np.mean(err**2))), max=float(np.max(err)), min=float(np.min(err)))
        rows.append(row)
    if ref is not None:
        columns["reference"] = ref
    return x, columns, rows


def cmd_compare_cdf(args) -> int:
    x, columns, rows = compare_cdf(args.nu, args.h, args.N, args.up, args.low, args.points, args.n_grid,
                                   args.n_lag, args.n_cos)
    path = _out_path(args.out, "compare_cdf.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", *columns])
        for i in range(x.size):
            w.writerow([f"{x[i]:.17g}", *(f"{c[i]:.17g}" for c in columns.values())])
    print(f"{'':<20}" + "".join(f"{r['method']:>12}" for r in rows))
    if "reference" in columns:
        for key, label in (("rmse", "RMSE"), ("max", "Max"), ("min", "Min")):
            print(f"{label:<20}" + "".join(f"{r[key]:>12.3g}" for r in rows))
    else:
        print("(no closed-form reference for these parameters)")
    print(f"{'negative fraction':<20}" + "".join(f"{r['negative_fraction']:>12.4f}" for r in rows))
    print(f"{'sec.':<20}" + "".join(f"{r['sec']:>12.2f}" for r in rows) + "  (wall time, non-normative)")
    for r in rows:
        if r["note"]:
            print(f"note {r['method']}: {r['note']}")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    doc = load_config(args.config)
    if "true_params" not in doc:
        raise ConfigError(f"{args.config}: missing [true_params] section (needed for simulation)")
    model = build_model(doc)
    grid = sampling_grid(doc)
    config = law_config(doc)
    paths, secs = _timed(simulate, model, grid, doc["true_params"], config, args.seed)
    path = _out_path(args.out, "paths.csv")
    paths.to_csv(path)
    print(f"simulated {grid.n_steps + 1} rows, columns {', '.join(['time', *paths.names])}")
    print(f"sec. {secs:.2f} (wall time, non-normative)")
    print(f"wrote {path}")
    return EXIT_OK


def random_start(model, lower, upper, seed: int) -> dict[str, float]:
    """Uniform random start inside the box; unbounded coefficients use [-10, 10]."""
    rng = np.random.default_rng(substream_seed(seed, "start"))
    start = {}
    for name in model.coeff_names:
        lo, hi = lower.get(name, -10.0), upper.get(name, 10.0)
        start[name] = float(rng.uniform(lo, hi))
    lo = lower.get(model.scale_name, SIGMA_BOUNDS[0])
    hi = upper.get(model.scale_name, SIGMA_BOUNDS[1])
    start[model.scale_name] = float(rng.uniform(lo, min(hi, max(4.0, lo * 2))))
    return start


def cmd_estimate(args) -> int:
    doc = load_config(args.config)
    model = estimation_model(doc)
    data = PathSet.from_csv(args.data)
    est = doc.get("estimation", {})
    lower, upper = dict(est.get("lower", {})), dict(est.get("upper", {}))
    start = dict(est.get("start", {}))
    start = {**random_start(model, lower, upper, args.seed), **start}
    span = float(data.times[-1] - data.times[0])
    Bn = float(est.get("PT", span))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        result, secs = _timed(fit, data, model, Bn, start, lower, upper)
    print(result.summary())
    print(f"sec. {secs:.2f} (wall time, non-normative)")
    path = _out_path(args.out, "estimates.csv")
    result.to_csv(path)
    print(f"wrote {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stutl", description="Student-t Levy regression toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("law", help="tabulate the increment law")
    _inversion_args(p)
    p.set_defaults(func=cmd_law)

    p = sub.add_parser("compare-cdf", help="compare the three inversion engines")
    _inversion_args(p, with_method=False)
    p.add_argument("--points", type=int, default=100001, help="evaluation grid size")
    p.add_argument("--N-lag", dest="n_lag", type=int, help="override N for LAG")
    p.add_argument("--N-cos", dest="n_cos", type=int, help="override N for COS")
    p.set_defaults(func=cmd_compare_cdf)

    p = sub.add_parser("simulate", help="simulate covariates and response from a config")
    p.add_argument("config")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="two-step estimation on a data CSV")
    p.add_argument("config")
    p.add_argument("--data", required=True)
    p.add_argument("--seed", type=int, default=0, help="seed for the random start")
    p.add_argument("--out")
    p.set_defaults(func=cmd_estimate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ArithmeticError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
