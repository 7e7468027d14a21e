"""End-to-end acceptance checks; each test logs one PASS/FAIL line."""

import math
import time

import numpy as np
import pytest
from scipy import special, stats

from conftest import DETERMINISTIC, TRUTH, cauchy_cdf, record, t3_cdf
from stutl.cli import compare_cdf
from stutl.estimate import confidence_interval, fit, h1, h2_score, std_errors, unit_residuals
from stutl.model import build_model
from stutl.simulate import SamplingGrid, simulate
from stutl.specfun import gauss_laguerre
from stutl.tlaw import InversionConfig, InversionDivergedError, Method, build_law, raw_density

REFERENCE_RMSE = {"COS": 0.021, "FFT": 0.021, "LAG": 0.064}
REFERENCE_ESTIMATES = {"mu1": 5.029555, "mu2": -1.128905, "sigma0": 2.425147, "nu": 2.735344}
TRUE_VEC = np.array([TRUTH["mu1"], TRUTH["mu2"], TRUTH["sigma0"], TRUTH["nu"]])


def test_engine_rmse():
    t0 = time.perf_counter()
    _, _, rows = compare_cdf(3.0, 1.0, 180, 10.0, -10.0, points=100001, n_grid=1000)
    elapsed = time.perf_counter() - t0
    rmse = {r["method"]: r["rmse"] for r in rows}
    within = {m: REFERENCE_RMSE[m] / 2 <= rmse[m] <= 2 * REFERENCE_RMSE[m] for m in rmse}
    ok = all(within.values()) and elapsed < 10
    detail = ", ".join(f"{m} {rmse[m]:.4f} (reference {REFERENCE_RMSE[m]})" for m in ("COS", "FFT", "LAG"))
    assert record(1, ok, f"RMSE {detail}; {elapsed:.1f}s")


def _best_time(method, n_terms, repeats=5):
    cfg = InversionConfig(method, 10.0, -10.0, n_terms, 1000)
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        build_law(3.0, 1.0, cfg)
        best = min(best, time.perf_counter() - t0)
    return best


def test_engine_timing_order():
    times = {m.value: _best_time(m, 180) for m in (Method.LAG, Method.COS, Method.FFT)}
    ok = times["FFT"] < times["COS"] and times["FFT"] < times["LAG"]
    detail = ", ".join(f"{k} {v * 1e3:.2f} ms" for k, v in times.items())
    assert record(2, ok, f"best-of-5 build times {detail}")


def test_high_accuracy_oracle():
    x = np.linspace(-10, 10, 100001)
    law = build_law(3.0, 1.0, InversionConfig(Method.FFT, 10.0, -10.0, 2**17, 200000))
    err_t3 = float(np.max(np.abs(law.cdf(x) - t3_cdf(x))))
    errs = {}
    for h in (1.0, 0.1, 0.02):
        law = build_law(1.0, h, InversionConfig(Method.FFT, 10.0, -10.0, 2**17, 200000))
        errs[h] = float(np.max(np.abs(law.cdf(x) - cauchy_cdf(x, h))))
    ok = err_t3 <= 1e-3 and all(e <= 5e-3 for e in errs.values())
    detail = f"t3 sup {err_t3:.3e} (<= 1e-3); " + ", ".join(f"Cauchy h={h} sup {e:.3e}" for h, e in errs.items())
    assert record(3, ok, detail + " (<= 5e-3)")


def test_small_step_oscillation():
    t0 = time.perf_counter()
    frac = {}
    for method in (Method.LAG, Method.COS, Method.FFT):
        _, f = raw_density(3.0, 0.01, InversionConfig(method, 10.0, -10.0, 180, 1000))
        frac[method.value] = float(np.mean(f < 0))
    elapsed = time.perf_counter() - t0
    ok = frac["LAG"] < frac["FFT"] and frac["LAG"] < frac["COS"] and elapsed < 5
    detail = ", ".join(f"{k} {v:.3f}" for k, v in frac.items())
    assert record(4, ok, f"pre-clip negative-density fraction {detail}; {elapsed:.2f}s")


@pytest.fixture(scope="module")
def det_model():
    return build_model(DETERMINISTIC)


def _fit_det(model, law, seed, grid=SamplingGrid(0, 50, 2500)):
    data = simulate(model, grid, TRUTH, seed=seed, law=law)
    rng = np.random.default_rng(seed)
    start = {"mu1": rng.uniform(-10, 10), "mu2": rng.uniform(-10, 10), "sigma0": rng.uniform(0.1, 4)}
    bounds_lo = {"mu1": -10, "mu2": -10, "sigma0": 0.1}
    bounds_hi = {"mu1": 10, "mu2": 10, "sigma0": 10.01}
    return data, fit(data, model, 15.0, start, bounds_lo, bounds_hi)


def test_estimation_recovery(det_model, law_h002):
    t0 = time.perf_counter()
    cover = np.zeros(4, dtype=int)
    first = None
    for seed in range(20):
        _, r = _fit_det(det_model, law_h002, seed)
        ci = confidence_interval(r, 0.05)
        cover += [ci[n][0] <= v <= ci[n][1] for n, v in zip(r.names, TRUE_VEC)]
        first = first or r
    elapsed = time.perf_counter() - t0
    band = all(0.5 <= est / REFERENCE_ESTIMATES[n] <= 2 for n, est in zip(first.names, first.estimates))
    ok = bool(np.all(cover >= 15)) and band and elapsed < 120
    cov = ", ".join(f"{n} {c}/20" for n, c in zip(first.names, cover))
    est = ", ".join(f"{n} {v:.4g}" for n, v in zip(first.names, first.estimates))
    assert record(5, ok, f"95% CI coverage {cov}; seed-0 estimates {est}; {elapsed:.1f}s")


def test_se_convention_lock():
    dx = np.full((750, 1), 0.02)
    se = std_errors(dx, 0.02, 2.425147, 2.735344, 750, 50)
    ok = abs(se[1] / 0.12523404 - 1) < 5e-6 and abs(se[2] / 0.47457435 - 1) < 5e-6
    assert record(6, ok, f"SE(sigma) {se[1]:.7f}, SE(nu) {se[2]:.7f}")


def test_quadrature_precision_trend(det_model):
    t0 = time.perf_counter()
    grid = SamplingGrid(0, 50, 18250)
    h = grid.h
    lines, ok = [], True
    for method in (Method.FFT, Method.COS):
        for n_terms in (5000, 180):
            cfg = InversionConfig(method, 6.0, -6.0, n_terms, 60000)
            tag = f"{method.value} N={n_terms}"
            try:
                law = build_law(3.0, h, cfg)
            except InversionDivergedError as exc:
                lines.append(f"{tag}: {exc}")
                ok = False
                continue
            data = simulate(det_model, grid, TRUTH, seed=1, law=law)
            r = fit(data, det_model, 15.0, {"mu1": 1.0, "mu2": 1.0, "sigma0": 1.0},
                    {"mu1": -10, "mu2": -10, "sigma0": 0.1}, {"mu1": 10, "mu2": 10, "sigma0": 10.01})
            z = (r.estimates - TRUE_VEC) / r.se
            if n_terms == 5000:
                good = bool(np.all(np.abs(z) <= 4))
            else:
                good = bool(z[2] > 4)
            ok &= good
            lines.append(f"{tag}: sigma {r.sigma_hat:.3f} z {np.round(z, 2).tolist()}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 300
    assert record(7, ok, "; ".join(lines) + f"; {elapsed:.1f}s")


def test_rng_ks():
    n = 10_000
    crit = 1.63 / math.sqrt(n)
    law = build_law(3.0, 1.0, InversionConfig(Method.FFT, 10.0, -10.0, 2**17, 60000))
    d3 = stats.kstest(law.sample(n, seed=101), t3_cdf).statistic
    law = build_law(1.0, 0.1, InversionConfig(Method.FFT, 10.0, -10.0, 2**17, 60000))
    d1 = stats.kstest(law.sample(n, seed=202), lambda x: cauchy_cdf(x, 0.1)).statistic
    ok = d3 < crit and d1 < crit
    assert record(8, ok, f"KS t3 {d3:.4f}, Cauchy(0.1) {d1:.4f} (critical {crit:.4f})")


def test_quadrature_exactness():
    worst = 0.0
    for n in (1, 5, 20, 100, 180):
        rule = gauss_laguerre(n)
        log_w = np.log(rule.scaled_weights) - rule.nodes
        for m in range(2 * n):
            log_sum = special.logsumexp(log_w + m * np.log(rule.nodes))
            worst = max(worst, abs(math.expm1(log_sum - special.gammaln(m + 1))))
    assert record(9, worst <= 1e-10, f"max relative error {worst:.2e} over m <= 2N-1")


def test_score_checks(det_model, law_h002):
    data, r = _fit_det(det_model, law_h002, 0)
    Nn = r.window.Nn
    x = data.matrix(["X1", "X2"])
    dy, dx = np.diff(data["Y"])[:Nn], np.diff(x, axis=0)[:Nn]
    theta = np.array([*r.mu_hat, r.sigma_hat])
    f = lambda t: h1(dy, dx, t[:2], t[2], data.h)
    step = 1e-6 * np.maximum(1, np.abs(theta))
    grad = np.array([(f(theta + e) - f(theta - e)) / (2 * e[k]) for k, e in enumerate(np.diag(step))])
    res = unit_residuals(data.times, data["Y"], x, r.mu_hat, r.sigma_hat, r.window.Tn)
    score = abs(h2_score(res, r.nu_hat))
    bound = 1e-4 * (1 + abs(f(theta)))
    ok = np.linalg.norm(grad) <= bound and score <= 1e-6
    assert record(10, ok, f"|grad H1| {np.linalg.norm(grad):.2e} (<= {bound:.2e}), |H2 score| {score:.2e}")
