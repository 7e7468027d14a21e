"""
Two-step quasi-maximum-likelihood estimation for the Student-t Levy regression.

Step 1 maximises the Cauchy quasi-likelihood of the high-frequency increments
on ``[0, Bn]`` over the drift coefficients and scale.  Step 2 maximises the
Student-t likelihood of the unit-time residuals on ``[0, Tn]`` over the
degrees of freedom.
"""

from __future__ import annotations

import csv
import math
import os
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import optimize, stats

from stutl.model import RegressionModel
from stutl.simulate import DataError, PathSet
from stutl.specfun import DomainError, digamma, log_gamma, trigamma

__all__ = [
    "BoundaryWarning",
    "CollinearityError",
    "ConvergenceError",
    "FitResult",
    "FitWindow",
    "WindowError",
    "confidence_interval",
    "fit",
    "fit_step1",
    "fit_step2",
    "h1",
    "h2",
    "h2_score",
    "std_errors",
    "unit_residuals",
]

SIGMA_BOUNDS = (1e-3, 1e3)
NU_BOUNDS = (0.1, 50.0)
_LOG_PI = math.log(math.pi)


class WindowError(ValueError):
    """Estimation window incompatible with the data."""


class ConvergenceError(ArithmeticError):
    """Optimizer hit its iteration cap; ``best`` holds the best point found."""

    def __init__(self, message: str, best: np.ndarray, value: float):
        super().__init__(message)
        self.best = best
        self.value = value


class CollinearityError(ArithmeticError):
    """Singular covariate Gram matrix."""


class BoundaryWarning(RuntimeWarning):
    """Optimum pinned at a bound of the search box."""


@dataclass(frozen=True)
class FitWindow:
    """Sampling step ``h``, step-1 horizon ``Bn`` and full horizon ``Tn``."""

    h: float
    Bn: float
    Tn: float

    def __post_init__(self):
        if not self.h > 0:
            raise WindowError(f"h must be positive, got {self.h}")
        if not 0 < self.Bn <= self.Tn * (1 + 1e-12):
            raise WindowError(f"need 0 < Bn <= Tn, got Bn={self.Bn}, Tn={self.Tn}")

    @property
    def n_per_unit(self) -> float:
        return 1.0 / self.h

    @property
    def Nn(self) -> int:
        return int(math.floor(self.Bn / self.h + 1e-9))

    @property
    def n_units(self) -> int:
        return int(math.floor(self.Tn + 1e-9))


# --------------------------------------------------------------------------
# Step 1
# --------------------------------------------------------------------------


def h1(dy, dx, mu, sigma: float, h: float) -> float:
    """Cauchy quasi-log-likelihood without its constant.

    ``dy`` holds the response increments and ``dx`` (rows x q) the covariate
    increments of the first ``Nn`` steps.
    """
    if not sigma > 0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    dy = np.asarray(dy, dtype=float)
    eps = (dy - np.asarray(dx, dtype=float) @ np.asarray(mu, dtype=float)) / (h * sigma)
    return -float(np.sum(math.log(sigma) + np.log1p(eps * eps)))


def _bounds_for(names, lower, upper, defaults):
    out = []
    for name in names:
        lo, hi = defaults.get(name, (-np.inf, np.inf))
        lo = float(lower.get(name, lo))
        hi = float(upper.get(name, hi))
        if not lo < hi:
            raise ValueError(f"empty search interval for {name}: [{lo}, {hi}]")
        out.append((lo, hi))
    return out


def fit_step1(dy, dx, h: float, start: Sequence[float], bounds: Sequence[tuple[float, float]],
              maxiter: int | None = None):
    """Maximise :func:`h1` over ``(mu, sigma)`` inside ``bounds``.

    Nelder-Mead on the clamped box, restarted once from the best point.
    Returns ``(mu_hat, sigma_hat, h1_at_optimum)``.
    """
    dy = np.asarray(dy, dtype=float)
    dx = np.asarray(dx, dtype=float)
    q = dx.shape[1]
    bounds = [(float(lo), float(hi)) for lo, hi in bounds]
    if len(bounds) != q + 1:
        raise ValueError(f"need {q + 1} bounds, got {len(bounds)}")
    if not bounds[-1][0] > 0:
        raise ValueError("the lower bound on sigma must be positive")
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    x0 = np.asarray(start, dtype=float)
    if np.any(x0 < lo) or np.any(x0 > hi):
        raise ValueError(f"start {x0.tolist()} is outside the bounds")

    def objective(theta):
        return -h1(dy, dx, theta[:q], theta[q], h)

    maxiter = maxiter or 4000 * (q + 1)
    opts = {"xatol": 1e-10, "fatol": 1e-10, "maxiter": maxiter, "maxfev": 2 * maxiter}
    res = None
    for _ in range(2):
        res = optimize.minimize(objective, x0, method="Nelder-Mead", bounds=bounds, options=opts)
        x0 = np.clip(res.x, lo, hi)
    if not res.success:
        raise ConvergenceError(f"step-1 optimizer stopped: {res.message}", x0, -float(res.fun))
    return x0[:q].copy(), float(x0[q]), -float(res.fun)


# --------------------------------------------------------------------------
# Step 2
# --------------------------------------------------------------------------


def unit_residuals(times, y, x, mu, sigma: float, Tn: float) -> np.ndarray:
    """Residuals of the unit-time increments over ``[t0, t0 + floor(Tn)]``.

    Each integer time uses the grid row nearest to it.
    """
    if Tn < 1:
        raise WindowError(f"need Tn >= 1 for unit residuals, got {Tn}")
    times = np.asarray(times, dtype=float)
    k = int(math.floor(Tn + 1e-9))
    targets = times[0] + np.arange(k + 1)
    idx = np.clip(np.searchsorted(times, targets), 1, times.size - 1)
    idx = np.where(np.abs(times[idx - 1] - targets) <= np.abs(times[idx] - targets), idx - 1, idx)
    dy = np.diff(np.asarray(y, dtype=float)[idx])
    dxu = np.diff(np.asarray(x, dtype=float)[idx], axis=0)
    return (dy - dxu @ np.asarray(mu, dtype=float)) / sigma


def h2(residuals, nu: float) -> float:
    """Log-likelihood of ``residuals`` under the unit-scale Student-t law."""
    if not nu > 0:
        raise DomainError(f"nu must be positive, got {nu}")
    e = np.asarray(residuals, dtype=float)
    const = -0.5 * _LOG_PI + log_gamma((nu + 1) / 2) - log_gamma(nu / 2)
    return float(e.size * const - (nu + 1) / 2 * np.sum(np.log1p(e * e)))


def h2_score(residuals, nu: float) -> float:
    """Derivative of :func:`h2` in ``nu``."""
    if not nu > 0:
        raise DomainError(f"nu must be positive, got {nu}")
    e = np.asarray(residuals, dtype=float)
    return 0.5 * float(e.size * (digamma((nu + 1) / 2) - digamma(nu / 2)) - np.sum(np.log1p(e * e)))


def fit_step2(residuals, start: float | None = None, bounds: tuple[float, float] = NU_BOUNDS):
    """Maximise :func:`h2` over ``nu`` in ``bounds`` by a root search on the score.

    ``h2`` is strictly concave in ``nu``, so the start value does not affect
    the result.  Returns ``(nu_hat, at_bound)``.
    """
    lo, hi = float(bounds[0]), float(bounds[1])
    if not 0 < lo < hi:
        raise ValueError(f"need 0 < lower < upper for nu, got {bounds}")
    s_lo, s_hi = h2_score(residuals, lo), h2_score(residuals, hi)
    if s_lo <= 0:
        return lo, True
    if s_hi >= 0:
        return hi, True
    nu = optimize.brentq(lambda v: h2_score(residuals, v), lo, hi, xtol=1e-10, rtol=1e-14)
    return float(nu), False


# --------------------------------------------------------------------------
# Standard errors and results
# --------------------------------------------------------------------------


def _describe_null(vec, names) -> str:
    vec = vec / np.max(np.abs(vec))
    terms = [f"{c:+.3g}*{n}" for c, n in zip(vec, names) if abs(c) > 1e-6]
    return " ".join(terms) + " = 0"


def std_errors(dx, h: float, sigma: float, nu: float, Nn: int, n_units: int,
               names: Sequence[str] | None = None) -> np.ndarray:
    """Asymptotic standard errors of ``(mu, sigma, nu)``.

    ``dx`` holds the first ``Nn`` covariate increments.
    """
    g = np.asarray(dx, dtype=float)[:Nn] / h
    q = g.shape[1]
    names = list(names) if names is not None else [f"X{k + 1}" for k in range(q)]
    gram = g.T @ g / (2 * sigma * sigma * Nn)
    w, v = np.linalg.eigh(gram)
    if not w[-1] > 0 or w[0] <= 1e-12 * w[-1]:
        raise CollinearityError(
            f"covariate increments are collinear: {_describe_null(v[:, 0], names)}"
        )
    inv = np.linalg.inv(gram)
    se_mu = np.sqrt(np.diag(inv) / Nn)
    se_sigma = math.sqrt(2 * sigma * sigma / Nn)
    info_nu = 0.25 * (trigamma(nu / 2) - trigamma((nu + 1) / 2))
    se_nu = math.sqrt(1.0 / (n_units * info_nu))
    return np.concatenate((se_mu, [se_sigma, se_nu]))


@dataclass
class FitResult:
    """Estimates, standard errors and the two ``-2 log L`` values."""

    mu_hat: np.ndarray
    sigma_hat: float
    nu_hat: float
    se: np.ndarray
    h1_value: float
    h2_value: float
    window: FitWindow
    names: tuple[str, ...]
    warnings: list[str] = field(default_factory=list)

    @property
    def estimates(self) -> np.ndarray:
        return np.concatenate((self.mu_hat, [self.sigma_hat, self.nu_hat]))

    def summary(self) -> str:
        width = max(8, max(len(n) for n in self.names) + 1)
        lines = ["Quasi-Maximum likelihood estimation", "", "Coefficients:",
                 f"{'':<{width}}{'Estimate':>10} {'Std. Error':>12}"]
        for name, est, se in zip(self.names, self.estimates, self.se):
            lines.append(f"{name:<{width}}{est:>10.7g} {se:>12.7g}")
        lines.append("")
        lines.append(f"-2 log L: {self.h1_value:.7g} {self.h2_value:.7g}")
        for w in self.warnings:
            lines.append(f"warning: {w}")
        return "\n".join(lines)

    def to_csv(self, path, alpha: float = 0.05) -> None:
        """Write ``parameter,estimate,std_error,lower,upper`` rows."""
        ci = confidence_interval(self, alpha)
        with open(os.fspath(path), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["parameter", "estimate", "std_error", "lower", "upper"])
            for name, est, se in zip(self.names, self.estimates, self.se):
                lo, hi = ci[name]
                w.writerow([name, *(f"{v:.17g}" for v in (est, se, lo, hi))])


def confidence_interval(result: FitResult, alpha: float = 0.05) -> dict[str, tuple[float, float]]:
    """Two-sided ``1 - alpha`` normal intervals, ``estimate +- z_{1-alpha/2} SE``."""
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    z = float(stats.norm.ppf(1 - alpha / 2))
    return {
        name: (float(est - z * se), float(est + z * se))
        for name, est, se in zip(result.names, result.estimates, result.se)
    }


def _check_columns(data: PathSet, model: RegressionModel):
    expected = [*model.regressors, model.response_name]
    missing = [c for c in expected if c not in data.columns]
    if missing:
        raise DataError(
            f"data columns do not match the model: expected {expected}, found {data.names} "
            f"(missing {missing})"
        )


def fit(
    data: PathSet,
    model: RegressionModel,
    Bn: float,
    start: Mapping[str, float] | None = None,
    lower: Mapping[str, float] | None = None,
    upper: Mapping[str, float] | None = None,
) -> FitResult:
    """Run both estimation steps and the standard errors on ``data``.

    ``start``, ``lower`` and ``upper`` map parameter names to values; missing
    entries default to 0 (coefficients), 1 (scale) and the default boxes
    ``sigma`` in [1e-3, 1e3], ``nu`` in [0.1, 50].
    """
    _check_columns(data, model)
    start, lower, upper = dict(start or {}), dict(lower or {}), dict(upper or {})
    times = data.times
    h = data.h
    Tn = float(times[-1] - times[0])
    if Bn > Tn * (1 + 1e-12):
        raise WindowError(f"step-1 horizon PT={Bn} exceeds the data span {Tn}")
    window = FitWindow(h, float(Bn), Tn)
    q = len(model.regressors)
    Nn = window.Nn
    if Nn < q + 2:
        raise WindowError(f"only {Nn} increments in [0, {Bn}]; need at least {q + 2}")
    if Nn > times.size - 1:
        raise WindowError(f"window needs {Nn} increments, data has {times.size - 1}")

    x = data.matrix(model.regressors)
    y = data[model.response_name]
    dx = np.diff(x, axis=0)[:Nn]
    dy = np.diff(y)[:Nn]

    defaults = {model.scale_name: SIGMA_BOUNDS, model.df_name: NU_BOUNDS}
    names1 = [*model.coeff_names, model.scale_name]
    bounds1 = _bounds_for(names1, lower, upper, defaults)
    x0 = [float(start.get(c, 0.0)) for c in model.coeff_names] + [float(start.get(model.scale_name, 1.0))]
    x0 = np.clip(x0, [b[0] for b in bounds1], [b[1] for b in bounds1])
    mu_hat, sigma_hat, h1_best = fit_step1(dy, dx, h, x0, bounds1)

    res = unit_residuals(times, y, x, mu_hat, sigma_hat, Tn)
    nu_bounds = _bounds_for([model.df_name], lower, upper, defaults)[0]
    nu_hat, at_bound = fit_step2(res, start.get(model.df_name), nu_bounds)
    notes = []
    if at_bound:
        msg = f"{model.df_name} estimate {nu_hat:g} sits on the search bound {nu_bounds}"
        warnings.warn(msg, BoundaryWarning, stacklevel=2)
        notes.append(msg)
    se = std_errors(dx, h, sigma_hat, nu_hat, Nn, window.n_units, list(model.regressors))
    return FitResult(
        mu_hat=mu_hat,
        sigma_hat=sigma_hat,
        nu_hat=nu_hat,
        se=se,
        h1_value=-2.0 * h1_best,
        h2_value=-2.0 * h2(res, nu_hat),
        window=window,
        names=tuple(model.param_names),
        warnings=notes,
    )
