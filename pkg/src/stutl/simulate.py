"""Path simulation: Euler scheme for the covariates, inversion sampling for the response."""

from __future__ import annotations

import csv
import hashlib
import math
import os
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from stutl.expr import EvalError, Num, compile_expr
from stutl.model import CovariateSystem, NoiseKind, NoiseSpec, RegressionModel
from stutl.tlaw import IncrementLaw, InversionConfig, build_law

__all__ = [
    "DataError",
    "PathSet",
    "SamplingGrid",
    "SimulationError",
    "nig_increments",
    "sample_nig_increment",
    "simulate",
    "simulate_covariates",
    "simulate_response",
    "substream_seed",
]

COVARIATE_STREAM = "covariate-noise"
LEVY_STREAM = "t-levy"
SPACING_RTOL = 1e-9


class SimulationError(ArithmeticError):
    """Drift or diffusion evaluation failed during the Euler scheme."""

    def __init__(self, message: str, step: int, time: float, state: Mapping[str, float]):
        super().__init__(f"{message} (step {step}, t={time!r}, state={dict(state)})")
        self.step = step
        self.time = time
        self.state = dict(state)


class DataError(ValueError):
    """Malformed path or data file."""


@dataclass(frozen=True)
class SamplingGrid:
    """Equispaced grid ``t_j = initial + j h`` for ``j = 0..n_steps``."""

    initial: float
    terminal: float
    n_steps: int

    def __post_init__(self):
        if not self.terminal > self.initial:
            raise ValueError(f"terminal ({self.terminal}) must exceed initial ({self.initial})")
        if isinstance(self.n_steps, bool) or int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError(f"n_steps must be a positive integer, got {self.n_steps!r}")
        object.__setattr__(self, "n_steps", int(self.n_steps))

    @property
    def h(self) -> float:
        return (self.terminal - self.initial) / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(self.initial, self.terminal, self.n_steps + 1)


@dataclass
class PathSet:
    """Sampled paths on a common time grid, columns kept in insertion order."""

    times: np.ndarray
    columns: dict[str, np.ndarray]

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        for name, col in self.columns.items():
            col = np.asarray(col, dtype=float)
            if col.shape != self.times.shape:
                raise DataError(f"column {name!r} has {col.size} rows, expected {self.times.size}")
            self.columns[name] = col

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self.columns[name]
        except KeyError:
            raise DataError(f"no column {name!r}; available: {list(self.columns)}") from None

    @property
    def names(self) -> list[str]:
        return list(self.columns)

    @property
    def h(self) -> float:
        return float(self.times[1] - self.times[0])

    def matrix(self, names: Sequence[str]) -> np.ndarray:
        """Columns ``names`` stacked into an array of shape (rows, len(names))."""
        return np.column_stack([self[n] for n in names])

    def to_csv(self, path) -> None:
        with open(os.fspath(path), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time", *self.columns])
            cols = [self.times, *self.columns.values()]
            for row in zip(*cols):
                w.writerow([f"{v:.17g}" for v in row])

    @classmethod
    def from_csv(cls, path) -> "PathSet":
        """Read a CSV whose first column is ``time`` on an equispaced grid."""
        path = os.fspath(path)
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        rows = [r for r in rows if r]
        if not rows:
            raise DataError(f"{path}: empty file")
        header = [c.strip() for c in rows[0]]
        if not header or header[0] != "time":
            raise DataError(f"{path}: first column must be 'time', got {header[:1]}")
        if len(set(header)) != len(header):
            raise DataError(f"{path}: duplicate column names in header {header}")
        try:
            data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float)
        except ValueError as exc:
            raise DataError(f"{path}: non-numeric value ({exc})") from None
        if data.ndim != 2 or data.shape[0] < 2 or data.shape[1] != len(header):
            raise DataError(f"{path}: need at least two rows of {len(header)} values")
        times = data[:, 0]
        steps = np.diff(times)
        h = (times[-1] - times[0]) / (times.size - 1)
        if not h > 0 or np.max(np.abs(steps - h)) > SPACING_RTOL * h:
            raise DataError(
                f"{path}: time column is not equally spaced (relative tolerance {SPACING_RTOL:g}); "
                "resample the data onto a regular grid first"
            )
        return cls(times, {name: data[:, k] for k, name in enumerate(header[1:], start=1)})


def substream_seed(seed: int, label: str) -> int:
    """Deterministic 64-bit seed for the named random stream of a master seed."""
    digest = hashlib.blake2b(f"{int(seed)}:{label}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def _inverse_gaussian(mean: float, shape: float, size: int, rng: np.random.Generator) -> np.ndarray:
    # Michael, Schucany & Haas transformation method
    y = rng.standard_normal(size) ** 2
    my = mean * y
    x = mean + mean * my / (2 * shape) - mean / (2 * shape) * np.sqrt(4 * shape * my + my * my)
    u = rng.random(size)
    return np.where(u <= mean / (mean + x), x, mean * mean / x)


def nig_increments(spec: NoiseSpec, dt: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """``size`` independent NIG(alpha, beta, delta dt, mu dt) increments.

    Uses the normal variance-mean mixture ``mu dt + beta Z + sqrt(Z) N``
    with ``Z`` inverse Gaussian of mean ``delta dt / gamma`` and shape
    ``(delta dt)^2``.
    """
    if spec.kind is not NoiseKind.NIG:
        raise ValueError(f"noise kind is {spec.kind.value!r}, not 'nig'")
    d = spec.delta * dt
    z = _inverse_gaussian(d / spec.gamma, d * d, size, rng)
    return spec.mu * dt + spec.beta * z + np.sqrt(z) * rng.standard_normal(size)


def sample_nig_increment(spec: NoiseSpec, dt: float, rng: np.random.Generator) -> float:
    """One NIG increment over a step of length ``dt``."""
    return float(nig_increments(spec, dt, 1, rng)[0])


def _noise_increments(noise: NoiseSpec, dt: float, n: int, rng) -> np.ndarray | None:
    if noise.kind is NoiseKind.NONE:
        return None
    if noise.kind is NoiseKind.WIENER:
        return math.sqrt(dt) * rng.standard_normal(n)
    return nig_increments(noise, dt, n, rng)


def _compile(exprs, names):
    out = []
    for e in exprs:
        if isinstance(e, Num):
            out.append(e.value)
        else:
            out.append(compile_expr(e, names))
    return out


def simulate_covariates(system: CovariateSystem, grid: SamplingGrid, seed: int = 0) -> PathSet:
    """Euler scheme for the covariate SDE on ``grid``.

    With no driving noise the diffusion terms are ignored and the scheme is
    deterministic.  Noise draws come from the ``covariate-noise`` substream
    of ``seed``.
    """
    names = ("t", *system.state_names)
    drift = _compile(system.drift, names)
    noisy = system.noise.kind is not NoiseKind.NONE
    diffusion = _compile(system.diffusion, names) if noisy else []
    h = grid.h
    times = grid.times
    n = grid.n_steps
    rng = np.random.default_rng(substream_seed(seed, COVARIATE_STREAM))
    dz = _noise_increments(system.noise, h, n, rng)
    q = system.dim
    out = np.empty((n + 1, q))
    x = list(system.x_init)
    out[0] = x
    for j in range(n):
        args = (times[j], *x)
        try:
            a = [f if isinstance(f, float) else f(*args) for f in drift]
            if noisy:
                b = [g if isinstance(g, float) else g(*args) for g in diffusion]
                x = [x[k] + a[k] * h + b[k] * dz[j] for k in range(q)]
            else:
                x = [x[k] + a[k] * h for k in range(q)]
        except EvalError as exc:
            raise SimulationError(str(exc), j, float(times[j]), dict(zip(system.state_names, x))) from exc
        if not all(math.isfinite(v) for v in x):
            raise SimulationError(
                "state became non-finite", j + 1, float(times[j + 1]), dict(zip(system.state_names, x))
            )
        out[j + 1] = x
    return PathSet(times, {name: out[:, k] for k, name in enumerate(system.state_names)})


def levy_path(law: IncrementLaw, n_steps: int, seed: int) -> np.ndarray:
    """``J`` at the grid points (``J_0 = 0``) from the ``t-levy`` substream of ``seed``."""
    inc = law.sample(n_steps, substream_seed(seed, LEVY_STREAM))
    return np.concatenate(([0.0], np.cumsum(inc)))


def simulate_response(
    model: RegressionModel,
    covariates: PathSet,
    mu: Sequence[float],
    sigma: float,
    nu: float,
    law_config: InversionConfig | None = None,
    seed: int = 0,
    law: IncrementLaw | None = None,
) -> PathSet:
    """Add the response column ``Y = X . mu + sigma J`` to ``covariates``.

    ``J`` is the unit-scale Student-t Levy process, whose time-1 law has
    density proportional to ``(1 + x^2)^(-(nu+1)/2)``; it is obtained from
    the tabulated standard-t law as ``J_std / sqrt(nu)``.  A prebuilt
    ``law`` for the grid step can be passed to skip the inversion.
    """
    mu = np.asarray(mu, dtype=float)
    if mu.shape != (len(model.regressors),):
        raise ValueError(f"expected {len(model.regressors)} coefficients, got {mu.size}")
    n_steps = covariates.times.size - 1
    h = covariates.h
    if law is None:
        law = build_law(nu, h, law_config)
    elif abs(law.h - h) > SPACING_RTOL * h or law.nu != nu:
        raise ValueError(f"law was built for nu={law.nu}, h={law.h}; path needs nu={nu}, h={h}")
    X = covariates.matrix(model.regressors)
    y = X @ mu
    if sigma != 0:
        y = y + sigma / math.sqrt(nu) * levy_path(law, n_steps, seed)
    columns = dict(covariates.columns)
    columns[model.response_name] = y
    return PathSet(covariates.times.copy(), columns)


def simulate(
    model: RegressionModel,
    grid: SamplingGrid,
    params: Mapping[str, float],
    law_config: InversionConfig | None = None,
    seed: int = 0,
    law: IncrementLaw | None = None,
) -> PathSet:
    """Simulate covariates and response; ``params`` maps coefficient, scale and df names to values."""
    missing = [p for p in model.param_names if p not in params]
    if missing:
        raise ValueError(f"missing true parameter(s) {missing}")
    paths = simulate_covariates(model.covariates, grid, seed)
    mu = [params[c] for c in model.coeff_names]
    return simulate_response(
        model, paths, mu, params[model.scale_name], params[model.df_name], law_config, seed, law
    )
