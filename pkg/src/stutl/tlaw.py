"""
Law of the Student-t Levy increment ``J_h`` by characteristic-function inversion.

The tabulated process has the *standard* Student-t law at unit time, i.e.
``J_1 ~ t_nu`` with density proportional to ``(1 + x^2/nu)^(-(nu+1)/2)``.
Its characteristic function is ``cf_unit(nu, sqrt(nu) u)``, where
:func:`cf_unit` is the Bessel-K form of the characteristic function of the
unit-scale law with density proportional to ``(1 + x^2)^(-(nu+1)/2)``.  The
regression model converts between the two by the factor ``1/sqrt(nu)``.

Three engines invert ``phi(u)^h``:

* ``LAG``: Gauss-Laguerre quadrature of the cosine inversion integral.
* ``COS``: truncated Fourier-cosine series on ``[-L, L]``.
* ``FFT``: left Riemann sum of the Fourier integral evaluated by an FFT.

:func:`build_law` turns any of them into density/CDF tables on an equally
spaced grid; the CDF table drives :meth:`IncrementLaw.quantile` and the
inversion sampler.
"""

from __future__ import annotations

import csv
import math
import os
import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from stutl.specfun import DomainError, QuadratureRule, bessel_k_scaled, gauss_laguerre, log_gamma

__all__ = [
    "FFTResidualWarning",
    "IncrementLaw",
    "InversionConfig",
    "InversionDivergedError",
    "Method",
    "build_law",
    "cdf",
    "cf_student",
    "cf_unit",
    "density_cos",
    "density_fft",
    "density_laguerre",
    "quantile",
    "sample",
]

_CHUNK = 2048


class Method(str, Enum):
    LAG = "LAG"
    COS = "COS"
    FFT = "FFT"

    @classmethod
    def parse(cls, value) -> "Method":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).upper())
        except ValueError:
            names = ", ".join(m.value for m in cls)
            raise ValueError(f"unknown inversion method {value!r}; valid methods are {names}") from None


class InversionDivergedError(ArithmeticError):
    """The tabulated CDF does not end near 1, so the inversion is unusable."""


class FFTResidualWarning(RuntimeWarning):
    """The FFT density carries a non-negligible imaginary part."""


@dataclass(frozen=True)
class InversionConfig:
    """Method selector and accuracy controls for the inversion.

    ``n_terms`` is the number of quadrature nodes (LAG), cosine terms (COS)
    or FFT points (FFT, rounded up to a power of two).  ``n_grid`` is the
    number of intervals of the x-grid on which tables are stored.
    """

    method: Method = Method.LAG
    up: float = 7.0
    low: float = -7.0
    n_terms: int = 180
    n_grid: int = 1000

    def __post_init__(self):
        object.__setattr__(self, "method", Method.parse(self.method))
        object.__setattr__(self, "up", float(self.up))
        object.__setattr__(self, "low", float(self.low))
        if not self.low < self.up:
            raise ValueError(f"need low < up, got low={self.low}, up={self.up}")
        if int(self.n_terms) != self.n_terms or self.n_terms < 1:
            raise ValueError(f"n_terms must be a positive integer, got {self.n_terms!r}")
        if int(self.n_grid) != self.n_grid or self.n_grid < 2:
            raise ValueError(f"n_grid must be an integer >= 2, got {self.n_grid!r}")
        object.__setattr__(self, "n_terms", int(self.n_terms))
        object.__setattr__(self, "n_grid", int(self.n_grid))
        if self.method is Method.LAG and self.n_terms > 180:
            raise ValueError(f"LAG supports at most 180 nodes, got {self.n_terms}")

    @property
    def half_width(self) -> float:
        """Half-width ``L = max(|low|, up)`` of the cosine-series domain."""
        return max(abs(self.low), self.up)

    @property
    def fft_size(self) -> int:
        return 1 << max(1, math.ceil(math.log2(self.n_terms)))


# --------------------------------------------------------------------------
# Characteristic functions
# --------------------------------------------------------------------------


def _log_cf_unit(nu: float, u) -> np.ndarray:
    u = np.abs(np.atleast_1d(np.asarray(u, dtype=float)))
    out = np.zeros_like(u)
    pos = u > 0
    if np.any(pos):
        up = u[pos]
        log_c = (1.0 - nu / 2.0) * math.log(2.0) - log_gamma(nu / 2.0)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            val = log_c + 0.5 * nu * np.log(up) + np.log(bessel_k_scaled(nu / 2.0, up)) - up
        # non-finite only when K overflows, i.e. u -> 0 where phi -> 1
        out[pos] = np.where(np.isfinite(val), np.minimum(val, 0.0), 0.0)
    return out


def cf_unit(nu: float, u):
    """Characteristic function ``2^(1-nu/2)/Gamma(nu/2) |u|^(nu/2) K_{nu/2}(|u|)``.

    This is the law with density ``Gamma((nu+1)/2)/(sqrt(pi) Gamma(nu/2)) (1+x^2)^(-(nu+1)/2)``.
    """
    if not nu > 0:
        raise DomainError(f"degrees of freedom must be positive, got {nu!r}")
    out = np.exp(_log_cf_unit(nu, u))
    return float(out[0]) if np.ndim(u) == 0 else out.reshape(np.shape(u))


def cf_student(nu: float, u):
    """Characteristic function of the standard Student-t law with ``nu`` degrees of freedom."""
    return cf_unit(nu, math.sqrt(nu) * np.asarray(u, dtype=float))


def _cf_power(nu: float, h: float, u) -> np.ndarray:
    """``cf_student(nu, u) ** h`` computed in log space."""
    return np.exp(h * _log_cf_unit(nu, math.sqrt(nu) * np.asarray(u, dtype=float)))


def _check_params(nu: float, h: float):
    if not nu > 0:
        raise DomainError(f"degrees of freedom must be positive, got {nu!r}")
    if not h > 0:
        raise DomainError(f"step length must be positive, got {h!r}")


# --------------------------------------------------------------------------
# Density engines
# --------------------------------------------------------------------------


def density_laguerre(nu: float, h: float, x, rule: QuadratureRule):
    """Density of ``J_h`` at ``x`` by Gauss-Laguerre quadrature.

    Evaluates ``(1/pi) sum_j cos(k_j y) phi(k_j)^h exp(k_j) w_j`` for the
    unit-scale law at ``y = x/sqrt(nu)`` and rescales by ``1/sqrt(nu)``.
    Truncation can leave small negative values.
    """
    _check_params(nu, h)
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    root_nu = math.sqrt(nu)
    terms = np.exp(h * _log_cf_unit(nu, rule.nodes)) * rule.scaled_weights
    out = np.empty_like(xs)
    for i in range(0, xs.size, _CHUNK):
        block = xs[i:i + _CHUNK] / root_nu
        out[i:i + _CHUNK] = np.cos(np.outer(block, rule.nodes)) @ terms
    out /= math.pi * root_nu
    return float(out[0]) if np.ndim(x) == 0 else out.reshape(np.shape(x))


def density_cos(nu: float, h: float, x, config: InversionConfig):
    """Density of ``J_h`` at ``x`` from the Fourier-cosine series on ``[-L, L]``.

    ``f(x) = 1/(2L) + (1/L) sum_{k=1}^{N} phi(k pi/L)^h cos(k pi x/L)``.
    """
    _check_params(nu, h)
    L = config.half_width
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(np.abs(xs) > L):
        raise DomainError(f"COS density is defined on [-{L}, {L}], got x outside it")
    freq = np.arange(1, config.n_terms + 1) * (math.pi / L)
    coef = _cf_power(nu, h, freq) / L
    out = np.empty_like(xs)
    for i in range(0, xs.size, _CHUNK):
        out[i:i + _CHUNK] = np.cos(np.outer(xs[i:i + _CHUNK], freq)) @ coef
    out += 0.5 / L
    return float(out[0]) if np.ndim(x) == 0 else out.reshape(np.shape(x))


def _fft_density(nu: float, h: float, config: InversionConfig):
    n = config.fft_size
    a, b = config.low, config.up
    dw = 1.0 / (b - a)
    idx = np.arange(n)
    x = a + idx * (b - a) / n
    omega = (idx - n / 2) * dw
    samples = _cf_power(nu, h, 2.0 * math.pi * omega) * np.exp(-2j * math.pi * idx * dw * a)
    f = dw * np.exp(1j * math.pi * n * dw * x) * np.fft.fft(samples)
    peak = np.max(np.abs(f.real))
    residual = float(np.max(np.abs(f.imag)) / peak) if peak > 0 else 0.0
    return x, f.real, residual


def density_fft(nu: float, h: float, config: InversionConfig):
    """Densities on the FFT grid ``x_j = low + j (up-low)/N``, ``j = 0..N-1``.

    Returns ``(x, f)``.  Emits :class:`FFTResidualWarning` when the imaginary
    part exceeds ``1e-6`` of the largest density value.
    """
    _check_params(nu, h)
    x, f, residual = _fft_density(nu, h, config)
    if residual > 1e-6:
        warnings.warn(
            f"FFT density imaginary residual {residual:.2e} (relative) at nu={nu}, h={h}",
            FFTResidualWarning,
            stacklevel=2,
        )
    return x, f


# --------------------------------------------------------------------------
# Tables
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class IncrementLaw:
    """Density and CDF tables of ``J_h`` plus the inversion sampler.

    ``raw_mass`` is the left-Riemann total before renormalisation and
    ``negative_fraction`` the share of grid points where the engine returned
    a negative density (before clipping).
    """

    nu: float
    h: float
    config: InversionConfig
    x_grid: np.ndarray = field(repr=False)
    density_values: np.ndarray = field(repr=False)
    cdf_values: np.ndarray = field(repr=False)
    raw_mass: float = 1.0
    negative_fraction: float = 0.0

    @property
    def dx(self) -> float:
        return (self.config.up - self.config.low) / self.config.n_grid

    def density(self, x):
        """Linear interpolation of the density table (0 outside the grid)."""
        return np.interp(x, self.x_grid, self.density_values, left=0.0, right=0.0)

    def cdf(self, x):
        """Linear interpolation of the CDF table, 0 below ``low`` and 1 above ``up``."""
        out = np.interp(x, self.x_grid, self.cdf_values, left=0.0, right=1.0)
        return float(out) if np.ndim(x) == 0 else out

    def _quantile(self, p: np.ndarray) -> np.ndarray:
        F = self.cdf_values
        j = np.searchsorted(F, p, side="left")
        j = np.clip(j, 1, F.size - 1)
        lo_F, hi_F = F[j - 1], F[j]
        width = hi_F - lo_F
        frac = np.divide(p - lo_F, width, out=np.zeros_like(p), where=width > 0)
        out = self.x_grid[j - 1] + np.clip(frac, 0.0, 1.0) * self.dx
        out = np.where(p <= F[0], self.config.low, out)
        return np.where(p >= F[-1], self.config.up, out)

    def quantile(self, p):
        """Piecewise-linear inverse of :meth:`cdf` for ``p`` in (0, 1)."""
        arr = np.asarray(p, dtype=float)
        if np.any(~((arr > 0) & (arr < 1))):
            raise DomainError(f"quantile requires 0 < p < 1, got {p!r}")
        out = self._quantile(np.atleast_1d(arr))
        return float(out[0]) if np.ndim(p) == 0 else out.reshape(arr.shape)

    def sample(self, count: int, seed: int) -> np.ndarray:
        """Draw ``count`` increments by inversion of seeded PCG64 uniforms."""
        rng = np.random.default_rng(seed)
        return self._quantile(rng.random(int(count)))

    def to_csv(self, path) -> None:
        """Write the tables with header ``x,density,cdf``."""
        write_table_csv(path, self.x_grid, self.density_values, self.cdf_values)


cdf = IncrementLaw.cdf
quantile = IncrementLaw.quantile
sample = IncrementLaw.sample


def write_table_csv(path, x, density, cdf_values) -> None:
    with open(os.fspath(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "density", "cdf"])
        for row in zip(x, density, cdf_values):
            w.writerow([f"{v:.17g}" for v in row])


def raw_density(nu: float, h: float, config: InversionConfig) -> tuple[np.ndarray, np.ndarray]:
    """Unclipped density of the selected engine on the table grid."""
    _check_params(nu, h)
    x = np.linspace(config.low, config.up, config.n_grid + 1)
    if config.method is Method.LAG:
        f = density_laguerre(nu, h, x, gauss_laguerre(config.n_terms))
    elif config.method is Method.COS:
        f = density_cos(nu, h, x, config)
    else:
        fx, ff = density_fft(nu, h, config)
        # the FFT density is periodic on [low, up)
        f = np.interp(x, np.append(fx, config.up), np.append(ff, ff[0]))
    return x, f


def build_law(nu: float, h: float, config: InversionConfig | None = None) -> IncrementLaw:
    """Tabulate the law of ``J_h`` with the configured inversion engine.

    The density is clipped at zero, integrated by a left Riemann sum and the
    CDF rescaled to end at exactly 1.  A raw final CDF outside [0.9, 1.1]
    raises :class:`InversionDivergedError`.
    """
    config = config or InversionConfig()
    x, f = raw_density(nu, h, config)
    negative_fraction = float(np.mean(f < 0))
    f = np.clip(f, 0.0, None)
    dx = (config.up - config.low) / config.n_grid
    F = np.concatenate(([0.0], np.cumsum(f[:-1]) * dx))
    raw_mass = float(F[-1])
    if not 0.9 <= raw_mass <= 1.1:
        raise InversionDivergedError(
            f"inversion diverged: method={config.method.value}, nu={nu}, h={h}, "
            f"N={config.n_terms}, [{config.low}, {config.up}] gives total mass {raw_mass:.4g}"
        )
    F /= raw_mass
    for arr in (x, f, F):
        arr.setflags(write=False)
    return IncrementLaw(
        nu=float(nu),
        h=float(h),
        config=config,
        x_grid=x,
        density_values=f,
        cdf_values=F,
        raw_mass=raw_mass,
        negative_fraction=negative_fraction,
    )
