"""
Special functions and the Gauss-Laguerre rule used by the inversion engines.

The gamma-family functions delegate to :mod:`scipy.special` behind explicit
domain checks.  The modified Bessel function of the second kind is computed
with Temme's series (small argument) and Steed's continued fraction (large
argument), followed by forward recurrence in the order; both branches are
vectorised over the argument.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special as _sp

__all__ = [
    "DomainError",
    "QuadratureRule",
    "bessel_k",
    "bessel_k_scaled",
    "digamma",
    "gauss_laguerre",
    "log_gamma",
    "trigamma",
]

MAX_LAGUERRE_ORDER = 180

_EPS = 1e-16
_MAXIT = 100000

# Taylor coefficients of 1/Gamma(z) about 0 (Abramowitz & Stegun 6.1.34),
# c[k] multiplies z**(k+1).
_RGAMMA_COEFFS = (
    1.0000000000000000,
    0.5772156649015329,
    -0.6558780715202538,
    -0.0420026350340952,
    0.1665386113822915,
    -0.0421977345555443,
    -0.0096219715278770,
    0.0072189432466630,
    -0.0011651675918591,
    -0.0002152416741149,
    0.0001280502823882,
    -0.0000201348547807,
    -0.0000012504934821,
    0.0000011330272320,
    -0.0000002056338417,
    0.0000000061160950,
    0.0000000050020075,
    -0.0000000011812746,
    0.0000000001043427,
    0.0000000000077823,
    -0.0000000000036968,
    0.0000000000005100,
    -0.0000000000000206,
    -0.0000000000000054,
    0.0000000000000014,
    0.0000000000000001,
)


class DomainError(ValueError):
    """Argument outside the domain of a special function."""


def _check_positive(x, name: str):
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError(f"{name} requires a positive argument, got {x!r}")
    return arr


def _unwrap(out, like):
    return float(out) if np.ndim(like) == 0 else out


def log_gamma(x):
    """Natural log of the gamma function for x > 0."""
    arr = _check_positive(x, "log_gamma")
    return _unwrap(_sp.gammaln(arr), x)


def digamma(x):
    """Logarithmic derivative of the gamma function for x > 0."""
    arr = _check_positive(x, "digamma")
    return _unwrap(_sp.psi(arr), x)


def trigamma(x):
    """Derivative of :func:`digamma` for x > 0."""
    arr = _check_positive(x, "trigamma")
    return _unwrap(_sp.polygamma(1, arr), x)


# --------------------------------------------------------------------------
# Bessel K
# --------------------------------------------------------------------------


def _temme_gammas(mu: float):
    """Return (gam1, gam2, 1/Gamma(1+mu), 1/Gamma(1-mu)) for |mu| <= 1/2."""
    odd = _RGAMMA_COEFFS[1::2]   # coefficients of mu**1, mu**3, ... in 1/Gamma(1+mu)
    even = _RGAMMA_COEFFS[0::2]  # coefficients of mu**0, mu**2, ...
    mu2 = mu * mu
    gam1 = -sum(c * mu2**k for k, c in enumerate(odd))
    gam2 = sum(c * mu2**k for k, c in enumerate(even))
    return gam1, gam2, gam2 - mu * gam1, gam2 + mu * gam1


def _k_pair_series(mu: float, x: np.ndarray):
    """K_mu(x) and K_{mu+1}(x) by Temme's series, valid for 0 < x <= 2."""
    gam1, gam2, gampl, gammi = _temme_gammas(mu)
    x2 = 0.5 * x
    pimu = math.pi * mu
    fact = 1.0 if abs(pimu) < _EPS else pimu / math.sin(pimu)
    d = -np.log(x2)
    e = mu * d
    small = np.abs(e) < 1e-8
    safe_e = np.where(small, 1.0, e)
    fact2 = np.where(small, 1.0 + e * e / 6.0, np.sinh(safe_e) / safe_e)
    ff = fact * (gam1 * np.cosh(e) + gam2 * fact2 * d)
    total = ff.copy()
    ee = np.exp(e)
    p = 0.5 * ee / gampl
    q = 0.5 / (ee * gammi)
    c = np.ones_like(x)
    d = x2 * x2
    total1 = p.copy()
    for i in range(1, _MAXIT):
        ff = (i * ff + p + q) / (i * i - mu * mu)
        c = c * d / i
        p = p / (i - mu)
        q = q / (i + mu)
        delta = c * ff
        total += delta
        total1 += c * (p - i * ff)
        if np.all(np.abs(delta) < np.abs(total) * _EPS):
            break
    return total, total1 * (2.0 / x)


def _k_pair_cf_scaled(mu: float, x: np.ndarray):
    """exp(x) K_mu(x) and exp(x) K_{mu+1}(x) by Steed's method, for x > 2."""
    b = 2.0 * (1.0 + x)
    d = 1.0 / b
    h = d.copy()
    delh = d.copy()
    q1 = np.zeros_like(x)
    q2 = np.ones_like(x)
    a1 = 0.25 - mu * mu
    q = np.full_like(x, a1)
    c = np.full_like(x, a1)
    a = -a1
    s = 1.0 + q * delh
    for i in range(2, _MAXIT):
        a -= 2 * (i - 1)
        c = -a * c / i
        qnew = (q1 - b * q2) / a
        q1, q2 = q2, qnew
        q = q + c * qnew
        b = b + 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h = h + delh
        dels = q * delh
        s = s + dels
        if np.all(np.abs(dels) < np.abs(s) * _EPS):
            break
    h = a1 * h
    kmu = np.sqrt(math.pi / (2.0 * x)) / s
    return kmu, kmu * (mu + x + 0.5 - h) / x


def bessel_k_scaled(order: float, t):
    """Exponentially scaled Bessel function ``exp(t) * K_order(t)``.

    The scaled form stays representable far beyond the underflow point of
    ``K`` itself, which the characteristic function needs at large
    frequencies.
    """
    x = _check_positive(t, "bessel_k")
    order = abs(float(order))
    nl = int(order + 0.5)
    mu = order - nl
    flat = np.atleast_1d(x).astype(float).ravel()
    kmu = np.empty_like(flat)
    k1 = np.empty_like(flat)
    with np.errstate(over="ignore", invalid="ignore"):
        lo = flat <= 2.0
        if np.any(lo):
            a, b = _k_pair_series(mu, flat[lo])
            scale = np.exp(flat[lo])
            kmu[lo] = a * scale
            k1[lo] = b * scale
        hi = ~lo
        if np.any(hi):
            kmu[hi], k1[hi] = _k_pair_cf_scaled(mu, flat[hi])
        two_over_x = 2.0 / flat
        for i in range(1, nl + 1):
            kmu, k1 = k1, (mu + i) * two_over_x * k1 + kmu
    out = kmu.reshape(np.shape(x))
    return _unwrap(out, t)


def bessel_k(order: float, t):
    """Modified Bessel function of the second kind, ``K_order(t)`` for t > 0.

    Underflows to 0 for large ``t`` and overflows to ``inf`` when the true
    value exceeds the double range (large order, tiny argument).
    """
    x = _check_positive(t, "bessel_k")
    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        out = np.asarray(bessel_k_scaled(order, x)) * np.exp(-x)
    return _unwrap(out, t)


# --------------------------------------------------------------------------
# Gauss-Laguerre
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Laguerre rule for integrals of the form ``int_0^inf f(x) exp(-x) dx``.

    ``scaled_weights`` holds ``weights * exp(nodes)``; it stays finite where
    the plain weights underflow and is what integrands without the
    exponential factor should be summed against.
    """

    order: int
    nodes: np.ndarray
    weights: np.ndarray
    scaled_weights: np.ndarray

    def integrate(self, f) -> float:
        """Approximate ``int_0^inf f(x) exp(-x) dx``."""
        return float(np.dot(self.weights, f(self.nodes)))


def _laguerre_scaled(n: int, x):
    """Return (L_n(x), L_{n-1}(x)) times exp(-x/2) by the three-term recurrence.

    Works in the precision of ``x``; root polishing passes ``np.longdouble``.
    """
    s = np.exp(-0.5 * x)
    p_prev, p = s, (1 - x) * s
    for k in range(2, n + 1):
        p_prev, p = p, ((2 * k - 1 - x) * p - (k - 1) * p_prev) / k
    return p, p_prev


@lru_cache(maxsize=None)
def _gauss_laguerre(n: int) -> QuadratureRule:
    roots = np.empty(n, dtype=np.longdouble)
    z = np.longdouble(0)
    for i in range(n):
        if i == 0:
            z = np.longdouble(3.0 / (1.0 + 2.4 * n))
        elif i == 1:
            z += 15.0 / (1.0 + 2.5 * n)
        else:
            ai = i - 1
            z += (1.0 + 2.55 * ai) / (1.9 * ai) * (z - roots[i - 2])
        for _ in range(200):
            p, p_prev = _laguerre_scaled(n, z)
            step = p / (n * (p - p_prev) / z)
            z -= step
            if abs(step) <= 1e-15 * z:
                break
        else:
            raise ArithmeticError(f"Laguerre root {i} of order {n} did not converge")
        p, p_prev = _laguerre_scaled(n, z)
        z -= p / (n * (p - p_prev) / z)
        roots[i] = z
    if np.any(np.diff(roots) <= 0):
        raise ArithmeticError(f"Laguerre roots of order {n} are not strictly increasing")
    next_vals = np.array([_laguerre_scaled(n + 1, k)[0] for k in roots], dtype=np.longdouble)
    scaled = roots / ((n + 1) ** 2 * next_vals**2)
    with np.errstate(under="ignore"):
        weights = (scaled * np.exp(-roots)).astype(float)
    nodes = roots.astype(float)
    scaled = scaled.astype(float)
    for arr in (nodes, weights, scaled):
        arr.setflags(write=False)
    return QuadratureRule(order=n, nodes=nodes, weights=weights, scaled_weights=scaled)


def gauss_laguerre(n: int) -> QuadratureRule:
    """Nodes and weights of the ``n``-point Gauss-Laguerre rule, 1 <= n <= 180.

    Nodes are the roots of the Laguerre polynomial ``L_n`` found by Newton
    iteration; the weights are ``k / ((n+1)^2 L_{n+1}(k)^2)``.
    """
    if isinstance(n, bool) or int(n) != n or not 1 <= n <= MAX_LAGUERRE_ORDER:
        raise ValueError(f"Laguerre order must be an integer in [1, {MAX_LAGUERRE_ORDER}], got {n!r}")
    return _gauss_laguerre(int(n))
