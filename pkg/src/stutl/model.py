"""Covariate SDE systems and the Student-t Levy regression model built on them."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Sequence

from stutl.expr import Expr, ParseError, identifiers, parse, pretty

__all__ = [
    "CovariateSystem",
    "ModelError",
    "NoiseKind",
    "NoiseSpec",
    "RegressionModel",
    "build_covariates",
    "build_model",
    "restrict",
]

_IDENT = re.compile(r"[A-Za-z][A-Za-z0-9_]*\Z")


class ModelError(ValueError):
    """Invalid model description."""


class NoiseKind(str, Enum):
    NONE = "none"
    WIENER = "wiener"
    NIG = "nig"


@dataclass(frozen=True)
class NoiseSpec:
    """Driving noise of the covariate system.

    For ``NIG`` the unit-time increment is NIG(alpha, beta, delta, mu).
    """

    kind: NoiseKind = NoiseKind.NONE
    alpha: float | None = None
    beta: float | None = None
    delta: float | None = None
    mu: float | None = None

    def __post_init__(self):
        try:
            kind = NoiseKind(str(getattr(self.kind, "value", self.kind)).lower())
        except ValueError:
            names = ", ".join(k.value for k in NoiseKind)
            raise ModelError(f"unknown noise kind {self.kind!r}; expected one of {names}") from None
        object.__setattr__(self, "kind", kind)
        params = (self.alpha, self.beta, self.delta, self.mu)
        if kind is NoiseKind.NIG:
            if any(p is None for p in params):
                raise ModelError("NIG noise needs alpha, beta, delta and mu")
            alpha, beta, delta, mu = (float(p) for p in params)
            if not alpha * alpha > beta * beta:
                raise ModelError(f"NIG requires alpha^2 > beta^2, got alpha={alpha}, beta={beta}")
            if not delta > 0:
                raise ModelError(f"NIG requires delta > 0, got {delta}")
            for name, v in zip(("alpha", "beta", "delta", "mu"), (alpha, beta, delta, mu)):
                object.__setattr__(self, name, v)
        elif any(p is not None for p in params):
            raise ModelError(f"NIG parameters given for noise kind {kind.value!r}")

    @property
    def gamma(self) -> float:
        return math.sqrt(self.alpha**2 - self.beta**2)


@dataclass(frozen=True)
class CovariateSystem:
    """``dX = drift(t, X) dt + diffusion(t, X) dZ`` with one scalar driving noise ``Z``."""

    state_names: tuple[str, ...]
    drift: tuple[Expr, ...]
    diffusion: tuple[Expr, ...]
    noise: NoiseSpec
    x_init: tuple[float, ...]

    @property
    def dim(self) -> int:
        return len(self.state_names)


@dataclass(frozen=True)
class RegressionModel:
    """``Y_t = X_t . mu + sigma J_t`` with ``J`` a Student-t Levy process."""

    covariates: CovariateSystem
    coeff_names: tuple[str, ...]
    scale_name: str = "sigma0"
    df_name: str = "nu"
    response_name: str = "Y"
    regressors: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if not self.regressors:
            object.__setattr__(self, "regressors", self.covariates.state_names)

    @property
    def param_names(self) -> tuple[str, ...]:
        return self.coeff_names + (self.scale_name, self.df_name)


def _names(value, what: str) -> tuple[str, ...]:
    if isinstance(value, str) or not isinstance(value, Sequence):
        raise ModelError(f"{what} must be a list of names")
    out = tuple(str(v) for v in value)
    for name in out:
        if not _IDENT.match(name):
            raise ModelError(f"{what}: {name!r} is not a valid identifier")
    if len(set(out)) != len(out):
        raise ModelError(f"{what} contains duplicate names: {list(out)}")
    return out


def _parse_all(sources, what: str, allowed: set[str]) -> tuple[Expr, ...]:
    exprs = []
    for i, src in enumerate(sources):
        try:
            e = parse(str(src))
        except ParseError as exc:
            raise ModelError(f"{what}[{i}]: {exc}") from exc
        unknown = identifiers(e) - allowed
        if unknown:
            raise ModelError(
                f"{what}[{i}] ({pretty(e)}) references unknown identifier(s) {sorted(unknown)}; "
                f"allowed: t and {sorted(allowed - {'t'})}"
            )
        exprs.append(e)
    return tuple(exprs)


def build_covariates(section: Mapping) -> CovariateSystem:
    names = _names(section.get("names", ()), "covariates.names")
    if not names:
        raise ModelError("covariates.names must list at least one state")
    if "t" in names:
        raise ModelError("covariates.names: 't' is reserved for time")
    q = len(names)
    drift_src = list(section.get("drift", ()))
    diff_src = list(section.get("diffusion", ["0"] * q))
    x_init = list(section.get("x_init", ()))
    for what, seq in (("drift", drift_src), ("diffusion", diff_src), ("x_init", x_init)):
        if len(seq) != q:
            raise ModelError(
                f"dimension mismatch: covariates.{what} has {len(seq)} entries but there are {q} states"
            )
    allowed = set(names) | {"t"}
    drift = _parse_all(drift_src, "covariates.drift", allowed)
    diffusion = _parse_all(diff_src, "covariates.diffusion", allowed)
    noise_cfg = dict(section.get("noise", {}))
    noise = NoiseSpec(
        kind=noise_cfg.pop("kind", "none"),
        **{k: noise_cfg.pop(k) for k in ("alpha", "beta", "delta", "mu") if k in noise_cfg},
    )
    if noise_cfg:
        raise ModelError(f"covariates.noise: unexpected field(s) {sorted(noise_cfg)}")
    try:
        init = tuple(float(v) for v in x_init)
    except (TypeError, ValueError):
        raise ModelError(f"covariates.x_init must be numbers, got {x_init!r}") from None
    return CovariateSystem(names, drift, diffusion, noise, init)


def build_model(description: Mapping) -> RegressionModel:
    """Validate a model description and build the regression model.

    ``description`` holds a ``covariates`` section (``names``, ``drift``,
    ``diffusion``, ``x_init``, optional ``noise``) and an optional
    ``regression`` section (``coefficients``, ``scale``, ``df``,
    ``response``).  Every invariant is checked before anything is returned.
    """
    if "covariates" not in description:
        raise ModelError("missing [covariates] section")
    cov = build_covariates(description["covariates"])
    reg = dict(description.get("regression", {}))
    q = cov.dim
    coeffs = _names(reg.get("coefficients", [f"mu{i + 1}" for i in range(q)]), "regression.coefficients")
    if len(coeffs) != q:
        raise ModelError(f"dimension mismatch: {len(coeffs)} coefficients for {q} covariates")
    scale = str(reg.get("scale", "sigma0"))
    df = str(reg.get("df", "nu"))
    response = str(reg.get("response", "Y"))
    others = (scale, df, response)
    for name in others:
        if not _IDENT.match(name):
            raise ModelError(f"regression: {name!r} is not a valid identifier")
    if len(set(others)) != 3:
        raise ModelError(f"regression: scale, df and response names must differ, got {others}")
    clash = set(coeffs) & set(others)
    if clash:
        raise ModelError(f"coefficient names clash with scale/df/response: {sorted(clash)}")
    if response in cov.state_names:
        raise ModelError(f"response name {response!r} is also a covariate name")
    return RegressionModel(cov, coeffs, scale, df, response)


def restrict(model: RegressionModel, regressors: Sequence[str]) -> RegressionModel:
    """Model that regresses on a subset of the covariates (keeps their coefficient names)."""
    regressors = tuple(regressors)
    index = {n: i for i, n in enumerate(model.covariates.state_names)}
    missing = [r for r in regressors if r not in index]
    if missing or not regressors:
        raise ModelError(f"unknown regressor(s) {missing}; covariates are {list(index)}")
    coeffs = tuple(model.coeff_names[index[r]] for r in regressors)
    return RegressionModel(
        model.covariates, coeffs, model.scale_name, model.df_name, model.response_name, regressors
    )
