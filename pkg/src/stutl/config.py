"""TOML model configuration files, validated against the bundled JSON schema."""

from __future__ import annotations

import json
import os
from functools import lru_cache
from importlib import resources
from typing import Any, Mapping

import jsonschema
import tomli
import tomli_w

from stutl.model import ModelError, RegressionModel, build_model, restrict
from stutl.simulate import SamplingGrid
from stutl.tlaw import InversionConfig

__all__ = [
    "ConfigError",
    "dump_config",
    "dumps_config",
    "estimation_model",
    "law_config",
    "load_config",
    "loads_config",
    "model_from_config",
    "sampling_grid",
]


class ConfigError(ValueError):
    """Configuration document failed validation; the message names section and field."""


@lru_cache(maxsize=1)
def _schema() -> dict:
    text = resources.files("stutl").joinpath("data/config_schema.json").read_text()
    return json.loads(text)


def _where(path) -> str:
    parts = [str(p) for p in path]
    if not parts:
        return "document"
    return f"[{parts[0]}]" + "".join(f".{p}" if not p.isdigit() else f"[{p}]" for p in parts[1:])


def validate(doc: Mapping[str, Any]) -> None:
    """Check ``doc`` against the schema and the model invariants."""
    validator = jsonschema.Draft202012Validator(_schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.path))
    if errors:
        err = errors[0]
        raise ConfigError(f"{_where(err.path)}: {err.message}")
    try:
        model_from_config(doc)
    except ModelError as exc:
        raise ConfigError(str(exc)) from None


def loads_config(text: str) -> dict:
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"not valid TOML: {exc}") from None
    validate(doc)
    return doc


def load_config(path) -> dict:
    with open(os.fspath(path), "rb") as fh:
        data = fh.read()
    try:
        return loads_config(data.decode("utf-8"))
    except ConfigError as exc:
        raise ConfigError(f"{os.fspath(path)}: {exc}") from None


def dumps_config(doc: Mapping[str, Any]) -> str:
    return tomli_w.dumps(dict(doc))


def dump_config(doc: Mapping[str, Any], path) -> None:
    with open(os.fspath(path), "wb") as fh:
        tomli_w.dump(dict(doc), fh)


def model_from_config(doc: Mapping[str, Any]) -> RegressionModel:
    return build_model(doc)


def estimation_model(doc: Mapping[str, Any]) -> RegressionModel:
    """Model used for fitting; ``[estimation].regressors`` may select a subset."""
    model = build_model(doc)
    regressors = doc.get("estimation", {}).get("regressors")
    return restrict(model, regressors) if regressors else model


def law_config(doc: Mapping[str, Any]) -> InversionConfig:
    section = doc.get("law", {})
    kwargs = {}
    for key, field in (("method", "method"), ("up", "up"), ("low", "low"), ("N", "n_terms"),
                       ("N_grid", "n_grid")):
        if key in section:
            kwargs[field] = section[key]
    try:
        return InversionConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"[law]: {exc}") from None


def sampling_grid(doc: Mapping[str, Any]) -> SamplingGrid:
    if "sampling" not in doc:
        raise ConfigError("missing [sampling] section")
    s = doc["sampling"]
    try:
        return SamplingGrid(float(s.get("initial", 0.0)), float(s["terminal"]), s["n_steps"])
    except ValueError as exc:
        raise ConfigError(f"[sampling]: {exc}") from None
