"""Simulation and two-step quasi-likelihood estimation of Student-t Levy regression models."""

from stutl.estimate import FitResult, FitWindow, confidence_interval, fit
from stutl.model import RegressionModel, build_model
from stutl.simulate import SamplingGrid, simulate
from stutl.tlaw import IncrementLaw, InversionConfig, build_law

__version__ = "0.1.0"

__all__ = [
    "FitResult",
    "FitWindow",
    "IncrementLaw",
    "InversionConfig",
    "RegressionModel",
    "SamplingGrid",
    "build_law",
    "build_model",
    "confidence_interval",
    "fit",
    "simulate",
]
