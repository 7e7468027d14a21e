import math

import numpy as np
import pytest

from stutl.model import build_model
from stutl.tlaw import InversionConfig, Method, build_law

DETERMINISTIC = {
    "covariates": {
        "names": ["X1", "X2"],
        "drift": ["-5*sin(5*t)", "cos(t)"],
        "diffusion": ["0", "0"],
        "x_init": [1.0, 0.0],
    }
}
TRUTH = {"mu1": 5.0, "mu2": -1.0, "sigma0": 3.0, "nu": 3.0}


def t3_cdf(x):
    """Closed-form CDF of the standard Student t with 3 degrees of freedom."""
    x = np.asarray(x, dtype=float)
    s = math.sqrt(3.0)
    return 0.5 + (np.arctan(x / s) + s * x / (3.0 + x * x)) / math.pi


def cauchy_cdf(x, scale):
    return 0.5 + np.arctan(np.asarray(x, dtype=float) / scale) / math.pi


@pytest.fixture(scope="session")
def deterministic_model():
    return build_model(DETERMINISTIC)


@pytest.fixture(scope="session")
def law_h002():
    cfg = InversionConfig(Method.FFT, up=6.0, low=-6.0, n_terms=2**17, n_grid=60000)
    return build_law(3.0, 0.02, cfg)


ACCEPTANCE_LINES: list[str] = []


def record(number: int, passed: bool, detail: str) -> bool:
    """Log one acceptance-criterion outcome line and return ``passed``."""
    line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
