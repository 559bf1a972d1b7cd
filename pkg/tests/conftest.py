import numpy as np
import pytest
from hypothesis import settings

from popspec import DiscretePSD, generate_eigen_sample

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

MODELS = {
    "base": DiscretePSD([1, 7, 15, 25], [0.5, 0.25, 0.125, 0.125]),
    "close_top": DiscretePSD([1, 7, 20, 25], [0.5, 0.25, 0.125, 0.125]),
    "close_low": DiscretePSD([1, 3, 15, 25], [0.5, 0.25, 0.125, 0.125]),
    "three_atom": DiscretePSD([1, 4, 5], [0.3, 0.4, 0.3]),
}


@pytest.fixture
def base():
    return MODELS["base"]


@pytest.fixture
def base_sample():
    return generate_eigen_sample(MODELS["base"], 320, 1000, 11)


def random_psd(rng, k, lo=0.5, hi=30.0, min_gap=1.0):
    while True:
        atoms = np.sort(rng.uniform(lo, hi, k))
        if k == 1 or np.min(np.diff(atoms)) >= min_gap:
            break
    weights = rng.uniform(0.05, 1.0, k)
    return DiscretePSD(atoms, weights / weights.sum())


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "VERDICTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
