import time
from pathlib import Path

import numpy as np
import pytest

from singular_poisson.experiments import ExperimentConfig, run_experiment
from singular_poisson.model import IntensityModel, validate


def make_model(a=1.0, b=1.0, p=0.5, theta=1.0, T=2.0, alpha=0.5, beta=1.5, psi=(0.0, 0.0, 0.0, 0.0)):
    return IntensityModel.create(a, b, p, theta, T, alpha, beta, psi)


def random_models(count, seed=0):
    """Validated models with random amplitudes, order, location and cubic psi."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        p = rng.uniform(0.1, 0.9) * rng.choice([-1, 1])
        c0 = rng.uniform(-0.3, 0.5) if p < 0 else 0.0
        psi = (c0, *rng.uniform(-0.3, 0.3, 3))
        m = make_model(rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0), p, rng.uniform(0.7, 1.3), 2.0, 0.5, 1.5, psi)
        try:
            validate(m)
        except ValueError:
            continue
        out.append(m)
    return out


@pytest.fixture
def power_model():
    return make_model()


@pytest.fixture
def inf_model():
    return make_model(p=-0.5)


CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"
_RUNS = {}
ACCEPTANCE_LINES = []


def config_run(name):
    """Run ``configs/<name>.cfg`` once per session and cache the (config, report) pair."""
    if name not in _RUNS:
        cfg = ExperimentConfig.from_text((CONFIG_DIR / f"{name}.cfg").read_text())
        start = time.perf_counter()
        report = run_experiment(cfg)
        _RUNS[name] = (cfg, report, time.perf_counter() - start)
    return _RUNS[name]


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
