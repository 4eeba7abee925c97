"""Shared fixtures.

The long sampler runs used by several acceptance criteria are built once per
session from the CLI presets.
"""

import numpy as np
import pytest

from rechmc.cli import build_benchmark, replica_config, resolve_config
from rechmc.replica import run

_CRITERIA = []


def preset_run(benchmark, seed=0, record_hot=True, **overrides):
    """Run a preset with selected top-level overrides; returns (trace, model, potential, labeler)."""
    cfg = resolve_config({"benchmark": benchmark, "seed": seed, **overrides})
    model, potential, labeler, init = build_benchmark(cfg)
    trace = run(model, potential, replica_config(cfg, model, init, record_hot=record_hot))
    return trace, model, potential, labeler


def labels_of(samples, labeler):
    return np.array([labeler(s) for s in samples], dtype=np.int64)


@pytest.fixture(scope="session")
def criterion_log():
    """Collects one result line per acceptance criterion for the terminal summary."""
    return _CRITERIA


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_CRITERIA, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def ellipse_replica():
    return preset_run("ellipses", seed=11, hot_thin=10)


@pytest.fixture(scope="session")
def ellipse_chmc_only():
    return preset_run("ellipses", seed=11, exchange_period=0, record_hot=False)


@pytest.fixture(scope="session")
def tetra_runs():
    # two seeds; 2 x 170001 x 0.9 > 3e5 retained samples when pooled
    return [preset_run("tetrahedron", seed=s, n_iterations=170_000, hot_thin=10)
            for s in (1, 2)]


@pytest.fixture(scope="session")
def sir_replica():
    return preset_run("sir", seed=5, hot_thin=10)
