import numpy as np
import pytest

from hapticid import fixtures
from hapticid.grasp import HandModel, NoiseModel, build_pose_grid
from hapticid.harness import ExperimentConfig, train_system


@pytest.fixture(scope="session")
def meshes():
    return {name: fixtures.load_fixture(name) for name in fixtures.NAMES}


@pytest.fixture(scope="session")
def grids(meshes):
    return {name: build_pose_grid(m, 360, HandModel()) for name, m in meshes.items()}


@pytest.fixture(scope="session")
def small_system():
    """Three fixtures on a coarse grid; fast enough for many trials."""
    cfg = ExperimentConfig(objects=("tuna_can", "bowl", "foam_brick"), n_poses=36, n_samples=10,
                           trials=5, seed=7)
    return train_system(cfg)


@pytest.fixture(scope="session")
def full_system():
    """Default five-fixture system (L=360, N=50) at seed 0."""
    return train_system(ExperimentConfig(seed=0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def no_noise():
    return NoiseModel(0.0, 0.0, 0)


@pytest.fixture(scope="session")
def full_result(full_system):
    from hapticid.harness import run_experiment

    return run_experiment(full_system.config, system=full_system)


_ACCEPTANCE = []


@pytest.fixture(scope="session")
def acceptance_report():
    """Append (criterion, passed, detail); lines are printed in the terminal summary."""
    return _ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, passed, detail in sorted(_ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}")
