import os

import numpy as np
import pytest

from resilient_mas.attacks import AttackProfile
from resilient_mas.scenario import reference_scenario
from resilient_mas.simulator import simulate

A12 = np.array([[2.0, -3.0], [4.0, -4.0]])
B12 = np.array([[1.0], [3.0]])
A34 = np.array([[2.0, 0.0], [3.0, 3.0]])
B34 = np.array([[-1.0], [-2.0]])
A56 = np.array([[-5.0, 2.0], [4.0, -3.0]])
B56 = np.array([[2.0], [-1.0]])
S = np.array([[1.0, -2.0], [1.0, -1.0]])
FAMILIES = [(A12, B12), (A34, B34), (A56, B56)]


@pytest.fixture
def rng():
    seed = int(os.environ.get("RESILIENT_MAS_SEED", "20240521"))
    return np.random.default_rng(seed)


@pytest.fixture(scope="session")
def reference_config():
    return reference_scenario()


@pytest.fixture(scope="session")
def resilient_trace():
    return simulate(reference_scenario(), mode="resilient")


@pytest.fixture(scope="session")
def resilient_trace_half_dt():
    return simulate(reference_scenario(), mode="resilient", dt=5e-4, store_every=20)


@pytest.fixture(scope="session")
def conventional_trace():
    return simulate(reference_scenario(), mode="conventional")


@pytest.fixture(scope="session")
def sensor_only_traces():
    cfg = reference_scenario()
    cfg.attacks = cfg.attacks.without_actuator()
    return {mode: simulate(cfg, mode=mode) for mode in ("conventional", "resilient")}


@pytest.fixture(scope="session")
def attack_free_config():
    cfg = reference_scenario()
    cfg.attacks = AttackProfile.none(cfg.n, cfg.m)
    return cfg
