import numpy as np
import pytest

from auvformation.params import VehicleParams
from auvformation.vehicle import OceanCurrent, VehicleState

DATA = "src/auvformation/data/lauv_surrogate.yaml"


@pytest.fixture(scope="session")
def surrogate() -> VehicleParams:
    return VehicleParams.load(DATA)


@pytest.fixture(scope="session")
def table_current() -> OceanCurrent:
    return OceanCurrent(np.array([0.0, 0.25, 0.05]))


def random_state(rng, pitch_max=1.2) -> VehicleState:
    eta = np.concatenate(
        [
            rng.uniform(-50, 50, 3),
            [rng.uniform(-pitch_max, pitch_max)],
            [rng.uniform(-np.pi, np.pi)],
        ]
    )
    nu = np.concatenate([rng.uniform(-2, 2, 3), rng.uniform(-0.8, 0.8, 2)])
    return VehicleState(eta, nu)


def random_current(rng, vmax=0.4) -> OceanCurrent:
    return OceanCurrent(rng.uniform(-vmax, vmax, 3))
