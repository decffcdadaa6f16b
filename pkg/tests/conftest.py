import numpy as np
import pytest

import biphoton as bp


@pytest.fixture(scope="session")
def ket_x():
    return bp.ket_from_path(bp.predict_path_state(bp.PATH_X))


@pytest.fixture(scope="session")
def ket_y():
    return bp.ket_from_path(bp.predict_path_state(bp.PATH_Y))


@pytest.fixture(scope="session")
def rho_x(ket_x):
    return bp.density_from_ket(ket_x)


def random_pure_ket(rng: np.random.Generator) -> bp.BiphotonKet:
    amps = rng.normal(size=4) + 1j * rng.normal(size=4)
    return bp.BiphotonKet.normalized(amps, bp.CIRCULAR)
