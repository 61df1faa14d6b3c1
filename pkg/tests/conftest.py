from dataclasses import dataclass

import numpy as np
import pytest

from framedyn import NonholonomicField, builtin, sample_states


@dataclass
class Bundle:
    sysd: object
    L: object
    frame: object
    split: object
    field: object

    def states(self, count, seed=0):
        return sample_states(self.sysd, count, seed=seed)


def _bundle(name, params=None):
    sysd = builtin(name, params)
    L, F, split = sysd.lagrangian(), sysd.frame(), sysd.split()
    return Bundle(sysd, L, F, split, NonholonomicField(L, F, split))


@pytest.fixture(scope="session")
def particle():
    return _bundle("nonholonomic_particle")


@pytest.fixture(scope="session")
def disk():
    return _bundle("vertical_disk")


@pytest.fixture(scope="session")
def delta():
    return _bundle("delta_class")


@pytest.fixture(scope="session")
def carriage():
    return _bundle("carriage")


@pytest.fixture(scope="session")
def carriage_l0():
    return _bundle("carriage", {"l": 0.0})


@pytest.fixture(scope="session")
def all_builtins(particle, disk, delta, carriage):
    return {"nonholonomic_particle": particle, "vertical_disk": disk,
            "delta_class": delta, "carriage": carriage}


@pytest.fixture()
def rng():
    return np.random.default_rng(20240811)
