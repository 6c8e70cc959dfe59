import numpy as np
import pytest

from fpcluster import PowedConfig, RadioMap, SynthSpec, synth_radio_map


@pytest.fixture(scope="session")
def small_maps():
    """One building, three floors, mild noise. (train, test) pair."""
    spec = SynthSpec(buildings=1, floors=3, aps_per_floor=6, train_per_floor=40,
                     test_per_floor=12, sigma=3.0)
    return synth_radio_map(spec, seed=11)


@pytest.fixture(scope="session")
def two_building_maps():
    """Two buildings, three floors each."""
    spec = SynthSpec(buildings=2, floors=3, aps_per_floor=5, train_per_floor=35,
                     test_per_floor=10, sigma=3.0)
    return synth_radio_map(spec, seed=23)


@pytest.fixture(scope="session")
def pcfg_for():
    def make(train: RadioMap, exponent: float = 2.71828) -> PowedConfig:
        return PowedConfig(exponent=exponent, min=train.global_min)

    return make


def tiny_map(rssi, x, y, floor, building=None, sentinel=100.0, partition="train"):
    """Hand-built radio map for precise unit tests."""
    rssi = np.asarray(rssi, dtype=float)
    n = rssi.shape[0]
    return RadioMap(
        rssi=rssi,
        x=np.asarray(x, dtype=float),
        y=np.asarray(y, dtype=float),
        floor=np.asarray(floor, dtype=int),
        building=np.zeros(n, dtype=int) if building is None else np.asarray(building, dtype=int),
        ids=[f"fp-{i}" for i in range(n)],
        sentinel=sentinel,
        partition=partition,
    )
