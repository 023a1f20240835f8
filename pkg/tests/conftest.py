import pytest

from qthermo.base_driver import BaseSystem, sample_base
from qthermo.fiber_system import ModelSpec, PotentialSpec, ZERO_POTENTIAL
from qthermo.transfer_engine import solve_triple


@pytest.fixture(scope="session")
def rot_base():
    return BaseSystem.rotation(seed=11)


@pytest.fixture(scope="session")
def rot_sample(rot_base):
    # wide window; reused by most orbit-indexed tests
    return sample_base(rot_base, 1, window=(260, 220))[0]


@pytest.fixture(scope="session")
def doubling():
    return ModelSpec(family="doubling")


@pytest.fixture(scope="session")
def mp_model():
    # genuinely quenched: the indifferent point moves with omega
    return ModelSpec(family="manneville_pomeau", beta=0.5, gamma_winding=1)


@pytest.fixture(scope="session")
def mp_plain():
    return ModelSpec(family="manneville_pomeau", beta=0.5)


@pytest.fixture(scope="session")
def pair_model():
    return ModelSpec(family="expanding_pair", L=1.2)


@pytest.fixture(scope="session")
def pair_sample():
    base = BaseSystem.bernoulli((0.5, 0.5), seed=13)
    return sample_base(base, 1, window=(900, 60))[0]


@pytest.fixture(scope="session")
def pot_cos05():
    return PotentialSpec(family="cosine", amplitude=0.05)


@pytest.fixture(scope="session")
def pot_cos02():
    # satisfies (P) for the Manneville-Pomeau family (0.04 + log(1+0.04 pi) < log 4/3)
    return PotentialSpec(family="cosine", amplitude=0.02)


@pytest.fixture(scope="session")
def doubling_triple(doubling, rot_sample):
    return solve_triple(doubling, ZERO_POTENTIAL, rot_sample, window=10,
                        burn_in=24, grid=512)


@pytest.fixture(scope="session")
def mp_triple(mp_model, pot_cos05, rot_sample):
    return solve_triple(mp_model, pot_cos05, rot_sample, window=24,
                        burn_in=48, grid=2048)
