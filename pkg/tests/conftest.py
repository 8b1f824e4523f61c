import numpy as np
import pytest

import Util_Config as config
from Configuration import Configuration, PhaseState
from Mass_System import MassSystem, PotentialParams


@pytest.fixture(autouse=True)
def quiet_progress(monkeypatch):
    monkeypatch.setattr(config, "SHOW_PROGRESS", False)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def unit3():
    return MassSystem.equal(3)


@pytest.fixture
def manev3():
    return PotentialParams(a=1.0, b=3.0, alpha=1.0, beta=1.0)


def random_configuration(rng, ms: MassSystem, dim: int = 2, min_gap: float = 0.3) -> Configuration:
    """Centred random configuration with every pair at least min_gap apart."""
    while True:
        pos = rng.uniform(-1.5, 1.5, size=(ms.n, dim))
        cfg = Configuration.centered(pos, ms)
        if cfg.min_distance() > min_gap:
            return cfg


def random_momenta(rng, ms: MassSystem, dim: int = 2, scale: float = 0.5) -> np.ndarray:
    """Momenta with zero total."""
    p = rng.normal(scale=scale, size=(ms.n, dim))
    return p - p.sum(axis=0) / ms.n


def circular_two_body(pp: PotentialParams, separation: float = 1.0) -> PhaseState:
    """Two unit masses on a circular orbit of the given separation."""
    force = pp.alpha * pp.a * separation ** (-pp.a - 1) + pp.beta * pp.b * separation ** (-pp.b - 1)
    speed = 0.5 * np.sqrt(2.0 * separation * force)
    cfg = Configuration([[-0.5 * separation, 0.0], [0.5 * separation, 0.0]])
    return PhaseState(cfg, [[0.0, -speed], [0.0, speed]])

