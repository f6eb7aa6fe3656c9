import math
from dataclasses import replace

import pytest

from stressnet.model import StressNetConfig
from stressnet.simulate import SimConfig, run_simulation

TOY_CONFIG = StressNetConfig(delta_t=3, feature_dim=4, conv_blocks=((3, 2),),
                             lstm_hidden=4, frame_shape=(6, 4))


@pytest.fixture(scope="session")
def toy_config():
    return TOY_CONFIG


@pytest.fixture(scope="session")
def small_sim_config():
    """Short, small-grid config for fast end-to-end plumbing tests."""
    return SimConfig(rows=48, cols=32, width_m=0.5, length_m=0.75,
                     cell_px=16, n_initial_cracks=4, crack_length_m=0.05,
                     n_steps=40, toughness=4.0e5)


@pytest.fixture(scope="session")
def default_records():
    """Three default-config simulations shared across test modules."""
    cfg = SimConfig()
    return [run_simulation(cfg, 9000 + i) for i in range(3)]


@pytest.fixture(scope="session")
def frozen_records():
    """Two no-growth simulations: damage constant, stress a noisy ramp."""
    cfg = replace(SimConfig(), toughness=math.inf)
    return [run_simulation(cfg, 400 + i) for i in range(2)]
