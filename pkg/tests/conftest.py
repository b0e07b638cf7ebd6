import numpy as np
import pytest

from eosched import ChannelModel, NetworkConfig, generate_synthetic_plan


def make_config(**overrides) -> NetworkConfig:
    base = dict(
        num_targets=2,
        num_eos=3,
        num_destinations=1,
        transceivers=1,
        rate_floors=0.0,
        compression_set=(2 / 3, 1 / 2, 1 / 3, 1 / 4),
        control_factor=8000.0,
        slot_length=1.0,
        horizon=10,
        rng_seed=0,
    )
    base.update(overrides)
    return NetworkConfig(**base)


def desk_config(**overrides) -> NetworkConfig:
    """Desk-scale scenario: 8 targets, 12 satellites, 2 destinations with
    2 transceivers each, 1440 slots, modest rate floors."""
    base = dict(
        num_targets=8,
        num_eos=12,
        num_destinations=2,
        transceivers=2,
        rate_floors=10.0,
        compression_set=(2 / 3, 1 / 2, 1 / 3, 1 / 4),
        control_factor=8000.0,
        slot_length=1.0,
        horizon=1440,
        rng_seed=0,
    )
    base.update(overrides)
    return NetworkConfig(**base)


# Sparse single-slot observation passes against near-continuous relay
# visibility: observation opportunities are the scarce resource, queues
# drain between passes, and adaptive compression pays off.
DESK_OBS_PLAN = dict(period=48, duty=1 / 48)
DESK_TRANS_PLAN = dict(period=96, duty=0.95)


def desk_plan(config, offset_seed=0):
    obs = generate_synthetic_plan(config, offset_seed=offset_seed, **DESK_OBS_PLAN)
    trans = generate_synthetic_plan(config, offset_seed=offset_seed + 1, **DESK_TRANS_PLAN)
    from eosched import ContactPlan

    return ContactPlan(obs_visible=obs.obs_visible, trans_visible=trans.trans_visible)


@pytest.fixture
def model() -> ChannelModel:
    return ChannelModel()
