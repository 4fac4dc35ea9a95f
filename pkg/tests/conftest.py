import numpy as np
import pytest

from relaybf import (ChannelRealization, ChannelStatistics, NetworkConfig,
                     build_matrices, derive_bounds, generate_channels)


@pytest.fixture
def scalar_network():
    """Single relay, single user, f = g = 1, P = sigma_v^2 = sigma_n^2 = 1."""
    config = NetworkConfig(num_relays=1, num_users=1, source_powers=[1.0],
                           relay_noise_var=1.0, dest_noise_var=1.0,
                           sinr_targets=[0.5])
    channels = ChannelRealization(np.array([[1.0 + 0j]]), np.array([[1.0 + 0j]]))
    m = build_matrices(channels, config)
    return config, channels, m


def make_instance(num_relays=4, num_users=2, seed=0, gamma=2.0, var=10.0,
                  rho=0.01):
    """Random paper-style instance: unit powers and noise, common target."""
    config = NetworkConfig(
        num_relays=num_relays, num_users=num_users,
        source_powers=np.ones(num_users), relay_noise_var=1.0,
        dest_noise_var=1.0, sinr_targets=np.full(num_users, float(gamma)))
    stats = ChannelStatistics(var_f=var, var_g=var)
    channels = generate_channels(stats, config, seed)
    m = build_matrices(channels, config)
    bounds = derive_bounds(m, rho)
    return config, stats, channels, m, bounds


@pytest.fixture
def small_instance():
    # seed chosen so all three designs are feasible at gamma = 2
    return make_instance(num_relays=4, num_users=2, seed=8)
