import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relaybf import (ChannelStatistics, NetworkConfig, db_to_linear,
                     generate_channels, linear_to_db)


def _config(R=15, d=2):
    return NetworkConfig(num_relays=R, num_users=d, source_powers=np.ones(d),
                         relay_noise_var=1.0, dest_noise_var=1.0,
                         sinr_targets=np.ones(d))


def test_db_conversion():
    assert db_to_linear(10.0) == pytest.approx(10.0)
    assert db_to_linear(0.0) == pytest.approx(1.0)
    assert linear_to_db(100.0) == pytest.approx(20.0)


def test_same_seed_bit_identical():
    stats = ChannelStatistics(var_f=3.0, var_g=0.5)
    config = _config()
    a = generate_channels(stats, config, seed=123)
    b = generate_channels(stats, config, seed=123)
    assert np.array_equal(a.source_to_relay, b.source_to_relay)
    assert np.array_equal(a.relay_to_dest, b.relay_to_dest)
    c = generate_channels(stats, config, seed=124)
    assert not np.array_equal(a.source_to_relay, c.source_to_relay)


def test_shapes_match_config():
    ch = generate_channels(ChannelStatistics(10.0, 10.0), _config(15, 2), 0)
    assert ch.source_to_relay.shape == (15, 2)
    assert ch.relay_to_dest.shape == (15, 2)
    assert ch.num_relays == 15 and ch.num_users == 2


def test_sample_variance_matches_10db():
    # 10 dB variance = 10.0 linear; many draws pool to ~5% accuracy
    stats = ChannelStatistics(var_f=db_to_linear(10.0), var_g=db_to_linear(10.0))
    config = _config(15, 2)
    draws = [generate_channels(stats, config, seed=s) for s in range(3500)]
    entries = np.concatenate([d.source_to_relay.ravel() for d in draws])
    assert entries.size >= 10**5
    assert np.mean(np.abs(entries) ** 2) == pytest.approx(10.0, rel=0.05)


def test_scalar_mean_square_within_two_percent():
    # R = d = 1, unit variance: law of large numbers at 1e5 draws
    stats = ChannelStatistics(var_f=1.0, var_g=1.0)
    config = _config(1, 1)
    first = generate_channels(stats, config, 0)
    assert first.source_to_relay.shape == (1, 1)
    vals = np.array([generate_channels(stats, config, seed=s).source_to_relay[0, 0]
                     for s in range(10**5)])
    assert np.mean(np.abs(vals) ** 2) == pytest.approx(1.0, rel=0.02)


def test_circular_symmetry():
    # Re and Im parts each carry half the variance
    stats = ChannelStatistics(var_f=4.0, var_g=4.0)
    config = _config(15, 2)
    draws = [generate_channels(stats, config, seed=s) for s in range(2000)]
    entries = np.concatenate([d.relay_to_dest.ravel() for d in draws])
    assert np.var(entries.real) == pytest.approx(2.0, rel=0.05)
    assert np.var(entries.imag) == pytest.approx(2.0, rel=0.05)
    assert abs(np.mean(entries.real)) < 0.05
    assert abs(np.mean(entries.imag)) < 0.05


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2**31 - 1))
def test_reproducibility_property(seed):
    stats = ChannelStatistics(var_f=2.0, var_g=7.0)
    config = _config(3, 2)
    a = generate_channels(stats, config, seed)
    b = generate_channels(stats, config, seed)
    assert np.array_equal(a.source_to_relay, b.source_to_relay)
    assert np.array_equal(a.relay_to_dest, b.relay_to_dest)


@pytest.mark.parametrize("kwargs", [
    dict(num_relays=0),
    dict(num_users=0),
    dict(source_powers=[1.0, 1.0, 1.0]),
    dict(source_powers=[0.0, 1.0]),
    dict(relay_noise_var=0.0),
    dict(dest_noise_var=-1.0),
    dict(sinr_targets=[1.0]),
    dict(sinr_targets=[1.0, 0.0]),
])
def test_config_validation(kwargs):
    base = dict(num_relays=4, num_users=2, source_powers=[1.0, 1.0],
                relay_noise_var=1.0, dest_noise_var=1.0,
                sinr_targets=[1.0, 1.0])
    base.update(kwargs)
    with pytest.raises(ValueError):
        NetworkConfig(**base)


def test_stats_validation():
    with pytest.raises(ValueError):
        ChannelStatistics(var_f=0.0, var_g=1.0)
    with pytest.raises(ValueError):
        ChannelStatistics(var_f=1.0, var_g=-2.0)


def test_channel_realization_validation():
    with pytest.raises(ValueError):
        from relaybf import ChannelRealization
        ChannelRealization(np.ones((2, 2)), np.ones((3, 2)))
    with pytest.raises(ValueError):
        from relaybf import ChannelRealization
        ChannelRealization(np.array([[np.inf]]), np.array([[1.0]]))


def test_with_sinr_targets():
    cfg = _config(4, 2).with_sinr_targets(3.0)
    assert np.allclose(cfg.sinr_targets, [3.0, 3.0])
    cfg2 = cfg.with_sinr_targets([1.0, 2.0])
    assert np.allclose(cfg2.sinr_targets, [1.0, 2.0])
    assert cfg2.num_relays == 4
