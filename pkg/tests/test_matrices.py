import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relaybf import (ChannelRealization, NetworkConfig, build_matrices,
                     generate_channels, qos_margin, sinr, transmit_power)
from relaybf.model import ChannelStatistics


def _random_weights(rng, R):
    return rng.standard_normal(R) + 1j * rng.standard_normal(R)


def test_scalar_network_values(scalar_network):
    config, channels, m = scalar_network
    assert m.power_diag == pytest.approx([2.0])
    assert m.signal[0] == pytest.approx(np.array([[1.0]]))
    assert m.interference[0] == pytest.approx(np.zeros((1, 1)))
    assert m.noise_diag[0] == pytest.approx([1.0])
    # margin at gamma = 0.5: 1 - 0.5*(0 + 1) = 0.5
    assert m.margin[0] == pytest.approx(np.array([[0.5]]))


def test_scalar_phase_invariance_of_signal():
    config = NetworkConfig(1, 1, [1.0], 1.0, 1.0, [0.5])
    channels = ChannelRealization(np.array([[1j]]), np.array([[1.0 + 0j]]))
    m = build_matrices(channels, config)
    assert m.signal[0] == pytest.approx(np.array([[1.0]]))
    evals = np.linalg.eigvalsh(m.signal[0])
    assert evals.min() >= -1e-12


def test_elementwise_oracle_r2_d2():
    # independent scalar-loop reimplementation of every matrix entry
    config = NetworkConfig(2, 2, [1.3, 0.7], 0.9, 1.0, [1.5, 0.8])
    channels = generate_channels(ChannelStatistics(2.0, 3.0), config, seed=11)
    f, g = channels.source_to_relay, channels.relay_to_dest
    m = build_matrices(channels, config)
    R, d = 2, 2
    P = config.source_powers
    for r in range(R):
        expected = sum(P[p] * abs(f[r, p]) ** 2 for p in range(d)) + 0.9
        assert m.power_diag[r] == pytest.approx(expected)
    for k in range(d):
        for r in range(R):
            assert m.noise_diag[k, r] == pytest.approx(0.9 * abs(g[r, k]) ** 2)
        for i in range(R):
            for j in range(R):
                h_i = g[i, k] * f[i, k]
                h_j = g[j, k] * f[j, k]
                assert m.signal[k][i, j] == pytest.approx(P[k] * h_i * np.conj(h_j))
                q = sum(P[p] * (g[i, k] * f[i, p]) * np.conj(g[j, k] * f[j, p])
                        for p in range(d) if p != k)
                assert m.interference[k][i, j] == pytest.approx(q)
                t = (m.signal[k][i, j] - config.sinr_targets[k]
                     * (m.interference[k][i, j]
                        + (m.noise_diag[k, i] if i == j else 0.0)))
                assert m.margin[k][i, j] == pytest.approx(t)


def test_matrix_structure_invariants(small_instance):
    config, stats, channels, m, bounds = small_instance
    assert np.all(m.power_diag > 0)
    assert np.all(m.noise_diag >= 0)
    for k in range(config.num_users):
        for mat in (m.signal[k], m.interference[k], m.margin[k]):
            assert np.allclose(mat, mat.conj().T, atol=1e-12)
        evals_s = np.linalg.eigvalsh(m.signal[k])
        assert evals_s.min() >= -1e-9
        assert np.sum(evals_s > 1e-9 * max(evals_s.max(), 1)) <= 1  # rank <= 1
        evals_q = np.linalg.eigvalsh(m.interference[k])
        assert evals_q.min() >= -1e-9
        assert np.sum(evals_q > 1e-9 * max(evals_q.max(), 1)) <= config.num_users - 1


def test_single_user_has_no_interference():
    config = NetworkConfig(5, 1, [2.0], 1.0, 1.0, [1.0])
    channels = generate_channels(ChannelStatistics(1.0, 1.0), config, 3)
    m = build_matrices(channels, config)
    assert np.allclose(m.interference[0], 0.0)


def test_dimension_mismatch_raises():
    config = NetworkConfig(3, 2, [1.0, 1.0], 1.0, 1.0, [1.0, 1.0])
    channels = generate_channels(ChannelStatistics(1.0, 1.0),
                                 NetworkConfig(4, 2, [1.0, 1.0], 1.0, 1.0,
                                               [1.0, 1.0]), 0)
    with pytest.raises(ValueError):
        build_matrices(channels, config)


def test_transmit_power_trivial(scalar_network):
    config, channels, m = scalar_network
    assert transmit_power(np.array([1.0 + 0j]), m) == pytest.approx(2.0)
    assert transmit_power(np.array([0.0 + 0j]), m) == 0.0


def test_transmit_power_alternate_form_oracle():
    # Tr(W^H R_x W) with W = diag(w) must equal w^H diag(R_x) w
    config = NetworkConfig(4, 2, [1.0, 2.0], 0.7, 1.0, [1.0, 1.0])
    channels = generate_channels(ChannelStatistics(2.0, 2.0), config, 5)
    f = channels.source_to_relay
    m = build_matrices(channels, config)
    rng = np.random.default_rng(0)
    w = _random_weights(rng, 4)
    Rx = sum(config.source_powers[p] * np.outer(f[:, p], f[:, p].conj())
             for p in range(2)) + 0.7 * np.eye(4)
    W = np.diag(w)
    oracle = float(np.real(np.trace(W.conj().T @ Rx @ W)))
    assert transmit_power(w, m) == pytest.approx(oracle, rel=1e-12)


def test_sinr_scalar_value(scalar_network):
    config, channels, m = scalar_network
    w = np.array([1.0 + 0j])
    # P_s = 1, interference 0, noise = |w|^2*1 + 1 = 2
    assert sinr(w, m, config, 0) == pytest.approx(0.5)
    assert sinr(np.array([0.0 + 0j]), m, config, 0) == 0.0


def test_sinr_monte_carlo_signal_level_oracle():
    # estimate the power of each received-signal term by simulating symbols
    config = NetworkConfig(3, 2, [1.0, 1.0], 1.0, 1.0, [1.0, 1.0])
    channels = generate_channels(ChannelStatistics(1.0, 1.0), config, 21)
    f, g = channels.source_to_relay, channels.relay_to_dest
    m = build_matrices(channels, config)
    rng = np.random.default_rng(1)
    w = _random_weights(rng, 3)
    n = 10**6
    k = 0
    s = (2 * rng.integers(0, 2, size=(2, n)) - 1).astype(float)  # unit power
    v = np.sqrt(0.5) * (rng.standard_normal((3, n)) + 1j * rng.standard_normal((3, n)))
    nk = np.sqrt(0.5) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    relay_out = w.conj()[:, None] * (f @ s + v)
    y_sig = g[:, k] @ (w.conj()[:, None] * (np.outer(f[:, k], s[k])))
    y_int = g[:, k] @ (w.conj()[:, None] * (np.outer(f[:, 1], s[1])))
    y_noise = g[:, k] @ (w.conj()[:, None] * v) + nk
    p_sig = np.mean(np.abs(y_sig) ** 2)
    p_int = np.mean(np.abs(y_int) ** 2)
    p_noise = np.mean(np.abs(y_noise) ** 2)
    mc = p_sig / (p_int + p_noise)
    assert sinr(w, m, config, 0) == pytest.approx(mc, rel=0.01)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), theta=st.floats(0, 2 * np.pi))
def test_phase_invariance(seed, theta):
    config = NetworkConfig(3, 2, [1.0, 1.0], 1.0, 1.0, [1.0, 1.0])
    channels = generate_channels(ChannelStatistics(1.0, 1.0), config, 2)
    m = build_matrices(channels, config)
    w = _random_weights(np.random.default_rng(seed), 3)
    rotated = np.exp(1j * theta) * w
    assert transmit_power(rotated, m) == pytest.approx(transmit_power(w, m))
    for k in range(2):
        assert sinr(rotated, m, config, k) == pytest.approx(sinr(w, m, config, k))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31 - 1),
       alpha=st.floats(min_value=1.0, max_value=100.0))
def test_sinr_monotone_in_scale(seed, alpha):
    config = NetworkConfig(3, 2, [1.0, 1.0], 1.0, 1.0, [1.0, 1.0])
    channels = generate_channels(ChannelStatistics(1.0, 1.0), config, 4)
    m = build_matrices(channels, config)
    w = _random_weights(np.random.default_rng(seed), 3)
    for k in range(2):
        assert sinr(alpha * w, m, config, k) >= sinr(w, m, config, k) - 1e-12


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_margin_iff_sinr_target(seed):
    # w^H margin_k w >= noise*gamma_k exactly when sinr_k(w) >= gamma_k
    config = NetworkConfig(4, 2, [1.0, 1.0], 1.0, 2.0, [1.7, 0.4])
    channels = generate_channels(ChannelStatistics(1.0, 1.0), config, 9)
    m = build_matrices(channels, config)
    w = _random_weights(np.random.default_rng(seed), 4)
    for k in range(2):
        gamma = config.sinr_targets[k]
        lhs = qos_margin(w, m, k) >= config.dest_noise_var * gamma
        rhs = sinr(w, m, config, k) >= gamma
        if not np.isclose(qos_margin(w, m, k), config.dest_noise_var * gamma):
            assert lhs == rhs
