"""Channel drawing, transmit construction, and received-signal tests."""

import numpy as np
import pytest

from ullsim import ScenarioConfig
from ullsim.airlink import (build_transmit, correlation_sqrt, crandn,
                            draw_channels, receive, simulate_blocks)
from ullsim.netgeom import make_network
from ullsim.pilots import assign_pilots


def cfg(**kw):
    base = dict(M=4, K=2, L=1, tau_c=20, tau_p=2)
    base.update(kw)
    return ScenarioConfig(**base)


def test_null_correlation_gives_null_channel():
    R = np.zeros((1, 1, 1, 4, 4), dtype=complex)
    h = draw_channels(correlation_sqrt(R), np.random.default_rng(0))
    assert np.all(h == 0)


def test_channel_sample_covariance_matches_r():
    beta = 2.5
    M, n = 4, 100_000
    R = beta * np.eye(M)[None, None, None]
    h = draw_channels(correlation_sqrt(R), np.random.default_rng(1), n_blocks=n)
    h = h[:, 0, 0, 0]                                   # (n, M)
    cov = h.T @ h.conj() / n                            # E{h h^H}
    assert np.linalg.norm(cov - beta * np.eye(M)) <= 0.05 * np.linalg.norm(beta * np.eye(M))
    # zero-mean to Monte Carlo accuracy
    assert np.all(np.abs(h.mean(axis=0)) < 3 * np.sqrt(beta / n))


def test_channel_sample_covariance_correlated():
    # non-diagonal R must be reproduced too
    rng = np.random.default_rng(2)
    A = crandn(rng, (3, 3))
    R = (A @ A.conj().T)[None, None, None]
    h = draw_channels(correlation_sqrt(R), rng, n_blocks=200_000)[:, 0, 0, 0]
    cov = h.T @ h.conj() / h.shape[0]
    assert np.linalg.norm(cov - R[0, 0, 0]) <= 0.05 * np.linalg.norm(R[0, 0, 0])


def test_transmit_pure_pilot_and_pure_data():
    config = cfg(delta=1.0)
    net = make_network(config, np.random.default_rng(3))
    asg = assign_pilots(config, "sp")
    s = crandn(np.random.default_rng(4), (config.L, config.K, config.tau_c))
    x = build_transmit("sp", asg, s, net, config)
    seqs = asg.book.seqs[asg.indices]
    assert np.allclose(x, np.sqrt(net.rho)[..., None] * seqs)   # delta = 1: pure pilot

    config0 = cfg(delta=0.0)
    net0 = make_network(config0, np.random.default_rng(3))
    x0 = build_transmit("sp", assign_pilots(config0, "sp"), s, net0, config0)
    assert np.allclose(x0, np.sqrt(net0.rho)[..., None] * s)    # delta = 0: pure data


def test_transmit_rp_energy_accounting():
    config = cfg(tau_c=4, tau_p=2)
    net = make_network(config, np.random.default_rng(5))
    rng = np.random.default_rng(6)
    s = crandn(rng, (config.L, config.K, 2))
    s /= np.abs(s)                                      # unit-energy symbols
    x = build_transmit("rp", asg := assign_pilots(config, "rp"), s, net, config)
    q, p = net.energies("rp")
    energy = np.sum(np.abs(x) ** 2, axis=-1)
    assert np.allclose(energy, 2 * q + 2 * p)


def test_receive_noiseless_impulse():
    # sigma = 0, single UE, x = scaled e_1: first column of Y is sqrt(q) h
    config = cfg(K=1)
    rng = np.random.default_rng(7)
    H = crandn(rng, (1, 1, 1, config.M))
    q = 0.3
    X = np.zeros((1, 1, config.tau_c), dtype=complex)
    X[0, 0, 0] = np.sqrt(q)
    Y = receive(H, X, 0.0, rng)
    assert np.allclose(Y[0, :, 0], np.sqrt(q) * H[0, 0, 0])
    assert np.allclose(Y[0, :, 1:], 0.0)


def test_receive_noise_only_statistics():
    config = cfg()
    rng = np.random.default_rng(8)
    H = np.zeros((1, 1, config.K, config.M), dtype=complex)
    X = np.zeros((1, config.K, config.tau_c), dtype=complex)
    sigma2 = 1.7e-3
    n_rep = 100_000 // (config.M * config.tau_c) + 1
    Y = np.stack([receive(H, X, sigma2, rng) for _ in range(n_rep)])
    var = np.mean(np.abs(Y) ** 2)
    assert abs(var - sigma2) <= 0.03 * sigma2


def test_reconstruction_identity_with_stored_noise():
    config = cfg(L=4, K=3, tau_p=3)
    net = make_network(config, np.random.default_rng(9))
    rng = np.random.default_rng(10)
    asg = assign_pilots(config, "rp")
    s = crandn(rng, (2, config.L, config.K, config.tau_d))
    R_sqrt = correlation_sqrt(net.R)
    H = draw_channels(R_sqrt, rng, n_blocks=2)
    X = build_transmit("rp", asg, s, net, config)
    Y, N = receive(H, X, config.noise_energy, rng, return_noise=True)
    resignal = np.einsum("...abkm,...bkt->...amt", H, X)
    assert np.allclose(Y - N, resignal, atol=1e-25)


def test_simulate_blocks_shapes_both_modes():
    config = cfg(L=3, K=2, tau_p=2)
    net = make_network(config, np.random.default_rng(11))
    rng = np.random.default_rng(12)
    for mode, n_data in (("rp", config.tau_d), ("sp", config.tau_c)):
        asg = assign_pilots(config, mode)
        data = crandn(rng, (5, config.L, config.K, n_data))
        blocks = simulate_blocks(mode, asg, data, net, config, rng)
        assert blocks.H.shape == (5, 3, 3, 2, config.M)
        assert blocks.X.shape == (5, 3, 2, config.tau_c)
        assert blocks.Y.shape == (5, 3, config.M, config.tau_c)
        assert blocks.n_blocks == 5


def test_transmit_rejects_wrong_data_length():
    config = cfg()
    net = make_network(config, np.random.default_rng(13))
    asg = assign_pilots(config, "rp")
    bad = np.zeros((config.L, config.K, config.tau_c))   # rp wants tau_d
    with pytest.raises(ValueError):
        build_transmit("rp", asg, bad, net, config)
