import math

import numpy as np
import pytest
from scipy import integrate

from uavcf.access import (AccessConfig, NegativeInterferenceWarning, PowerAllocation,
                          SinrStatistics, UnsupportedConfigurationError, assign_pilots,
                          effective_sinr, estimate_sinr_statistics, lmmse_estimate,
                          lmmse_precoder, spectral_efficiency, statistics_from_samples)
from uavcf.channels import ArrayGeometry, ChannelConfig, access_links
from uavcf.topology import TopologyConfig, generate_topology


def _cn(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2)


def test_pilots():
    np.testing.assert_array_equal(assign_pilots(8, 8), np.arange(8))
    np.testing.assert_array_equal(assign_pilots(1, 8), [0])
    with pytest.raises(UnsupportedConfigurationError):
        assign_pilots(9, 8)


def test_tau_and_noise():
    cfg = AccessConfig()
    assert cfg.tau_d == 184
    # 20 MHz * -174 dBm/Hz * 7 dB
    assert cfg.noise_power_w == pytest.approx(20e6 * 10 ** (-20.4) * 10 ** 0.7, rel=1e-12)


def test_scalar_lmmse():
    y = np.array([0.8 - 0.4j])
    h_hat, C = lmmse_estimate(y, np.eye(1), 1.0, 1, 1.0)
    np.testing.assert_allclose(h_hat, y / 2, rtol=1e-15)
    assert C[0, 0].real == pytest.approx(0.5)


def test_lmmse_limits(rng):
    A = _cn(rng, (3, 3))
    R = A @ A.conj().T
    h = A @ _cn(rng, 3)
    y = math.sqrt(0.2 * 4) * h
    h_hat, C = lmmse_estimate(y, R, 0.2, 4, 1e-14)
    np.testing.assert_allclose(h_hat, h, atol=1e-6 * np.linalg.norm(h))
    assert np.abs(C).max() < 1e-6
    h0, C0 = lmmse_estimate(y, np.zeros((3, 3)), 0.2, 4, 1.0)
    assert np.all(h0 == 0) and np.all(C0 == 0)


def test_lmmse_orthogonality(rng):
    A = _cn(rng, (2, 2))
    R = A @ A.conj().T
    n = 200_000
    h = _cn(rng, (n, 2)) @ A.T
    y = math.sqrt(0.5) * h + _cn(rng, (n, 2))
    h_hat, C = lmmse_estimate(y, R, 0.5, 1, 1.0)
    e = h - h_hat
    cross = np.einsum("ni,nj->ij", h_hat, e.conj()) / n
    assert np.abs(cross).max() < 5 / math.sqrt(n) * np.trace(R).real
    np.testing.assert_allclose(np.einsum("ni,nj->ij", e, e.conj()) / n, C,
                               atol=5 / math.sqrt(n) * np.trace(R).real)


def test_precoder_normalization_and_alignment(rng):
    h = _cn(rng, (5000, 3, 2, 4))
    C = np.zeros((3, 2, 4, 4), dtype=complex)
    w = lmmse_precoder(h, C, 0.1, 1e-3)
    np.testing.assert_allclose(np.mean(np.sum(np.abs(w) ** 2, axis=-1), axis=0), 1.0,
                               rtol=1e-12)
    # single UE, single antenna: h^T w real positive
    w1 = lmmse_precoder(h[:, :1, :1, :1], C[:1, :1, :1, :1], 0.1, 1e-3)
    z = h[:, 0, 0, 0] * w1[:, 0, 0, 0]
    assert np.all(z.real > 0) and np.abs(z.imag).max() < 1e-12


def test_precoder_mrt_limit(rng):
    h = _cn(rng, (10, 3, 4))
    w = lmmse_precoder(h, np.zeros((3, 4, 4)), 1.0, 1e12)
    cos = np.abs(np.einsum("nka,nka->nk", w, h)) / (np.linalg.norm(w, axis=-1)
                                                   * np.linalg.norm(h, axis=-1))
    assert cos.min() > 1 - 1e-9


def _rayleigh_oracle(g, p, s2):
    """b and C of a perfect-CSI single-antenna link, |h|^2 = g u with u ~ Exp(1).

    With ``r = p g / s2`` and ``I(a, c) = E{u^a / (r u + 1)^c}``:
    ``b = sqrt(g) I(1,1) / sqrt(I(1,2))`` and ``C = g I(2,2) / I(1,2)``.
    """
    r = p * g / s2

    def I(a, c):
        return integrate.quad(lambda u: math.exp(-u) * u ** a / (r * u + 1) ** c, 0, np.inf,
                              epsrel=1e-12)[0]

    return math.sqrt(g) * I(1, 1) / math.sqrt(I(1, 2)), g * I(2, 2) / I(1, 2)


def test_rayleigh_statistics_match_quadrature():
    topo = generate_topology(TopologyConfig(n_uavs=1, n_ues=1), 3)
    chan = ChannelConfig(access_array=ArrayGeometry(1, 1), rician_k_db=-300.0)
    acfg = AccessConfig()
    g = float(access_links(topo, chan).gain[0, 0])
    n = 100_000
    st = estimate_sinr_statistics(topo, chan, acfg, n, np.random.default_rng(4), perfect_csi=True)
    b_ref, c_ref = _rayleigh_oracle(g, acfg.pilot_power_w, acfg.noise_power_w)
    assert abs(st.b[0, 0] - b_ref) <= 3 * st.b_stderr[0, 0]
    assert st.C[0, 0, 0, 0].real == pytest.approx(c_ref, rel=0.02)


def _small_setup(seed=5, K=2, L=2, n_a=4):
    topo = generate_topology(TopologyConfig(n_uavs=L, n_ues=K), seed)
    chan = ChannelConfig(access_array=ArrayGeometry.square(n_a))
    return topo, chan, AccessConfig()


def test_statistics_invariants():
    topo, chan, acfg = _small_setup(K=3, L=3)
    st = estimate_sinr_statistics(topo, chan, acfg, 3000, np.random.default_rng(0))
    assert st.b.shape == (3, 3) and st.C.shape == (3, 3, 3, 3)
    assert np.all(st.b >= 0)
    for k in range(3):
        for i in range(3):
            Cki = st.C[k, i]
            assert np.abs(Cki - Cki.conj().T).max() <= 1e-10 * np.abs(Cki).max()
        D = st.C[k, k] - np.outer(st.b[k], st.b[k])
        assert np.linalg.eigvalsh(D).min() >= -1e-8 * np.trace(st.C[k, k]).real


def test_statistics_consistency_across_sample_sizes():
    topo, chan, acfg = _small_setup()
    a = estimate_sinr_statistics(topo, chan, acfg, 4000, np.random.default_rng(1))
    b = estimate_sinr_statistics(topo, chan, acfg, 8000, np.random.default_rng(2))
    assert np.all(np.abs(a.b - b.b) <= 3 * np.hypot(a.b_stderr, b.b_stderr) + 1e-300)


def test_zero_channels_give_zero_statistics():
    h = np.zeros((10, 2, 2, 3), dtype=complex)
    w = lmmse_precoder(h, np.zeros((2, 2, 3, 3)), 0.1, 1.0)
    st = statistics_from_samples(h, w, 1.0)
    assert np.all(st.b == 0) and np.all(st.C == 0)


def test_phase_rotation_invariance(rng):
    h = _cn(rng, (4000, 2, 2, 2))
    C0 = np.zeros((2, 2, 2, 2), dtype=complex)
    rot = h.copy()
    rot[:, 1] *= np.exp(1j * 0.7)
    s1 = statistics_from_samples(h, lmmse_precoder(h, C0, 0.1, 0.5), 0.5)
    s2 = statistics_from_samples(rot, lmmse_precoder(rot, C0, 0.1, 0.5), 0.5)
    alloc = np.array([[0.3, 0.7], [0.5, 0.2]])
    np.testing.assert_allclose(effective_sinr(s1, alloc), effective_sinr(s2, alloc), rtol=1e-10)


def test_held_out_sinr():
    topo, chan, acfg = _small_setup(seed=8, n_a=1)
    alloc = np.array([[0.6, 0.4], [0.3, 0.8]])
    fit = estimate_sinr_statistics(topo, chan, acfg, 20_000, np.random.default_rng(10))
    held = estimate_sinr_statistics(topo, chan, acfg, 20_000, np.random.default_rng(11))
    np.testing.assert_allclose(effective_sinr(fit, alloc), effective_sinr(held, alloc), rtol=0.05)


def _hand_stats():
    b = np.array([[1.0, 2.0], [0.5, 1.5]])
    C = np.zeros((2, 2, 2, 2))
    C[0, 0] = np.outer(b[0], b[0]) + np.diag([0.2, 0.1])
    C[1, 1] = np.outer(b[1], b[1]) + np.diag([0.3, 0.4])
    C[0, 1] = np.array([[0.1, 0.05], [0.05, 0.2]])
    C[1, 0] = np.array([[0.3, 0.0], [0.0, 0.1]])
    return SinrStatistics(b, C, 0.5, 100)


def test_effective_sinr_hand_example():
    st = _hand_stats()
    rho = np.array([[0.4, 0.3], [0.2, 0.6]])
    # UE 0: signal (0.4 + 0.6)^2 = 1; self variance 0.2*0.16 + 0.1*0.09 = 0.041;
    # cross rho_1^T C01 rho_1 = 0.1*0.04 + 2*0.05*0.12 + 0.2*0.36 = 0.088
    # UE 1: signal (0.1 + 0.9)^2 = 1; self 0.3*0.04 + 0.4*0.36 = 0.156;
    # cross 0.3*0.16 + 0.1*0.09 = 0.057
    expected = [1 / (0.041 + 0.088 + 0.5), 1 / (0.156 + 0.057 + 0.5)]
    np.testing.assert_allclose(effective_sinr(st, rho), expected, rtol=1e-12)


def test_effective_sinr_trivial_cases():
    st = _hand_stats()
    assert np.all(effective_sinr(st, np.zeros((2, 2))) == 0)
    b = st.b
    C = np.zeros_like(st.C)
    C[0, 0], C[1, 1] = np.outer(b[0], b[0]), np.outer(b[1], b[1])
    clean = SinrStatistics(b, C, 0.5, 100)
    rho = np.array([[0.4, 0.3], [0.2, 0.6]])
    np.testing.assert_allclose(effective_sinr(clean, rho),
                               np.einsum("kl,kl->k", b, rho) ** 2 / 0.5, rtol=1e-12)


def test_negative_interference_is_clamped():
    b = np.array([[1.0]])
    st = SinrStatistics(b, np.full((1, 1, 1, 1), 0.5), 1.0, 10)
    with pytest.warns(NegativeInterferenceWarning):
        g = effective_sinr(st, np.array([[1.0]]))
    assert g[0] == pytest.approx(1.0)


def test_spectral_efficiency():
    cfg = AccessConfig()
    assert spectral_efficiency(0.0, cfg) == 0.0
    assert spectral_efficiency(1.0, cfg) == pytest.approx(0.958333, abs=1e-4)
    assert spectral_efficiency(3.0, cfg) == pytest.approx(2 * 184 / 192, rel=1e-15)


def test_allocation_invariants():
    with pytest.raises(ValueError):
        PowerAllocation(np.array([[0.1, 0.2]]), np.array([1, 0]))
    with pytest.raises(ValueError):
        PowerAllocation(np.array([[-0.1, 0.2]]), np.array([1, 1]))
    a = PowerAllocation(np.array([[0.3, 0.0], [0.4, 0.0]]), np.array([1, 0]))
    np.testing.assert_allclose(a.per_uav_power, [0.25, 0.0])
    assert a.n_active == 1


def test_statistics_save_load(tmp_path):
    st = _hand_stats()
    st.save(tmp_path / "s.npz")
    back = SinrStatistics.load(tmp_path / "s.npz")
    assert np.array_equal(back.C, st.C) and back.noise_power == 0.5
