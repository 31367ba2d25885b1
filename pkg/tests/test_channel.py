"""Tests for channel generation, precoding, and the error model."""

import numpy as np
import pytest

from eesm_kit.channel import (
    ChannelConfig,
    ErrorModel,
    default_sigma_e2,
    generate_channel,
    inject_error,
    svd_precoder,
    tap_powers,
    zmcscg,
)
from eesm_kit.linalg import conj_transpose, frobenius_norm
from eesm_kit.seeds import packet_rng


class TestChannelConfig:
    def test_defaults(self):
        cfg = ChannelConfig()
        assert (cfg.n_t, cfg.n_r, cfg.n_s, cfg.n_sc) == (2, 2, 2, 242)

    @pytest.mark.parametrize("kwargs", [
        {"n_t": 1, "n_r": 1, "n_s": 2},   # n_s > min(n_t, n_r)
        {"n_s": 0},
        {"n_sc": 0},
        {"n_taps": 0},
        {"decay": -1.0},
    ])
    def test_validation(self, kwargs):
        with pytest.raises(ValueError):
            ChannelConfig(**kwargs)


class TestTapPowers:
    def test_uniform_pdp(self):
        assert np.allclose(tap_powers(4, 0.0), [0.25, 0.25, 0.25, 0.25])

    def test_normalized_and_decaying(self):
        p = tap_powers(8, 0.5)
        assert np.isclose(p.sum(), 1.0)
        assert np.all(np.diff(p) < 0)


class TestGenerateChannel:
    def test_deterministic(self):
        cfg = ChannelConfig(n_sc=16, seed=3)
        a = generate_channel(cfg, 7)
        b = generate_channel(cfg, 7)
        assert np.array_equal(a.h, b.h)
        assert np.array_equal(a.f, b.f)

    def test_packets_independent(self):
        cfg = ChannelConfig(n_sc=4)
        a = generate_channel(cfg, 0)
        b = generate_channel(cfg, 1)
        assert not np.allclose(a.h, b.h)

    def test_single_tap_is_flat(self):
        cfg = ChannelConfig(n_sc=32, n_taps=1)
        ch = generate_channel(cfg, 0)
        assert np.allclose(ch.h, ch.h[0])

    def test_frequency_selective_for_multiple_taps(self):
        for seed in range(5):
            cfg = ChannelConfig(n_sc=32, n_taps=4, decay=0.5, seed=seed)
            h = generate_channel(cfg, 0).h
            diffs = [frobenius_norm(h[i] - h[j])
                     for i in range(0, 32, 8) for j in range(0, 32, 8) if i != j]
            assert max(diffs) > 0

    def test_unit_entry_variance(self):
        # Monte Carlo of the PDP normalization over 1e5 packets.
        cfg = ChannelConfig(n_t=2, n_r=2, n_s=1, n_sc=1, n_taps=4, decay=0.5,
                            seed=0)
        acc = 0.0
        n = 100_000
        for k in range(n):
            acc += np.sum(np.abs(generate_channel(cfg, k).h) ** 2)
        var = acc / (4 * n)
        assert abs(var - 1.0) < 0.02

    def test_shapes(self):
        cfg = ChannelConfig(n_t=3, n_r=2, n_s=2, n_sc=8)
        ch = generate_channel(cfg, 0)
        assert ch.h.shape == (8, 2, 3)
        assert ch.f.shape == (8, 3, 2)


class TestSvdPrecoder:
    def test_dominant_direction_of_diagonal(self):
        f = svd_precoder(np.diag([3.0, 1.0]), 1)
        # phase convention makes this exactly e1
        assert np.allclose(f, [[1.0], [0.0]])

    def test_full_basis_is_unitary(self):
        rng = np.random.default_rng(0)
        h = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        f = svd_precoder(h, 2)
        assert np.allclose(conj_transpose(f) @ f, np.eye(2), atol=1e-12)

    def test_captures_largest_singular_value(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            h = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
            f = svd_precoder(h, 1)
            s_max = np.linalg.svd(h, compute_uv=False)[0]
            assert np.isclose(frobenius_norm(h @ f) ** 2, s_max ** 2)

    def test_orthonormal_columns_batched(self):
        rng = np.random.default_rng(2)
        h = rng.standard_normal((5, 3, 3)) + 1j * rng.standard_normal((5, 3, 3))
        f = svd_precoder(h, 2)
        assert np.allclose(conj_transpose(f) @ f,
                           np.broadcast_to(np.eye(2), (5, 2, 2)), atol=1e-12)

    def test_phase_convention(self):
        rng = np.random.default_rng(3)
        h = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        f = svd_precoder(h, 2)
        for col in range(2):
            pivot = np.argmax(np.abs(f[:, col]))
            val = f[pivot, col]
            assert abs(val.imag) < 1e-12 and val.real >= 0

    def test_zero_channel_raises(self):
        with pytest.raises(ValueError):
            svd_precoder(np.zeros((2, 2)), 1)

    def test_too_many_streams_raises(self):
        with pytest.raises(ValueError):
            svd_precoder(np.eye(2), 3)


class TestInjectError:
    def test_zero_variance_identity(self):
        h = np.eye(2, dtype=complex)
        h_hat, delta = inject_error(h, ErrorModel(0.0), packet_rng(0, 0, 1))
        assert np.array_equal(h_hat, h)
        assert np.all(delta == 0)

    def test_negative_variance_rejected(self):
        with pytest.raises(ValueError):
            ErrorModel(-0.1)

    def test_empirical_variance(self):
        # 1e6 error entries -> per-entry variance within 1%
        rng = np.random.default_rng(0)
        sigma_e2 = 0.04
        _, delta = inject_error(
            np.zeros((250_000, 2, 2), dtype=complex), ErrorModel(sigma_e2), rng)
        var = np.mean(np.abs(delta) ** 2)
        assert abs(var / sigma_e2 - 1.0) < 0.01

    def test_circular_symmetry(self):
        # real and imaginary parts each carry variance sigma_e2 / 2
        rng = np.random.default_rng(1)
        sigma_e2 = 0.09
        _, delta = inject_error(
            np.zeros((100_000, 2, 2), dtype=complex), ErrorModel(sigma_e2), rng)
        n = delta.size
        se = np.sqrt(2.0 / n) * sigma_e2 / 2  # SE of a chi^2 variance estimate
        assert abs(np.var(delta.real) - sigma_e2 / 2) < 5 * se
        assert abs(np.var(delta.imag) - sigma_e2 / 2) < 5 * se

    def test_trace_identity(self):
        # E[dH A dH*] == sigma_e2 tr(A) I within 5 MC standard errors
        rng = np.random.default_rng(2)
        sigma_e2 = 0.04
        a = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        _, delta = inject_error(
            np.zeros((100_000, 2, 2), dtype=complex), ErrorModel(sigma_e2), rng)
        samples = delta @ a @ conj_transpose(delta)
        est = samples.mean(axis=0)
        se_re = samples.real.std(axis=0, ddof=1) / np.sqrt(len(samples))
        se_im = samples.imag.std(axis=0, ddof=1) / np.sqrt(len(samples))
        ref = sigma_e2 * np.trace(a) * np.eye(2)
        assert np.all(np.abs((est - ref).real) < 5 * se_re)
        assert np.all(np.abs((est - ref).imag) < 5 * se_im)


class TestDefaultSigmaE2:
    def test_paper_rule_values(self):
        assert np.isclose(default_sigma_e2(2, 10.0), 0.05)
        assert np.isclose(default_sigma_e2(1, 1.0), 1.0)
        assert abs(default_sigma_e2(4, 10 ** 1.7) - 0.0049881) < 1e-6

    def test_invalid_snr(self):
        with pytest.raises(ValueError):
            default_sigma_e2(2, 0.0)


class TestZmcscg:
    def test_shape_and_mean(self):
        rng = np.random.default_rng(4)
        z = zmcscg(rng, (50_000,), 2.0)
        assert z.shape == (50_000,)
        assert abs(z.mean()) < 0.02
        assert abs(np.mean(np.abs(z) ** 2) - 2.0) < 0.05
