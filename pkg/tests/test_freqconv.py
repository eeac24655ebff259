"""Dynamic convolution forward kernels against hand cases and references."""

import math

import numpy as np
import pytest

from fredkit.freqconv import (
    AttentionParams,
    BasisKernelBank,
    SEParams,
    TwoLayerGate,
    fdy_forward,
    freq_attention,
    load_conv_weights,
    naive_oracle_forward,
    pfd_forward,
    random_attention,
    random_bank,
    random_partial_config,
    random_se_params,
    save_conv_weights,
    se_forward,
    tfwse_forward,
)
from oracles import scipy_dilated_conv


def rel_error(actual, expected):
    return np.abs(actual - expected).max() / max(np.abs(expected).max(), 1e-12)


class TestFreqAttention:
    def test_zero_head_gives_uniform(self):
        params = AttentionParams(
            w1=np.ones((3, 2)), b1=np.zeros(3), w2=np.zeros((4, 3)), b2=np.zeros(4)
        )
        x = np.random.default_rng(0).normal(size=(2, 5, 6))
        att = freq_attention(x, params)
        np.testing.assert_allclose(att, 0.25)

    def test_single_basis_is_all_ones(self):
        rng = np.random.default_rng(1)
        params = random_attention(rng, 2, 1)
        x = rng.normal(size=(2, 4, 5))
        np.testing.assert_allclose(freq_attention(x, params), 1.0)

    def test_hand_evaluated_softmax(self):
        params = AttentionParams(
            w1=np.array([[2.0]]),
            b1=np.array([-0.5]),
            w2=np.array([[1.0], [-1.0]]),
            b2=np.array([0.1, 0.0]),
            temperature=2.0,
        )
        x = np.array([[[0.0, 1.0]]])  # C_in=1, T=1, F=2
        att = freq_attention(x, params)

        def softmax2(l0, l1):
            e0, e1 = math.exp(l0 / 2.0), math.exp(l1 / 2.0)
            return e0 / (e0 + e1), e1 / (e0 + e1)

        # f=0: h=relu(-0.5)=0 -> logits (0.1, 0); f=1: h=1.5 -> logits (1.6, -1.5)
        np.testing.assert_allclose(att[:, 0], softmax2(0.1, 0.0), atol=1e-12)
        np.testing.assert_allclose(att[:, 1], softmax2(1.6, -1.5), atol=1e-12)

    def test_columns_sum_to_one_and_positive(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            params = random_attention(rng, 3, 4)
            x = rng.normal(size=(3, 6, 9))
            att = freq_attention(x, params)
            np.testing.assert_allclose(att.sum(axis=0), 1.0, atol=1e-9)
            assert (att > 0.0).all() and (att < 1.0).all()


class TestFdyForward:
    def test_one_hot_attention_collapses_to_dilated_conv(self):
        rng = np.random.default_rng(3)
        for dilation in (1, 2, 3):
            bank = random_bank(rng, 3, 2, 2, (dilation, dilation, dilation))
            x = rng.normal(size=(2, 5, 8))
            for k in range(3):
                att = np.zeros((3, 8))
                att[k] = 1.0
                out = fdy_forward(x, bank, att)
                ref = scipy_dilated_conv(x, bank.kernels[k], bank.biases[k], dilation)
                assert np.abs(out - ref).max() <= 1e-9

    def test_uniform_attention_is_mean_of_basis_outputs(self):
        rng = np.random.default_rng(4)
        bank = random_bank(rng, 2, 2, 2, (1, 2))
        x = rng.normal(size=(2, 4, 7))
        att = np.full((2, 7), 0.5)
        out = fdy_forward(x, bank, att)
        per_basis = [
            scipy_dilated_conv(x, bank.kernels[k], bank.biases[k], bank.freq_dilations[k])
            for k in range(2)
        ]
        np.testing.assert_allclose(out, (per_basis[0] + per_basis[1]) / 2.0, atol=1e-9)

    def test_matches_oracle_on_random_cases(self):
        rng = np.random.default_rng(5)
        for _ in range(25):
            num_basis = int(rng.choice([1, 2, 4]))
            dilations = tuple(int(d) for d in rng.integers(1, 4, size=num_basis))
            c_in = int(rng.integers(1, 4))
            c_dyn = int(rng.integers(1, 4))
            bank = random_bank(rng, num_basis, c_dyn, c_in, dilations)
            params = random_attention(rng, c_in, num_basis)
            x = rng.normal(size=(c_in, int(rng.integers(1, 8)), int(rng.integers(4, 10))))
            att = freq_attention(x, params)
            assert rel_error(fdy_forward(x, bank, att), naive_oracle_forward(x, bank, att)) <= 1e-6

    def test_spec_case_shape(self):
        rng = np.random.default_rng(6)
        bank = random_bank(rng, 4, 3, 2, (1, 1, 2, 3))
        params = random_attention(rng, 2, 4)
        x = rng.normal(size=(2, 5, 6))
        att = freq_attention(x, params)
        out = fdy_forward(x, bank, att)
        assert out.shape == (3, 5, 6)
        assert rel_error(out, naive_oracle_forward(x, bank, att)) <= 1e-6

    def test_attention_columns_must_sum_to_one(self):
        rng = np.random.default_rng(7)
        bank = random_bank(rng, 2, 1, 1, (1, 1))
        x = rng.normal(size=(1, 3, 5))
        with pytest.raises(ValueError, match="sum to 1"):
            fdy_forward(x, bank, np.full((2, 5), 0.7))

    def test_oversized_dilation_rejected(self):
        rng = np.random.default_rng(8)
        bank = random_bank(rng, 1, 1, 1, (9,))
        x = rng.normal(size=(1, 3, 5))
        with pytest.raises(ValueError, match="dilation"):
            fdy_forward(x, bank, np.ones((1, 5)))


class TestNaiveOracle:
    def test_zero_input_gives_attention_weighted_bias(self):
        rng = np.random.default_rng(9)
        bank = random_bank(rng, 3, 2, 1, (1, 2, 3))
        params = random_attention(rng, 1, 3)
        x = np.zeros((1, 4, 6))
        att = freq_attention(x, params)
        out = naive_oracle_forward(x, bank, att)
        expected = np.einsum("kf,kc->cf", att, bank.biases)[:, None, :] * np.ones((1, 4, 1))
        np.testing.assert_allclose(out, expected, atol=1e-12)

    def test_center_tap_kernel_mixes_channels_pointwise(self):
        # All bases equal, only the center tap set: output = center @ input.
        center = np.array([[0.5, -1.0], [2.0, 0.25]])
        kernels = np.zeros((2, 2, 2, 3, 3))
        kernels[:, :, :, 1, 1] = center
        bank = BasisKernelBank(kernels, np.zeros((2, 2)), (1, 2))
        rng = np.random.default_rng(10)
        x = rng.normal(size=(2, 3, 5))
        att = np.full((2, 5), 0.5)
        out = naive_oracle_forward(x, bank, att)
        np.testing.assert_allclose(out, np.einsum("oc,ctf->otf", center, x), atol=1e-12)


class TestPfdForward:
    def test_proportion_zero_is_pure_static_conv(self):
        rng = np.random.default_rng(11)
        cfg, _ = random_partial_config(rng, 0.0, 4, 2)
        x = rng.normal(size=(2, 4, 6))
        out = pfd_forward(x, cfg, None, None)
        ref = scipy_dilated_conv(x, cfg.static_kernel, cfg.static_bias, 1)
        assert out.shape == (4, 4, 6)
        np.testing.assert_allclose(out, ref, atol=1e-9)

    def test_proportion_one_is_pure_dynamic(self):
        rng = np.random.default_rng(12)
        cfg, c_dyn = random_partial_config(rng, 1.0, 3, 2)
        bank = random_bank(rng, 2, c_dyn, 2, (1, 2))
        params = random_attention(rng, 2, 2)
        x = rng.normal(size=(2, 4, 6))
        out = pfd_forward(x, cfg, bank, params)
        np.testing.assert_array_equal(out, fdy_forward(x, bank, freq_attention(x, params)))

    def test_one_eighth_split(self):
        rng = np.random.default_rng(13)
        cfg, c_dyn = random_partial_config(rng, 1.0 / 8.0, 8, 2)
        assert c_dyn == 1
        assert cfg.static_channels == 7
        bank = random_bank(rng, 4, 1, 2, (1, 1, 2, 3))
        params = random_attention(rng, 2, 4)
        x = rng.normal(size=(2, 4, 6))
        out = pfd_forward(x, cfg, bank, params)
        assert out.shape == (8, 4, 6)
        # Static channels first, dynamic channel last.
        np.testing.assert_allclose(
            out[:7], scipy_dilated_conv(x, cfg.static_kernel, cfg.static_bias, 1), atol=1e-9
        )
        np.testing.assert_array_equal(out[7:], fdy_forward(x, bank, freq_attention(x, params)))

    def test_zero_dynamic_with_bank_is_configuration_error(self):
        rng = np.random.default_rng(14)
        cfg, _ = random_partial_config(rng, 0.0, 8, 2)
        bank = random_bank(rng, 2, 1, 2, (1, 1))
        params = random_attention(rng, 2, 2)
        x = rng.normal(size=(2, 4, 6))
        with pytest.raises(ValueError):
            pfd_forward(x, cfg, bank, params)

    def test_pdfd_matches_oracle(self):
        rng = np.random.default_rng(15)
        cfg, c_dyn = random_partial_config(rng, 0.25, 8, 2)
        bank = random_bank(rng, 4, c_dyn, 2, (1, 1, 2, 3))
        params = random_attention(rng, 2, 4)
        x = rng.normal(size=(2, 5, 7))
        att = freq_attention(x, params)
        static_bank = BasisKernelBank(
            cfg.static_kernel[None], cfg.static_bias[None], (1,)
        )
        expected = np.concatenate(
            [
                naive_oracle_forward(x, static_bank, np.ones((1, 7))),
                naive_oracle_forward(x, bank, att),
            ]
        )
        assert rel_error(pfd_forward(x, cfg, bank, params), expected) <= 1e-6


def hand_gate(n, hidden_w, hidden_b, out_w, out_b):
    return TwoLayerGate(
        np.asarray(hidden_w, dtype=float),
        np.asarray(hidden_b, dtype=float),
        np.asarray(out_w, dtype=float),
        np.asarray(out_b, dtype=float),
    )


class TestSqueezeExcitation:
    def test_zero_logits_halve_the_input(self):
        gate = hand_gate(2, np.zeros((1, 2)), [0.0], np.zeros((2, 1)), [0.0, 0.0])
        params = SEParams(gate, hand_gate(4, np.zeros((1, 4)), [0.0], np.zeros((4, 1)), np.zeros(4)))
        x = np.random.default_rng(16).normal(size=(2, 3, 4))
        np.testing.assert_allclose(se_forward(x, params), x / 2.0)
        np.testing.assert_allclose(tfwse_forward(x, params), x / 2.0)

    def test_saturated_gate_passes_input_through(self):
        gate = hand_gate(2, np.zeros((1, 2)), [1.0], np.zeros((2, 1)), [1000.0, 1000.0])
        params = SEParams(gate, hand_gate(4, np.zeros((1, 4)), [0.0], np.zeros((4, 1)), np.zeros(4)))
        x = np.random.default_rng(17).normal(size=(2, 3, 4))
        np.testing.assert_allclose(se_forward(x, params), x, atol=1e-12)

    def test_channel_se_hand_case(self):
        # C=2, hidden=1: w1=[1, -1], b1=0.5, w2=[2, -1]^T, b2=(0.3, -0.2).
        gate = hand_gate(2, [[1.0, -1.0]], [0.5], [[2.0], [-1.0]], [0.3, -0.2])
        params = SEParams(gate, hand_gate(3, np.zeros((1, 3)), [0.0], np.zeros((3, 1)), np.zeros(3)))
        x = np.zeros((2, 2, 3))
        x[0] = 1.0  # channel means: (1, 0)
        x[1] = 0.0
        hidden = max(1.0 * 1.0 + (-1.0) * 0.0 + 0.5, 0.0)  # 1.5
        g0 = 1.0 / (1.0 + math.exp(-(2.0 * hidden + 0.3)))
        g1 = 1.0 / (1.0 + math.exp(-(-1.0 * hidden - 0.2)))
        out = se_forward(x, params)
        np.testing.assert_allclose(out[0], g0 * 1.0, atol=1e-12)
        np.testing.assert_allclose(out[1], g1 * 0.0, atol=1e-12)

    def test_tfwse_hand_case(self):
        # F=3, hidden=1: squeeze over channels, shared MLP over frames.
        tfw = hand_gate(3, [[1.0, 0.0, -1.0]], [0.0], [[1.0], [2.0], [-1.0]], [0.0, -0.5, 0.25])
        params = SEParams(hand_gate(1, np.zeros((1, 1)), [0.0], np.zeros((1, 1)), [0.0]), tfw)
        x = np.array([[[1.0, 2.0, 3.0], [4.0, 0.0, 0.0]]])  # C=1, T=2, F=3
        out = tfwse_forward(x, params)
        for t, z in enumerate(([1.0, 2.0, 3.0], [4.0, 0.0, 0.0])):
            hidden = max(z[0] - z[2], 0.0)
            logits = [hidden * 1.0 + 0.0, hidden * 2.0 - 0.5, hidden * -1.0 + 0.25]
            for f in range(3):
                gate = 1.0 / (1.0 + math.exp(-logits[f]))
                assert out[0, t, f] == pytest.approx(gate * x[0, t, f], abs=1e-12)

    def test_tfwse_constant_over_time_gate(self):
        rng = np.random.default_rng(18)
        params = random_se_params(rng, 2, 5)
        frame = rng.normal(size=(2, 1, 5))
        x = np.repeat(frame, 4, axis=1)
        out = tfwse_forward(x, params)
        for t in range(1, 4):
            np.testing.assert_allclose(out[:, t, :], out[:, 0, :])

    def test_gates_open_interval_and_zero_maps_to_zero(self):
        rng = np.random.default_rng(19)
        params = random_se_params(rng, 3, 6)
        x = rng.normal(size=(3, 4, 6))
        for fn in (se_forward, tfwse_forward):
            out = fn(x, params)
            assert out.shape == x.shape
            nonzero = x != 0
            ratio = np.abs(out[nonzero] / x[nonzero])
            assert (ratio > 0.0).all() and (ratio < 1.0).all()
            np.testing.assert_array_equal(fn(np.zeros_like(x), params), np.zeros_like(x))


class TestWeightFiles:
    def test_save_load_round_trip(self, tmp_path):
        rng = np.random.default_rng(20)
        bank = random_bank(rng, 4, 2, 3, (1, 1, 2, 3))
        params = random_attention(rng, 3, 4, temperature=17.0)
        cfg, _ = random_partial_config(rng, 0.25, 8, 3)
        path = tmp_path / "weights.json"
        save_conv_weights(path, bank, params, cfg)
        bank2, params2, cfg2 = load_conv_weights(path)
        np.testing.assert_array_equal(bank2.kernels, bank.kernels)
        np.testing.assert_array_equal(bank2.biases, bank.biases)
        assert bank2.freq_dilations == bank.freq_dilations
        np.testing.assert_array_equal(params2.w1, params.w1)
        np.testing.assert_array_equal(params2.w2, params.w2)
        assert params2.temperature == 17.0
        assert cfg2 is not None and cfg2.proportion == 0.25
        np.testing.assert_array_equal(cfg2.static_kernel, cfg.static_kernel)

    def test_forward_identical_after_reload(self, tmp_path):
        rng = np.random.default_rng(21)
        bank = random_bank(rng, 2, 2, 2, (1, 2))
        params = random_attention(rng, 2, 2)
        path = tmp_path / "weights.json"
        save_conv_weights(path, bank, params)
        bank2, params2, cfg2 = load_conv_weights(path)
        assert cfg2 is None
        x = rng.normal(size=(2, 4, 6))
        att = freq_attention(x, params2)
        np.testing.assert_array_equal(
            fdy_forward(x, bank, freq_attention(x, params)), fdy_forward(x, bank2, att)
        )
