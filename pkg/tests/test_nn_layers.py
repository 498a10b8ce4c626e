"""Layers against naive loop oracles and finite differences."""

import numpy as np
import pytest

from mutualgaze.nn import (
    Conv3D,
    Dense,
    Tensor,
    conv3d,
    dense,
    dropout,
    l2_normalize,
    relu,
    softmax,
)
from mutualgaze.nn.gradcheck import gradient_check

TOL = 1e-6


def leaf(data, name="w"):
    return Tensor(np.asarray(data, dtype=np.float64), requires_grad=True,
                  name=name)


def conv3d_oracle(x, w, b, stride, padding):
    """Direct nested-loop cross-correlation; the reference the fast
    im2col implementation is checked against."""
    kt, kh, kw, c_in, c_out = w.shape
    st, sh, sw = stride
    pt, ph, pw = padding
    n, t, h, wi, _ = x.shape
    xp = np.pad(x, ((0, 0), (pt, pt), (ph, ph), (pw, pw), (0, 0)))
    t_out = (t + 2 * pt - kt) // st + 1
    h_out = (h + 2 * ph - kh) // sh + 1
    w_out = (wi + 2 * pw - kw) // sw + 1
    out = np.zeros((n, t_out, h_out, w_out, c_out))
    for ni in range(n):
        for to in range(t_out):
            for ho in range(h_out):
                for wo in range(w_out):
                    patch = xp[ni,
                               to * st:to * st + kt,
                               ho * sh:ho * sh + kh,
                               wo * sw:wo * sw + kw]
                    for co in range(c_out):
                        out[ni, to, ho, wo, co] = np.sum(
                            patch * w[:, :, :, :, co])
    if b is not None:
        out += b
    return out


class TestConv3dForward:
    @pytest.mark.parametrize("shape,kernel,stride,padding", [
        ((2, 4, 5, 5, 3), (3, 3, 3), (1, 1, 1), (1, 1, 1)),
        ((1, 4, 6, 6, 2), (3, 3, 3), (2, 2, 2), (1, 1, 1)),
        ((2, 5, 5, 5, 2), (1, 3, 3), (1, 2, 2), (0, 1, 1)),
        ((1, 1, 6, 6, 2), (1, 3, 3), (1, 1, 1), (0, 1, 1)),
        ((2, 4, 4, 4, 1), (2, 2, 2), (1, 1, 1), (0, 0, 0)),
    ])
    def test_matches_loop_oracle(self, shape, kernel, stride, padding):
        rng = np.random.default_rng(7)
        x = rng.standard_normal(shape)
        w = rng.standard_normal(kernel + (shape[-1], 4))
        b = rng.standard_normal(4)
        got = conv3d(leaf(x, "x"), leaf(w, "w"), leaf(b, "b"),
                     stride=stride, padding=padding)
        want = conv3d_oracle(x, w, b, stride, padding)
        np.testing.assert_allclose(got.data, want, atol=1e-10)

    def test_default_padding_preserves_size_at_stride_one(self):
        x = leaf(np.zeros((1, 4, 8, 8, 2)), "x")
        w = leaf(np.zeros((3, 3, 3, 2, 5)), "w")
        assert conv3d(x, w).shape == (1, 4, 8, 8, 5)

    def test_channel_mismatch_rejected(self):
        x = leaf(np.zeros((1, 4, 8, 8, 2)), "x")
        w = leaf(np.zeros((3, 3, 3, 3, 5)), "w")
        with pytest.raises(ValueError):
            conv3d(x, w)

    def test_kernel_larger_than_input_rejected(self):
        x = leaf(np.zeros((1, 2, 4, 4, 1)), "x")
        w = leaf(np.zeros((5, 3, 3, 1, 2)), "w")
        with pytest.raises(ValueError):
            conv3d(x, w, padding=(0, 1, 1))

    def test_fuse_relu_forward(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((1, 2, 4, 4, 2))
        w = rng.standard_normal((3, 3, 3, 2, 3))
        plain = conv3d(leaf(x, "x"), leaf(w, "w"))
        fused = conv3d(leaf(x, "x"), leaf(w, "w"), fuse_relu=True)
        np.testing.assert_allclose(fused.data, np.maximum(plain.data, 0),
                                   atol=1e-12)


class TestConv3dBackward:
    @pytest.mark.parametrize("stride,padding,fuse", [
        ((1, 1, 1), (1, 1, 1), False),
        ((2, 2, 2), (1, 1, 1), False),
        ((1, 2, 2), (0, 1, 1), False),
        ((1, 1, 1), (1, 1, 1), True),
    ])
    def test_gradients(self, stride, padding, fuse):
        rng = np.random.default_rng(11)
        kt = 3 if padding[0] else 1
        x = leaf(rng.standard_normal((2, 3, 5, 5, 2)), "x")
        w = leaf(rng.standard_normal((kt, 3, 3, 2, 3)) * 0.5, "w")
        b = leaf(rng.standard_normal(3) * 0.1, "b")

        def build():
            out = conv3d(x, w, b, stride=stride, padding=padding,
                         fuse_relu=fuse)
            return (out * out).sum()

        report = gradient_check(build, [x, w, b], max_entries=24,
                                rng=np.random.default_rng(0))
        assert max(report.values()) <= 1e-5, report

    def test_input_gradient_skipped_for_constant_input(self):
        rng = np.random.default_rng(5)
        x = Tensor(rng.standard_normal((1, 2, 4, 4, 2)))
        w = leaf(rng.standard_normal((3, 3, 3, 2, 2)), "w")
        out = conv3d(x, w)
        out.sum().backward()
        assert x.grad is None
        assert w.grad is not None

    def test_overlapping_windows_accumulate(self):
        # stride 1 with a 3-wide kernel: interior inputs feed 3 outputs
        x = leaf(np.ones((1, 1, 1, 5, 1)), "x")
        w = leaf(np.ones((1, 1, 3, 1, 1)), "w")
        out = conv3d(x, w, padding=(0, 0, 1))
        out.sum().backward()
        np.testing.assert_array_equal(
            x.grad.ravel(), [2.0, 3.0, 3.0, 3.0, 2.0])


class TestDense:
    def test_forward(self):
        x = leaf([[1.0, 2.0]], "x")
        w = leaf([[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]], "w")
        b = leaf([0.5, -0.5, 0.0], "b")
        np.testing.assert_allclose(dense(x, w, b).data,
                                   [[1.5, 1.5, 3.0]])

    def test_gradients(self):
        rng = np.random.default_rng(2)
        x = leaf(rng.standard_normal((4, 3)), "x")
        w = leaf(rng.standard_normal((3, 5)), "w")
        b = leaf(rng.standard_normal(5), "b")
        report = gradient_check(
            lambda: (dense(x, w, b).tanh()).sum(), [x, w, b],
            rng=np.random.default_rng(0))
        assert max(report.values()) <= TOL, report

    def test_no_bias(self):
        x = leaf([[1.0, 2.0]], "x")
        w = leaf([[3.0], [4.0]], "w")
        np.testing.assert_allclose(dense(x, w).data, [[11.0]])


class TestRelu:
    def test_forward(self):
        x = leaf([[-1.0, 0.0, 2.0]], "x")
        np.testing.assert_array_equal(relu(x).data, [[0.0, 0.0, 2.0]])

    def test_gradient_masks_negatives(self):
        x = leaf([[-1.0, 3.0]], "x")
        relu(x).sum().backward()
        np.testing.assert_array_equal(x.grad, [[0.0, 1.0]])

    def test_gradcheck_away_from_kink(self):
        rng = np.random.default_rng(4)
        vals = rng.standard_normal((3, 4))
        vals[np.abs(vals) < 0.1] = 0.5  # keep fd away from the kink
        x = leaf(vals, "x")
        report = gradient_check(lambda: (relu(x) * relu(x)).sum(), [x],
                                rng=np.random.default_rng(0))
        assert max(report.values()) <= TOL, report


class TestSoftmax:
    def test_rows_sum_to_one(self):
        rng = np.random.default_rng(6)
        x = leaf(rng.standard_normal((5, 4)), "x")
        s = softmax(x)
        np.testing.assert_allclose(s.data.sum(axis=1), np.ones(5),
                                   atol=1e-12)

    def test_uniform_logits(self):
        x = leaf(np.zeros((1, 4)), "x")
        np.testing.assert_allclose(softmax(x).data, np.full((1, 4), 0.25))

    def test_stable_for_large_logits(self):
        x = leaf([[1000.0, 0.0]], "x")
        s = softmax(x)
        assert np.all(np.isfinite(s.data))
        assert s.data[0, 0] == pytest.approx(1.0)

    def test_shift_invariance(self):
        rng = np.random.default_rng(8)
        v = rng.standard_normal((3, 4))
        a = softmax(leaf(v)).data
        b = softmax(leaf(v + 100.0)).data
        np.testing.assert_allclose(a, b, atol=1e-12)

    def test_gradients(self):
        rng = np.random.default_rng(9)
        x = leaf(rng.standard_normal((3, 4)), "x")
        t = rng.standard_normal((3, 4))
        report = gradient_check(lambda: (softmax(x) * t).sum(), [x],
                                rng=np.random.default_rng(0))
        assert max(report.values()) <= TOL, report


class TestL2Normalize:
    def test_unit_norm_rows(self):
        rng = np.random.default_rng(10)
        x = leaf(rng.standard_normal((4, 6)), "x")
        out = l2_normalize(x)
        np.testing.assert_allclose(
            np.linalg.norm(out.data, axis=1), np.ones(4), atol=1e-12)

    def test_known_value(self):
        x = leaf([[3.0, 4.0]], "x")
        np.testing.assert_allclose(l2_normalize(x).data, [[0.6, 0.8]])

    def test_zero_row_strict_raises(self):
        x = leaf([[0.0, 0.0], [1.0, 0.0]], "x")
        with pytest.raises(ValueError):
            l2_normalize(x)

    def test_zero_row_lenient_passes_through(self):
        x = leaf([[0.0, 0.0], [3.0, 4.0]], "x")
        out = l2_normalize(x, strict=False)
        np.testing.assert_allclose(out.data, [[0.0, 0.0], [0.6, 0.8]])

    def test_gradients(self):
        rng = np.random.default_rng(12)
        x = leaf(rng.standard_normal((3, 5)) + 2.0, "x")
        t = rng.standard_normal((3, 5))
        report = gradient_check(lambda: (l2_normalize(x) * t).sum(), [x],
                                rng=np.random.default_rng(0))
        assert max(report.values()) <= TOL, report

    def test_scale_invariance(self):
        rng = np.random.default_rng(13)
        v = rng.standard_normal((2, 4))
        a = l2_normalize(leaf(v)).data
        b = l2_normalize(leaf(7.5 * v)).data
        np.testing.assert_allclose(a, b, atol=1e-12)


class TestDropout:
    def test_eval_mode_is_identity(self):
        x = leaf(np.ones((4, 4)))
        out = dropout(x, 0.5, np.random.default_rng(0), training=False)
        assert out is x

    def test_zero_rate_is_identity(self):
        x = leaf(np.ones((4, 4)))
        out = dropout(x, 0.0, np.random.default_rng(0), training=True)
        assert out is x

    def test_surviving_units_scaled(self):
        x = leaf(np.ones((100, 100)))
        out = dropout(x, 0.5, np.random.default_rng(0), training=True)
        vals = np.unique(out.data)
        np.testing.assert_allclose(vals, [0.0, 2.0])
        # expectation preserved within sampling error
        assert out.data.mean() == pytest.approx(1.0, abs=0.05)

    def test_invalid_rate(self):
        x = leaf(np.ones(3))
        with pytest.raises(ValueError):
            dropout(x, 1.0, np.random.default_rng(0), training=True)

    def test_gradient_uses_same_mask(self):
        x = leaf(np.ones((2, 8)))
        out = dropout(x, 0.5, np.random.default_rng(3), training=True)
        out.sum().backward()
        np.testing.assert_allclose(x.grad, out.data)

    def test_gradcheck_with_frozen_mask(self):
        x = leaf(np.random.default_rng(1).standard_normal((3, 6)), "x")

        def build():
            out = dropout(x, 0.4, np.random.default_rng(99), training=True)
            return (out * out).sum()

        report = gradient_check(build, [x], rng=np.random.default_rng(0))
        assert max(report.values()) <= TOL, report


class TestLayerClasses:
    def test_conv_layer_init_statistics(self):
        layer = Conv3D("c", 8, 16, rng=np.random.default_rng(0))
        fan_in = 3 * 3 * 3 * 8
        assert layer.w.shape == (3, 3, 3, 8, 16)
        assert layer.w.data.std() == pytest.approx(np.sqrt(2 / fan_in),
                                                   rel=0.1)
        np.testing.assert_array_equal(layer.b.data, np.zeros(16))
        assert layer.w.name == "c.w" and layer.b.name == "c.b"
        assert layer.params == [layer.w, layer.b]

    def test_dense_layer_init_statistics(self):
        layer = Dense("fc", 128, 64, rng=np.random.default_rng(0))
        assert layer.w.shape == (128, 64)
        assert layer.w.data.std() == pytest.approx(np.sqrt(2 / 128),
                                                   rel=0.1)
        assert layer.params == [layer.w, layer.b]

    def test_layer_call_matches_function(self):
        rng = np.random.default_rng(1)
        layer = Conv3D("c", 2, 3, stride=(1, 2, 2),
                       rng=np.random.default_rng(0), dtype=np.float64)
        x = leaf(rng.standard_normal((1, 3, 6, 6, 2)), "x")
        got = layer(x)
        want = conv3d(x, layer.w, layer.b, stride=(1, 2, 2))
        np.testing.assert_allclose(got.data, want.data, atol=1e-12)
