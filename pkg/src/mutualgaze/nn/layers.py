"""Layers for the gaze networks: 3D convolution, dense, and the small
set of structural ops (relu, softmax, L2 normalization, dropout).

Convolution uses an im2col formulation: the input is unfolded into a
patch matrix once, the forward pass is a single GEMM, and the backward
pass reuses the stored patch matrix for the weight gradient. The input
gradient is scattered back with one strided add per kernel offset, which
touches every padded location at most once per offset and so stays
correct under overlapping windows.

Array layouts: activations are (N, T, H, W, C); convolution weights are
(kt, kh, kw, C_in, C_out); dense weights are (fan_in, fan_out).
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import Tensor


def relu(x: Tensor) -> Tensor:
    out_data = np.maximum(x.data, 0)
    mask = x.data > 0

    def backward(g):
        x._accumulate(g * mask)

    return Tensor._result(out_data, (x,), backward)


def softmax(x: Tensor, axis=-1) -> Tensor:
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out_data = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        inner = (g * out_data).sum(axis=axis, keepdims=True)
        x._accumulate(out_data * (g - inner))

    return Tensor._result(out_data, (x,), backward)


def l2_normalize(x: Tensor, axis=1, eps=1e-12, strict=True) -> Tensor:
    """Scale rows to unit Euclidean norm.

    A zero row has no direction: with ``strict`` (the default) it raises;
    with ``strict=False`` it passes through as zeros, which lets a
    freshly zero-initialized network emit a well-defined (uninformative)
    output instead of failing.
    """
    norm = np.sqrt((x.data * x.data).sum(axis=axis, keepdims=True))
    if strict and not np.all(norm > eps):
        raise ValueError("cannot L2-normalize a zero vector")
    norm = np.maximum(norm, eps)
    out_data = x.data / norm

    def backward(g):
        inner = (g * x.data).sum(axis=axis, keepdims=True)
        x._accumulate(g / norm - x.data * (inner / norm ** 3))

    return Tensor._result(out_data, (x,), backward)


def dropout(x: Tensor, p: float, rng, training: bool) -> Tensor:
    """Inverted dropout: at train time zero each unit with prob p and
    scale survivors by 1/(1-p); identity at eval time."""
    if not training or p <= 0.0:
        return x
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout rate must be in [0,1), got {p}")
    mask = (rng.random(x.data.shape) >= p).astype(x.data.dtype) / (1.0 - p)
    out_data = x.data * mask

    def backward(g):
        x._accumulate(g * mask)

    return Tensor._result(out_data, (x,), backward)


def dense(x: Tensor, w: Tensor, b: Tensor = None) -> Tensor:
    out = x @ w
    if b is not None:
        out = out + b
    return out


def conv3d(x: Tensor, w: Tensor, b: Tensor = None, stride=(1, 1, 1),
           padding=None, fuse_relu=False):
    """3D convolution over (N, T, H, W, C) input (cross-correlation).

    ``padding`` is (pt, ph, pw) zeros added on both sides of each
    spatiotemporal axis; None means k // 2 per axis, which preserves the
    axis length at stride 1 for odd kernels. A kernel with kt = 1 and
    pt = 0 degenerates to a per-frame 2D convolution. ``fuse_relu``
    applies the rectifier in the same graph node.
    """
    kt, kh, kw, c_in, c_out = w.data.shape
    st, sh, sw = stride
    if padding is None:
        padding = (kt // 2, kh // 2, kw // 2)
    pt, ph, pw = padding

    n, t, h, wi, c = x.data.shape
    if c != c_in:
        raise ValueError(f"input has {c} channels, weights expect {c_in}")
    t_out = (t + 2 * pt - kt) // st + 1
    h_out = (h + 2 * ph - kh) // sh + 1
    w_out = (wi + 2 * pw - kw) // sw + 1
    if min(t_out, h_out, w_out) < 1:
        raise ValueError(
            f"kernel {w.data.shape[:3]} with stride {stride} and padding "
            f"{padding} does not fit input {(t, h, wi)}"
        )

    xp = np.pad(x.data, ((0, 0), (pt, pt), (ph, ph), (pw, pw), (0, 0)))
    # (N, T', H', W', C, kt, kh, kw) -> stride -> patch matrix
    win = sliding_window_view(xp, (kt, kh, kw), axis=(1, 2, 3))
    win = win[:, ::st, ::sh, ::sw]
    cols = np.ascontiguousarray(win.transpose(0, 1, 2, 3, 5, 6, 7, 4))
    cols = cols.reshape(n * t_out * h_out * w_out, kt * kh * kw * c_in)
    w_mat = w.data.reshape(kt * kh * kw * c_in, c_out)

    out_data = cols @ w_mat
    if b is not None:
        out_data += b.data
    out_data = out_data.reshape(n, t_out, h_out, w_out, c_out)
    if fuse_relu:
        relu_mask = out_data > 0
        out_data = np.where(relu_mask, out_data, 0)

    def backward(g):
        if fuse_relu:
            g = g * relu_mask
        g_mat = g.reshape(-1, c_out)
        if w.requires_grad:
            w._accumulate((cols.T @ g_mat).reshape(w.data.shape))
        if b is not None and b.requires_grad:
            b._accumulate(g_mat.sum(axis=0))
        if x.requires_grad:
            d_cols = (g_mat @ w_mat.T).reshape(
                n, t_out, h_out, w_out, kt, kh, kw, c_in
            )
            dxp = np.zeros_like(xp)
            for it in range(kt):
                for ih in range(kh):
                    for iw in range(kw):
                        dxp[:,
                            it:it + st * t_out:st,
                            ih:ih + sh * h_out:sh,
                            iw:iw + sw * w_out:sw] += d_cols[:, :, :, :,
                                                             it, ih, iw]
            x._accumulate(dxp[:, pt:pt + t, ph:ph + h, pw:pw + wi])

    parents = (x, w) if b is None else (x, w, b)
    return Tensor._result(out_data, parents, backward)


class Conv3D:
    """A convolution layer owning its weight and bias tensors.

    Weights start from He-normal initialization (std sqrt(2 / fan_in)),
    biases from zero.
    """

    def __init__(self, name, in_channels, out_channels, kernel=(3, 3, 3),
                 stride=(1, 1, 1), padding=None, rng=None, dtype=np.float32):
        rng = rng or np.random.default_rng()
        kt, kh, kw = kernel
        fan_in = kt * kh * kw * in_channels
        scale = np.sqrt(2.0 / fan_in)
        self.w = Tensor(
            (rng.standard_normal((kt, kh, kw, in_channels, out_channels))
             * scale).astype(dtype),
            requires_grad=True, name=f"{name}.w",
        )
        self.b = Tensor(np.zeros(out_channels, dtype=dtype),
                        requires_grad=True, name=f"{name}.b")
        self.stride = tuple(stride)
        self.padding = padding

    def __call__(self, x, fuse_relu=False):
        return conv3d(x, self.w, self.b, self.stride, self.padding,
                      fuse_relu=fuse_relu)

    @property
    def params(self):
        return [self.w, self.b]


class Dense:
    """A fully connected layer owning its weight and bias tensors."""

    def __init__(self, name, fan_in, fan_out, rng=None, dtype=np.float32):
        rng = rng or np.random.default_rng()
        scale = np.sqrt(2.0 / fan_in)
        self.w = Tensor(
            (rng.standard_normal((fan_in, fan_out)) * scale).astype(dtype),
            requires_grad=True, name=f"{name}.w",
        )
        self.b = Tensor(np.zeros(fan_out, dtype=dtype),
                        requires_grad=True, name=f"{name}.b")

    def __call__(self, x):
        return dense(x, self.w, self.b)

    @property
    def params(self):
        return [self.w, self.b]
