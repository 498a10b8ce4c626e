"""Training losses.

The pair classifier is trained with binary cross-entropy on the
probability of the looking-at-each-other class. The head-pose pretraining
loss combines per-angle smooth L1 terms with a yaw sign term that only
cares about left-versus-right agreement; its weights intentionally do not
sum to one.
"""

import numpy as np

from .layers import relu, softmax
from .tensor import Tensor

PROB_EPS = 1e-7

# Relative weights of yaw, pitch, roll and the yaw-sign term.
POSE_LOSS_WEIGHTS = (0.6, 0.3, 0.1, 0.1)

# Angles are mapped to [-1, 1] by these full-scale values (degrees).
ANGLE_SCALES = np.array([180.0, 90.0, 180.0])


def bce_value(c, p_hat, eps=PROB_EPS) -> float:
    """Binary cross-entropy of one pair as a plain number.

    ``c`` is the true class in {0, 1}; ``p_hat`` the predicted probability
    of class 1, clamped to [eps, 1 - eps].
    """
    if c not in (0, 1):
        raise ValueError(f"class must be 0 or 1, got {c}")
    p = min(max(float(p_hat), eps), 1.0 - eps)
    return -(c * np.log(p) + (1 - c) * np.log(1.0 - p))


def laeo_loss(logits: Tensor, labels) -> Tensor:
    """Mean binary cross-entropy over a batch of 2-class logits.

    ``labels`` holds 1 for pairs looking at each other, 0 otherwise.
    The positive-class probability is clamped to [eps, 1 - eps] before
    the log, so a maximally wrong confident prediction costs about
    -log(eps) instead of overflowing. An uninformed prediction
    (probability 0.5) costs exactly ln 2.
    """
    c = np.asarray(labels, dtype=logits.data.dtype)
    if c.ndim != 1 or logits.data.shape != (c.shape[0], 2):
        raise ValueError(
            f"expected (N, 2) logits and (N,) labels, got "
            f"{logits.data.shape} and {c.shape}"
        )
    p = softmax(logits, axis=1)[:, 1].clip(PROB_EPS, 1.0 - PROB_EPS)
    per_pair = -(c * p.log() + (1.0 - c) * (1.0 - p).log())
    return per_pair.mean()


def smooth_l1(x: Tensor) -> Tensor:
    """Elementwise smooth L1 of a difference tensor.

    0.5 x^2 inside |x| < 1, |x| - 0.5 outside; the derivative is x inside
    and sign(x) outside, so large errors stop amplifying the gradient.
    """
    d = x.data
    inside = np.abs(d) < 1.0
    out_data = np.where(inside, 0.5 * d * d, np.abs(d) - 0.5)

    def backward(g):
        x._accumulate(g * np.where(inside, d, np.sign(d)))

    return Tensor._result(out_data, (x,), backward)


def sign_loss(yaw_pred: Tensor, yaw_true, k=1.0) -> Tensor:
    """Penalty for predicting the wrong yaw direction.

    ``yaw_pred`` is the normalized yaw in [-1, 1]; ``yaw_true`` is the
    reference yaw on any scale, only its sign is used. The per-sample
    penalty is max(0, -sign(yaw_true) * tanh(k * yaw_pred)): zero whenever
    the predicted direction matches (and when the reference yaw is
    exactly 0), approaching 1 for a confidently wrong direction.
    """
    s = np.sign(np.asarray(yaw_true, dtype=yaw_pred.data.dtype))
    return relu((yaw_pred * k).tanh() * (-s)).mean()


def head_pose_loss(pred: Tensor, angles_deg, k=1.0,
                   weights=POSE_LOSS_WEIGHTS) -> Tensor:
    """Pose regression loss on normalized (yaw, pitch, roll) predictions.

    ``pred`` is (N, 3) in normalized units; ``angles_deg`` is (N, 3) in
    degrees and is normalized here (yaw and roll by 180, pitch by 90).
    Combines smooth L1 per angle with the yaw sign term, weighted
    ``weights`` = (yaw, pitch, roll, sign).
    """
    angles = np.asarray(angles_deg, dtype=pred.data.dtype)
    if pred.data.shape != angles.shape or pred.data.shape[1:] != (3,):
        raise ValueError(
            f"expected matching (N, 3) prediction and angles, got "
            f"{pred.data.shape} and {angles.shape}"
        )
    target = angles / ANGLE_SCALES.astype(pred.data.dtype)
    w_yaw, w_pitch, w_roll, w_sign = weights

    loss = smooth_l1(pred[:, 0] - target[:, 0]).mean() * w_yaw
    loss = loss + smooth_l1(pred[:, 1] - target[:, 1]).mean() * w_pitch
    loss = loss + smooth_l1(pred[:, 2] - target[:, 2]).mean() * w_roll
    loss = loss + sign_loss(pred[:, 0], angles[:, 0], k=k) * w_sign
    return loss
