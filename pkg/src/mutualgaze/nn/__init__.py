"""Minimal reverse-mode autodiff and the layers, losses and optimizer
used by the gaze classifier. Everything here runs on plain numpy arrays;
float32 is the working precision, float64 is used when verifying
gradients against finite differences.
"""

from .tensor import Tensor, concat, no_grad
from .layers import Conv3D, Dense, conv3d, dense, dropout, l2_normalize, relu, softmax
from .losses import bce_value, laeo_loss, head_pose_loss, sign_loss, smooth_l1
from .optim import SGD
from .gradcheck import gradient_check
from .checkpoint import save_checkpoint, load_checkpoint

__all__ = [
    "Tensor", "concat", "no_grad",
    "Conv3D", "Dense", "conv3d", "dense", "dropout", "l2_normalize",
    "relu", "softmax",
    "bce_value", "laeo_loss", "head_pose_loss", "sign_loss", "smooth_l1",
    "SGD", "gradient_check", "save_checkpoint", "load_checkpoint",
]
