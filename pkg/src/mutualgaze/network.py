"""The three-branch pair classifier.

Two branches with shared weights embed the head crop stacks of the left
and right person; a third branch embeds the head-map stack that captures
where the pair sits in the frame and who else is around. The three
vectors are concatenated and fused by a small dense stack into 2-class
logits (index 1 = looking at each other).

Head branches end in an L2 normalization, so each head's embedding lives
on the unit sphere and cosine similarity between embeddings is their dot
product. Weight sharing is literal: both branches hold the same tensors
and gradients from the two calls accumulate.

A pose head (linear layer on the head embedding) predicts normalized
(yaw, pitch, roll); it is used for branch pretraining and kept in
checkpoints.
"""

import dataclasses
from dataclasses import dataclass

import numpy as np

from .nn import (
    Conv3D,
    Dense,
    Tensor,
    concat,
    dropout,
    l2_normalize,
    load_checkpoint,
    no_grad,
    relu,
    save_checkpoint,
    softmax,
)

LAEO_CLASS = 1


@dataclass(frozen=True)
class ModelConfig:
    """Architecture and input-geometry knobs.

    The defaults are sized for CPU training; widths can be raised freely,
    the builder derives every flatten dimension from a dry run. When an
    input has a single frame, temporal kernel extent and stride collapse
    to 1 and the branch degenerates to 2D convolutions.
    """

    window_length: int = 10      # frames per head-crop stack (T)
    map_frames: int = 10         # frames per head-map stack (M)
    crop_size: int = 64
    map_size: int = 64
    head_channels: tuple = (8, 16, 32, 32, 64)
    head_strides: tuple = ((2, 2, 2), (2, 2, 2), (1, 1, 1), (2, 2, 2),
                           (1, 1, 1))
    map_channels: tuple = (8, 16, 16, 32)
    map_strides: tuple = ((2, 2, 2), (2, 2, 2), (1, 1, 1), (2, 2, 2))
    kernel_size: int = 3
    fusion_units: int = 64
    dropout_rate: float = 0.5

    def __post_init__(self):
        if self.window_length < 1 or self.map_frames < 1:
            raise ValueError("window_length and map_frames must be >= 1")
        if len(self.head_channels) != len(self.head_strides):
            raise ValueError("head_channels and head_strides lengths differ")
        if len(self.map_channels) != len(self.map_strides):
            raise ValueError("map_channels and map_strides lengths differ")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError(f"dropout_rate must be in [0,1), got "
                             f"{self.dropout_rate}")

    def to_dict(self):
        d = dataclasses.asdict(self)
        for key in ("head_channels", "map_channels"):
            d[key] = list(d[key])
        for key in ("head_strides", "map_strides"):
            d[key] = [list(s) for s in d[key]]
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        for key in ("head_channels", "map_channels"):
            if key in d:
                d[key] = tuple(d[key])
        for key in ("head_strides", "map_strides"):
            if key in d:
                d[key] = tuple(tuple(s) for s in d[key])
        return cls(**d)


def _branch_layers(prefix, n_frames, channels, strides, k, rng, dtype):
    """Build one conv stack; collapses to 2D when the input is one frame."""
    kt = 1 if n_frames == 1 else k
    layers = []
    c_in = 3
    for i, (c_out, stride) in enumerate(zip(channels, strides)):
        st, sh, sw = stride
        if n_frames == 1:
            st = 1
        layers.append(Conv3D(
            f"{prefix}.conv{i + 1}", c_in, c_out,
            kernel=(kt, k, k), stride=(st, sh, sw), rng=rng, dtype=dtype,
        ))
        c_in = c_out
    return layers


class MutualGazeNet:
    """Weights plus forward passes; training loops live elsewhere."""

    def __init__(self, config: ModelConfig, seed=0, dtype=np.float32):
        self.config = config
        self.dtype = dtype
        rng = np.random.default_rng(seed)

        k = config.kernel_size
        self.head_convs = _branch_layers(
            "head", config.window_length, config.head_channels,
            config.head_strides, k, rng, dtype,
        )
        self.map_convs = _branch_layers(
            "map", config.map_frames, config.map_channels,
            config.map_strides, k, rng, dtype,
        )

        self.head_dim = self._dry_run(
            self.head_convs,
            (1, config.window_length, config.crop_size, config.crop_size, 3),
        )
        self.map_dim = self._dry_run(
            self.map_convs,
            (1, config.map_frames, config.map_size, config.map_size, 3),
        )

        fusion_in = 2 * self.head_dim + self.map_dim
        self.fuse_hidden = Dense("fusion.dense1", fusion_in,
                                 config.fusion_units, rng=rng, dtype=dtype)
        self.fuse_logits = Dense("fusion.dense2", config.fusion_units, 2,
                                 rng=rng, dtype=dtype)
        self.pose_head = Dense("head.pose", self.head_dim, 3, rng=rng,
                               dtype=dtype)

    @staticmethod
    def _dry_run(layers, shape):
        with no_grad():
            x = Tensor(np.zeros(shape, dtype=np.float32))
            for layer in layers:
                x = layer(x)
        return int(np.prod(x.shape[1:]))

    # -- forward passes ---------------------------------------------------

    def head_embedding(self, crops) -> Tensor:
        """(N, T, S, S, 3) crops to (N, D) unit-norm embeddings.

        Normalization is lenient here: an all-zero feature row (possible
        with degenerate weights) stays zero instead of raising, so the
        fusion stack still produces a valid probability pair.
        """
        x = crops if isinstance(crops, Tensor) else Tensor(crops)
        for layer in self.head_convs:
            x = relu(layer(x))
        flat = x.reshape(x.shape[0], -1)
        return l2_normalize(flat, axis=1, strict=False)

    def map_features(self, maps) -> Tensor:
        x = maps if isinstance(maps, Tensor) else Tensor(maps)
        for layer in self.map_convs:
            x = relu(layer(x))
        return x.reshape(x.shape[0], -1)

    def forward(self, left, right, maps, training=False, rng=None) -> Tensor:
        """Logits for a batch of (left crops, right crops, head maps)."""
        fused = concat(
            [self.head_embedding(left), self.head_embedding(right),
             self.map_features(maps)],
            axis=1,
        )
        hidden = relu(self.fuse_hidden(fused))
        hidden = dropout(hidden, self.config.dropout_rate, rng, training)
        return self.fuse_logits(hidden)

    def pose_output(self, crops) -> Tensor:
        """Normalized (yaw, pitch, roll) predictions from head crops."""
        return self.pose_head(self.head_embedding(crops))

    def predict_proba(self, left, right, maps, batch_size=64) -> np.ndarray:
        """Class probabilities, shape (N, 2); no graph is built."""
        n = left.shape[0]
        out = np.empty((n, 2), dtype=np.float32)
        with no_grad():
            for lo in range(0, n, batch_size):
                hi = min(lo + batch_size, n)
                logits = self.forward(left[lo:hi], right[lo:hi], maps[lo:hi])
                out[lo:hi] = softmax(Tensor(logits.data), axis=1).data
        return out

    def score_pairs(self, left, right, maps, batch_size=64) -> np.ndarray:
        """Probability of the looking-at-each-other class, shape (N,)."""
        return self.predict_proba(left, right, maps, batch_size)[:, LAEO_CLASS]

    # -- parameters and persistence ----------------------------------------

    @property
    def params(self):
        out = []
        for layer in (*self.head_convs, *self.map_convs,
                      self.fuse_hidden, self.fuse_logits, self.pose_head):
            out.extend(layer.params)
        return out

    @property
    def pose_params(self):
        """Parameters touched by head-pose pretraining."""
        out = []
        for layer in self.head_convs:
            out.extend(layer.params)
        out.extend(self.pose_head.params)
        return out

    def state_dict(self):
        return {p.name: p.data for p in self.params}

    def load_state_dict(self, tensors):
        own = {p.name: p for p in self.params}
        missing = sorted(set(own) - set(tensors))
        if missing:
            raise ValueError(f"checkpoint is missing tensors: {missing}")
        for name, p in own.items():
            arr = np.asarray(tensors[name], dtype=self.dtype)
            if arr.shape != p.data.shape:
                raise ValueError(
                    f"shape mismatch for {name}: checkpoint {arr.shape}, "
                    f"model {p.data.shape}"
                )
            p.data = arr.copy()

    def save(self, path, extra_meta=None):
        meta = {"config": self.config.to_dict()}
        if extra_meta:
            meta.update(extra_meta)
        save_checkpoint(path, self.state_dict(), meta)

    @classmethod
    def load(cls, path):
        tensors, meta = load_checkpoint(path)
        if "config" not in meta:
            raise ValueError(f"{path}: checkpoint has no model config")
        net = cls(ModelConfig.from_dict(meta["config"]))
        net.load_state_dict(tensors)
        return net, meta

    def copy_as_float64(self):
        """A float64 clone of this network (for gradient verification)."""
        clone = MutualGazeNet(self.config, dtype=np.float64)
        for p_dst, p_src in zip(clone.params, self.params):
            p_dst.data = p_src.data.astype(np.float64)
        return clone
