"""Scikit-learn style facade over the pair classifier and the geometry
features, for people who want fit/predict and a pipeline-compatible
transformer instead of the lower-level training loop."""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin

from .network import ModelConfig, MutualGazeNet
from .train import TrainConfig, train_laeo


def check_stack(name, arr, n_frames=None, size=None):
    """Validate one (N, T, S, S, 3) stack and return it as float32."""
    arr = np.asarray(arr)
    if arr.ndim != 5 or arr.shape[-1] != 3:
        raise ValueError(
            f"{name} must have shape (n_samples, n_frames, size, size, 3), "
            f"got {arr.shape}")
    if arr.shape[2] != arr.shape[3]:
        raise ValueError(f"{name} frames must be square, got {arr.shape}")
    if n_frames is not None and arr.shape[1] != n_frames:
        raise ValueError(f"{name} has {arr.shape[1]} frames, expected "
                         f"{n_frames}")
    if size is not None and arr.shape[2] != size:
        raise ValueError(f"{name} frames are {arr.shape[2]}px, expected "
                         f"{size}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return np.ascontiguousarray(arr, dtype=np.float32)


def check_pair_input(X, window_length=None, map_frames=None, size=None):
    """Validate the (left, right, maps) triple the classifier consumes."""
    if not isinstance(X, (tuple, list)) or len(X) != 3:
        raise ValueError("X must be a (left, right, maps) triple of arrays")
    left = check_stack("left", X[0], window_length, size)
    right = check_stack("right", X[1], window_length, size)
    maps = check_stack("maps", X[2], map_frames, size)
    if not left.shape[0] == right.shape[0] == maps.shape[0]:
        raise ValueError(
            f"sample counts disagree: left {left.shape[0]}, right "
            f"{right.shape[0]}, maps {maps.shape[0]}")
    return left, right, maps


class _ArrayStore:
    """In-memory stand-in for a materialized pair container."""

    def __init__(self, left, right, maps, labels):
        self.arrays = (left, right, maps)
        self.labels = np.asarray(labels, dtype=np.int64)

    def __len__(self):
        return len(self.labels)

    def load(self, positions):
        idx = np.asarray(positions, dtype=np.int64)
        left, right, maps = self.arrays
        return left[idx], right[idx], maps[idx], self.labels[idx]


class MutualGazeClassifier(ClassifierMixin, BaseEstimator):
    """Binary mutual-gaze classifier with the standard estimator API.

    X is a (left, right, maps) triple of stacks; y has 1 for mutual
    gaze. fit trains the underlying network from scratch, deterministic
    given ``seed``.
    """

    def __init__(self, window_length=10, map_frames=10, crop_size=64,
                 epochs=6, lr=0.03, momentum=0.9, batch_size=32,
                 curriculum_period=2, val_fraction=0.1, seed=0):
        self.window_length = window_length
        self.map_frames = map_frames
        self.crop_size = crop_size
        self.epochs = epochs
        self.lr = lr
        self.momentum = momentum
        self.batch_size = batch_size
        self.curriculum_period = curriculum_period
        self.val_fraction = val_fraction
        self.seed = seed

    def _model_config(self):
        return ModelConfig(window_length=self.window_length,
                           map_frames=self.map_frames,
                           crop_size=self.crop_size,
                           map_size=self.crop_size)

    def fit(self, X, y):
        left, right, maps = check_pair_input(
            X, self.window_length, self.map_frames, self.crop_size)
        y = np.asarray(y)
        if y.shape != (left.shape[0],):
            raise ValueError(f"y must be ({left.shape[0]},), got {y.shape}")
        if not set(np.unique(y)) <= {0, 1}:
            raise ValueError("y must contain only 0 and 1")
        if len(np.unique(y)) < 2:
            raise ValueError("fit needs both classes present")

        rng = np.random.default_rng(np.random.SeedSequence([self.seed,
                                                            0xE57]))
        val_idx = []
        for label in (0, 1):
            pool = rng.permutation(np.flatnonzero(y == label))
            val_idx.extend(pool[:max(1, int(round(len(pool)
                                                  * self.val_fraction)))])
        val_idx = np.sort(np.asarray(val_idx, dtype=np.int64))
        train_idx = np.setdiff1d(np.arange(len(y)), val_idx)

        train = _ArrayStore(left[train_idx], right[train_idx],
                            maps[train_idx], y[train_idx])
        val = _ArrayStore(left[val_idx], right[val_idx], maps[val_idx],
                          y[val_idx])

        self.net_ = MutualGazeNet(self._model_config(), seed=self.seed)
        cfg = TrainConfig(lr=self.lr, momentum=self.momentum,
                          batch_size=self.batch_size, epochs=self.epochs,
                          seed=self.seed,
                          curriculum_period=self.curriculum_period)
        self.history_ = train_laeo(self.net_, train, val, cfg)
        self.classes_ = np.array([0, 1])
        return self

    def _check_fitted(self):
        if not hasattr(self, "net_"):
            raise ValueError("this classifier is not fitted yet; "
                             "call fit first")

    def predict_proba(self, X):
        self._check_fitted()
        left, right, maps = check_pair_input(
            X, self.window_length, self.map_frames, self.crop_size)
        return self.net_.predict_proba(left, right, maps)

    def predict(self, X):
        self._check_fitted()
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]

    def decision_function(self, X):
        return self.predict_proba(X)[:, 1]


class GeometryFeaturizer(TransformerMixin, BaseEstimator):
    """(cx_a, cy_a, s_a, cx_b, cy_b, s_b) -> (dx, dy, scale ratio).

    Centers are expected normalized to the frame; the output matches the
    geometry baseline features (signed offsets plus s_a / s_b).
    """

    def fit(self, X, y=None):
        self._validate(X)
        return self

    @staticmethod
    def _validate(X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != 6:
            raise ValueError(
                f"X must be (n_samples, 6): cx_a, cy_a, s_a, cx_b, cy_b, "
                f"s_b; got {X.shape}")
        if not np.all(np.isfinite(X)):
            raise ValueError("X contains non-finite values")
        if np.any(X[:, [2, 5]] <= 0):
            raise ValueError("head scales must be positive")
        return X

    def transform(self, X):
        X = self._validate(X)
        return np.column_stack([
            X[:, 3] - X[:, 0],
            X[:, 4] - X[:, 1],
            X[:, 2] / X[:, 5],
        ])
