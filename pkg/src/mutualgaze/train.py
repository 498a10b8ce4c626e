"""Training loops: pose pretraining, pair training with a negative
curriculum, and the plumbing that keeps memory bounded.

Rendered samples are large (a T=10, M=10 pair is about 1.5 MB), so full
corpora do not fit in memory. Datasets are materialized once into an
on-disk sample container and batches are read back per epoch; rendering
cost is paid one time and epochs stream from disk.

The negative curriculum re-scores the negative pool with the current
model each epoch and keeps the fraction the schedule asks for, hardest
first. At difficulty zero the kept set is empty by construction and the
selector falls back to uniform sampling, which is the intended warm-up
behavior.
"""

import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import formats
from .evaluation import labels_ap
from .nn import SGD, head_pose_loss, laeo_loss, no_grad
from .synthetic import warp_frame

logger = logging.getLogger("mutualgaze.train")

HISTORY_FIELDS = ("epoch", "split", "loss", "ap")


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.03
    lr_decay: float = 0.85          # per-epoch multiplicative decay
    momentum: float = 0.9
    batch_size: int = 32
    epochs: int = 6
    seed: int = 0
    curriculum_period: int = 2
    synth_only_epochs: int = 2      # before alternating with real batches
    augment_shift: int = 2          # coherent integer-pixel shift
    augment_brightness: float = 0.10
    augment_zoom: float = 0.05      # zoom drawn from 1 +/- this
    pretrain_lr: float = 0.1
    pretrain_epochs: int = 4

    def __post_init__(self):
        if self.lr <= 0 or self.batch_size < 1 or self.epochs < 1:
            raise ValueError("lr must be positive, batch_size and epochs "
                             "at least 1")
        if not 0.0 < self.lr_decay <= 1.0:
            raise ValueError(f"lr_decay must be in (0, 1], got "
                             f"{self.lr_decay}")
        if self.curriculum_period < 1:
            raise ValueError("curriculum_period must be >= 1")
        if not 0.0 <= self.augment_zoom < 1.0:
            raise ValueError(f"augment_zoom must be in [0, 1), got "
                             f"{self.augment_zoom}")


# -- curriculum ---------------------------------------------------------------

def difficulty(epoch, period):
    """Difficulty for a 1-based epoch: 0 for the first period, then up a
    quarter step every ``period`` epochs, saturating at 1."""
    if epoch < 1:
        raise ValueError(f"epochs are 1-based, got {epoch}")
    return min(1.0, 0.25 * math.ceil((epoch - 1) / period))


def difficulty_schedule(n_epochs, period):
    return tuple(difficulty(e, period) for e in range(1, n_epochs + 1))


def select_negatives(scores, d, n, rng):
    """Pick ``n`` negative positions for one epoch.

    Keeps positions whose score strictly exceeds the (1 - d) quantile of
    the pool, i.e. the hardest ``d`` fraction. An empty kept set (always
    the case at d = 0, where the threshold is the pool maximum) falls
    back to uniform sampling over the whole pool.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0:
        raise ValueError("negative pool is empty")
    threshold = np.quantile(scores, 1.0 - d)
    keep = np.flatnonzero(scores > threshold)
    if keep.size == 0:
        logger.warning(
            "curriculum kept no negatives at difficulty %.2f; "
            "sampling uniformly", d)
        keep = np.arange(scores.size)
    replace = keep.size < n
    return rng.choice(keep, size=n, replace=replace)


def corpus_for_epoch(epoch, synth_only_epochs, have_real):
    """Synthetic-first schedule: synthetic warm-up, then alternation."""
    if not have_real or epoch <= synth_only_epochs:
        return "synth"
    return "real" if (epoch - synth_only_epochs) % 2 == 1 else "synth"


# -- disk-backed pair storage -------------------------------------------------

class PairStore:
    """Random-access view over a materialized pair container."""

    def __init__(self, directory):
        self.reader = formats.SampleReader(directory)
        self.labels = self.reader.labels

    def __len__(self):
        return len(self.labels)

    def load(self, positions):
        lefts, rights, maps = [], [], []
        for i in positions:
            tensors, _, _ = self.reader.load(int(i))
            lefts.append(tensors["left"])
            rights.append(tensors["right"])
            maps.append(tensors["maps"])
        return (np.stack(lefts), np.stack(rights), np.stack(maps),
                self.labels[np.asarray(positions, dtype=np.int64)])

    def meta(self, i):
        return self.reader.meta(int(i))


def materialize_pairs(dataset, directory):
    """Render ``dataset`` into a sample container once; reuse if present.

    ``dataset`` needs sample(i) returning objects with .left/.right/
    .maps/.label/.meta. An existing container at ``directory`` is trusted
    (generation is deterministic) and opened directly.
    """
    directory = Path(directory)
    if not (directory / "index.jsonl").exists():
        with formats.SampleWriter(directory) as writer:
            for i in range(len(dataset)):
                s = dataset.sample(i)
                writer.add({"left": s.left, "right": s.right,
                            "maps": s.maps}, s.label, s.meta)
    return PairStore(directory)


def _as_store(pairs, cache_dir, name):
    if isinstance(pairs, (str, Path)):
        return PairStore(pairs)
    if hasattr(pairs, "sample"):    # lazy dataset: render to disk once
        if cache_dir is None:
            raise ValueError("a cache_dir is required to materialize an "
                             "in-memory dataset")
        return materialize_pairs(pairs, Path(cache_dir) / name)
    if hasattr(pairs, "load") and hasattr(pairs, "labels"):
        return pairs
    raise TypeError(f"{name} pairs must be a store, a container directory, "
                    "or a renderable dataset")


# -- augmentation -------------------------------------------------------------

def shift_stack(stack, dx, dy):
    """Integer-pixel translate every frame, edge rows/columns repeated."""
    if dx == 0 and dy == 0:
        return stack
    h, w = stack.shape[1], stack.shape[2]
    ys = np.clip(np.arange(h) - dy, 0, h - 1)
    xs = np.clip(np.arange(w) - dx, 0, w - 1)
    return stack[:, ys[:, None], xs[None, :], :]


def _warp_stack(stack, dx, dy, zoom):
    if zoom == 1.0:
        return shift_stack(stack, dx, dy)
    return np.stack([warp_frame(f, dx, dy, zoom) for f in stack])


def augment_batch(left, right, maps, rng, max_shift=2, brightness=0.10,
                  max_zoom=0.05):
    """Coherent per-sample augmentation: one shift and one zoom factor
    shared by all three stacks, brightness on the crops only. Never
    mirrors (mirroring flips the label semantics of a gaze pair)."""
    left = left.copy()
    right = right.copy()
    maps = maps.copy()
    for i in range(left.shape[0]):
        dx = int(rng.integers(-max_shift, max_shift + 1))
        dy = int(rng.integers(-max_shift, max_shift + 1))
        db = float(rng.uniform(-brightness, brightness))
        zoom = 1.0 if max_zoom == 0 else \
            float(rng.uniform(1.0 - max_zoom, 1.0 + max_zoom))
        left[i] = np.clip(_warp_stack(left[i], dx, dy, zoom) + db, 0.0, 1.0)
        right[i] = np.clip(_warp_stack(right[i], dx, dy, zoom) + db,
                           0.0, 1.0)
        maps[i] = _warp_stack(maps[i], dx, dy, zoom)
    return left, right, maps


# -- scoring helpers ----------------------------------------------------------

def score_store(model, store, positions, batch_size=64):
    """Mutual-gaze scores for the given positions, batched, no grads."""
    scores = np.empty(len(positions), dtype=np.float64)
    for lo in range(0, len(positions), batch_size):
        chunk = positions[lo:lo + batch_size]
        left, right, maps, _ = store.load(chunk)
        scores[lo:lo + len(chunk)] = model.score_pairs(left, right, maps)
    return scores


def evaluate_store(model, store, batch_size=64):
    """(ap, scores, labels) over a whole store."""
    positions = np.arange(len(store))
    scores = score_store(model, store, positions, batch_size)
    return labels_ap(scores, store.labels), scores, store.labels


# -- pose pretraining ---------------------------------------------------------

def pretrain_headpose(model, head_dataset, cfg: TrainConfig = TrainConfig()):
    """Train the shared head branch plus pose readout on single-head
    stacks with known angles. Returns history rows."""
    n = len(head_dataset)
    if n == 0:
        raise ValueError("cannot pretrain on an empty head dataset")
    opt = SGD(model.pose_params, lr=cfg.pretrain_lr, momentum=cfg.momentum)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0x90E]))
    history = []
    for epoch in range(1, cfg.pretrain_epochs + 1):
        order = rng.permutation(n)
        losses = []
        for lo in range(0, n, cfg.batch_size):
            chunk = order[lo:lo + cfg.batch_size]
            stacks, angles = head_dataset.load(chunk)
            opt.zero_grad()
            pred = model.pose_head(model.head_embedding(stacks))
            loss = head_pose_loss(pred, angles)
            loss.backward()
            opt.step()
            losses.append(float(loss.data))
        row = {"epoch": epoch, "split": "pretrain",
               "loss": float(np.mean(losses)), "ap": float("nan")}
        history.append(row)
        logger.info("pretrain epoch %d loss %.4f", epoch, row["loss"])
    return history


def yaw_sign_accuracy(model, head_dataset, positions, min_abs_deg=10.0,
                      batch_size=64):
    """Fraction of clearly lateral heads whose predicted yaw sign is
    right. Heads with |yaw| below ``min_abs_deg`` are skipped."""
    hits, total = 0, 0
    positions = np.asarray(positions)
    for lo in range(0, len(positions), batch_size):
        stacks, angles = head_dataset.load(positions[lo:lo + batch_size])
        with no_grad():
            pred = model.pose_head(model.head_embedding(stacks)).data
        mask = np.abs(angles[:, 0]) >= min_abs_deg
        hits += int(np.sum(np.sign(pred[mask, 0])
                           == np.sign(angles[mask, 0])))
        total += int(mask.sum())
    if total == 0:
        raise ValueError("no heads exceed the yaw magnitude threshold")
    return hits / total


# -- pair training ------------------------------------------------------------

def train_laeo(model, train_pairs, val_pairs, cfg: TrainConfig,
               cache_dir=None, real_pairs=None, history_path=None):
    """Balanced-epoch training with curriculum negatives.

    Each epoch uses every positive once plus an equal number of
    negatives picked by the curriculum. ``train_pairs``/``val_pairs``
    accept a PairStore, a container directory, or a lazy dataset (which
    is then materialized under ``cache_dir``). When ``real_pairs`` is
    given, warm-up epochs run on the synthetic corpus and later epochs
    alternate. Returns history rows; writes them as CSV if
    ``history_path`` is set.
    """
    synth = _as_store(train_pairs, cache_dir, "train")
    val = _as_store(val_pairs, cache_dir, "val")
    real = None
    if real_pairs is not None:
        real = _as_store(real_pairs, cache_dir, "real")

    opt = SGD(model.params, lr=cfg.lr, momentum=cfg.momentum)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0x7A1]))
    history = []

    for epoch in range(1, cfg.epochs + 1):
        opt.lr = cfg.lr * cfg.lr_decay ** (epoch - 1)
        store = synth
        if corpus_for_epoch(epoch, cfg.synth_only_epochs,
                            real is not None) == "real":
            store = real
        pos = np.flatnonzero(store.labels == 1)
        neg = np.flatnonzero(store.labels == 0)
        if pos.size == 0 or neg.size == 0:
            raise ValueError("training needs both positives and negatives")

        d = difficulty(epoch, cfg.curriculum_period)
        neg_scores = score_store(model, store, neg)
        picked = neg[select_negatives(neg_scores, d, pos.size, rng)]
        epoch_positions = rng.permutation(np.concatenate([pos, picked]))

        losses, all_scores, all_labels = [], [], []
        for lo in range(0, len(epoch_positions), cfg.batch_size):
            chunk = epoch_positions[lo:lo + cfg.batch_size]
            left, right, maps, labels = store.load(chunk)
            left, right, maps = augment_batch(
                left, right, maps, rng, cfg.augment_shift,
                cfg.augment_brightness, cfg.augment_zoom)
            opt.zero_grad()
            logits = model.forward(left, right, maps, training=True, rng=rng)
            loss = laeo_loss(logits, labels)
            loss.backward()
            opt.step()
            losses.append(float(loss.data))
            shifted = logits.data - logits.data.max(axis=1, keepdims=True)
            expd = np.exp(shifted)
            all_scores.extend(expd[:, 1] / expd.sum(axis=1))
            all_labels.extend(labels)

        train_row = {"epoch": epoch, "split": "train",
                     "loss": float(np.mean(losses)),
                     "ap": labels_ap(np.array(all_scores),
                                     np.array(all_labels))}
        val_ap, val_scores, val_labels = evaluate_store(model, val)
        val_loss = _mean_bce(val_scores, val_labels)
        val_row = {"epoch": epoch, "split": "val", "loss": val_loss,
                   "ap": val_ap}
        history.extend([train_row, val_row])
        logger.info(
            "epoch %d [%s, d=%.2f] train loss %.4f ap %.4f | "
            "val loss %.4f ap %.4f",
            epoch, "real" if store is real else "synth", d,
            train_row["loss"], train_row["ap"], val_loss, val_ap)

    if history_path is not None:
        write_history(history_path, history)
    return history


def _mean_bce(scores, labels):
    p = np.clip(np.asarray(scores, dtype=np.float64), 1e-7, 1.0 - 1e-7)
    c = np.asarray(labels, dtype=np.float64)
    return float(-np.mean(c * np.log(p) + (1.0 - c) * np.log(1.0 - p)))


def write_history(path, rows):
    formats.write_csv(path, HISTORY_FIELDS, rows)


def export_embeddings(model, stacks, path=None, batch_size=64):
    """Head-branch embeddings for a batch of crop stacks; optionally
    written as CSV with one dimension per column."""
    chunks = []
    for lo in range(0, len(stacks), batch_size):
        with no_grad():
            chunks.append(model.head_embedding(stacks[lo:lo + batch_size])
                          .data.copy())
    emb = np.concatenate(chunks, axis=0)
    if path is not None:
        fields = [f"e{i}" for i in range(emb.shape[1])]
        rows = [dict(zip(fields, row)) for row in emb]
        formats.write_csv(path, fields, rows)
    return emb
