"""Average precision and the frame- and shot-level scoring protocols.

AP here is the exact (non-interpolated) area under the precision-recall
curve: predictions are ranked by descending score (ties keep input
order), matched greedily one-to-one against unmatched positive
annotations, and each true positive at rank k contributes
precision@k / n_positives. Ambiguous annotations must be filtered out
before any metric; passing one in is a caller bug and raises.
"""

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .geometry import iou
from .records import BoundingBox, PairAnnotation, PairLabel

MATCH_IOU = 0.5
MATCH_HEAD_COVER = 0.5
SHOT_SMOOTH_LEN = 5


class Protocol(Enum):
    """How predictions are matched to ground truth.

    FRAME_IOU: both predicted heads overlap the annotated heads with
    IoU > 0.5 (under the better of the two head-to-head assignments).
    HEAD_IN_HUMAN: annotations carry full-body boxes; each predicted head
    must have more than half its area inside the matched body box.
    SHOT: labels and scores live at shot granularity; no box matching.
    """

    FRAME_IOU = "frame_iou"
    HEAD_IN_HUMAN = "head_in_human"
    SHOT = "shot"


@dataclass(frozen=True)
class ScoredPair:
    """One scored head pair at one frame."""

    video_id: str
    frame: int
    box_a: BoundingBox
    box_b: BoundingBox
    score: float

    def __post_init__(self):
        if not (0.0 <= self.score <= 1.0) or not math.isfinite(self.score):
            raise ValueError(f"score must be in [0,1], got {self.score}")


def _head_cover(head: BoundingBox, body: BoundingBox) -> float:
    """Fraction of the head box area inside the body box."""
    ix = max(0.0, min(head.x2, body.x2) - max(head.x1, body.x1))
    iy = max(0.0, min(head.y2, body.y2) - max(head.y1, body.y1))
    return (ix * iy) / head.area


def match_pair(pred: ScoredPair, gt: PairAnnotation, protocol) -> bool:
    """Whether a scored pair localizes an annotated pair.

    Both heads must pass the protocol's box test under the better of the
    two head-to-head assignments (a-a/b-b or a-b/b-a), in the same video
    and frame.
    """
    if protocol == Protocol.FRAME_IOU:
        fit = lambda p, g: iou(p, g) > MATCH_IOU
    elif protocol == Protocol.HEAD_IN_HUMAN:
        fit = lambda p, g: _head_cover(p, g) > MATCH_HEAD_COVER
    else:
        raise ValueError(f"protocol {protocol} does not match frame pairs")
    if pred.video_id != gt.video_id or pred.frame != gt.frame:
        return False
    straight = fit(pred.box_a, gt.box_a) and fit(pred.box_b, gt.box_b)
    crossed = fit(pred.box_a, gt.box_b) and fit(pred.box_b, gt.box_a)
    return straight or crossed


def ranked_ap(is_positive, n_pos) -> float:
    """AP of an already-ranked binary outcome sequence.

    ``is_positive[k]`` says whether the k-th ranked prediction is a true
    positive; ``n_pos`` is the total number of ground-truth positives
    (matched or not). This is the shared core of every AP in the package.
    """
    if n_pos <= 0:
        raise ValueError("AP is undefined with zero positives")
    flags = np.asarray(is_positive, dtype=bool)
    if flags.size == 0:
        return 0.0
    tp = np.cumsum(flags)
    ranks = np.arange(1, flags.size + 1)
    precision = tp / ranks
    return float(precision[flags].sum() / n_pos)


def rank_by_score(scores) -> np.ndarray:
    """Indices sorted by descending score; equal scores keep input order."""
    return np.argsort(-np.asarray(scores, dtype=np.float64), kind="stable")


def assign_matches(predictions, annotations, protocol):
    """Greedy one-to-one matching in rank order.

    Returns (ranked TP flags, n_pos). Each prediction, taken from highest
    score down, claims the first still-unmatched positive annotation it
    matches; later predictions of the same ground truth count as false
    positives.
    """
    for ann in annotations:
        if ann.label == PairLabel.AMBIGUOUS:
            raise ValueError("ambiguous annotations must be filtered out "
                             "before computing AP")
    positives = [a for a in annotations if a.label == PairLabel.LAEO]
    n_pos = len(positives)

    by_loc = {}
    for j, ann in enumerate(positives):
        by_loc.setdefault((ann.video_id, ann.frame), []).append(j)

    order = rank_by_score([p.score for p in predictions])
    taken = set()
    flags = np.zeros(len(predictions), dtype=bool)
    for rank, i in enumerate(order):
        pred = predictions[i]
        for j in by_loc.get((pred.video_id, pred.frame), ()):
            if j in taken:
                continue
            if match_pair(pred, positives[j], protocol):
                taken.add(j)
                flags[rank] = True
                break
    return flags, n_pos


def average_precision(predictions, annotations, protocol) -> float:
    """AP of scored pairs against (non-ambiguous) annotations."""
    flags, n_pos = assign_matches(predictions, annotations, protocol)
    return ranked_ap(flags, n_pos)


def labels_ap(scores, labels) -> float:
    """AP when each prediction directly carries its own binary label.

    Used wherever the prediction and the ground-truth unit coincide
    (synthetic val sets, shot-level scoring, interaction ranking).
    """
    labels = np.asarray(labels, dtype=bool)
    n_pos = int(labels.sum())
    order = rank_by_score(scores)
    return ranked_ap(labels[order], n_pos)


# -- temporal protocols -------------------------------------------------------

def spread_window_scores(central_frames, scores, first_frame, last_frame):
    """Per-frame scores from window scores over a track-pair overlap.

    Each window score sits at its central frame; every other frame of
    [first_frame, last_frame] takes the score of the nearest central
    frame (earlier window on distance ties). With stride-1 windows this
    means the leading and trailing half-window frames inherit the first
    and last window's score.

    Returns an array of length last_frame - first_frame + 1.
    """
    centrals = np.asarray(central_frames, dtype=np.int64)
    scores = np.asarray(scores, dtype=np.float64)
    if centrals.size == 0:
        raise ValueError("need at least one window score")
    if centrals.size != scores.size:
        raise ValueError("central_frames and scores lengths differ")
    if first_frame > last_frame:
        raise ValueError(f"empty frame range {first_frame}..{last_frame}")

    frames = np.arange(first_frame, last_frame + 1)
    distance = np.abs(frames[:, None] - centrals[None, :])
    nearest = np.argmin(distance, axis=1)  # argmin takes the earliest tie
    return scores[nearest]


def smooth_series(series, length=SHOT_SMOOTH_LEN):
    """Centered moving average whose window shrinks at the ends."""
    s = np.asarray(series, dtype=np.float64)
    if s.size == 0:
        raise ValueError("cannot smooth an empty series")
    half = length // 2
    out = np.empty_like(s)
    for i in range(s.size):
        lo = max(0, i - half)
        hi = min(s.size, i + half + 1)
        out[i] = s[lo:hi].mean()
    return out


def score_shot(per_pair_series, smooth_len=SHOT_SMOOTH_LEN) -> float:
    """Shot-level score: smooth each pair's frame series, take the max.

    ``per_pair_series`` is an iterable of per-frame score arrays, one per
    track pair present in the shot.
    """
    best = None
    for series in per_pair_series:
        peak = float(smooth_series(series, smooth_len).max())
        if best is None or peak > best:
            best = peak
    if best is None:
        raise ValueError("shot has no scored pairs")
    return best


# -- reports ------------------------------------------------------------------

@dataclass(frozen=True)
class EvalReport:
    """AP plus the PR curve (one point per prediction rank)."""

    ap: float
    pr_points: tuple  # (score_threshold, precision, recall) per rank

    def pr_rows(self):
        return [(float(t), float(p), float(r)) for t, p, r in self.pr_points]


def _pr_points(flags, ranked_scores, n_pos):
    tp = np.cumsum(flags)
    ranks = np.arange(1, flags.size + 1)
    precision = tp / ranks
    recall = tp / n_pos
    return tuple(
        (float(ranked_scores[k]), float(precision[k]), float(recall[k]))
        for k in range(flags.size)
    )


def evaluate_frames(predictions, annotations, protocol) -> EvalReport:
    """Frame-level evaluation; ambiguous annotations are dropped here."""
    kept = [a for a in annotations if a.label != PairLabel.AMBIGUOUS]
    flags, n_pos = assign_matches(predictions, kept, protocol)
    order = rank_by_score([p.score for p in predictions])
    ranked_scores = np.asarray([predictions[i].score for i in order])
    return EvalReport(ranked_ap(flags, n_pos),
                      _pr_points(flags, ranked_scores, n_pos))


def evaluate_shots(shot_scores, shot_labels) -> EvalReport:
    """Shot-level evaluation from {shot_id: score} and {shot_id: bool}."""
    missing = sorted(set(shot_labels) - set(shot_scores))
    if missing:
        raise ValueError(f"no scores for labeled shots: {missing}")
    ids = sorted(shot_labels)
    scores = np.array([shot_scores[s] for s in ids], dtype=np.float64)
    labels = np.array([bool(shot_labels[s]) for s in ids])
    n_pos = int(labels.sum())
    order = rank_by_score(scores)
    flags = labels[order]
    return EvalReport(ranked_ap(flags, n_pos),
                      _pr_points(flags, scores[order], n_pos))
