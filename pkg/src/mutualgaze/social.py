"""Shot-level social analysis: average-LAEO, interaction baselines,
interaction-prediction AP, and the friend-ness graph.

Characters are ingested annotations (a track-to-character map); a
character may own several tracks, and the per-frame score of a
character pair is the max over its track pairs at that frame. Pairs
that never co-exist in a shot produce no row at all: the paper only
ranks pairs that appear together.
"""

from collections import defaultdict

import numpy as np

from . import formats
from .evaluation import labels_ap

METHODS = ("AL", "SCR", "UPS", "UPE", "RP")
ROW_FIELDS = ("shot_id", "char_a", "char_b") + METHODS + ("label",)

_TRUE_LABELS = {1, True, "1", "interacting", "laeo"}
_FALSE_LABELS = {0, False, "0", "not", "not_laeo"}


def normalize_label(value):
    if value in _TRUE_LABELS:
        return 1
    if value in _FALSE_LABELS:
        return 0
    raise ValueError(f"unknown interaction label {value!r}")


def pair_key(char_a, char_b):
    if char_a == char_b:
        raise ValueError(f"a character pair needs two characters, got "
                         f"{char_a!r} twice")
    return tuple(sorted((char_a, char_b)))


def _tracks_by_character(tracks, charmap):
    """character -> list of its tracks; unmapped tracks are ignored."""
    by_char = defaultdict(list)
    by_id = {t.track_id: t for t in tracks}
    for track_id, char in charmap.items():
        if track_id in by_id:
            by_char[char].append(by_id[track_id])
    return by_char


def _frames_present(char_tracks, shot):
    frames = set()
    for track in char_tracks:
        lo = max(shot.first_frame, track.start_frame)
        hi = min(shot.last_frame, track.end_frame)
        frames.update(range(lo, hi + 1))
    return frames


def coexisting_frames(shot, char_a, char_b, tracks, charmap):
    """Sorted frames of the shot where both characters have a live
    track. Empty when they never co-exist."""
    by_char = _tracks_by_character(tracks, charmap)
    frames_a = _frames_present(by_char.get(char_a, ()), shot)
    frames_b = _frames_present(by_char.get(char_b, ()), shot)
    return sorted(frames_a & frames_b)


class PairScoreTable:
    """Per-frame LAEO scores keyed by unordered track pair."""

    def __init__(self):
        self._scores = defaultdict(dict)

    def add(self, track_a, track_b, frame, score):
        key = (min(track_a, track_b), max(track_a, track_b))
        self._scores[key][frame] = max(
            float(score), self._scores[key].get(frame, float("-inf")))

    def get(self, track_a, track_b, frame, default=0.0):
        key = (min(track_a, track_b), max(track_a, track_b))
        return self._scores.get(key, {}).get(frame, default)


def char_pair_frame_score(char_a, char_b, frame, tracks, charmap,
                          scores: PairScoreTable):
    """Max over the pair's live track combinations; 0 when unscored."""
    by_char = _tracks_by_character(tracks, charmap)
    best = 0.0
    for ta in by_char.get(char_a, ()):
        if not ta.alive_at(frame):
            continue
        for tb in by_char.get(char_b, ()):
            if tb.alive_at(frame) and ta.track_id != tb.track_id:
                best = max(best, scores.get(ta.track_id, tb.track_id, frame))
    return best


def average_laeo(shot, char_a, char_b, tracks, charmap,
                 scores: PairScoreTable):
    """Mean per-frame pair score over the frames where both characters
    co-exist. Raises when they never do; the caller excludes such pairs."""
    frames = coexisting_frames(shot, char_a, char_b, tracks, charmap)
    if not frames:
        raise ValueError(
            f"characters {char_a!r} and {char_b!r} never co-exist in shot "
            f"{shot.shot_id}; average-LAEO is undefined")
    values = [char_pair_frame_score(char_a, char_b, f, tracks, charmap,
                                    scores) for f in frames]
    return float(np.mean(values))


def shot_pairs(shot, tracks, charmap):
    """Unordered character pairs that co-exist in the shot."""
    by_char = _tracks_by_character(tracks, charmap)
    chars = sorted(by_char)
    pairs = []
    for i, a in enumerate(chars):
        for b in chars[i + 1:]:
            if coexisting_frames(shot, a, b, tracks, charmap):
                pairs.append((a, b))
    return pairs


def episode_pairs(shots, tracks, charmap):
    """Character pairs that co-exist in at least one shot."""
    pairs = set()
    for shot in shots:
        pairs.update(shot_pairs(shot, tracks, charmap))
    return sorted(pairs)


def episode_rows(shots, tracks, charmap, scores: PairScoreTable, labels,
                 seed=0):
    """One row per (shot, co-existing character pair): AL, the four
    baselines, and the interaction label.

    ``labels`` maps (shot_id, char_a, char_b) (pair order free) to an
    interaction label; a co-existing pair without a label is an error
    naming the pair. RP draws come from one generator seeded by ``seed``
    over rows in sorted order, so a rerun reproduces the same file.
    """
    norm_labels = {}
    for (shot_id, a, b), value in labels.items():
        norm_labels[(shot_id,) + pair_key(a, b)] = normalize_label(value)

    all_pairs = episode_pairs(shots, tracks, charmap)
    if not all_pairs:
        raise ValueError("no character pair co-exists in any shot")
    upe = 1.0 / len(all_pairs)

    skeleton = []
    for shot in sorted(shots, key=lambda s: s.shot_id):
        present = shot_pairs(shot, tracks, charmap)
        for a, b in present:
            key = (shot.shot_id, a, b)
            if key not in norm_labels:
                raise ValueError(
                    f"pair ({a!r}, {b!r}) co-exists in shot "
                    f"{shot.shot_id} but has no interaction label")
            skeleton.append((shot, a, b, len(present)))

    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x50C1A1]))
    rows = []
    for shot, a, b, n_present in skeleton:
        coexist = coexisting_frames(shot, a, b, tracks, charmap)
        rows.append({
            "shot_id": shot.shot_id,
            "char_a": a,
            "char_b": b,
            "AL": average_laeo(shot, a, b, tracks, charmap, scores),
            "SCR": len(coexist) / shot.n_frames,
            "UPS": 1.0 / n_present,
            "UPE": upe,
            "RP": float(rng.uniform()),
            "label": norm_labels[(shot.shot_id, a, b)],
        })
    return rows


def interaction_ap(rows, method="AL", mode="pair_agnostic", pair=None):
    """AP of one scoring method over (shot, pair) units.

    ``pair_agnostic`` pools every row; ``per_pair`` restricts to one
    character pair (required argument in that mode).
    """
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}, got {method!r}")
    if mode == "per_pair":
        if pair is None:
            raise ValueError("per_pair mode needs the character pair")
        want = pair_key(*pair)
        rows = [r for r in rows if (r["char_a"], r["char_b"]) == want]
        if not rows:
            raise ValueError(f"no rows for pair {want}")
    elif mode != "pair_agnostic":
        raise ValueError(f"mode must be per_pair or pair_agnostic, "
                         f"got {mode!r}")
    scores = np.array([r[method] for r in rows], dtype=np.float64)
    labels = np.array([r["label"] for r in rows], dtype=np.int64)
    return labels_ap(scores, labels)


def friendness(rows):
    """Episode-level edge weights: mean AL per pair over its shots."""
    sums = defaultdict(float)
    counts = defaultdict(int)
    for r in rows:
        key = (r["char_a"], r["char_b"])
        sums[key] += r["AL"]
        counts[key] += 1
    return {key: sums[key] / counts[key] for key in sums}


def write_rows_csv(path, rows):
    formats.write_csv(path, ROW_FIELDS, rows)


def write_dot(path, weights, graph_name="laeo", max_penwidth=6.0):
    """Friend-ness graph as DOT; edge width scales with its weight.

    Only characters with at least one edge appear as nodes.
    """
    edges = sorted(weights.items())
    top = max((w for _, w in edges), default=1.0)
    top = top if top > 0 else 1.0
    nodes = sorted({c for pair, _ in edges for c in pair})
    lines = [f"graph {graph_name} {{"]
    for node in nodes:
        lines.append(f'  "{node}";')
    for (a, b), w in edges:
        pen = 0.5 + max_penwidth * (w / top)
        lines.append(f'  "{a}" -- "{b}" [penwidth={pen:.3f}, '
                     f'label="{w:.3f}"];')
    lines.append("}")
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")
    return path
