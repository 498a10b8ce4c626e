"""Core records shared by the whole pipeline.

Coordinates are image-convention: origin top-left, x to the right, y
downward, in pixels unless stated otherwise. Frames are integer indices.
All records are immutable after construction and safe to share across
concurrent readers.
"""

import math
from dataclasses import dataclass
from enum import Enum

# Gaps up to this many frames are filled by linear interpolation when a
# track is assembled from sparse per-frame boxes; longer gaps split tracks.
MAX_INTERP_GAP = 5


class PairLabel(Enum):
    """Ground-truth label of a head pair.

    AMBIGUOUS pairs are excluded from every metric denominator downstream.
    """

    LAEO = "laeo"
    NOT_LAEO = "not_laeo"
    AMBIGUOUS = "ambiguous"


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box with x1 < x2 and y1 < y2, in frame pixels."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        for v in (self.x1, self.y1, self.x2, self.y2):
            if not math.isfinite(v):
                raise ValueError(f"non-finite box coordinate: {self}")
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise ValueError(f"box must have positive width and height: {self}")

    @property
    def width(self):
        return self.x2 - self.x1

    @property
    def height(self):
        return self.y2 - self.y1

    @property
    def center(self):
        return (0.5 * (self.x1 + self.x2), 0.5 * (self.y1 + self.y2))

    @property
    def area(self):
        return self.width * self.height

    def as_tuple(self):
        return (self.x1, self.y1, self.x2, self.y2)


@dataclass(frozen=True)
class HeadDetection:
    """A single-frame head detection with confidence in [0, 1]."""

    video_id: str
    frame: int
    box: BoundingBox
    confidence: float = 1.0

    def __post_init__(self):
        if self.frame < 0:
            raise ValueError(f"frame index must be >= 0, got {self.frame}")
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence must be in [0,1], got {self.confidence}")


@dataclass(frozen=True)
class HeadTrack:
    """A per-person head box time series over consecutive frames.

    ``boxes[i]`` is the box at frame ``start_frame + i``; there are no gaps.
    Use :func:`build_track` to assemble a track from sparse observations
    (gaps up to ``MAX_INTERP_GAP`` frames are linearly interpolated).
    """

    track_id: int
    video_id: str
    start_frame: int
    boxes: tuple

    def __post_init__(self):
        if len(self.boxes) == 0:
            raise ValueError("track must contain at least one box")
        if self.start_frame < 0:
            raise ValueError(f"start_frame must be >= 0, got {self.start_frame}")
        object.__setattr__(self, "boxes", tuple(self.boxes))

    def __len__(self):
        return len(self.boxes)

    @property
    def end_frame(self):
        """Last frame (inclusive) covered by the track."""
        return self.start_frame + len(self.boxes) - 1

    def alive_at(self, frame):
        return self.start_frame <= frame <= self.end_frame

    def box_at(self, frame):
        if not self.alive_at(frame):
            raise KeyError(f"track {self.track_id} has no box at frame {frame}")
        return self.boxes[frame - self.start_frame]


def interpolate_box(a: BoundingBox, b: BoundingBox, t: float) -> BoundingBox:
    """Linear interpolation between two boxes, t in [0, 1]."""
    return BoundingBox(
        a.x1 + t * (b.x1 - a.x1),
        a.y1 + t * (b.y1 - a.y1),
        a.x2 + t * (b.x2 - a.x2),
        a.y2 + t * (b.y2 - a.y2),
    )


def build_track(track_id, video_id, observations, max_gap=MAX_INTERP_GAP):
    """Assemble gap-free tracks from sparse ``(frame, box)`` observations.

    Gaps of at most ``max_gap`` missing frames are filled by linear box
    interpolation; a longer gap splits the observations into separate
    tracks (ids ``track_id``, ``track_id + 1``, ...).

    Returns a list of :class:`HeadTrack`.
    """
    obs = sorted(observations, key=lambda fb: fb[0])
    if not obs:
        return []
    frames = [f for f, _ in obs]
    if len(set(frames)) != len(frames):
        raise ValueError(f"duplicate frame in observations for track {track_id}")

    tracks = []
    segment = [obs[0]]
    for prev, cur in zip(obs, obs[1:]):
        gap = cur[0] - prev[0] - 1
        if gap > max_gap:
            tracks.append(_fill_segment(track_id + len(tracks), video_id, segment))
            segment = [cur]
        else:
            segment.append(cur)
    tracks.append(_fill_segment(track_id + len(tracks), video_id, segment))
    return tracks


def _fill_segment(track_id, video_id, segment):
    boxes = []
    for (f0, b0), (f1, b1) in zip(segment, segment[1:]):
        boxes.append(b0)
        for f in range(f0 + 1, f1):
            boxes.append(interpolate_box(b0, b1, (f - f0) / (f1 - f0)))
    boxes.append(segment[-1][1])
    return HeadTrack(track_id, video_id, segment[0][0], tuple(boxes))


@dataclass(frozen=True)
class HeadPose:
    """Head orientation in degrees.

    yaw in [-180, 180], pitch in [-90, 90], roll in [-180, 180].
    Sign convention (fixed project-wide): positive yaw means the head is
    turned toward image right; positive pitch means looking up.
    """

    yaw: float
    pitch: float
    roll: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.yaw, self.pitch, self.roll)):
            raise ValueError(f"non-finite pose angle: {self}")
        if not -180.0 <= self.yaw <= 180.0:
            raise ValueError(f"yaw out of [-180,180]: {self.yaw}")
        if not -90.0 <= self.pitch <= 90.0:
            raise ValueError(f"pitch out of [-90,90]: {self.pitch}")
        if not -180.0 <= self.roll <= 180.0:
            raise ValueError(f"roll out of [-180,180]: {self.roll}")


@dataclass(frozen=True)
class PairAnnotation:
    """Ground-truth label for one head pair in one frame."""

    video_id: str
    frame: int
    box_a: BoundingBox
    box_b: BoundingBox
    label: PairLabel

    def __post_init__(self):
        if self.box_a == self.box_b:
            raise ValueError("pair annotation boxes must differ")


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of checking raw dataset records against the invariants.

    ``violations`` holds one human-readable line per problem, each naming
    the offending record; an empty tuple means the dataset is clean.
    """

    violations: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "violations", tuple(self.violations))

    @property
    def ok(self):
        return not self.violations

    def __len__(self):
        return len(self.violations)


_LABEL_VALUES = {label.value for label in PairLabel}


def _check_raw_box(values, where, out):
    try:
        x1, y1, x2, y2 = (float(v) for v in values)
    except (TypeError, ValueError):
        out.append(f"{where}: box must be four numbers, got {values!r}")
        return
    if not all(math.isfinite(v) for v in (x1, y1, x2, y2)):
        out.append(f"{where}: box has non-finite coordinates")
    elif not (x1 < x2 and y1 < y2):
        out.append(f"{where}: box must satisfy x1 < x2 and y1 < y2")


def validate_dataset(detections, tracks, annotations, shots=()):
    """Check raw JSONL records (dicts) and report every invariant breach.

    Works on unparsed records so that a malformed box is reported rather
    than raised. Cross-references are checked too: an annotation whose
    video never appears in the detections or tracks is a violation, and
    when ``shots`` are supplied, each frame-level annotation must fall
    inside a shot of its video.

    Returns a :class:`ValidationReport`; clean inputs yield an empty one.
    """
    out = []
    known_videos = set()

    for i, det in enumerate(detections):
        where = f"detections[{i}]"
        video = det.get("video_id")
        if not video:
            out.append(f"{where}: missing video_id")
        else:
            known_videos.add(video)
        frame = det.get("frame")
        if not isinstance(frame, int) or frame < 0:
            out.append(f"{where}: frame must be an integer >= 0, got {frame!r}")
        _check_raw_box([det.get(k) for k in ("x1", "y1", "x2", "y2")],
                       where, out)
        conf = det.get("conf", 1.0)
        if not isinstance(conf, (int, float)) or not 0.0 <= conf <= 1.0:
            out.append(f"{where}: conf must be in [0,1], got {conf!r}")

    for i, track in enumerate(tracks):
        where = f"tracks[{i}] (track_id={track.get('track_id')!r})"
        video = track.get("video_id")
        if not video:
            out.append(f"{where}: missing video_id")
        else:
            known_videos.add(video)
        start = track.get("start_frame")
        if not isinstance(start, int) or start < 0:
            out.append(f"{where}: start_frame must be an integer >= 0, "
                       f"got {start!r}")
        boxes = track.get("boxes") or []
        if not boxes:
            out.append(f"{where}: track has no boxes")
        for j, box in enumerate(boxes):
            _check_raw_box(box, f"{where} boxes[{j}]", out)

    shot_ranges = {}
    for i, shot in enumerate(shots):
        where = f"shots[{i}] (shot_id={shot.get('shot_id')!r})"
        first, last = shot.get("first_frame"), shot.get("last_frame")
        if not (isinstance(first, int) and isinstance(last, int)):
            out.append(f"{where}: frame range must be integers")
            continue
        if first > last:
            out.append(f"{where}: first_frame {first} > last_frame {last}")
            continue
        shot_ranges.setdefault(shot.get("video_id"), []).append((first, last))

    for i, ann in enumerate(annotations):
        where = f"annotations[{i}]"
        video = ann.get("video_id")
        if not video:
            out.append(f"{where}: missing video_id")
        elif known_videos and video not in known_videos:
            out.append(f"{where}: video_id {video!r} not present in "
                       "detections or tracks")
        label = ann.get("label")
        if label not in _LABEL_VALUES:
            out.append(f"{where}: unknown label {label!r}")
        if "chars" in ann:
            chars = ann.get("chars")
            if not (isinstance(chars, (list, tuple)) and len(chars) == 2):
                out.append(f"{where}: chars must be a pair of names")
            continue
        box_a, box_b = ann.get("box_a"), ann.get("box_b")
        _check_raw_box(box_a, f"{where} box_a", out)
        _check_raw_box(box_b, f"{where} box_b", out)
        if box_a is not None and box_a == box_b:
            out.append(f"{where}: box_a equals box_b")
        frame = ann.get("frame")
        if not isinstance(frame, int) or frame < 0:
            out.append(f"{where}: frame must be an integer >= 0, got {frame!r}")
        elif video in shot_ranges:
            if not any(lo <= frame <= hi for lo, hi in shot_ranges[video]):
                out.append(f"{where}: frame {frame} outside every shot range "
                           f"of video {video!r}")

    return ValidationReport(tuple(out))


@dataclass(frozen=True)
class ShotRecord:
    """A contiguous camera take: frame range plus its tracks and labels."""

    shot_id: str
    video_id: str
    first_frame: int
    last_frame: int
    track_ids: tuple = ()
    annotations: tuple = ()

    def __post_init__(self):
        if self.first_frame > self.last_frame:
            raise ValueError(
                f"shot {self.shot_id}: first_frame {self.first_frame} > "
                f"last_frame {self.last_frame}"
            )
        object.__setattr__(self, "track_ids", tuple(self.track_ids))
        object.__setattr__(self, "annotations", tuple(self.annotations))

    @property
    def n_frames(self):
        return self.last_frame - self.first_frame + 1

    def contains_frame(self, frame):
        return self.first_frame <= frame <= self.last_frame
