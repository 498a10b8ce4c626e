"""Head-track linking and co-occurring pair-window enumeration.

Detections are linked frame by frame into tracks with a greedy IoU
matcher; no appearance model is used. Pairs of tracks that coexist long
enough yield fixed-length windows, the unit every downstream score is
computed on.
"""

from dataclasses import dataclass

from .geometry import iou
from .records import HeadTrack, build_track

IOU_LINK_THRESHOLD = 0.5
MAX_MISSED_FRAMES = 5
MIN_TRACK_LENGTH = 10
WINDOW_LENGTH = 10


def link_detections(detections, iou_threshold=IOU_LINK_THRESHOLD,
                    max_missed=MAX_MISSED_FRAMES, min_length=MIN_TRACK_LENGTH):
    """Link per-frame head detections into tracks.

    Frame by frame, active tracks are matched to detections greedily by
    descending IoU between the track's last box and the detection
    (ties broken by higher detection confidence, then input order).
    Matches below ``iou_threshold`` are not made. Unmatched detections
    start new tracks; a track unmatched for more than ``max_missed``
    consecutive frames is closed. Frames a track was missed on are filled
    by linear interpolation. Tracks shorter than ``min_length`` frames
    are dropped.

    Track ids are assigned in order of track creation and are unique
    across the whole detection set.

    Args:
        detections: iterable of HeadDetection, any order.
        iou_threshold: minimum IoU for a track-detection match.
        max_missed: tolerated consecutive missed frames.
        min_length: minimum surviving track length in frames.

    Returns:
        list of HeadTrack sorted by track_id.
    """
    by_video = {}
    for det in detections:
        by_video.setdefault(det.video_id, []).append(det)

    tracks = []
    next_id = 0
    for video_id in sorted(by_video):
        finished, next_id = _link_one_video(
            video_id, by_video[video_id], iou_threshold, max_missed, next_id
        )
        tracks.extend(t for t in finished if len(t) >= min_length)
    return sorted(tracks, key=lambda t: t.track_id)


def _link_one_video(video_id, dets, iou_threshold, max_missed, next_id):
    by_frame = {}
    for d in dets:
        by_frame.setdefault(d.frame, []).append(d)

    active = []  # each: {"id", "obs" [(frame, box)], "missed"}
    done = []

    def close(state):
        built = build_track(state["id"], video_id, state["obs"],
                            max_gap=max_missed)
        assert len(built) == 1, "gaps exceed max_missed inside one track"
        done.append(built[0])

    for frame in range(min(by_frame), max(by_frame) + 1):
        frame_dets = by_frame.get(frame, [])

        candidates = []
        for ti, state in enumerate(active):
            last_box = state["obs"][-1][1]
            for di, det in enumerate(frame_dets):
                ov = iou(last_box, det.box)
                if ov >= iou_threshold:
                    candidates.append((-ov, -det.confidence, di, ti))
        candidates.sort()

        used_tracks = set()
        used_dets = set()
        for _, _, di, ti in candidates:
            if ti in used_tracks or di in used_dets:
                continue
            used_tracks.add(ti)
            used_dets.add(di)
            active[ti]["obs"].append((frame, frame_dets[di].box))
            active[ti]["missed"] = 0

        still_active = []
        for ti, state in enumerate(active):
            if ti in used_tracks:
                still_active.append(state)
                continue
            state["missed"] += 1
            if state["missed"] > max_missed:
                close(state)
            else:
                still_active.append(state)
        active = still_active

        for di, det in enumerate(frame_dets):
            if di not in used_dets:
                active.append({"id": next_id, "obs": [(det.frame, det.box)],
                               "missed": 0})
                next_id += 1

    for state in active:
        close(state)
    return done, next_id


@dataclass(frozen=True)
class PairWindow:
    """A fixed-length slice over two co-occurring tracks.

    ``track_left`` is the track whose box center has the smaller x at the
    window's central frame; role is decided per window, so a pair can swap
    sides as people move. The central frame of a window of length T
    starting at frame s is s + T // 2.
    """

    video_id: str
    track_left: HeadTrack
    track_right: HeadTrack
    start_frame: int
    length: int

    @property
    def central_frame(self):
        return self.start_frame + self.length // 2

    @property
    def frames(self):
        return range(self.start_frame, self.start_frame + self.length)

    @property
    def pair_key(self):
        """Order-free identity of the underlying track pair."""
        ids = sorted((self.track_left.track_id, self.track_right.track_id))
        return (self.video_id, ids[0], ids[1])


def enumerate_pair_windows(tracks, window_length=WINDOW_LENGTH, stride=1):
    """All windows where two tracks of the same video fully overlap.

    For every unordered pair of tracks whose frame ranges overlap for at
    least ``window_length`` frames, windows of that length are emitted
    starting at the first overlap frame and advancing by ``stride``; an
    overlap of L frames yields floor((L - window_length) / stride) + 1
    windows. Output is ordered by (video, track id pair, start frame).
    """
    if window_length < 1:
        raise ValueError(f"window_length must be >= 1, got {window_length}")
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")

    by_video = {}
    for t in tracks:
        by_video.setdefault(t.video_id, []).append(t)

    windows = []
    for video_id in sorted(by_video):
        vid_tracks = sorted(by_video[video_id], key=lambda t: t.track_id)
        for i in range(len(vid_tracks)):
            for j in range(i + 1, len(vid_tracks)):
                windows.extend(
                    _pair_windows(vid_tracks[i], vid_tracks[j],
                                  window_length, stride)
                )
    return windows


def _pair_windows(ta, tb, window_length, stride):
    lo = max(ta.start_frame, tb.start_frame)
    hi = min(ta.end_frame, tb.end_frame)
    overlap = hi - lo + 1
    if overlap < window_length:
        return []

    out = []
    for start in range(lo, hi - window_length + 2, stride):
        central = start + window_length // 2
        xa = ta.box_at(central).center[0]
        xb = tb.box_at(central).center[0]
        if (xa, ta.track_id) <= (xb, tb.track_id):
            left, right = ta, tb
        else:
            left, right = tb, ta
        out.append(PairWindow(ta.video_id, left, right, start, window_length))
    return out
