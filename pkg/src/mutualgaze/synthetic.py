"""Synthetic pose-labeled heads, pairs, and datasets.

Heads are procedural 64x64 crops: a shaded ellipse with an oriented
wedge whose tip position encodes the in-plane gaze direction, plus
speckle, blur and background clutter so a single view is informative
but not trivially clean. Pair labels come from a geometric oracle: two
heads are a positive exactly when each one's gaze ray points at the
other within an angular tolerance.

Negatives use the two constructions that come out of positives:
mirroring one head of a mutual-gaze pair (crop flipped, yaw negated,
geometry kept), or pose-incompatible sampling (both heads facing the
same way, or one head just outside the tolerance cone). Every emitted
sample is re-verified by the oracle, so there is no label noise.

Determinism: each sample is fully determined by (master seed, index).
Stage-specific child generators keep the scene latents identical across
different stack lengths T and map lengths M, so ablations compare the
same underlying scenes.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import ndimage

from . import headmap
from .geometry import angle_between_deg, gaze_direction_2d, mutual_gaze
from .records import BoundingBox, HeadPose, PairLabel

DEFAULT_TAU_DEG = 15.0
MAX_SAMPLING_ATTEMPTS = 1000


@dataclass(frozen=True)
class OracleConfig:
    """Angular tolerance of the mutual-gaze rule."""

    tau_deg: float = DEFAULT_TAU_DEG

    def __post_init__(self):
        if not 0.0 < self.tau_deg < 90.0:
            raise ValueError(f"tau must be in (0, 90) degrees, got "
                             f"{self.tau_deg}")


@dataclass(frozen=True)
class SynthConfig:
    """Everything the generator needs; defaults give a learnable but not
    saturating task.

    The pair axis stays within ``direction_max_deg`` of horizontal. With
    the default tolerance that guarantees mirroring one head always
    breaks mutual gaze: a gaze ray within tau of the axis sits within
    tau + 45 degrees of horizontal, so its mirror image is at least
    180 - 2*(tau + 45) = 60 degrees off the axis, well outside the cone.
    """

    oracle: OracleConfig = field(default_factory=OracleConfig)
    window_length: int = 10          # T, frames per crop stack
    map_frames: int = 10             # M, frames per head map
    crop_size: int = 64
    map_size: int = 64
    frame_width: int = 640
    frame_height: int = 480
    # pair geometry
    pair_distance: tuple = (0.18, 0.42)   # fraction of frame width
    direction_max_deg: float = 45.0
    head_scale: tuple = (0.07, 0.18)      # box height / frame height
    scale_ratio: tuple = (0.7, 1.4)
    # pose sampling
    lateral_range: tuple = (0.35, 0.95)
    positive_cone_frac: float = 0.95      # positives use up to this * tau
    near_miss_deg: tuple = (3.0, 35.0)    # beyond tau, for hard negatives
    same_direction_delta_deg: float = 28.0
    # crop rendering and per-frame jitter. The speckle level is chosen so
    # one frame reads the facing direction only unreliably. The jitter
    # ranges stay small on purpose: sub-pixel resampling attenuates the
    # speckle while leaving the smooth head shape intact, so a longer
    # crop stack amounts to a denoising ensemble of the same view.
    crop_noise: float = 0.15
    crop_blur_max: float = 1.5
    jitter_shift: float = 1.0
    jitter_zoom: float = 0.03
    jitter_brightness: float = 0.05
    # head-map trajectory wobble (pixels) and bystanders. The wobble is
    # strong enough that one map frame places the pair only coarsely;
    # averaging over a longer map recovers the geometry. Glitches mimic
    # outright tracker failures and are off by default.
    traj_sigma: float = 25.0
    glitch_prob: float = 0.0
    glitch_sigma: float = 60.0
    bystander_prob: float = 0.3
    map_sigma_scale: float = headmap.SIGMA_SCALE

    def __post_init__(self):
        if self.window_length < 1 or self.map_frames < 1:
            raise ValueError("window_length and map_frames must be >= 1")
        if self.direction_max_deg + self.oracle.tau_deg >= 75.0:
            raise ValueError(
                "direction_max_deg + tau must stay below 75 degrees, or "
                "mirrored negatives are not guaranteed to break mutual gaze"
            )

    @property
    def aspect(self):
        return self.frame_width / self.frame_height


@dataclass(frozen=True)
class SyntheticHead:
    """A head with known pose: normalized center/scale plus its crop."""

    center: tuple          # (x, y), fractions of frame width/height
    scale: float           # box height / frame height
    pose: HeadPose
    crop: np.ndarray       # (size, size, 3) float32 in [0, 1]

    def center_px(self, frame_width, frame_height):
        return (self.center[0] * frame_width, self.center[1] * frame_height)

    def box_px(self, frame_width, frame_height, width_ratio=0.8):
        h = self.scale * frame_height
        w = h * width_ratio
        cx, cy = self.center_px(frame_width, frame_height)
        return BoundingBox(cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2)


def gaze_oracle(a: SyntheticHead, b: SyntheticHead,
                cfg: OracleConfig = OracleConfig(),
                aspect: float = 4.0 / 3.0) -> PairLabel:
    """Geometric ground truth for a head pair.

    Centers are normalized, so the horizontal separation is rescaled by
    the frame aspect before any angle is measured. Symmetric in (a, b).
    """
    ca = (a.center[0] * aspect, a.center[1])
    cb = (b.center[0] * aspect, b.center[1])
    if math.hypot(cb[0] - ca[0], cb[1] - ca[1]) < 1e-9:
        raise ValueError("heads with coincident centers have no gaze "
                         "geometry")
    if mutual_gaze(a.pose, ca, b.pose, cb, cone_deg=cfg.tau_deg):
        return PairLabel.LAEO
    return PairLabel.NOT_LAEO


def mirror_head(head: SyntheticHead) -> SyntheticHead:
    """Flip the crop horizontally and negate the yaw; geometry kept."""
    pose = HeadPose(-head.pose.yaw, head.pose.pitch, -head.pose.roll)
    return replace(head, pose=pose,
                   crop=np.ascontiguousarray(head.crop[:, ::-1, :]))


# -- crop rendering -----------------------------------------------------------

def render_head_crop(pose: HeadPose, rng, size=64, noise=0.05, blur_max=1.1):
    """Procedurally draw one head crop for a pose.

    The crop is a shaded ellipse (rotated by roll) on a cluttered
    background; a wedge runs from the ellipse center toward the
    projection of the gaze ray, so yaw sign and magnitude are readable
    from where the wedge tip sits. Deterministic given (pose, rng state).
    """
    a = math.radians(pose.yaw)
    b = math.radians(pose.pitch)
    g = np.array([math.sin(a) * math.cos(b), -math.sin(b)])

    base = rng.uniform(0.15, 0.35)
    tint = rng.uniform(-0.05, 0.05, size=3)
    img = np.empty((size, size, 3), dtype=np.float64)
    img[:] = base + tint
    img += rng.normal(0.0, 0.06, size=(size, size, 1))

    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64)
    cx = size / 2 + rng.uniform(-2.0, 2.0)
    cy = size / 2 + rng.uniform(-2.0, 2.0)
    rx = size * rng.uniform(0.22, 0.30)
    ry = rx * rng.uniform(1.05, 1.30)

    roll = math.radians(pose.roll)
    cr, sr = math.cos(roll), math.sin(roll)
    u = (xs - cx) * cr + (ys - cy) * sr
    v = -(xs - cx) * sr + (ys - cy) * cr
    inside = (u / rx) ** 2 + (v / ry) ** 2 <= 1.0

    skin = rng.uniform(0.55, 0.75) + rng.uniform(-0.08, 0.08, size=3)
    norm_g = np.linalg.norm(g)
    if norm_g > 1e-9:
        shade = 1.0 + 0.3 * ((xs - cx) * g[0] + (ys - cy) * g[1]) / (
            norm_g * max(rx, ry)
        )
    else:
        shade = np.ones_like(xs)
    for ch in range(3):
        img[:, :, ch] = np.where(inside, skin[ch] * shade, img[:, :, ch])

    # Wedge from the ellipse center toward the gaze tip; tapering width.
    tip = np.array([cx + g[0] * rx * 0.85, cy + g[1] * ry * 0.85])
    seg = tip - np.array([cx, cy])
    seg_len2 = float(seg @ seg)
    dark = skin.mean() * 0.35
    if seg_len2 > 1e-9:
        t = ((xs - cx) * seg[0] + (ys - cy) * seg[1]) / seg_len2
        t = np.clip(t, 0.0, 1.0)
        px = cx + t * seg[0]
        py = cy + t * seg[1]
        d = np.hypot(xs - px, ys - py)
        width = 3.5 * (1.0 - t) + 1.2
        wedge = d <= width
    else:
        wedge = np.hypot(xs - cx, ys - cy) <= 3.0
    img[wedge] = dark

    sigma = rng.uniform(0.0, blur_max)
    if sigma > 0.05:
        img = ndimage.gaussian_filter(img, sigma=(sigma, sigma, 0.0))
    img += rng.normal(0.0, noise, size=img.shape)
    return np.clip(img, 0.0, 1.0).astype(np.float32)


def jitter_sequence(head: SyntheticHead, n_frames, rng, shift=2.5,
                    zoom=0.08, brightness=0.18):
    """Replicate a crop into a stack; middle replicas stay untouched.

    For a stack of length T, indices (T-1)//2 and T//2 are bit-equal to
    the source crop (one index when T is odd, the two central ones when
    T is even); every other replica gets an independent small shift,
    zoom and brightness change.
    """
    if n_frames < 1:
        raise ValueError(f"n_frames must be >= 1, got {n_frames}")
    middle = {(n_frames - 1) // 2, n_frames // 2}
    stack = np.empty((n_frames,) + head.crop.shape, dtype=np.float32)
    for k in range(n_frames):
        if k in middle:
            stack[k] = head.crop
            continue
        dx = rng.uniform(-shift, shift)
        dy = rng.uniform(-shift, shift)
        z = 1.0 + rng.uniform(-zoom, zoom)
        db = rng.uniform(-brightness, brightness)
        frame = warp_frame(head.crop, dx, dy, z, mode="nearest")
        stack[k] = np.clip(frame + db, 0.0, 1.0)
    return stack


def warp_frame(frame, dx, dy, zoom, mode="nearest"):
    """Shift by (dx, dy) pixels and zoom about the center (bilinear)."""
    h, w = frame.shape[:2]
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    matrix = np.diag([1.0 / zoom, 1.0 / zoom, 1.0])
    offset = np.array([cy - cy / zoom - dy, cx - cx / zoom - dx, 0.0])
    return ndimage.affine_transform(
        frame.astype(np.float64), matrix, offset=offset, order=1, mode=mode
    ).astype(np.float32)


# -- pose construction --------------------------------------------------------

def _pose_toward(direction, off_axis_deg, lateral, rng):
    """A pose whose image-plane gaze ray is ``direction`` rotated by
    ``off_axis_deg``, with in-plane magnitude ``lateral``."""
    phi = math.radians(off_axis_deg)
    c, s = math.cos(phi), math.sin(phi)
    dx = direction[0] * c - direction[1] * s
    dy = direction[0] * s + direction[1] * c
    pitch = math.degrees(-math.asin(lateral * dy))
    yaw = math.degrees(
        math.asin(lateral * dx / math.cos(math.radians(pitch)))
    )
    roll = rng.uniform(-25.0, 25.0)
    return HeadPose(yaw, pitch, roll)


def _unit(v):
    return v / np.linalg.norm(v)


class _Scene:
    """Latent state of one pair sample before rendering."""

    __slots__ = ("head_a", "head_b", "label", "strategy", "mirrored")

    def __init__(self, head_a, head_b, label, strategy, mirrored=None):
        self.head_a = head_a
        self.head_b = head_b
        self.label = label
        self.strategy = strategy
        self.mirrored = mirrored


def _sample_geometry(rng, cfg: SynthConfig):
    """Two head placements on an axis within 45 degrees of horizontal."""
    w, h = cfg.frame_width, cfg.frame_height
    phi = math.radians(rng.uniform(-cfg.direction_max_deg,
                                   cfg.direction_max_deg))
    if rng.random() < 0.5:
        phi += math.pi
    dist = rng.uniform(*cfg.pair_distance) * w
    axis = np.array([math.cos(phi), math.sin(phi)])

    scale_a = rng.uniform(*cfg.head_scale)
    scale_b = float(np.clip(scale_a * rng.uniform(*cfg.scale_ratio),
                            *cfg.head_scale))
    margin_x = 0.08 * w + dist * abs(axis[0]) / 2
    margin_y = 0.12 * h + dist * abs(axis[1]) / 2
    mid = np.array([rng.uniform(margin_x, w - margin_x),
                    rng.uniform(margin_y, h - margin_y)])
    pa = mid - axis * dist / 2
    pb = mid + axis * dist / 2
    return pa, pb, scale_a, scale_b


def _heads_from_latents(pa, pb, scale_a, scale_b, pose_a, pose_b, cfg, rng):
    w, h = cfg.frame_width, cfg.frame_height
    crop_a = render_head_crop(pose_a, rng, cfg.crop_size, cfg.crop_noise,
                              cfg.crop_blur_max)
    crop_b = render_head_crop(pose_b, rng, cfg.crop_size, cfg.crop_noise,
                              cfg.crop_blur_max)
    head_a = SyntheticHead((pa[0] / w, pa[1] / h), scale_a, pose_a, crop_a)
    head_b = SyntheticHead((pb[0] / w, pb[1] / h), scale_b, pose_b, crop_b)
    return head_a, head_b


def _sample_positive_scene(rng, cfg) -> _Scene:
    tau = cfg.oracle.tau_deg
    for _ in range(MAX_SAMPLING_ATTEMPTS):
        pa, pb, sa, sb = _sample_geometry(rng, cfg)
        d_ab = _unit(pb - pa)
        lat_a = rng.uniform(*cfg.lateral_range)
        lat_b = rng.uniform(*cfg.lateral_range)
        off_a = rng.uniform(-1.0, 1.0) * tau * cfg.positive_cone_frac
        off_b = rng.uniform(-1.0, 1.0) * tau * cfg.positive_cone_frac
        pose_a = _pose_toward(d_ab, off_a, lat_a, rng)
        pose_b = _pose_toward(-d_ab, off_b, lat_b, rng)
        head_a, head_b = _heads_from_latents(pa, pb, sa, sb, pose_a, pose_b,
                                             cfg, rng)
        if gaze_oracle(head_a, head_b, cfg.oracle,
                       cfg.aspect) == PairLabel.LAEO:
            return _Scene(head_a, head_b, PairLabel.LAEO, "positive")
    raise RuntimeError(
        f"could not sample a mutual-gaze pair in {MAX_SAMPLING_ATTEMPTS} "
        "attempts; check the configuration"
    )


def _sample_negative_scene(rng, cfg) -> _Scene:
    tau = cfg.oracle.tau_deg
    strategy = rng.choice(["mirror", "same_direction", "near_miss"],
                          p=[0.5, 0.25, 0.25])
    for _ in range(MAX_SAMPLING_ATTEMPTS):
        if strategy == "mirror":
            scene = _sample_positive_scene(rng, cfg)
            side = "a" if rng.random() < 0.5 else "b"
            if side == "a":
                scene.head_a = mirror_head(scene.head_a)
            else:
                scene.head_b = mirror_head(scene.head_b)
            scene.label = PairLabel.NOT_LAEO
            scene.strategy = "mirror"
            scene.mirrored = side
        else:
            pa, pb, sa, sb = _sample_geometry(rng, cfg)
            d_ab = _unit(pb - pa)
            lat_a = rng.uniform(*cfg.lateral_range)
            lat_b = rng.uniform(*cfg.lateral_range)
            if strategy == "same_direction":
                # Both face the same way: yaws within a small delta.
                yaw = rng.uniform(-75.0, 75.0)
                pitch = rng.uniform(-30.0, 30.0)
                pose_a = HeadPose(yaw, pitch, rng.uniform(-25.0, 25.0))
                pose_b = HeadPose(
                    float(np.clip(
                        yaw + rng.uniform(-cfg.same_direction_delta_deg,
                                          cfg.same_direction_delta_deg),
                        -89.0, 89.0)),
                    float(np.clip(pitch + rng.uniform(-12.0, 12.0),
                                  -89.0, 89.0)),
                    rng.uniform(-25.0, 25.0),
                )
            else:
                # One head on target, the other just outside the cone.
                off_a = rng.uniform(-1.0, 1.0) * tau * 0.6
                margin = rng.uniform(*cfg.near_miss_deg)
                sign = 1.0 if rng.random() < 0.5 else -1.0
                off_b = sign * (tau + margin)
                pose_a = _pose_toward(d_ab, off_a, lat_a, rng)
                pose_b = _pose_toward(-d_ab, off_b, lat_b, rng)
            head_a, head_b = _heads_from_latents(pa, pb, sa, sb,
                                                 pose_a, pose_b, cfg, rng)
            scene = _Scene(head_a, head_b, PairLabel.NOT_LAEO, strategy)
        if gaze_oracle(scene.head_a, scene.head_b, cfg.oracle,
                       cfg.aspect) == PairLabel.NOT_LAEO:
            return scene
    raise RuntimeError(
        f"could not sample a {strategy} negative in "
        f"{MAX_SAMPLING_ATTEMPTS} attempts; check the configuration"
    )


# -- sample assembly ----------------------------------------------------------

@dataclass(frozen=True)
class PairSample:
    """The network's unit of input, with its generation latents."""

    left: np.ndarray       # (T, size, size, 3)
    right: np.ndarray      # (T, size, size, 3)
    maps: np.ndarray       # (M, size, size, 3)
    label: int             # 1 = mutual gaze
    meta: dict


class _StaticTrack:
    """Duck-typed stand-in for a HeadTrack: a fixed box every frame."""

    def __init__(self, track_id, box):
        self.track_id = track_id
        self._box = box

    def alive_at(self, frame):
        return True

    def box_at(self, frame):
        return self._box


def _render_maps(left_head, right_head, rng, cfg):
    """Head maps for the pair: true centers plus per-frame wobble.

    The wobble imitates tracker noise; with several map frames it
    averages out, with a single frame it does not, which is exactly the
    benefit longer maps are supposed to bring.
    """
    w, h = cfg.frame_width, cfg.frame_height
    maps = np.empty((cfg.map_frames, cfg.map_size, cfg.map_size, 3),
                    dtype=np.float32)

    bystanders = []
    if rng.random() < cfg.bystander_prob:
        for _ in range(rng.integers(1, 3)):
            bx = rng.uniform(0.1, 0.9) * w
            by = rng.uniform(0.15, 0.85) * h
            bh = rng.uniform(*cfg.head_scale) * h
            bystanders.append((np.array([bx, by]), bh))

    for k in range(cfg.map_frames):
        def wobbled_box(head):
            sigma = cfg.traj_sigma
            if rng.random() < cfg.glitch_prob:
                sigma = cfg.glitch_sigma
            cx, cy = head.center_px(w, h)
            cx += rng.normal(0.0, sigma)
            cy += rng.normal(0.0, sigma)
            bh = head.scale * h
            bw = bh * 0.8
            return BoundingBox(cx - bw / 2, cy - bh / 2,
                               cx + bw / 2, cy + bh / 2)

        other_boxes = []
        for center, bh in bystanders:
            cx = center[0] + rng.normal(0.0, cfg.traj_sigma)
            cy = center[1] + rng.normal(0.0, cfg.traj_sigma)
            bw = bh * 0.8
            other_boxes.append(BoundingBox(cx - bw / 2, cy - bh / 2,
                                           cx + bw / 2, cy + bh / 2))

        maps[k] = headmap.head_map_frame(
            wobbled_box(left_head), wobbled_box(right_head), other_boxes,
            w, h, size=cfg.map_size, kappa=cfg.map_sigma_scale,
        )
    return maps


def make_pair(seed, want: PairLabel, cfg: SynthConfig = SynthConfig()
              ) -> PairSample:
    """One labeled pair sample, fully determined by ``seed``.

    ``want`` selects the target label; the emitted sample is re-verified
    against the oracle, so the label is correct by construction. Raises
    RuntimeError if the generator cannot satisfy the request.
    """
    if want == PairLabel.AMBIGUOUS:
        raise ValueError("the oracle never produces ambiguous labels")
    ss = seed if isinstance(seed, np.random.SeedSequence) else \
        np.random.SeedSequence(seed)
    scene_ss, jitter_l_ss, jitter_r_ss, map_ss = ss.spawn(4)
    rng = np.random.default_rng(scene_ss)

    if want == PairLabel.LAEO:
        scene = _sample_positive_scene(rng, cfg)
    else:
        scene = _sample_negative_scene(rng, cfg)
    verified = gaze_oracle(scene.head_a, scene.head_b, cfg.oracle, cfg.aspect)
    assert verified == scene.label, "oracle re-verification failed"

    if scene.head_a.center[0] <= scene.head_b.center[0]:
        left_head, right_head = scene.head_a, scene.head_b
    else:
        left_head, right_head = scene.head_b, scene.head_a

    left = jitter_sequence(left_head, cfg.window_length,
                           np.random.default_rng(jitter_l_ss),
                           cfg.jitter_shift, cfg.jitter_zoom,
                           cfg.jitter_brightness)
    right = jitter_sequence(right_head, cfg.window_length,
                            np.random.default_rng(jitter_r_ss),
                            cfg.jitter_shift, cfg.jitter_zoom,
                            cfg.jitter_brightness)
    maps = _render_maps(left_head, right_head,
                        np.random.default_rng(map_ss), cfg)

    w, h = cfg.frame_width, cfg.frame_height
    lx, ly = left_head.center
    rx, ry = right_head.center
    meta = {
        "strategy": scene.strategy,
        "mirrored": scene.mirrored,
        "pose_left": [left_head.pose.yaw, left_head.pose.pitch,
                      left_head.pose.roll],
        "pose_right": [right_head.pose.yaw, right_head.pose.pitch,
                       right_head.pose.roll],
        "center_left": [lx, ly],
        "center_right": [rx, ry],
        "scale_left": left_head.scale,
        "scale_right": right_head.scale,
        "dx": rx - lx,
        "dy": ry - ly,
        "s_r": left_head.scale / right_head.scale,
        "box_left": list(left_head.box_px(w, h).as_tuple()),
        "box_right": list(right_head.box_px(w, h).as_tuple()),
    }
    return PairSample(left, right, maps,
                      int(scene.label == PairLabel.LAEO), meta)


# -- datasets -----------------------------------------------------------------

class SyntheticPairDataset:
    """Lazy pair dataset: samples render on demand from per-index seeds.

    Index i always produces the same sample for a given master seed, no
    matter in what order or subset samples are requested. ``indices``
    restricts a view to a subset (used for train/val splits).
    """

    def __init__(self, n_pos, n_neg, seed, cfg: SynthConfig = SynthConfig(),
                 indices=None):
        self.n_pos = n_pos
        self.n_neg = n_neg
        self.seed = seed
        self.cfg = cfg
        self._all_labels = np.concatenate([
            np.ones(n_pos, dtype=np.int64),
            np.zeros(n_neg, dtype=np.int64),
        ])
        if indices is None:
            indices = np.arange(n_pos + n_neg)
        self.indices = np.asarray(indices, dtype=np.int64)

    def __len__(self):
        return len(self.indices)

    @property
    def labels(self):
        return self._all_labels[self.indices]

    def sample(self, i) -> PairSample:
        """Sample by position within this view."""
        gi = int(self.indices[i])
        want = PairLabel.LAEO if self._all_labels[gi] else PairLabel.NOT_LAEO
        return make_pair(np.random.SeedSequence([self.seed, gi]), want,
                         self.cfg)

    def load(self, positions):
        """Render a batch; returns (left, right, maps, labels) arrays."""
        samples = [self.sample(i) for i in positions]
        left = np.stack([s.left for s in samples])
        right = np.stack([s.right for s in samples])
        maps = np.stack([s.maps for s in samples])
        labels = np.array([s.label for s in samples], dtype=np.int64)
        return left, right, maps, labels

    def split(self, val_fraction=0.1):
        """Disjoint stratified train/val views, deterministic from seed."""
        rng = np.random.default_rng(np.random.SeedSequence([self.seed,
                                                            0x5B117]))
        train_idx, val_idx = [], []
        for label in (1, 0):
            pool = self.indices[self._all_labels[self.indices] == label]
            pool = rng.permutation(pool)
            n_val = max(1, int(round(len(pool) * val_fraction)))
            val_idx.extend(pool[:n_val])
            train_idx.extend(pool[n_val:])
        view = lambda idx: SyntheticPairDataset(
            self.n_pos, self.n_neg, self.seed, self.cfg,
            indices=np.sort(np.asarray(idx)),
        )
        return view(train_idx), view(val_idx)


class SyntheticHeadDataset:
    """Lazy pose-labeled single-head stacks for branch pretraining."""

    def __init__(self, n, seed, cfg: SynthConfig = SynthConfig()):
        self.n = n
        self.seed = seed
        self.cfg = cfg

    def __len__(self):
        return self.n

    def sample(self, i):
        """Returns (stack (T, size, size, 3), angles (3,) degrees)."""
        ss = np.random.SeedSequence([self.seed, 0x4EAD, int(i)])
        pose_ss, jitter_ss = ss.spawn(2)
        rng = np.random.default_rng(pose_ss)
        pose = HeadPose(rng.uniform(-90.0, 90.0), rng.uniform(-45.0, 45.0),
                        rng.uniform(-25.0, 25.0))
        head = SyntheticHead(
            (rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8)),
            rng.uniform(*self.cfg.head_scale), pose,
            render_head_crop(pose, rng, self.cfg.crop_size,
                             self.cfg.crop_noise, self.cfg.crop_blur_max),
        )
        stack = jitter_sequence(head, self.cfg.window_length,
                                np.random.default_rng(jitter_ss),
                                self.cfg.jitter_shift, self.cfg.jitter_zoom,
                                self.cfg.jitter_brightness)
        angles = np.array([pose.yaw, pose.pitch, pose.roll])
        return stack, angles

    def load(self, positions):
        pairs = [self.sample(i) for i in positions]
        stacks = np.stack([p[0] for p in pairs])
        angles = np.stack([p[1] for p in pairs])
        return stacks, angles


def generate_dataset(n_pos, n_neg, seed, cfg: SynthConfig, out_dir):
    """Write train/ and val/ sample containers plus annotations.

    The split is stratified 90/10 and disjoint; reruns with the same
    arguments produce byte-identical files. Each sample also yields a
    frame-level annotation record (virtual video id, central frame,
    latent head boxes) so the evaluation pipeline can run on files alone.

    Returns (train_dir, val_dir).
    """
    from pathlib import Path

    from . import formats

    base = SyntheticPairDataset(n_pos, n_neg, seed, cfg)
    train, val = base.split()
    out = Path(out_dir)
    central = cfg.window_length // 2

    for name, view in (("train", train), ("val", val)):
        split_dir = out / name
        annotations = []
        with formats.SampleWriter(split_dir) as writer:
            for i in range(len(view)):
                s = view.sample(i)
                gi = int(view.indices[i])
                video_id = f"synth-{seed}-{gi:06d}"
                meta = dict(s.meta, video_id=video_id, frame=central,
                            index=gi)
                writer.add({"left": s.left, "right": s.right,
                            "maps": s.maps}, s.label, meta)
                annotations.append({
                    "video_id": video_id, "frame": central,
                    "box_a": s.meta["box_left"],
                    "box_b": s.meta["box_right"],
                    "label": PairLabel.LAEO.value if s.label
                             else PairLabel.NOT_LAEO.value,
                })
        formats.write_jsonl(split_dir / "annotations.jsonl",
                            formats.ANNOTATIONS_FORMAT, annotations)
    return out / "train", out / "val"
