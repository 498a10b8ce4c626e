"""Head-position map rendering.

Every frame of a pair window is summarized as a 64x64x3 float32 map that
encodes where heads are and how large they are: channel 1 carries the
right head of the pair, channel 2 the left head, and channel 0 every
other head visible in the frame. Each head becomes an isotropic Gaussian
blob centered on its box, peak value 1, composed with other blobs in the
same channel by per-pixel max.

Frame pixels map to the grid through a letterbox transform that
preserves aspect ratio and centers the image, so the frame center always
lands on grid point (32, 32). Array element [i, j] samples grid point
x = j, y = i exactly (no half-pixel shift), which keeps peak values of
centered blobs at exactly 1.0.
"""

import numpy as np

MAP_SIZE = 64
MAP_FRAMES = 10
SIGMA_SCALE = 0.5      # blob sigma as a fraction of half the box's larger side
CUTOFF_SIGMAS = 3.0    # blob support radius; values beyond it stay 0
MIN_SIGMA = 0.5        # grid units; keeps far-away heads from vanishing

CHANNEL_OTHERS = 0
CHANNEL_RIGHT = 1
CHANNEL_LEFT = 2


def letterbox_params(frame_width, frame_height, size=MAP_SIZE):
    """Scale and offsets mapping frame pixels to grid coordinates.

    Returns (scale, ox, oy) with grid = point * scale + (ox, oy). The
    longer frame side spans the grid exactly; the shorter side is
    centered.
    """
    if frame_width <= 0 or frame_height <= 0:
        raise ValueError(
            f"frame size must be positive, got {frame_width}x{frame_height}"
        )
    scale = size / max(frame_width, frame_height)
    ox = 0.5 * (size - scale * frame_width)
    oy = 0.5 * (size - scale * frame_height)
    return scale, ox, oy


def render_blob(canvas, center, sigma, cutoff=CUTOFF_SIGMAS):
    """Max-compose one Gaussian blob into a 2D canvas, in place.

    ``center`` is (x, y) in grid coordinates; canvas[i, j] is grid point
    (j, i). The blob value at distance d is exp(-d^2 / (2 sigma^2)),
    zero beyond ``cutoff`` sigmas.
    """
    size = canvas.shape[0]
    cx, cy = center
    radius = cutoff * sigma
    x_lo = max(0, int(np.ceil(cx - radius)))
    x_hi = min(size - 1, int(np.floor(cx + radius)))
    y_lo = max(0, int(np.ceil(cy - radius)))
    y_hi = min(size - 1, int(np.floor(cy + radius)))
    if x_lo > x_hi or y_lo > y_hi:
        return
    ys, xs = np.ogrid[y_lo:y_hi + 1, x_lo:x_hi + 1]
    d2 = (xs - cx) ** 2 + (ys - cy) ** 2
    patch = np.where(
        d2 <= radius * radius,
        np.exp(-d2 / (2.0 * sigma * sigma)),
        0.0,
    )
    region = canvas[y_lo:y_hi + 1, x_lo:x_hi + 1]
    np.maximum(region, patch, out=region)


def blob_sigma(box, scale, kappa=SIGMA_SCALE, min_sigma=MIN_SIGMA):
    """Sigma in grid units for a head box: kappa * (larger side) / 2."""
    return max(min_sigma, kappa * max(box.width, box.height) * scale / 2.0)


def head_map_frame(left_box, right_box, other_boxes, frame_width, frame_height,
                   size=MAP_SIZE, kappa=SIGMA_SCALE):
    """Render one frame's head map, shape (size, size, 3) float32."""
    scale, ox, oy = letterbox_params(frame_width, frame_height, size)
    out = np.zeros((size, size, 3), dtype=np.float32)

    def grid_center(box):
        cx, cy = box.center
        return (cx * scale + ox, cy * scale + oy)

    for channel, boxes in (
        (CHANNEL_LEFT, [left_box]),
        (CHANNEL_RIGHT, [right_box]),
        (CHANNEL_OTHERS, list(other_boxes)),
    ):
        canvas = np.zeros((size, size), dtype=np.float64)
        for box in boxes:
            render_blob(canvas, grid_center(box), blob_sigma(box, scale, kappa))
        out[:, :, channel] = canvas.astype(np.float32)
    return out


def central_frame_range(window_length, n_frames):
    """First window-relative index of the ``n_frames`` central frames.

    The central frame of a window of length T is index T // 2; a block of
    M frames is placed so it starts at T // 2 - M // 2. M must not exceed T.
    """
    if not 1 <= n_frames <= window_length:
        raise ValueError(
            f"need 1 <= n_frames <= window length, got {n_frames} and "
            f"{window_length}"
        )
    return window_length // 2 - n_frames // 2


def geometry_features(window, frame_width, frame_height):
    """The (dx, dy, s_r) summary of a pair window's central frame.

    dx and dy run from the left head center to the right head center in
    frame coordinates normalized to a unit square (x / width,
    y / height); s_r is the ratio of left to right box height, both
    normalized by frame height. This tuple is the whole input of the
    geometry-only baseline.
    """
    if frame_width <= 0 or frame_height <= 0:
        raise ValueError(
            f"frame size must be positive, got {frame_width}x{frame_height}"
        )
    frame = window.central_frame
    left = window.track_left.box_at(frame)
    right = window.track_right.box_at(frame)
    if left.height <= 0 or right.height <= 0:
        raise ValueError("head box height must be positive")
    lx, ly = left.center
    rx, ry = right.center
    dx = (rx - lx) / frame_width
    dy = (ry - ly) / frame_height
    s_r = left.height / right.height
    return (dx, dy, s_r)


def write_ppm(path, map_frame):
    """Dump one (size, size, 3) map frame as a binary PPM for eyeballing.

    Values are scaled by 255 and rounded; channel order is kept, so
    "others" render red, the right head green, the left head blue.
    """
    arr = np.asarray(map_frame)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected an (H, W, 3) frame, got {arr.shape}")
    rgb = np.rint(np.clip(arr, 0.0, 1.0) * 255).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(f"P6\n{arr.shape[1]} {arr.shape[0]}\n255\n".encode("ascii"))
        f.write(rgb.tobytes())


def head_map_sequence(window, frame_width, frame_height, n_frames=MAP_FRAMES,
                      other_tracks=(), size=MAP_SIZE, kappa=SIGMA_SCALE):
    """Head maps for the central ``n_frames`` frames of a pair window.

    ``other_tracks`` may contain any tracks from the same video
    (the pair's own tracks are filtered out by id); each one alive at a
    rendered frame contributes a blob to channel 0.

    Returns an array of shape (n_frames, size, size, 3), float32.
    """
    first = window.start_frame + central_frame_range(window.length, n_frames)
    pair_ids = {window.track_left.track_id, window.track_right.track_id}
    others = [t for t in other_tracks if t.track_id not in pair_ids]

    maps = np.empty((n_frames, size, size, 3), dtype=np.float32)
    for k in range(n_frames):
        frame = first + k
        other_boxes = [t.box_at(frame) for t in others if t.alive_at(frame)]
        maps[k] = head_map_frame(
            window.track_left.box_at(frame),
            window.track_right.box_at(frame),
            other_boxes,
            frame_width,
            frame_height,
            size=size,
            kappa=kappa,
        )
    return maps
