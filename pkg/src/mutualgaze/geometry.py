"""Box and gaze geometry in image coordinates (x right, y down)."""

import math

import numpy as np

from .records import BoundingBox, HeadPose

# Maximum angular deviation (degrees) between a person's gaze ray and the
# line toward the other head for the pair to count as looking at each other.
MUTUAL_GAZE_CONE_DEG = 15.0


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection-over-union of two boxes, in [0, 1]."""
    ix1 = max(a.x1, b.x1)
    iy1 = max(a.y1, b.y1)
    ix2 = min(a.x2, b.x2)
    iy2 = min(a.y2, b.y2)
    iw = max(0.0, ix2 - ix1)
    ih = max(0.0, iy2 - iy1)
    inter = iw * ih
    if inter == 0.0:
        return 0.0
    return inter / (a.area + b.area - inter)


def gaze_direction_2d(pose: HeadPose) -> np.ndarray:
    """Project a head pose to a unit gaze direction in the image plane.

    With yaw a (positive toward image right) and pitch b (positive up),
    the world gaze ray projects to (sin a * cos b, -sin b): looking up
    moves the image-plane ray toward negative y. A frontal pose (a = b = 0)
    has no in-plane component and maps to the zero vector.
    """
    a = math.radians(pose.yaw)
    b = math.radians(pose.pitch)
    g = np.array([math.sin(a) * math.cos(b), -math.sin(b)], dtype=np.float64)
    n = np.linalg.norm(g)
    if n < 1e-12:
        return np.zeros(2)
    return g / n


def angle_between_deg(u, v) -> float:
    """Angle in degrees between two 2-vectors; 180 if either is zero."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu < 1e-12 or nv < 1e-12:
        return 180.0
    c = float(np.dot(u, v) / (nu * nv))
    return math.degrees(math.acos(max(-1.0, min(1.0, c))))


def looking_at(pose: HeadPose, own_center, other_center,
               cone_deg=MUTUAL_GAZE_CONE_DEG) -> bool:
    """True if the gaze ray points at the other head within ``cone_deg``."""
    to_other = np.asarray(other_center, dtype=np.float64) - np.asarray(
        own_center, dtype=np.float64
    )
    return angle_between_deg(gaze_direction_2d(pose), to_other) <= cone_deg


def mutual_gaze(pose_a: HeadPose, center_a, pose_b: HeadPose, center_b,
                cone_deg=MUTUAL_GAZE_CONE_DEG) -> bool:
    """Geometric ground-truth rule: both gaze rays must point at the other
    head within ``cone_deg`` degrees."""
    return looking_at(pose_a, center_a, center_b, cone_deg) and looking_at(
        pose_b, center_b, center_a, cone_deg
    )
