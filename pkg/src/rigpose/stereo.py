"""Stereo-pair geometry: fundamental matrices from calibration, epipolar
validation, and midpoint triangulation.

The fundamental matrix of a rigidly mounted pair depends only on the fixed
relative extrinsics, so it is computed once per pair and reused for the
whole sequence. Triangulation casts rays from the camera placements implied
by the current pose estimate, keeping structure consistent with the pose.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    BehindCamera,
    CoincidentCenters,
    DegenerateLine,
    ParallelRays,
)
from .geometry import Camera, CameraRig, Pose, camera_placement

# Rays closer to parallel than this angle (radians) cannot be intersected.
PARALLEL_TOL = 1e-8


def _skew(v: np.ndarray) -> np.ndarray:
    return np.array(
        [[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]]
    )


@dataclass
class FundamentalMatrix:
    """Rank-2 matrix mapping homogeneous pixels of camera a to epipolar
    lines in camera b, normalized to unit Frobenius norm."""

    F: np.ndarray

    def __post_init__(self):
        self.F = np.asarray(self.F, dtype=float).reshape(3, 3)


@dataclass
class StereoPair:
    cam_a: int
    cam_b: int
    F: FundamentalMatrix
    baseline: float


def fundamental_from_calib(rig: CameraRig, a: int, b: int) -> FundamentalMatrix:
    """F = K_b^-T [t]x R K_a^-1 from the pair's fixed relative extrinsics."""
    cam_a, cam_b = rig.camera(a), rig.camera(b)
    baseline = np.linalg.norm(cam_a.D - cam_b.D)
    if baseline < 1e-9:
        raise CoincidentCenters(f"cameras {a} and {b} have coincident centers")
    rel_rot = cam_b.R.T @ cam_a.R
    rel_t = cam_b.R.T @ (cam_a.D - cam_b.D)
    essential = _skew(rel_t) @ rel_rot
    k_a_inv = np.linalg.inv(cam_a.intrinsics.k_matrix())
    k_b_inv = np.linalg.inv(cam_b.intrinsics.k_matrix())
    fundamental = k_b_inv.T @ essential @ k_a_inv
    fundamental /= np.linalg.norm(fundamental)
    return FundamentalMatrix(fundamental)


def make_stereo_pair(rig: CameraRig, a: int, b: int) -> StereoPair:
    baseline = float(np.linalg.norm(rig.camera(a).D - rig.camera(b).D))
    return StereoPair(a, b, fundamental_from_calib(rig, a, b), baseline)


def epipolar_distance(fm: FundamentalMatrix, p_a, p_b) -> float:
    """Distance (px) from p_b to the epipolar line of p_a."""
    p_a = np.asarray(p_a, dtype=float)
    line = fm.F @ np.array([p_a[0], p_a[1], 1.0])
    norm = np.hypot(line[0], line[1])
    if abs(line[0]) < 1e-15 and abs(line[1]) < 1e-15:
        raise DegenerateLine("epipolar line has vanishing direction")
    p_b = np.asarray(p_b, dtype=float)
    return float(abs(line[0] * p_b[0] + line[1] * p_b[1] + line[2]) / norm)


def epipolar_distances(fm: FundamentalMatrix, pts_a, pts_b) -> np.ndarray:
    """Vectorized epipolar distances for matched pixel arrays (N, 2)."""
    pts_a = np.asarray(pts_a, dtype=float)
    pts_b = np.asarray(pts_b, dtype=float)
    ones = np.ones((len(pts_a), 1))
    lines = np.hstack([pts_a, ones]) @ fm.F.T
    norms = np.hypot(lines[:, 0], lines[:, 1])
    norms = np.where(norms < 1e-15, np.inf, norms)
    num = np.abs(lines[:, 0] * pts_b[:, 0] + lines[:, 1] * pts_b[:, 1] + lines[:, 2])
    return num / norms


def _back_project_rays(pose: Pose, cam: Camera, pixels: np.ndarray):
    """World-frame camera center and unnormalized ray directions with unit
    depth along the optical axis (so the ray parameter equals depth)."""
    center, orient = camera_placement(pose, cam)
    intr = cam.intrinsics
    xn = (pixels[..., 0] - intr.cx) / intr.fx
    yn = (pixels[..., 1] - intr.cy) / intr.fy
    dirs_cam = np.stack([xn, yn, np.ones_like(xn)], axis=-1)
    return center, dirs_cam @ orient.T


def triangulate_batch(
    rig: CameraRig, pose: Pose, pair: StereoPair, pts_a, pts_b
) -> tuple[np.ndarray, np.ndarray]:
    """Midpoint triangulation of matched pixel arrays (N, 2).

    Returns (points (N, 3) world frame, valid mask (N,)). Invalid entries
    are near-parallel rays or points with nonpositive depth in either view.
    """
    pts_a = np.asarray(pts_a, dtype=float).reshape(-1, 2)
    pts_b = np.asarray(pts_b, dtype=float).reshape(-1, 2)
    c_a, w_a = _back_project_rays(pose, rig.camera(pair.cam_a), pts_a)
    c_b, w_b = _back_project_rays(pose, rig.camera(pair.cam_b), pts_b)

    # Least-squares ray parameters: minimize |c_a + s w_a - c_b - t w_b|.
    waa = np.einsum("ni,ni->n", w_a, w_a)
    wbb = np.einsum("ni,ni->n", w_b, w_b)
    wab = np.einsum("ni,ni->n", w_a, w_b)
    n = c_b - c_a
    rhs_a = w_a @ n
    rhs_b = w_b @ n
    det = waa * wbb - wab**2
    # det = |w_a|^2 |w_b|^2 sin^2(theta)
    ok = det > (PARALLEL_TOL**2) * waa * wbb
    det_safe = np.where(ok, det, 1.0)
    s = (wbb * rhs_a - wab * rhs_b) / det_safe
    t = (wab * rhs_a - waa * rhs_b) / det_safe
    ok &= (s > 0) & (t > 0)
    points = 0.5 * (c_a + s[:, None] * w_a + c_b + t[:, None] * w_b)
    return points, ok


def triangulate(rig: CameraRig, pose: Pose, pair: StereoPair, p_a, p_b) -> np.ndarray:
    """Midpoint of the common perpendicular of the two back-projected rays."""
    pts_a = np.asarray(p_a, dtype=float).reshape(1, 2)
    pts_b = np.asarray(p_b, dtype=float).reshape(1, 2)
    c_a, w_a = _back_project_rays(pose, rig.camera(pair.cam_a), pts_a)
    c_b, w_b = _back_project_rays(pose, rig.camera(pair.cam_b), pts_b)
    w_a, w_b = w_a[0], w_b[0]
    waa, wbb, wab = w_a @ w_a, w_b @ w_b, w_a @ w_b
    det = waa * wbb - wab**2
    if det <= (PARALLEL_TOL**2) * waa * wbb:
        raise ParallelRays("back-projected rays are near parallel")
    n = c_b - c_a
    s = (wbb * (w_a @ n) - wab * (w_b @ n)) / det
    t = (wab * (w_a @ n) - waa * (w_b @ n)) / det
    if s <= 0 or t <= 0:
        raise BehindCamera("triangulated point behind a camera")
    return 0.5 * (c_a + s * w_a + c_b + t * w_b)
