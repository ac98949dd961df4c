"""Recursive estimators: the 12-state pose EKF and 3-state structure EKFs.

Pose state layout: x = (tx, ty, tz, alpha, beta, gamma, and their per-frame
derivatives), so x[:6] is the pose and x[6:] its velocity. The plant is
constant velocity: pose += velocity each frame. Measurements are pixel
locations of features with known 3D structure, so the measurement model is
the rig transform composed with pinhole projection; its Jacobian w.r.t. the
six pose parameters is analytic and the velocity columns are zero.

The update computes the Kalman gain in information form (well conditioned
for large measurement counts and small pixel variance) and propagates the
covariance in Joseph form, which preserves symmetry and positive
semidefiniteness for any gain.

Structure filters are 3-state per-point estimators updated with the current
pose held fixed; they are stored as batched arrays so a camera's whole
feature set updates in one vectorized call.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BehindCamera, EmptyBatch, SingularInnovationCovariance
from .geometry import (
    Camera,
    CameraRig,
    Intrinsics,
    Z_MIN,
    project_jacobian,
    rot_derivatives,
    rot_from_angles,
)

N_STATE = 12


@dataclass
class FilterTuning:
    """Noise and initialization parameters for the filters (per frame units)."""

    q_pose: float = 1e-6        # process noise on pose components (m^2, rad^2)
    q_vel: float = 1e-4         # process noise on derivative components
    r_px: float = 0.5           # measurement noise std per pixel coordinate
    p0_pose: float = 1e-4       # initial pose variance
    p0_vel: float = 1e-4        # initial derivative variance
    p0_struct_lateral: float = 1e-2   # initial structure variance, image-plane axes (m^2)
    p0_struct_depth: float = 0.25     # initial structure variance, depth axis (m^2)

    def process_noise(self) -> np.ndarray:
        return np.diag([self.q_pose] * 6 + [self.q_vel] * 6)

    def initial_covariance(self) -> np.ndarray:
        return np.diag([self.p0_pose] * 6 + [self.p0_vel] * 6)


@dataclass
class PoseFilterState:
    """State vector, covariance, and noise settings of one pose EKF."""

    x: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    r_var: float

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float).reshape(N_STATE)
        self.P = np.asarray(self.P, dtype=float).reshape(N_STATE, N_STATE)
        self.Q = np.asarray(self.Q, dtype=float).reshape(N_STATE, N_STATE)

    @property
    def pose_vector(self) -> np.ndarray:
        return self.x[:6]

    def copy(self) -> "PoseFilterState":
        return PoseFilterState(self.x.copy(), self.P.copy(), self.Q, self.r_var)


def make_pose_filter(pose_vec, vel_vec, tuning: FilterTuning) -> PoseFilterState:
    x = np.concatenate([np.asarray(pose_vec, float), np.asarray(vel_vec, float)])
    return PoseFilterState(
        x=x,
        P=tuning.initial_covariance(),
        Q=tuning.process_noise(),
        r_var=tuning.r_px**2,
    )


def transition_matrix() -> np.ndarray:
    a = np.eye(N_STATE)
    a[:6, 6:] = np.eye(6)
    return a


def pose_predict(state: PoseFilterState) -> PoseFilterState:
    """Constant-velocity prediction: pose += velocity, P <- A P A^T + Q."""
    a = transition_matrix()
    x = a @ state.x
    p = a @ state.P @ a.T + state.Q
    return PoseFilterState(x, 0.5 * (p + p.T), state.Q, state.r_var)


@dataclass
class CameraMeasurements:
    """One camera's share of a measurement batch."""

    camera: int
    ids: np.ndarray
    uv: np.ndarray
    points: np.ndarray

    def __post_init__(self):
        self.ids = np.asarray(self.ids)
        self.uv = np.asarray(self.uv, dtype=float).reshape(-1, 2)
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 3)


@dataclass
class MeasurementBatch:
    """Pixel observations of known-structure features, grouped per camera."""

    entries: list[CameraMeasurements] = field(default_factory=list)

    @property
    def n_features(self) -> int:
        return sum(len(e.ids) for e in self.entries)

    @property
    def n_rows(self) -> int:
        return 2 * self.n_features


def pose_measurement_rows(pose_vec: np.ndarray, cam: Camera, points: np.ndarray):
    """Predicted pixels and the analytic pose Jacobian for one camera.

    Returns (uv (N, 2), jac (N, 2, 6)); jac columns are d(pixel)/d(d, angles).
    Raises BehindCamera if any point has nonpositive depth.
    """
    d, angles = pose_vec[:3], pose_vec[3:6]
    rot = rot_from_angles(angles)
    drs = rot_derivatives(angles)
    orient = rot @ cam.R                       # camera-to-world
    center = d + rot @ cam.D
    p_cam = (points - center) @ orient
    if np.any(p_cam[:, 2] <= Z_MIN):
        raise BehindCamera("measurement point behind its camera")
    intr = cam.intrinsics
    uv = np.stack(
        [
            intr.fx * p_cam[:, 0] / p_cam[:, 2] + intr.cx,
            intr.fy * p_cam[:, 1] / p_cam[:, 2] + intr.cy,
        ],
        axis=-1,
    )
    jp = project_jacobian(p_cam, intr)         # (N, 2, 3)
    jac = np.empty((len(points), 2, 6))
    # dP_cam/dd = -orient^T, identical for every point
    jac[:, :, :3] = jp @ (-orient.T)
    rel = points - d
    for i in range(3):
        # dP_cam/d(angle_i) = R_k^T dR^T/d(angle_i) (M - d)
        dp = (rel @ drs[i]) @ cam.R
        jac[:, :, 3 + i] = np.einsum("nij,nj->ni", jp, dp)
    return uv, jac


def predicted_depths(pose_vec: np.ndarray, cam: Camera, points: np.ndarray) -> np.ndarray:
    """Depth of each point in the camera at the given pose (for visibility masks)."""
    d, angles = pose_vec[:3], pose_vec[3:6]
    rot = rot_from_angles(angles)
    orient = rot @ cam.R
    center = d + rot @ cam.D
    return (points - center) @ orient[:, 2]


def _stack_batch(state: PoseFilterState, batch: MeasurementBatch, rig: CameraRig):
    if batch.n_features == 0:
        raise EmptyBatch("measurement batch is empty")
    uvs, jacs, observed = [], [], []
    for entry in batch.entries:
        cam = rig.camera(entry.camera)
        uv, jac = pose_measurement_rows(state.x, cam, entry.points)
        uvs.append(uv)
        jacs.append(jac)
        observed.append(entry.uv)
    predicted = np.concatenate(uvs).reshape(-1)
    jac6 = np.concatenate(jacs).reshape(-1, 6)
    h = np.zeros((len(jac6), N_STATE))
    h[:, :6] = jac6
    return predicted, np.concatenate(observed).reshape(-1), h


def predict_measurements(state: PoseFilterState, batch: MeasurementBatch, rig: CameraRig) -> np.ndarray:
    predicted, _, _ = _stack_batch(state, batch, rig)
    return predicted


def measurement_jacobian(state: PoseFilterState, batch: MeasurementBatch, rig: CameraRig) -> np.ndarray:
    """Stacked (2n, 12) Jacobian of predicted pixels w.r.t. the state."""
    _, _, h = _stack_batch(state, batch, rig)
    return h


def innovation_covariance(state: PoseFilterState, batch: MeasurementBatch, rig: CameraRig) -> np.ndarray:
    """Dense S = H P H^T + R; intended for diagnostics on small batches."""
    _, _, h = _stack_batch(state, batch, rig)
    return h @ state.P @ h.T + state.r_var * np.eye(len(h))


def pose_update(state: PoseFilterState, batch: MeasurementBatch, rig: CameraRig) -> PoseFilterState:
    """EKF measurement update over every camera's observations at once.

    Gain is computed in information form, K = (P^-1 + H^T H / r)^-1 H^T / r,
    algebraically identical to P H^T (H P H^T + R)^-1; covariance follows in
    Joseph form. Raises SingularInnovationCovariance when the prior or the
    information matrix cannot be factorized, in which case the caller may
    skip the update for this frame.
    """
    predicted, observed, h = _stack_batch(state, batch, rig)
    innovation = observed - predicted
    r = state.r_var
    try:
        p_inv = np.linalg.inv(state.P)
        info = p_inv + (h.T @ h) / r
        l_inv = np.linalg.inv(np.linalg.cholesky(info))
        p_post = l_inv.T @ l_inv
    except np.linalg.LinAlgError as exc:
        raise SingularInnovationCovariance(str(exc)) from exc
    if not np.all(np.isfinite(p_post)):
        raise SingularInnovationCovariance("non-finite posterior covariance")
    gain = p_post @ h.T / r
    x = state.x + gain @ innovation
    ikh = np.eye(N_STATE) - gain @ h
    p_new = ikh @ state.P @ ikh.T + r * (gain @ gain.T)
    return PoseFilterState(x, 0.5 * (p_new + p_new.T), state.Q, state.r_var)


# ---------------------------------------------------------------------------
# Per-point structure filters
# ---------------------------------------------------------------------------

@dataclass
class StructureFilterState:
    """One feature's 3D estimate (world/local frame) and covariance."""

    m: np.ndarray
    P: np.ndarray

    def __post_init__(self):
        self.m = np.asarray(self.m, dtype=float).reshape(3)
        self.P = np.asarray(self.P, dtype=float).reshape(3, 3)


def structure_depths(points, pose_vec, cam: Camera) -> np.ndarray:
    return predicted_depths(np.asarray(pose_vec, float), cam, np.asarray(points, float))


def structure_update_batch(
    means: np.ndarray,
    covs: np.ndarray,
    observed_uv: np.ndarray,
    pose_vec: np.ndarray,
    cam: Camera,
    r_var: float,
):
    """Vectorized EKF update of N independent 3-state point filters.

    The pose is held fixed; each point is corrected by its own (u, v)
    observation. All points must be in front of the camera. Returns updated
    (means (N, 3), covs (N, 3, 3)).
    """
    means = np.asarray(means, dtype=float)
    covs = np.asarray(covs, dtype=float)
    observed_uv = np.asarray(observed_uv, dtype=float)
    d, angles = pose_vec[:3], pose_vec[3:6]
    rot = rot_from_angles(angles)
    orient = rot @ cam.R
    center = d + rot @ cam.D
    p_cam = (means - center) @ orient
    if np.any(p_cam[:, 2] <= Z_MIN):
        raise BehindCamera("structure point behind its camera")
    intr = cam.intrinsics
    predicted = np.stack(
        [
            intr.fx * p_cam[:, 0] / p_cam[:, 2] + intr.cx,
            intr.fy * p_cam[:, 1] / p_cam[:, 2] + intr.cy,
        ],
        axis=-1,
    )
    jp = project_jacobian(p_cam, intr)                   # (N, 2, 3)
    jac = jp @ orient.T                                  # dP_cam/dM = orient^T
    innovation = observed_uv - predicted                 # (N, 2)

    pjt = np.einsum("nij,nkj->nik", covs, jac)           # P J^T, (N, 3, 2)
    s = np.einsum("nij,njk->nik", jac, pjt)              # (N, 2, 2)
    s[:, 0, 0] += r_var
    s[:, 1, 1] += r_var
    det = s[:, 0, 0] * s[:, 1, 1] - s[:, 0, 1] * s[:, 1, 0]
    s_inv = np.empty_like(s)
    s_inv[:, 0, 0] = s[:, 1, 1]
    s_inv[:, 1, 1] = s[:, 0, 0]
    s_inv[:, 0, 1] = -s[:, 0, 1]
    s_inv[:, 1, 0] = -s[:, 1, 0]
    s_inv /= det[:, None, None]
    gain = np.einsum("nij,njk->nik", pjt, s_inv)         # (N, 3, 2)
    new_means = means + np.einsum("nij,nj->ni", gain, innovation)
    ikh = np.eye(3)[None] - np.einsum("nij,njk->nik", gain, jac)
    new_covs = np.einsum("nij,njk,nlk->nil", ikh, covs, ikh) + r_var * np.einsum(
        "nij,nkj->nik", gain, gain
    )
    new_covs = 0.5 * (new_covs + np.swapaxes(new_covs, 1, 2))
    return new_means, new_covs


def structure_update(
    s: StructureFilterState,
    observed,
    pose,
    rig: CameraRig,
    k: int,
    r_var: float = 0.25,
) -> StructureFilterState:
    """Single-point structure update through camera k of the rig."""
    cam = rig.camera(k)
    pose_vec = pose.as_vector() if hasattr(pose, "as_vector") else np.asarray(pose, float)
    means, covs = structure_update_batch(
        s.m[None, :], s.P[None, :, :], np.asarray(observed, float)[None, :],
        pose_vec, cam, r_var,
    )
    return StructureFilterState(means[0], covs[0])


def orthographic_init(uv: np.ndarray, intr: Intrinsics, depth: float) -> np.ndarray:
    """Back-project pixels (N, 2) to the constant-depth plane z = depth
    in the camera frame."""
    uv = np.asarray(uv, dtype=float).reshape(-1, 2)
    xn = (uv[:, 0] - intr.cx) / intr.fx
    yn = (uv[:, 1] - intr.cy) / intr.fy
    return depth * np.stack([xn, yn, np.ones(len(uv))], axis=-1)


def initial_structure_covariance(tuning: FilterTuning, n: int) -> np.ndarray:
    """Depth-axis-inflated initial covariance for orthographically seeded
    points, expressed in the camera axes at initialization."""
    cov = np.diag(
        [tuning.p0_struct_lateral, tuning.p0_struct_lateral, tuning.p0_struct_depth]
    )
    return np.repeat(cov[None, :, :], n, axis=0)
