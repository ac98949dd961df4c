"""Rig geometry: rotations, rigid transforms, and pinhole projection.

Coordinate conventions used across the package:

* World frame: the reference camera's frame at frame 0 (x right, y down,
  z along the reference optical axis). All pose parameters are expressed
  with respect to this frame.
* Camera frame: standard computer vision (x right, y down, z forward).
* A body pose is (d, angles): translation d of the reference camera and
  rotation angles (alpha, beta, gamma) about the world x/y/z axes with
  composition R = Rx(alpha) @ Ry(beta) @ Rz(gamma).
* A point M (world) seen by the reference camera at pose (d, R) has camera
  coordinates P = R^T (M - d). Camera k of the rig, mounted at displacement
  D_k with fixed rotation R_k, sees P_k = R_k^T R^T (M - d - R D_k).
* Pixels: u = fx * x/z + cx, v = fy * y/z + cy.

Angle decomposition is only valid away from |beta| = pi/2; the per-frame
motion regime of this package stays far inside that bound.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BehindCamera,
    InputError,
    InvalidCameraIndex,
    GimbalProximity,
    NonOrthonormalInput,
)

# Orthonormality guard used wherever a rotation matrix is accepted as input.
ORTHO_TOL = 1e-6
# Points closer to the image plane than this are treated as invisible.
Z_MIN = 1e-6
# |cos(beta)| below this is gimbal proximity for the Euler decomposition.
GIMBAL_TOL = 1e-6


def rot_x(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(b: float) -> np.ndarray:
    c, s = np.cos(b), np.sin(b)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(g: float) -> np.ndarray:
    c, s = np.cos(g), np.sin(g)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rot_from_angles(angles) -> np.ndarray:
    """Build the rotation matrix R = Rx(alpha) @ Ry(beta) @ Rz(gamma)."""
    a, b, g = angles
    return rot_x(a) @ rot_y(b) @ rot_z(g)


def rot_derivatives(angles) -> np.ndarray:
    """Partial derivatives of rot_from_angles, shape (3, 3, 3).

    Entry [i] is dR/d(angles[i]).
    """
    a, b, g = angles
    rx, ry, rz = rot_x(a), rot_y(b), rot_z(g)
    ca, sa = np.cos(a), np.sin(a)
    cb, sb = np.cos(b), np.sin(b)
    cg, sg = np.cos(g), np.sin(g)
    drx = np.array([[0.0, 0.0, 0.0], [0.0, -sa, -ca], [0.0, ca, -sa]])
    dry = np.array([[-sb, 0.0, cb], [0.0, 0.0, 0.0], [-cb, 0.0, -sb]])
    drz = np.array([[-sg, -cg, 0.0], [cg, -sg, 0.0], [0.0, 0.0, 0.0]])
    return np.stack([drx @ ry @ rz, rx @ dry @ rz, rx @ ry @ drz])


def check_rotation(rot: np.ndarray, tol: float = ORTHO_TOL) -> None:
    rot = np.asarray(rot, dtype=float)
    if rot.shape != (3, 3):
        raise NonOrthonormalInput(f"expected 3x3 rotation, got shape {rot.shape}")
    err = np.abs(rot @ rot.T - np.eye(3)).max()
    if not np.isfinite(err) or err > tol:
        raise NonOrthonormalInput(f"matrix not orthonormal (|RR^T - I| = {err:.3g})")
    if np.linalg.det(rot) < 0.0:
        raise NonOrthonormalInput("matrix has negative determinant (reflection)")


def angles_from_rot(rot: np.ndarray) -> np.ndarray:
    """Decompose a rotation into (alpha, beta, gamma) with R = Rx Ry Rz.

    Raises NonOrthonormalInput for non-rotations and GimbalProximity when
    |cos(beta)| falls below GIMBAL_TOL.
    """
    rot = np.asarray(rot, dtype=float)
    check_rotation(rot)
    # R[0,2] = sin(beta); R[1,2] = -sin(alpha)cos(beta); R[2,2] = cos(alpha)cos(beta)
    # R[0,0] = cos(beta)cos(gamma); R[0,1] = -cos(beta)sin(gamma)
    sb = np.clip(rot[0, 2], -1.0, 1.0)
    cb = np.hypot(rot[0, 0], rot[0, 1])
    if cb < GIMBAL_TOL:
        raise GimbalProximity("|cos(beta)| below tolerance; decomposition unstable")
    beta = np.arctan2(sb, cb)
    alpha = np.arctan2(-rot[1, 2], rot[2, 2])
    gamma = np.arctan2(-rot[0, 1], rot[0, 0])
    return np.array([alpha, beta, gamma])


def equivalent_rotation(rot_k: np.ndarray, rot_local: np.ndarray) -> np.ndarray:
    """Change of basis R_k @ r @ R_k^T: a camera-local rotation expressed
    about the reference axes."""
    check_rotation(rot_k)
    check_rotation(rot_local)
    return rot_k @ rot_local @ rot_k.T


@dataclass
class Pose:
    """Reference-camera pose: translation d (m) and angles (rad) in the world frame."""

    d: np.ndarray
    angles: np.ndarray

    def __post_init__(self):
        self.d = np.asarray(self.d, dtype=float).reshape(3)
        self.angles = np.asarray(self.angles, dtype=float).reshape(3)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.zeros(3), np.zeros(3))

    @classmethod
    def from_vector(cls, v) -> "Pose":
        v = np.asarray(v, dtype=float).reshape(6)
        return cls(v[:3], v[3:])

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.d, self.angles])

    def rotation(self) -> np.ndarray:
        return rot_from_angles(self.angles)

    def copy(self) -> "Pose":
        return Pose(self.d.copy(), self.angles.copy())


@dataclass
class Intrinsics:
    """Pinhole intrinsics in pixel units."""

    fx: float = 1000.0
    fy: float = 1000.0
    cx: float = 320.0
    cy: float = 240.0
    width: int = 640
    height: int = 480

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise InputError("focal length must be positive")
        if not (0 <= self.cx <= self.width and 0 <= self.cy <= self.height):
            raise InputError("principal point outside image bounds")

    def k_matrix(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )


@dataclass
class Camera:
    """One rig camera: displacement D from the reference camera, fixed
    rotation R w.r.t. the world frame, and intrinsics."""

    D: np.ndarray
    R: np.ndarray
    intrinsics: Intrinsics = field(default_factory=Intrinsics)

    def __post_init__(self):
        self.D = np.asarray(self.D, dtype=float).reshape(3)
        self.R = np.asarray(self.R, dtype=float).reshape(3, 3)
        check_rotation(self.R, tol=1e-9)


@dataclass
class CameraRig:
    """Ordered camera list; entry 0 is the reference camera (D = 0, R = I)."""

    cameras: list[Camera]
    layout: str = "overlapping"

    def __post_init__(self):
        if not self.cameras:
            raise InputError("rig needs at least one camera")
        ref = self.cameras[0]
        if np.any(ref.D != 0.0) or np.any(ref.R != np.eye(3)):
            raise InputError("rig camera 0 must have D = 0 and R = I exactly")
        if self.layout not in ("overlapping", "non-overlapping"):
            raise InputError(f"unknown layout tag {self.layout!r}")

    def __len__(self) -> int:
        return len(self.cameras)

    def camera(self, k: int) -> Camera:
        if not 0 <= k < len(self.cameras):
            raise InvalidCameraIndex(f"camera index {k} out of range 0..{len(self.cameras) - 1}")
        return self.cameras[k]

    def stereo_pairs(self) -> list[tuple[int, int]]:
        """Consecutive-camera pairing convention for overlapping rigs."""
        if self.layout != "overlapping":
            raise InputError("stereo pairs are only defined for overlapping rigs")
        if len(self.cameras) % 2:
            raise InputError("overlapping rig needs an even camera count")
        return [(2 * i, 2 * i + 1) for i in range(len(self.cameras) // 2)]


def camera_placement(pose: Pose, cam: Camera) -> tuple[np.ndarray, np.ndarray]:
    """World center C and camera-to-world orientation W of a rig camera at a pose."""
    rot = pose.rotation()
    return pose.d + rot @ cam.D, rot @ cam.R


def world_to_camera(pose: Pose, points) -> np.ndarray:
    """Reference-camera coordinates R^T (M - d). Accepts (..., 3) points."""
    points = np.asarray(points, dtype=float)
    return (points - pose.d) @ pose.rotation()


def world_to_camera_k(pose: Pose, rig: CameraRig, k: int, points) -> np.ndarray:
    """Camera-k coordinates R_k^T R^T (M - d - R D_k). Accepts (..., 3) points."""
    cam = rig.camera(k)
    points = np.asarray(points, dtype=float)
    center, orient = camera_placement(pose, cam)
    return (points - center) @ orient


def project(points_cam, intr: Intrinsics) -> np.ndarray:
    """Pinhole projection of camera-frame points (..., 3) to pixels (..., 2).

    Raises BehindCamera if any point has z <= Z_MIN.
    """
    pts = np.asarray(points_cam, dtype=float)
    z = pts[..., 2]
    if np.any(z <= Z_MIN):
        raise BehindCamera("point at or behind the image plane")
    u = intr.fx * pts[..., 0] / z + intr.cx
    v = intr.fy * pts[..., 1] / z + intr.cy
    return np.stack([u, v], axis=-1)


def project_jacobian(points_cam, intr: Intrinsics) -> np.ndarray:
    """d(pixel)/d(camera point) for points (..., 3); returns (..., 2, 3)."""
    pts = np.asarray(points_cam, dtype=float)
    x, y, z = pts[..., 0], pts[..., 1], pts[..., 2]
    if np.any(z <= Z_MIN):
        raise BehindCamera("point at or behind the image plane")
    zero = np.zeros_like(z)
    row_u = np.stack([intr.fx / z, zero, -intr.fx * x / z**2], axis=-1)
    row_v = np.stack([zero, intr.fy / z, -intr.fy * y / z**2], axis=-1)
    return np.stack([row_u, row_v], axis=-2)


# ---------------------------------------------------------------------------
# Rig file I/O and the default rigs of the comparative study
# ---------------------------------------------------------------------------

def rig_to_dict(rig: CameraRig) -> dict:
    return {
        "layout": rig.layout,
        "cameras": [
            {
                "D": [float(x) for x in cam.D],
                "R_angles": [float(x) for x in angles_from_rig_rotation(cam.R)],
                "fx": cam.intrinsics.fx,
                "fy": cam.intrinsics.fy,
                "cx": cam.intrinsics.cx,
                "cy": cam.intrinsics.cy,
                "width": cam.intrinsics.width,
                "height": cam.intrinsics.height,
            }
            for cam in rig.cameras
        ],
    }


def angles_from_rig_rotation(rot: np.ndarray) -> np.ndarray:
    """Euler angles for a rig extrinsic rotation; allows beta = pi (a camera
    facing straight back), which the general decomposition rejects."""
    try:
        return angles_from_rot(rot)
    except GimbalProximity:
        # beta = +-pi/2 exactly: sideways-facing camera. gamma fixed to 0.
        sb = np.clip(rot[0, 2], -1.0, 1.0)
        beta = np.pi / 2 if sb > 0 else -np.pi / 2
        alpha = np.arctan2(rot[2, 1], rot[1, 1])
        return np.array([alpha, beta, 0.0])


def rig_from_dict(data: dict) -> CameraRig:
    try:
        layout = data.get("layout", "overlapping")
        cameras = []
        for entry in data["cameras"]:
            intr = Intrinsics(
                fx=float(entry.get("fx", 1000.0)),
                fy=float(entry.get("fy", 1000.0)),
                cx=float(entry.get("cx", 320.0)),
                cy=float(entry.get("cy", 240.0)),
                width=int(entry.get("width", 640)),
                height=int(entry.get("height", 480)),
            )
            cameras.append(
                Camera(
                    D=np.array(entry["D"], dtype=float),
                    R=rot_from_angles(np.array(entry["R_angles"], dtype=float)),
                    intrinsics=intr,
                )
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed rig file: {exc}") from exc
    return CameraRig(cameras=cameras, layout=layout)


def write_rig(path, rig: CameraRig) -> None:
    with open(path, "w") as fh:
        json.dump(rig_to_dict(rig), fh, indent=2)
        fh.write("\n")


def read_rig(path) -> CameraRig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    return rig_from_dict(data)


BASELINE_M = 0.1


def default_intrinsics() -> Intrinsics:
    return Intrinsics()


def default_nonoverlap_rig(intrinsics: Intrinsics | None = None) -> CameraRig:
    """Four individually aimed cameras: forward, right, backward, left.

    Camera 1 (index 0) faces +z at the front of the platform; its
    back-to-back partner (camera 3) sits 0.1 m directly behind it facing
    -z, so that camera's optical axis passes through the reference point.
    The perpendicular pair (cameras 2 and 4) sits at the platform's middle
    station facing +-x, each 0.1 m from camera 1; their optical axes miss
    the reference point, which couples their rotation and translation
    estimates. The two back-to-back axes are perpendicular.
    """
    intr = intrinsics or default_intrinsics()
    side_x = np.sqrt(BASELINE_M**2 - (BASELINE_M / 2) ** 2)
    side_z = -BASELINE_M / 2
    return CameraRig(
        cameras=[
            Camera(D=np.zeros(3), R=np.eye(3), intrinsics=intr),
            Camera(D=np.array([side_x, 0.0, side_z]), R=rot_y(np.pi / 2), intrinsics=intr),
            Camera(D=np.array([0.0, 0.0, -BASELINE_M]), R=rot_y(np.pi), intrinsics=intr),
            Camera(D=np.array([-side_x, 0.0, side_z]), R=rot_y(-np.pi / 2), intrinsics=intr),
        ],
        layout="non-overlapping",
    )


def default_overlap_rig(intrinsics: Intrinsics | None = None) -> CameraRig:
    """Two back-to-back stereo pairs sharing the reference and back camera
    placements of the non-overlapping rig; 0.1 m horizontal baselines."""
    intr = intrinsics or default_intrinsics()
    return CameraRig(
        cameras=[
            Camera(D=np.zeros(3), R=np.eye(3), intrinsics=intr),
            Camera(D=np.array([BASELINE_M, 0.0, 0.0]), R=np.eye(3), intrinsics=intr),
            Camera(D=np.array([0.0, 0.0, -BASELINE_M]), R=rot_y(np.pi), intrinsics=intr),
            Camera(D=np.array([BASELINE_M, 0.0, -BASELINE_M]), R=rot_y(np.pi), intrinsics=intr),
        ],
        layout="overlapping",
    )


def front_pair_rig() -> CameraRig:
    """The front stereo pair alone (the '2 cameras' method)."""
    full = default_overlap_rig()
    return CameraRig(cameras=full.cameras[:2], layout="overlapping")
