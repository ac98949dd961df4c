"""Synthetic world, trajectory, and measurement generation.

The simulated scene is a spherical shell of point features centered on the
world origin; the rig starts at the origin looking along +z. Per-frame
motion deltas have per-component magnitudes drawn uniformly from a band
with independent random signs, composed by rotation-matrix chaining in the
world frame. Observations are exact pinhole projections of the points each
camera can see (positive depth, inside the image bounds) plus independent
zero-mean Gaussian pixel noise; each observation carries the scene point id
so the estimation pipelines get correspondence for free.

Randomness is fully deterministic given a master seed: each run, and within
a run each (camera, frame) noise draw, uses its own stream derived by
SeedSequence spawning, so Monte Carlo trials may execute in any order or in
parallel without changing a single bit of the output.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import InputError
from .geometry import (
    Camera,
    CameraRig,
    Pose,
    Z_MIN,
    angles_from_rot,
    camera_placement,
    rot_from_angles,
)


@dataclass
class SimConfig:
    """Simulation protocol parameters (full study-scale defaults)."""

    n_points: int = 10_000
    shell_inner: float = 0.667
    shell_outer: float = 1.0
    trans_min: float = 0.005        # m per frame, per component
    trans_max: float = 0.015
    rot_min: float = 0.005          # rad per frame, per component
    rot_max: float = 0.02
    noise_sigma: float = 0.5        # px
    n_frames: int = 100
    n_runs: int = 1500
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.shell_inner < self.shell_outer:
            raise InputError("need 0 < shell_inner < shell_outer")
        if not 0 <= self.trans_min <= self.trans_max:
            raise InputError("need 0 <= trans_min <= trans_max")
        if not 0 <= self.rot_min <= self.rot_max:
            raise InputError("need 0 <= rot_min <= rot_max")
        if self.noise_sigma < 0:
            raise InputError("noise_sigma must be nonnegative")

    def with_overrides(self, **kwargs) -> "SimConfig":
        return replace(self, **kwargs)


def gen_scene(cfg: SimConfig, rng: np.random.Generator) -> np.ndarray:
    """Scene points (n_points, 3): radius uniform in the shell band,
    direction uniform on the unit sphere. Row index doubles as feature id."""
    radii = rng.uniform(cfg.shell_inner, cfg.shell_outer, cfg.n_points)
    dirs = rng.normal(size=(cfg.n_points, 3))
    norms = np.linalg.norm(dirs, axis=1)
    norms[norms < 1e-12] = 1.0
    return radii[:, None] * dirs / norms[:, None]


@dataclass
class Trajectory:
    """Cumulative ground-truth poses; frame 0 is the identity."""

    d: np.ndarray          # (F, 3)
    rotations: np.ndarray  # (F, 3, 3)
    angles: np.ndarray     # (F, 3) decomposed from rotations
    deltas: np.ndarray | None = None  # (F-1, 6) per-frame increments

    def __len__(self) -> int:
        return len(self.d)

    def pose(self, j: int) -> Pose:
        return Pose(self.d[j], self.angles[j])

    def pose_matrix(self, j: int) -> np.ndarray:
        return self.rotations[j]


def gen_trajectory(cfg: SimConfig, rng: np.random.Generator) -> Trajectory:
    """Random six-DOF walk: per frame each translation component has
    magnitude in [trans_min, trans_max] with a random sign (likewise the
    rotation angles), chained in the world frame."""
    f = cfg.n_frames
    t_mag = rng.uniform(cfg.trans_min, cfg.trans_max, (f - 1, 3))
    t_sign = rng.integers(0, 2, (f - 1, 3)) * 2 - 1
    r_mag = rng.uniform(cfg.rot_min, cfg.rot_max, (f - 1, 3))
    r_sign = rng.integers(0, 2, (f - 1, 3)) * 2 - 1
    deltas = np.hstack([t_mag * t_sign, r_mag * r_sign])

    d = np.zeros((f, 3))
    rotations = np.zeros((f, 3, 3))
    angles = np.zeros((f, 3))
    rotations[0] = np.eye(3)
    for j in range(1, f):
        d[j] = d[j - 1] + deltas[j - 1, :3]
        rotations[j] = rot_from_angles(deltas[j - 1, 3:]) @ rotations[j - 1]
        angles[j] = angles_from_rot(rotations[j])
    return Trajectory(d=d, rotations=rotations, angles=angles, deltas=deltas)


def scripted_trajectory(n_frames: int, velocity) -> Trajectory:
    """Constant-velocity trajectory in pose-parameter space: pose at frame
    j is j * velocity. This is the regime where the constant-velocity plant
    model of the pose filter is exact."""
    velocity = np.asarray(velocity, dtype=float).reshape(6)
    steps = np.arange(n_frames)[:, None]
    d = steps * velocity[:3]
    angles = steps * velocity[3:]
    rotations = np.stack([rot_from_angles(a) for a in angles])
    deltas = np.repeat(velocity[None, :], n_frames - 1, axis=0)
    return Trajectory(d=d, rotations=rotations, angles=angles, deltas=deltas)


def render_frame(
    scene: np.ndarray,
    pose: Pose,
    cam: Camera,
    noise_sigma: float,
    rng: np.random.Generator | None,
) -> tuple[np.ndarray, np.ndarray]:
    """Observations (ids, pixels) of one camera at one pose.

    A point is visible when its depth exceeds Z_MIN and its exact
    projection lands inside the image; noise is added after the visibility
    test, in ascending id order, so the draw sequence is reproducible.
    """
    center, orient = camera_placement(pose, cam)
    p_cam = (scene - center) @ orient
    z = p_cam[:, 2]
    front = z > Z_MIN
    intr = cam.intrinsics
    u = np.full(len(scene), -1.0)
    v = np.full(len(scene), -1.0)
    u[front] = intr.fx * p_cam[front, 0] / z[front] + intr.cx
    v[front] = intr.fy * p_cam[front, 1] / z[front] + intr.cy
    visible = front & (u >= 0) & (u < intr.width) & (v >= 0) & (v < intr.height)
    ids = np.flatnonzero(visible)
    uv = np.stack([u[ids], v[ids]], axis=-1)
    if noise_sigma > 0 and rng is not None and len(ids):
        uv = uv + rng.normal(0.0, noise_sigma, uv.shape)
    return ids, uv


# A rendered sequence: frames[j][cam_index] = (ids, uv)
SequenceObservations = list


def render_sequence(
    scene: np.ndarray,
    traj: Trajectory,
    cameras: list[Camera],
    noise_sigma: float,
    noise_seed: np.random.SeedSequence | None = None,
) -> SequenceObservations:
    """Render every camera at every frame of a trajectory.

    Each (camera, frame) pair gets an independent noise stream spawned from
    noise_seed, keyed by camera-major order, so rendering is reproducible
    regardless of evaluation order.
    """
    n_frames = len(traj)
    streams: list[np.random.Generator | None]
    if noise_sigma > 0:
        if noise_seed is None:
            noise_seed = np.random.SeedSequence(0)
        children = noise_seed.spawn(len(cameras) * n_frames)
        streams = [np.random.default_rng(c) for c in children]
    else:
        streams = [None] * (len(cameras) * n_frames)

    frames = []
    for j in range(n_frames):
        pose = traj.pose(j)
        per_cam = []
        for k, cam in enumerate(cameras):
            rng = streams[k * n_frames + j]
            per_cam.append(render_frame(scene, pose, cam, noise_sigma, rng))
        frames.append(per_cam)
    return frames


def slice_stream(frames: SequenceObservations, camera_map: list[int]) -> SequenceObservations:
    """Restrict a rendered union sequence to one rig's cameras, renumbering
    them to local indices 0..len(camera_map)-1."""
    return [[frame[u] for u in camera_map] for frame in frames]


def visible_counts(frames: SequenceObservations, frame: int = 0) -> list[int]:
    return [len(ids) for ids, _ in frames[frame]]


def build_union(rigs: list[CameraRig]) -> tuple[list[Camera], list[list[int]]]:
    """Merge several rigs into one camera list, sharing cameras that have
    identical placement and intrinsics so they render (and draw noise) once.

    Returns the union list and, per rig, the union index of each camera.
    """
    union: list[Camera] = []
    maps: list[list[int]] = []
    for rig in rigs:
        indices = []
        for cam in rig.cameras:
            found = None
            for u, existing in enumerate(union):
                if (
                    np.array_equal(existing.D, cam.D)
                    and np.array_equal(existing.R, cam.R)
                    and existing.intrinsics == cam.intrinsics
                ):
                    found = u
                    break
            if found is None:
                union.append(cam)
                found = len(union) - 1
            indices.append(found)
        maps.append(indices)
    return union, maps


def run_seed_sequences(seed: int, n_runs: int) -> list[np.random.SeedSequence]:
    """One independent seed sequence per Monte Carlo run."""
    return np.random.SeedSequence(seed).spawn(n_runs)


def run_streams(run_seed: np.random.SeedSequence):
    """Per-run generator triple: (scene rng, trajectory rng, noise seed)."""
    scene_ss, traj_ss, noise_ss = run_seed.spawn(3)
    return np.random.default_rng(scene_ss), np.random.default_rng(traj_ss), noise_ss
