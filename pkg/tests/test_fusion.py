import numpy as np
import pytest

from rigpose.errors import IllConditioned, MissingCamera, WrongCameraCount
from rigpose.fusion import (
    CameraLocalPose,
    FusionResult,
    build_scale_system,
    fuse_pose,
    fuse_rotation_median,
    local_to_body_pose,
    solve_scales,
    true_local_pose,
)
from rigpose.geometry import (
    Pose,
    default_nonoverlap_rig,
    equivalent_rotation,
    rot_from_angles,
)

RIG = default_nonoverlap_rig()


def ground_truth_inputs(pose):
    locals_ = [true_local_pose(pose, RIG.camera(k), k) for k in (1, 2, 3)]
    return locals_


# ---------------------------------------------------------------------------
# rotation median
# ---------------------------------------------------------------------------

def test_median_of_identical_rotations():
    rot = rot_from_angles((0.01, -0.02, 0.015))
    fused = fuse_rotation_median([rot] * 4)
    np.testing.assert_allclose(fused, [0.01, -0.02, 0.015], atol=1e-12)


def test_median_rejects_single_outlier():
    honest = rot_from_angles((0.01, 0.0, 0.0))
    outlier = rot_from_angles((0.30, 0.0, 0.0))
    fused = fuse_rotation_median([honest, honest, honest, outlier])
    assert fused[0] == pytest.approx(0.01, abs=1e-12)


def test_median_even_count_averages_middle_pair():
    rots = [rot_from_angles((a, a, a)) for a in (0.00, 0.01, 0.02, 0.03)]
    fused = fuse_rotation_median(rots)
    np.testing.assert_allclose(fused, [0.015, 0.015, 0.015], atol=1e-10)


def test_median_is_permutation_invariant():
    rng = np.random.default_rng(0)
    rots = [rot_from_angles(rng.uniform(-0.05, 0.05, 3)) for _ in range(4)]
    base = fuse_rotation_median(rots)
    for perm in ([1, 0, 3, 2], [3, 2, 1, 0], [2, 0, 3, 1]):
        np.testing.assert_array_equal(fuse_rotation_median([rots[i] for i in perm]), base)


def test_median_corruption_bounded_by_honest_spread():
    # Corrupting one camera moves the fused angles by at most the spread of
    # the three untouched cameras, per axis.
    rng = np.random.default_rng(1)
    for _ in range(50):
        base = rng.uniform(-0.05, 0.05, 3)
        jitters = [base + rng.uniform(-1e-3, 1e-3, 3) for _ in range(4)]
        rots = [rot_from_angles(a) for a in jitters]
        clean = fuse_rotation_median(rots)
        corrupt_idx = int(rng.integers(0, 4))
        corrupted = list(rots)
        corrupted[corrupt_idx] = rot_from_angles(jitters[corrupt_idx] + rng.choice([-0.5, 0.5], 3))
        dirty = fuse_rotation_median(corrupted)
        honest = np.array([jitters[i] for i in range(4) if i != corrupt_idx])
        spread = honest.max(axis=0) - honest.min(axis=0)
        assert np.all(np.abs(dirty - clean) <= spread + 1e-12)


# ---------------------------------------------------------------------------
# scale system
# ---------------------------------------------------------------------------

def test_build_scale_system_shape_and_sparsity():
    pose = Pose([0.01, -0.004, 0.007], [0.01, -0.02, 0.015])
    system = build_scale_system(pose.d, pose.rotation(), ground_truth_inputs(pose), RIG)
    assert system.A.shape == (9, 4)
    assert system.b.shape == (9,)
    # each row: column 0 plus at most one of columns 1..3
    for row in range(9):
        assert np.count_nonzero(system.A[row, 1:]) <= 1


def test_build_scale_system_zero_rhs_for_identity_rotation():
    pose = Pose([0.01, -0.004, 0.007], [0.0, 0.0, 0.0])
    system = build_scale_system(pose.d, np.eye(3), ground_truth_inputs(pose), RIG)
    np.testing.assert_array_equal(system.b, np.zeros(9))


def test_build_scale_system_ground_truth_consistency():
    rng = np.random.default_rng(2)
    for _ in range(50):
        pose = Pose(rng.uniform(-0.05, 0.05, 3), rng.uniform(-0.1, 0.1, 3))
        system = build_scale_system(pose.d, pose.rotation(), ground_truth_inputs(pose), RIG)
        np.testing.assert_allclose(system.A @ np.ones(4), system.b, atol=1e-12)


def test_build_scale_system_wrong_camera_count():
    pose = Pose([0.01, 0.0, 0.0], [0.01, 0.0, 0.0])
    locals_ = ground_truth_inputs(pose)
    with pytest.raises(WrongCameraCount):
        build_scale_system(pose.d, pose.rotation(), locals_[:2], RIG)
    bad = [CameraLocalPose(0, locals_[0].l, locals_[0].r)] + locals_[1:]
    with pytest.raises(WrongCameraCount):
        build_scale_system(pose.d, pose.rotation(), bad, RIG)


def test_solve_scales_recovers_unit_scales():
    rng = np.random.default_rng(3)
    for _ in range(50):
        pose = Pose(rng.uniform(-0.05, 0.05, 3), rng.uniform(0.01, 0.1, 3))
        system = build_scale_system(pose.d, pose.rotation(), ground_truth_inputs(pose), RIG)
        scales = solve_scales(system)
        np.testing.assert_allclose(scales, np.ones(4), atol=1e-9)
        assert system.residual < 1e-10


def test_solve_scales_doubled_locals_halve_camera_scales():
    pose = Pose([0.02, -0.01, 0.015], [0.03, -0.04, 0.05])
    locals_ = ground_truth_inputs(pose)
    doubled = [CameraLocalPose(c.k, 2.0 * c.l, c.r) for c in locals_]
    system = build_scale_system(pose.d, pose.rotation(), doubled, RIG)
    scales = solve_scales(system)
    np.testing.assert_allclose(scales, [1.0, 0.5, 0.5, 0.5], atol=1e-9)


def test_solve_scales_pure_rotation_is_ill_conditioned():
    pose = Pose([0.0, 0.0, 0.0], [0.02, -0.01, 0.03])
    system = build_scale_system(np.zeros(3), pose.rotation(), ground_truth_inputs(pose), RIG)
    with pytest.raises(IllConditioned):
        solve_scales(system)


def test_solve_scales_zero_rhs_is_ill_conditioned():
    pose = Pose([0.01, -0.004, 0.007], [0.0, 0.0, 0.0])
    system = build_scale_system(pose.d, np.eye(3), ground_truth_inputs(pose), RIG)
    with pytest.raises(IllConditioned):
        solve_scales(system)


def test_rigidity_relation_holds_on_ground_truth():
    # R_j D_k + S_j d_j = S_kj R_k l_kj + D_k with unit scales.
    rng = np.random.default_rng(4)
    for _ in range(20):
        pose = Pose(rng.uniform(-0.1, 0.1, 3), rng.uniform(-0.2, 0.2, 3))
        rot = pose.rotation()
        for k in (1, 2, 3):
            cam = RIG.camera(k)
            local = true_local_pose(pose, cam, k)
            lhs = rot @ cam.D + pose.d
            rhs = cam.R @ local.l + cam.D
            np.testing.assert_allclose(lhs, rhs, atol=1e-10)


def test_scale_homogeneity_leaves_fused_translation_unchanged():
    pose = Pose([0.02, -0.01, 0.015], [0.03, -0.04, 0.05])
    locals_ = ground_truth_inputs(pose)
    for c in (0.5, 2.0, 7.5):
        scaled = [CameraLocalPose(x.k, c * x.l, x.r) for x in locals_]
        system = build_scale_system(pose.d, pose.rotation(), scaled, RIG)
        scales = solve_scales(system)
        np.testing.assert_allclose(scales[1:], np.ones(3) / c, atol=1e-9)
        np.testing.assert_allclose(scales[0] * pose.d, pose.d, atol=1e-9)


# ---------------------------------------------------------------------------
# pose fusion
# ---------------------------------------------------------------------------

def per_camera_truth(pose):
    out = []
    for k in range(4):
        cam = RIG.camera(k)
        local = true_local_pose(pose, cam, k)
        out.append((local, equivalent_rotation(cam.R, local.r)))
    return out


def test_fuse_pose_exact_inputs():
    pose = Pose([0.02, -0.01, 0.015], [0.03, -0.04, 0.05])
    result = fuse_pose(per_camera_truth(pose), RIG, np.ones(4))
    assert isinstance(result, FusionResult)
    np.testing.assert_allclose(result.pose.d, pose.d, atol=1e-9)
    np.testing.assert_allclose(result.pose.angles, pose.angles, atol=1e-9)
    np.testing.assert_allclose(result.scales, np.ones(4), atol=1e-9)


def test_fuse_pose_corrects_injected_reference_scale():
    # Camera 1 reports half the true translation; the system should solve
    # S_j = 2 and restore the true fused translation.
    pose = Pose([0.02, -0.01, 0.015], [0.03, -0.04, 0.05])
    inputs = per_camera_truth(pose)
    ref_local, ref_rot = inputs[0]
    inputs[0] = (CameraLocalPose(0, 0.5 * ref_local.l, ref_local.r), ref_rot)
    result = fuse_pose(inputs, RIG, np.ones(4))
    assert result.scales[0] == pytest.approx(2.0, abs=1e-6)
    np.testing.assert_allclose(result.pose.d, pose.d, atol=1e-6)


def test_fuse_pose_degenerate_falls_back_to_previous_scales():
    # First frame: no motion, identity rotation -> ill-conditioned system;
    # the fused translation is d_j unchanged under prev scales of 1.
    pose = Pose([0.01, -0.004, 0.007], [0.0, 0.0, 0.0])
    result = fuse_pose(per_camera_truth(pose), RIG, np.ones(4))
    assert result.ill_conditioned
    np.testing.assert_allclose(result.pose.d, pose.d, atol=1e-15)
    np.testing.assert_array_equal(result.scales, np.ones(4))


def test_fuse_pose_missing_camera():
    pose = Pose([0.02, -0.01, 0.015], [0.03, -0.04, 0.05])
    with pytest.raises(MissingCamera):
        fuse_pose(per_camera_truth(pose)[:3], RIG, np.ones(4))


def test_local_to_body_is_identity_for_reference_camera():
    pose = Pose([0.03, -0.02, 0.01], [0.04, 0.05, -0.06])
    local = true_local_pose(pose, RIG.camera(0), 0)
    back = local_to_body_pose(local, RIG.camera(0))
    np.testing.assert_allclose(back.as_vector(), pose.as_vector(), atol=1e-12)


def test_local_to_body_roundtrip_all_cameras():
    rng = np.random.default_rng(5)
    for _ in range(50):
        pose = Pose(rng.uniform(-0.1, 0.1, 3), rng.uniform(-0.2, 0.2, 3))
        for k in range(4):
            cam = RIG.camera(k)
            local = true_local_pose(pose, cam, k)
            back = local_to_body_pose(local, cam)
            np.testing.assert_allclose(back.as_vector(), pose.as_vector(), atol=1e-12)


def test_scale_system_condition_field():
    pose = Pose([0.02, -0.01, 0.015], [0.03, -0.04, 0.05])
    system = build_scale_system(pose.d, pose.rotation(), ground_truth_inputs(pose), RIG)
    assert np.isfinite(system.condition)
    assert system.condition >= 1.0
