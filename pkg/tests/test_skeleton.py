"""6D rotations, forward kinematics, and standing-pose initialization."""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mirrormocap.errors import DegenerateRotation
from mirrormocap.geometry import Plane, rotation_about_axis
from mirrormocap.skeleton import (
    IDENTITY_ROT6D,
    PoseParams,
    SkeletonDef,
    default_skeleton,
    forward_kinematics,
    forward_kinematics_all,
    leg_length,
    matrix_to_rot6d,
    rot6d_to_matrix,
    standing_height,
    standing_pose_candidates,
    template_lengths,
    upright_root_rot6d,
)


def identity_pose(skel, lengths, pelvis=(0.0, 0.0, 0.0), frames=1):
    theta = np.tile(IDENTITY_ROT6D, (frames, skel.n_joints, 1))
    return PoseParams(theta, lengths, np.tile(np.asarray(pelvis, dtype=float), (frames, 1)))


class TestRot6D:
    def test_identity(self):
        assert np.allclose(rot6d_to_matrix((1, 0, 0, 0, 1, 0)), np.eye(3))

    def test_gram_schmidt_removes_parallel_part(self):
        assert np.allclose(rot6d_to_matrix((2, 0, 0, 1, 1, 0)), np.eye(3))

    def test_rotation_properties_random(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            M = rot6d_to_matrix(rng.normal(size=6))
            assert np.abs(M.T @ M - np.eye(3)).max() < 1e-9
            assert abs(np.linalg.det(M) - 1.0) < 1e-9

    def test_round_trip(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            M = rot6d_to_matrix(rng.normal(size=6))
            assert np.abs(rot6d_to_matrix(matrix_to_rot6d(M)) - M).max() < 1e-9

    def test_degenerate_zero_column(self):
        with pytest.raises(DegenerateRotation):
            rot6d_to_matrix((0, 0, 0, 0, 1, 0))

    def test_degenerate_parallel_columns(self):
        with pytest.raises(DegenerateRotation):
            rot6d_to_matrix((1, 0, 0, 2, 0, 0))


class TestForwardKinematics:
    def test_rest_pose_cumulative_sums(self):
        skel, lengths = default_skeleton()
        pose = identity_pose(skel, lengths, pelvis=(0.5, -0.2, 3.0))
        joints = forward_kinematics(skel, pose, 0).joints
        for j in range(skel.n_joints):
            expected = np.array([0.5, -0.2, 3.0])
            k = j
            while k != 0:
                expected = expected + lengths[k] * skel.v_ref[k]
                k = int(skel.parents[k])
            assert np.allclose(joints[j], expected, atol=1e-12)

    def test_two_bone_chain_oracle(self):
        # hand-computed: root rotated 90 deg about z, two unit bones along x
        mini = SkeletonDef(
            ("root", "a", "b"),
            np.array([-1, 0, 1]),
            np.array([[0, 0, 0], [1, 0, 0], [1, 0, 0]], dtype=float),
        )
        theta = np.tile(IDENTITY_ROT6D, (1, 3, 1))
        theta[0, 0] = matrix_to_rot6d(rotation_about_axis((0, 0, 1), np.pi / 2))
        pose = PoseParams(theta, np.array([0.0, 1.0, 1.0]), np.zeros((1, 3)))
        joints = forward_kinematics(mini, pose, 0).joints
        assert np.allclose(joints[1], (0, 1, 0), atol=1e-12)
        assert np.allclose(joints[2], (0, 2, 0), atol=1e-12)

    def test_length_doubling_scales_offsets(self):
        skel, lengths = default_skeleton()
        rng = np.random.default_rng(2)
        theta = rng.normal(size=(1, skel.n_joints, 6)) * 0.3 + IDENTITY_ROT6D
        pelvis = np.array([[0.1, 0.2, 2.0]])
        j1 = forward_kinematics(skel, PoseParams(theta, lengths, pelvis), 0).joints
        j2 = forward_kinematics(skel, PoseParams(theta, 2.0 * lengths, pelvis), 0).joints
        assert np.allclose(j2 - pelvis, 2.0 * (j1 - pelvis), atol=1e-9)

    def test_global_rotation_equivariance(self):
        skel, lengths = default_skeleton()
        rng = np.random.default_rng(3)
        for _ in range(20):
            theta = rng.normal(size=(1, skel.n_joints, 6)) * 0.4 + IDENTITY_ROT6D
            pose = PoseParams(theta, lengths, np.zeros((1, 3)))
            joints = forward_kinematics(skel, pose, 0).joints
            R = rot6d_to_matrix(rng.normal(size=6))
            theta_rot = theta.copy()
            theta_rot[0, 0] = matrix_to_rot6d(R @ rot6d_to_matrix(theta[0, 0]))
            rotated = forward_kinematics(skel, PoseParams(theta_rot, lengths, np.zeros((1, 3))), 0).joints
            assert np.abs(rotated - joints @ R.T).max() < 1e-9

    def test_bone_length_consistency(self):
        skel, lengths = default_skeleton()
        rng = np.random.default_rng(4)
        theta = rng.normal(size=(3, skel.n_joints, 6)) * 0.5 + IDENTITY_ROT6D
        pose = PoseParams(theta, lengths, rng.normal(size=(3, 3)))
        joints = forward_kinematics_all(skel, pose)
        for j in range(1, skel.n_joints):
            p = int(skel.parents[j])
            d = np.linalg.norm(joints[:, j] - joints[:, p], axis=1)
            assert np.abs(d - lengths[j]).max() < 1e-9

    def test_batched_matches_single_frame(self):
        skel, lengths = default_skeleton()
        rng = np.random.default_rng(5)
        theta = rng.normal(size=(4, skel.n_joints, 6)) * 0.5 + IDENTITY_ROT6D
        pose = PoseParams(theta, lengths, rng.normal(size=(4, 3)))
        all_joints = forward_kinematics_all(skel, pose)
        for t in range(4):
            assert np.allclose(all_joints[t], forward_kinematics(skel, pose, t).joints)


class TestStandingCandidates:
    ground = Plane(np.array([0.0, -1.0, 0.0]), 1.5)
    ankle = np.array([0.3, 1.5, 3.0])

    def test_k0_vs_k4_is_half_turn(self):
        skel, lengths = default_skeleton()
        cands = standing_pose_candidates(skel, self.ankle, self.ground, lengths)
        assert len(cands) == 8
        j0 = forward_kinematics(skel, cands[0], 0).joints
        j4 = forward_kinematics(skel, cands[4], 0).joints
        pelvis = j0[0]
        R = rotation_about_axis(self.ground.n, np.pi)
        assert np.abs((j0 - pelvis) @ R.T + pelvis - j4).max() < 1e-9

    def test_identical_lengths_and_pelvis_height(self):
        skel, lengths = default_skeleton()
        cands = standing_pose_candidates(skel, self.ankle, self.ground, lengths)
        heights = []
        for c in cands:
            assert np.array_equal(c.lengths, lengths)
            joints = forward_kinematics(skel, c, 0).joints
            heights.append(self.ground.signed_distance(joints[0]))
        assert np.ptp(heights) < 1e-12

    def test_feet_rest_at_ankle_point(self):
        skel, lengths = default_skeleton()
        for c in standing_pose_candidates(skel, self.ankle, self.ground, lengths):
            joints = forward_kinematics(skel, c, 0).joints
            la = joints[skel.index("left_ankle")]
            ra = joints[skel.index("right_ankle")]
            assert np.linalg.norm(0.5 * (la + ra) - self.ankle) < 1e-9

    def test_best_candidate_matches_true_facing(self):
        # a standing person facing 90 degrees is matched best by k=2
        from mirrormocap.calibrate import Detection2D
        from mirrormocap.geometry import CameraIntrinsics, project_points
        from mirrormocap.lift import LiftProblem, _score_reprojection
        from mirrormocap.skeleton import forward_kinematics_all as fka

        skel, lengths = default_skeleton()
        ground = self.ground
        up = ground.n
        theta = np.tile(IDENTITY_ROT6D, (1, skel.n_joints, 1))
        theta[0, 0] = upright_root_rot6d(up, np.pi / 2)
        pelvis = self.ankle + leg_length(skel, lengths) * up
        truth = PoseParams(theta, lengths, pelvis[None, :])
        K = CameraIntrinsics(900.0, 640.0, 360.0, 1280, 720)
        q = project_points(K, forward_kinematics(skel, truth, 0).joints)[None]
        problem = LiftProblem(
            K=K, mirror=Plane(np.array([0.0, 0, -1.0]), 10.0), ground=ground,
            skel=skel, q=q, w=np.ones((1, skel.n_joints)),
            q_bar=np.zeros((1, skel.n_joints, 2)), w_bar=np.zeros((1, skel.n_joints)),
            valid=np.ones(1, dtype=bool),
        )
        scores = []
        for cand in standing_pose_candidates(skel, self.ankle, ground, lengths):
            scores.append(_score_reprojection(problem, fka(skel, cand)))
        assert int(np.argmin(scores)) == 2


class TestSkeletonDef:
    def test_flip_is_involution(self):
        for with_heels in (False, True):
            skel, _ = default_skeleton(with_heels)
            perm = skel.flip_permutation()
            assert np.array_equal(perm[perm], np.arange(skel.n_joints))
            assert perm[skel.index("left_ankle")] == skel.index("right_ankle")
            assert perm[skel.index("pelvis")] == skel.index("pelvis")

    def test_template_height(self):
        skel, lengths = default_skeleton()
        assert np.isclose(standing_height(skel, lengths), 1.7)
        scaled = template_lengths(skel, 1.9)
        assert np.isclose(standing_height(skel, scaled), 1.9)

    def test_json_round_trip(self, tmp_path):
        skel, _ = default_skeleton(with_heels=True)
        path = tmp_path / "skel.json"
        path.write_text(json.dumps(skel.to_dict()))
        loaded = SkeletonDef.load_json(path)
        assert loaded.joint_names == skel.joint_names
        assert np.array_equal(loaded.parents, skel.parents)
        assert np.allclose(loaded.v_ref, skel.v_ref)

    def test_rejects_bad_tree(self):
        with pytest.raises(ValueError):
            SkeletonDef(("a", "b"), np.array([-1, 5]), np.array([[0, 0, 0], [1, 0, 0]], dtype=float))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=6, max_size=6))
def test_rot6d_always_rotation_property(vals):
    t = np.asarray(vals)
    a1, a2 = t[:3], t[3:]
    n1 = np.linalg.norm(a1)
    if n1 < 1e-3:
        return
    b1 = a1 / n1
    if np.linalg.norm(a2 - (b1 @ a2) * b1) < 1e-3:
        return
    M = rot6d_to_matrix(t)
    assert np.abs(M.T @ M - np.eye(3)).max() < 1e-9
    assert abs(np.linalg.det(M) - 1.0) < 1e-9
