import numpy as np
import pytest

from sparsepose import body, rotmath
from conftest import random_rotations


def fk_bruteforce(local_rot, skel):
    """Oracle: per-joint explicit products along the path to the root."""
    n = body.NUM_JOINTS
    G = np.zeros((n, 3, 3))
    P = np.zeros((n, 3))
    for j in range(n):
        chain = []
        k = j
        while k != -1:
            chain.append(k)
            k = int(skel.parent[k])
        chain.reverse()
        R = np.eye(3)
        for k in chain:
            R = R @ local_rot[k]
        G[j] = R
        if j != 0:
            # position: walk from the root accumulating rotated offsets
            p = np.zeros(3)
            R_acc = np.eye(3)
            for k in chain:
                if k != 0:
                    p = p + R_acc @ skel.rest_offset[k]
                R_acc = R_acc @ local_rot[k]
            P[j] = p
    return G, P


class TestSkeleton:
    def test_default_valid(self, skel):
        assert skel.parent[0] == -1
        assert np.all(skel.parent[1:] < np.arange(1, 24))
        assert skel.joint_names == body.JOINT_NAMES

    def test_wrists_descend_from_shoulder_elbow(self, skel):
        for wrist, elbow, shoulder in ((20, 18, 16), (21, 19, 17)):
            assert skel.is_descendant(wrist, elbow)
            assert skel.is_descendant(wrist, shoulder)
            assert skel.parent[wrist] == elbow
            assert skel.parent[elbow] == shoulder

    def test_bad_topology_rejected(self):
        parent = body.PARENTS.copy()
        parent[5] = 7
        with pytest.raises(ValueError):
            body.Skeleton(parent, body._REST_OFFSETS.copy())

    def test_total_height_plausible(self, skel, mesh):
        ys = mesh.vertices[:, 1]
        assert 1.5 <= ys.max() - ys.min() <= 1.9


class TestForwardKinematics:
    def test_identity_pose(self, skel):
        fk = body.forward_kinematics(body.Pose.identity(), skel)
        np.testing.assert_allclose(fk.global_pos, skel.rest_joint_positions, atol=1e-12)
        np.testing.assert_allclose(fk.global_rot,
                                   np.broadcast_to(np.eye(3), (24, 3, 3)), atol=1e-15)

    def test_three_joint_chain_90deg_root(self):
        # chain root->j1->j2 embedded in the 24-joint skeleton via pelvis/spine
        parent = body.PARENTS.copy()
        offsets = np.zeros((24, 3))
        offsets[3] = [0, 1, 0]   # spine1 <- pelvis
        offsets[6] = [0, 1, 0]   # spine2 <- spine1
        skel = body.Skeleton(parent, offsets)
        rot = np.broadcast_to(np.eye(3), (24, 3, 3)).copy()
        rot[0] = rotmath.axis_angle_to_matrix([0, 0, 1], np.pi / 2)
        fk = body.forward_kinematics(body.Pose(rot), skel)
        np.testing.assert_allclose(fk.global_pos[3], [-1, 0, 0], atol=1e-12)
        np.testing.assert_allclose(fk.global_pos[6], [-2, 0, 0], atol=1e-12)

    def test_matches_bruteforce_oracle(self, skel):
        rng = np.random.default_rng(20)
        local = random_rotations(rng, 24)
        fk = body.forward_kinematics(body.Pose(local), skel)
        G, P = fk_bruteforce(local, skel)
        np.testing.assert_allclose(fk.global_rot, G, atol=1e-12)
        np.testing.assert_allclose(fk.global_pos, P, atol=1e-12)

    def test_bone_lengths_preserved(self, skel):
        rng = np.random.default_rng(21)
        local = random_rotations(rng, 24 * 50).reshape(50, 24, 3, 3)
        _, P = body.fk_batched(local, skel)
        for j in range(1, 24):
            lengths = np.linalg.norm(P[:, j] - P[:, skel.parent[j]], axis=-1)
            np.testing.assert_allclose(lengths, np.linalg.norm(skel.rest_offset[j]),
                                       atol=1e-9)

    def test_root_rotation_equivariance(self, skel):
        rng = np.random.default_rng(22)
        local = random_rotations(rng, 24)
        Q = rotmath.axis_angle_to_matrix([0.3, 1.0, -0.2], 1.1)
        fk1 = body.forward_kinematics(body.Pose(local), skel)
        local2 = local.copy()
        local2[0] = Q @ local2[0]
        fk2 = body.forward_kinematics(body.Pose(local2), skel)
        np.testing.assert_allclose(fk2.global_pos, fk1.global_pos @ Q.T, atol=1e-9)

    def test_single_joint_rotation_leaves_non_descendants(self, skel):
        rng = np.random.default_rng(23)
        rot = np.broadcast_to(np.eye(3), (24, 3, 3)).copy()
        j = 16  # left shoulder
        rot[j] = random_rotations(rng, 1)[0]
        fk = body.forward_kinematics(body.Pose(rot), skel)
        rest = skel.rest_joint_positions
        for k in range(24):
            if not skel.is_descendant(k, j):
                np.testing.assert_allclose(fk.global_pos[k], rest[k], atol=1e-12)


class TestSkinning:
    def test_identity_pose_returns_rest(self, skel, mesh):
        fk = body.forward_kinematics(body.Pose.identity(), skel)
        np.testing.assert_allclose(body.skin_vertices(fk, skel, mesh),
                                   mesh.vertices, atol=1e-12)

    def test_one_hot_moves_rigidly(self, skel):
        rng = np.random.default_rng(24)
        local = random_rotations(rng, 24)
        fk = body.forward_kinematics(body.Pose(local), skel)
        j = 18
        v = skel.rest_joint_positions[j] + np.array([0.1, -0.05, 0.07])
        w = np.zeros((1, 24))
        w[0, j] = 1.0
        mesh = body.SkinnedVertexSet(v[None], w)
        got = body.skin_vertices(fk, skel, mesh)[0]
        expect = fk.global_rot[j] @ (v - skel.rest_joint_positions[j]) + fk.global_pos[j]
        np.testing.assert_allclose(got, expect, atol=1e-15)

    def test_fifty_fifty_blend_is_mean(self, skel):
        # hand computation: equal-weight vertex is the average of both rigid images
        rot = np.broadcast_to(np.eye(3), (24, 3, 3)).copy()
        child = 18
        rot[child] = rotmath.axis_angle_to_matrix([0, 0, 1], np.pi / 2)
        fk = body.forward_kinematics(body.Pose(rot), skel)
        rest = skel.rest_joint_positions
        v = (rest[16] + rest[child]) / 2
        w = np.zeros((1, 24))
        w[0, 16] = w[0, child] = 0.5
        mesh = body.SkinnedVertexSet(v[None], w)
        got = body.skin_vertices(fk, skel, mesh)[0]
        img16 = fk.global_rot[16] @ (v - rest[16]) + fk.global_pos[16]
        img18 = fk.global_rot[child] @ (v - rest[child]) + fk.global_pos[child]
        np.testing.assert_allclose(got, (img16 + img18) / 2, atol=1e-12)

    def test_default_mesh_weights_valid(self, mesh):
        assert np.all(mesh.weights >= 0)
        np.testing.assert_allclose(mesh.weights.sum(axis=1), 1.0, atol=1e-12)
        assert all(len(mesh.vertices) >= 10 for _ in range(1))
        # at least 10 vertices per bone
        per_joint = (mesh.weights > 0).sum(axis=0)
        assert per_joint[:22].min() >= 10 or (per_joint > 0).sum() >= 20


class TestBodyFile:
    def test_round_trip(self, tmp_path, skel, mesh):
        path = tmp_path / "body.txt"
        body.save_body_file(path, skel, mesh)
        skel2, mesh2 = body.load_body_file(path)
        np.testing.assert_array_equal(skel2.parent, skel.parent)
        np.testing.assert_allclose(skel2.rest_offset, skel.rest_offset)
        np.testing.assert_allclose(mesh2.vertices, mesh.vertices)
        np.testing.assert_allclose(mesh2.weights, mesh.weights)
        assert skel2.joint_names == skel.joint_names

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "junk.txt"
        path.write_text("nope 1\n")
        with pytest.raises(ValueError):
            body.load_body_file(path)
