import numpy as np
import pytest

from sparsepose import body, refine, rotmath
from sparsepose.combos import Location, LocationMask


def small_random_pose(rng, scale=0.3):
    axes = rng.normal(size=(24, 3))
    angs = rng.uniform(-scale, scale, size=24)
    return rotmath.axis_angle_to_matrix(axes, angs)


def estimate_from(local):
    return body.PoseEstimate(rotmath.matrix_to_rot6d(local), local.copy())


def wrist_residual(local, measured, skel, loc):
    G = body.fk_batched(local, skel)[0]
    return rotmath.geodesic_angle_deg(G[refine.INSTRUMENTED_JOINT[loc]], measured[loc])


class TestRefine:
    def test_perfect_measurement_no_change(self, skel):
        rng = np.random.default_rng(0)
        local = small_random_pose(rng)
        G = body.fk_batched(local, skel)[0]
        loc = Location.LEFT_WRIST
        measured = {loc: G[refine.INSTRUMENTED_JOINT[loc]]}
        out = refine.refine(estimate_from(local), measured, LocationMask.of(loc), skel)
        np.testing.assert_allclose(out.local_rot, local, atol=1e-9)

    def test_empty_mask_identity(self, skel):
        rng = np.random.default_rng(1)
        local = small_random_pose(rng)
        est = estimate_from(local)
        out = refine.refine(est, {}, LocationMask.empty(), skel)
        assert out is est

    def test_perturbed_elbow_residual_halved(self, skel):
        rng = np.random.default_rng(2)
        reductions = []
        for _ in range(20):
            local = small_random_pose(rng)
            loc = Location.LEFT_WRIST
            joint = refine.INSTRUMENTED_JOINT[loc]
            measured = {loc: body.fk_batched(local, skel)[0][joint]}
            pert = local.copy()
            pert[18] = pert[18] @ rotmath.axis_angle_to_matrix(rng.normal(size=3),
                                                               np.deg2rad(20.0))
            r0 = wrist_residual(pert, measured, skel, loc)
            out = refine.refine(estimate_from(pert), measured, LocationMask.of(loc), skel)
            r1 = wrist_residual(out.local_rot, measured, skel, loc)
            reductions.append(1 - r1 / r0)
        assert np.median(reductions) >= 0.5

    def test_untouched_joints_bit_identical(self, skel):
        rng = np.random.default_rng(3)
        local = small_random_pose(rng)
        loc = Location.RIGHT_WRIST
        joint = refine.INSTRUMENTED_JOINT[loc]
        target = body.fk_batched(small_random_pose(rng), skel)[0][joint]
        est = estimate_from(local)
        out = refine.refine(est, {loc: target}, LocationMask.of(loc), skel)
        optimized = set(refine.DEFAULT_OPTIMIZED_JOINTS[loc])
        for j in range(24):
            if j not in optimized:
                np.testing.assert_array_equal(out.local_rot[j], local[j])
                np.testing.assert_array_equal(out.local_rot6d[j], est.local_rot6d[j])

    def test_best_iterate_never_worse(self, skel):
        rng = np.random.default_rng(4)
        for _ in range(10):
            local = small_random_pose(rng)
            measured = {}
            mask_locs = [Location.LEFT_WRIST, Location.HEAD]
            G_target = body.fk_batched(small_random_pose(rng), skel)[0]
            for loc in mask_locs:
                measured[loc] = G_target[refine.INSTRUMENTED_JOINT[loc]]
            est = estimate_from(local)
            params0 = {j: rotmath.matrix_to_rot6d(local[j])
                       for loc in mask_locs
                       for j in refine.DEFAULT_OPTIMIZED_JOINTS[loc]}
            targets = {refine.INSTRUMENTED_JOINT[loc]: measured[loc] for loc in mask_locs}
            J0, _ = refine.objective_and_grad(local, params0, targets, skel)
            out = refine.refine(est, measured, LocationMask.of(*mask_locs), skel)
            params1 = {j: out.local_rot6d[j] for j in params0}
            J1, _ = refine.objective_and_grad(out.local_rot, params1, targets, skel)
            assert J1 <= J0 + 1e-12

    def test_multi_location_refinement(self, skel):
        rng = np.random.default_rng(5)
        local = small_random_pose(rng)
        locs = [Location.LEFT_WRIST, Location.RIGHT_WRIST, Location.HEAD]
        G = body.fk_batched(local, skel)[0]
        measured = {loc: G[refine.INSTRUMENTED_JOINT[loc]] for loc in locs}
        pert = local.copy()
        for j in (18, 19, 12):
            pert[j] = pert[j] @ rotmath.axis_angle_to_matrix(rng.normal(size=3),
                                                             np.deg2rad(15.0))
        out = refine.refine(estimate_from(pert), measured, LocationMask.of(*locs), skel)
        for loc in locs:
            r0 = wrist_residual(pert, measured, skel, loc)
            r1 = wrist_residual(out.local_rot, measured, skel, loc)
            assert r1 < r0

    def test_measurements_must_match_mask(self, skel):
        rng = np.random.default_rng(6)
        local = small_random_pose(rng)
        with pytest.raises(ValueError):
            refine.refine(estimate_from(local), {}, LocationMask.of(Location.HEAD), skel)

    def test_bad_ancestor_map_rejected(self, skel):
        cfg = refine.RefineConfig(optimized_joints={Location.LEFT_WRIST: (21,)})
        with pytest.raises(ValueError):
            cfg.validate(skel)

    def test_hip_is_self_ancestor(self, skel):
        # pocket locations optimize the hip joint itself
        cfg = refine.RefineConfig()
        cfg.validate(skel)
        assert cfg.optimized_joints[Location.LEFT_POCKET] == (1,)


class TestObjectiveGrad:
    def test_finite_difference_check(self, skel):
        rng = np.random.default_rng(7)
        local = small_random_pose(rng)
        loc = Location.LEFT_WRIST
        target = body.fk_batched(small_random_pose(rng), skel)[0][
            refine.INSTRUMENTED_JOINT[loc]]
        targets = {refine.INSTRUMENTED_JOINT[loc]: target}
        params = {j: rotmath.matrix_to_rot6d(local[j]) for j in (18, 16)}
        _, grads = refine.objective_and_grad(local, params, targets, skel)
        eps = 1e-6
        worst = 0.0
        for j in params:
            fd = np.zeros(6)
            for i in range(6):
                for sign in (1, -1):
                    p2 = {k: v.copy() for k, v in params.items()}
                    p2[j][i] += sign * eps
                    J, _ = refine.objective_and_grad(local, p2, targets, skel)
                    fd[i] += sign * J / (2 * eps)
            denom = max(np.max(np.abs(grads[j])), np.max(np.abs(fd)), 1e-12)
            worst = max(worst, np.max(np.abs(grads[j] - fd)) / denom)
        assert worst <= 1e-4
