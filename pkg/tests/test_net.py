import numpy as np
import pytest

from sparsepose import body
from sparsepose.net import (ModelConfig, ShapeMismatch, backward_batch, forward,
                            forward_batch, init_weights, loss_forward, pose_to_6d,
                            zero_weights)
from sparsepose.net.lstm import scan_forward
from conftest import random_rotations


TOY = ModelConfig(input_dim=10, embed_dim=8, hidden_dim=8, layers=2,
                  bidirectional=True, output_dim=144)


def rel_err(a, b):
    denom = max(np.max(np.abs(a)), np.max(np.abs(b)), 1e-12)
    return np.max(np.abs(a - b)) / denom


class TestConfig:
    def test_paper_param_count_exact(self):
        cfg = ModelConfig()
        assert cfg.param_count() == 10_680_976

    def test_component_counts(self):
        # 31,232 + 4,202,496 + 6,299,648 + 147,600
        cfg = ModelConfig()
        embed = cfg.embed_dim * cfg.input_dim + cfg.embed_dim
        assert embed == 31_232
        l0 = 2 * 4 * 512 * (512 + 512 + 2)
        assert l0 == 4_202_496
        l1 = 2 * 4 * 512 * (1024 + 512 + 2)
        assert l1 == 6_299_648
        head = 144 * (1024 + 1)
        assert head == 147_600
        assert embed + l0 + l1 + head == cfg.param_count()

    def test_allocated_matches_formula(self):
        for cfg in (TOY, ModelConfig(input_dim=60, embed_dim=32, hidden_dim=16,
                                     layers=3)):
            w = init_weights(cfg, seed=1)
            assert w.total_params() == cfg.param_count()

    def test_bad_dims_rejected(self):
        with pytest.raises(ValueError):
            ModelConfig(hidden_dim=0)
        with pytest.raises(ValueError):
            ModelConfig(output_dim=100)


class TestForward:
    def test_zero_weights_output_is_head_bias(self):
        rng = np.random.default_rng(0)
        w = zero_weights(TOY)
        w.tensors["head.b"][:] = rng.normal(size=144)
        y = forward(w, rng.normal(size=(7, TOY.input_dim)))
        np.testing.assert_allclose(y, np.broadcast_to(w.tensors["head.b"], (7, 144)),
                                   atol=1e-15)

    def test_deterministic(self):
        rng = np.random.default_rng(1)
        w = init_weights(TOY, seed=2)
        x = rng.normal(size=(3, 9, TOY.input_dim))
        np.testing.assert_array_equal(forward_batch(w, x), forward_batch(w, x))

    def test_shape_mismatch(self):
        w = init_weights(TOY, seed=3)
        with pytest.raises(ShapeMismatch):
            forward(w, np.zeros((5, 11)))

    def test_init_seeded(self):
        a = init_weights(TOY, seed=4)
        b = init_weights(TOY, seed=4)
        c = init_weights(TOY, seed=5)
        for k in a.tensors:
            np.testing.assert_array_equal(a.tensors[k], b.tensors[k])
        assert any(np.any(a.tensors[k] != c.tensors[k]) for k in a.tensors)

    def test_direction_symmetry(self):
        # reversing input maps forward-direction activations to backward ones
        rng = np.random.default_rng(6)
        x = rng.normal(size=(2, 9, 8))
        W_ih = rng.normal(size=(32, 8))
        W_hh = rng.normal(size=(32, 8))
        b_ih = rng.normal(size=32)
        b_hh = rng.normal(size=32)
        hs_fwd = scan_forward(x, W_ih, W_hh, b_ih, b_hh, reverse=False)
        hs_bwd = scan_forward(x[:, ::-1].copy(), W_ih, W_hh, b_ih, b_hh, reverse=True)
        np.testing.assert_allclose(hs_bwd[:, ::-1], hs_fwd, atol=1e-12)

    def test_forward_direction_causal(self):
        rng = np.random.default_rng(7)
        x = rng.normal(size=(1, 10, 8))
        W_ih = rng.normal(size=(32, 8))
        W_hh = rng.normal(size=(32, 8))
        b = rng.normal(size=32)
        full = scan_forward(x, W_ih, W_hh, b, b, reverse=False)
        cut = x.copy()
        cut[:, 6:] = 0.0
        partial = scan_forward(cut, W_ih, W_hh, b, b, reverse=False)
        np.testing.assert_array_equal(full[:, :6], partial[:, :6])
        anti = scan_forward(x, W_ih, W_hh, b, b, reverse=True)
        cut2 = x.copy()
        cut2[:, :4] = 0.0
        partial2 = scan_forward(cut2, W_ih, W_hh, b, b, reverse=True)
        np.testing.assert_array_equal(anti[:, 4:], partial2[:, 4:])

    def test_masked_slots_contribute_nothing(self):
        # two windows differing only in masked-out slots give identical outputs
        from sparsepose import synth, motions
        from sparsepose.combos import Location, LocationMask
        w = init_weights(ModelConfig(input_dim=60, embed_dim=8, hidden_dim=8), seed=8)
        seq = motions.generate("walk", 1.0, 25.0, seed=8)
        frames = synth.synthesize_imu(seq)
        mask = LocationMask.of(Location.HEAD, Location.LEFT_POCKET)
        x1 = synth.frames_to_inputs(frames, mask)
        tampered = [synth.ImuFrame(f.timestamp, f.present,
                                   f.accel + np.array([[9, 9, 9]] * 5, dtype=float),
                                   f.orient) for f in frames]
        x2 = synth.frames_to_inputs(synth.apply_mask(tampered, mask), mask)
        x2_active = x2.copy()
        # masked slots zero in both; active slots tampered differ
        for loc in (Location.HEAD, Location.LEFT_POCKET):
            base = int(loc) * 12
            x2_active[:, base:base + 3] = x1[:, base:base + 3]
        np.testing.assert_array_equal(forward(w, x1), forward(w, x2_active))


class TestBackward:
    def test_zero_weights_zero_input_head_grad(self):
        w = zero_weights(TOY)
        x = np.zeros((2, 5, TOY.input_dim))
        y, cache = forward_batch(w, x, want_cache=True)
        grads = backward_batch(w, cache, np.ones_like(y))
        np.testing.assert_array_equal(grads["head.W"], 0.0)
        # bias gradient is independent of activations
        np.testing.assert_array_equal(grads["head.b"], 10.0)

    def test_masked_channel_embed_columns_zero(self):
        rng = np.random.default_rng(9)
        w = init_weights(TOY, seed=10)
        x = rng.normal(size=(2, 6, TOY.input_dim))
        x[:, :, 3] = 0.0
        y, cache = forward_batch(w, x, want_cache=True)
        grads = backward_batch(w, cache, rng.normal(size=y.shape))
        np.testing.assert_array_equal(grads["embed.W"][:, 3], 0.0)
        assert np.any(grads["embed.W"][:, 0] != 0.0)

    def test_bptt_matches_finite_differences(self, skel):
        # the mandated oracle: toy config (hidden 8, T=6), 64-bit central diffs
        rng = np.random.default_rng(11)
        cfg = TOY
        w = init_weights(cfg, seed=12)
        B, T = 1, 6
        x = rng.normal(size=(B, T, cfg.input_dim))
        gt_rot = random_rotations(rng, B * T * 24).reshape(B, T, 24, 3, 3)
        gt6 = pose_to_6d(gt_rot)
        _, gt_pos = body.fk_batched(gt_rot, skel)

        def scalar_loss():
            pred = forward_batch(w, x)
            total, _, _ = loss_forward(pred, gt6, gt_pos, skel)
            return float(total)

        pred, cache = forward_batch(w, x, want_cache=True)
        _, d_pred, _ = loss_forward(pred, gt6, gt_pos, skel)
        grads = backward_batch(w, cache, d_pred)

        eps = 1e-6
        worst = 0.0
        for name, tensor in w.tensors.items():
            fd = np.zeros_like(tensor)
            flat_t = tensor.reshape(-1)
            flat_fd = fd.reshape(-1)
            for i in range(flat_t.size):
                orig = flat_t[i]
                flat_t[i] = orig + eps
                fp = scalar_loss()
                flat_t[i] = orig - eps
                fm = scalar_loss()
                flat_t[i] = orig
                flat_fd[i] = (fp - fm) / (2 * eps)
            worst = max(worst, rel_err(grads[name], fd))
        assert worst <= 1e-4


class TestLoss:
    def test_perfect_prediction_zero(self, skel):
        rng = np.random.default_rng(13)
        gt_rot = random_rotations(rng, 5 * 24).reshape(1, 5, 24, 3, 3)
        gt6 = pose_to_6d(gt_rot)
        _, gt_pos = body.fk_batched(gt_rot, skel)
        total, d_pred, parts = loss_forward(gt6, gt6, gt_pos, skel)
        assert total == pytest.approx(0.0, abs=1e-18)
        np.testing.assert_allclose(d_pred, 0.0, atol=1e-12)

    def test_nonnegative(self, skel):
        rng = np.random.default_rng(14)
        gt_rot = random_rotations(rng, 4 * 24).reshape(1, 4, 24, 3, 3)
        pred_rot = random_rotations(rng, 4 * 24).reshape(1, 4, 24, 3, 3)
        gt6 = pose_to_6d(gt_rot)
        _, gt_pos = body.fk_batched(gt_rot, skel)
        total, _, parts = loss_forward(pose_to_6d(pred_rot), gt6, gt_pos, skel)
        assert total >= 0 and parts[0] >= 0 and parts[1] >= 0

    def test_quadratic_term_in_single_channel(self, skel):
        # perturbing one wrist 6D channel changes the pose MSE by its quadratic term
        rng = np.random.default_rng(15)
        gt_rot = random_rotations(rng, 24).reshape(1, 1, 24, 3, 3)
        gt6 = pose_to_6d(gt_rot)
        _, gt_pos = body.fk_batched(gt_rot, skel)
        eps = 1e-3
        pred = gt6.copy()
        wrist_channel = 20 * 6 + 2
        pred[0, 0, wrist_channel] += eps
        total, _, parts = loss_forward(pred, gt6, gt_pos, skel)
        # pose term is exactly eps^2 / N; position term is second order too
        expected_pose = eps ** 2 / gt6.size
        assert parts[0] == pytest.approx(expected_pose, rel=1e-10)
        assert abs(total - expected_pose - parts[1]) < 1e-18

    def test_loss_sum_of_parts(self, skel):
        rng = np.random.default_rng(16)
        gt_rot = random_rotations(rng, 3 * 24).reshape(1, 3, 24, 3, 3)
        pred_rot = random_rotations(rng, 3 * 24).reshape(1, 3, 24, 3, 3)
        gt6 = pose_to_6d(gt_rot)
        _, gt_pos = body.fk_batched(gt_rot, skel)
        total, _, (mse_pose, mse_pos) = loss_forward(pose_to_6d(pred_rot), gt6,
                                                     gt_pos, skel)
        assert total == pytest.approx(mse_pose + mse_pos, rel=1e-12)
