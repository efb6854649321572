"""Training loss: pose-parameter MSE plus FK joint-position MSE."""

import numpy as np

from .. import body, diff, rotmath


def pose_to_6d(local_rot: np.ndarray) -> np.ndarray:
    """(..., 24, 3, 3) ground-truth rotations -> (..., 144) targets."""
    r = rotmath.matrix_to_rot6d(local_rot)
    return r.reshape(r.shape[:-2] + (144,))


def loss_forward(pred_6d: np.ndarray, gt_6d: np.ndarray, gt_pos: np.ndarray,
                 skel: body.Skeleton):
    """Combined loss and its gradient w.r.t. the predicted 6D parameters.

    pred_6d (..., T, 144); gt_6d matches; gt_pos (..., T, 24, 3) are the FK
    positions of the ground truth. Both terms are element-mean MSEs and the
    total is their sum.
    """
    pred_6d = np.asarray(pred_6d, dtype=np.float64)
    shape = pred_6d.shape[:-1]
    r6 = pred_6d.reshape(shape + (24, 6))
    R, dec_cache = diff.rot6d_forward(r6)
    G, P, fk_cache = diff.fk_forward(R, skel)

    diff_pose = pred_6d - gt_6d
    diff_pos = P - gt_pos
    mse_pose = np.mean(diff_pose ** 2)
    mse_pos = np.mean(diff_pos ** 2)
    total = mse_pose + mse_pos

    d_pred = 2.0 * diff_pose / diff_pose.size
    dP = 2.0 * diff_pos / diff_pos.size
    dR = diff.fk_backward(fk_cache, skel, dG=None, dP=dP)
    d_pred = d_pred + diff.rot6d_backward(dec_cache, dR).reshape(d_pred.shape)
    return total, d_pred, (mse_pose, mse_pos)


def loss(pred_6d: np.ndarray, gt_local_rot: np.ndarray, skel: body.Skeleton) -> float:
    """Scalar training loss against ground-truth local rotations (..., T, 24, 3, 3)."""
    gt_6d = pose_to_6d(gt_local_rot)
    _, gt_pos = body.fk_batched(gt_local_rot, skel)
    total, _, _ = loss_forward(pred_6d, gt_6d, gt_pos, skel)
    return float(total)
