"""Hand-derived gradients for the differentiable pipeline pieces.

Two kernels back both network training and IK refinement: the Gram-Schmidt
6D decode and the forward-kinematics chain. Each forward returns a cache its
backward consumes; all are batched over arbitrary leading axes.
"""

import numpy as np

from . import body


def _cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # np.cross has high call overhead on small trailing axes
    out = np.empty(np.broadcast(a, b).shape)
    a0, a1, a2 = a[..., 0], a[..., 1], a[..., 2]
    b0, b1, b2 = b[..., 0], b[..., 1], b[..., 2]
    out[..., 0] = a1 * b2 - a2 * b1
    out[..., 1] = a2 * b0 - a0 * b2
    out[..., 2] = a0 * b1 - a1 * b0
    return out


def _dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.sum(a * b, axis=-1, keepdims=True)


def rot6d_forward(r6: np.ndarray):
    """Gram-Schmidt decode with cached intermediates. r6 (..., 6) -> R (..., 3, 3)."""
    r6 = np.asarray(r6, dtype=np.float64)
    a1 = r6[..., 0:3]
    a2 = r6[..., 3:6]
    n1 = np.linalg.norm(a1, axis=-1, keepdims=True)
    if np.any(n1 <= 1e-12):
        from .rotmath import DegenerateRotation
        raise DegenerateRotation("zero first column")
    c1 = a1 / n1
    d = _dot(c1, a2)
    u2 = a2 - d * c1
    nu = np.linalg.norm(u2, axis=-1, keepdims=True)
    if np.any(nu <= 1e-12):
        from .rotmath import DegenerateRotation
        raise DegenerateRotation("parallel columns")
    c2 = u2 / nu
    c3 = _cross(c1, c2)
    R = np.stack([c1, c2, c3], axis=-1)
    cache = (a2, n1, c1, d, nu, c2)
    return R, cache


def rot6d_backward(cache, dR: np.ndarray) -> np.ndarray:
    """Backprop through the decode: dR (..., 3, 3) -> dr6 (..., 6)."""
    a2, n1, c1, d, nu, c2 = cache
    dc3 = dR[..., :, 2]
    # c3 = c1 x c2
    dc1 = dR[..., :, 0] + _cross(c2, dc3)
    dc2 = dR[..., :, 1] + _cross(dc3, c1)
    # c2 = u2 / |u2|
    du2 = (dc2 - c2 * _dot(c2, dc2)) / nu
    # u2 = a2 - (c1 . a2) c1
    da2 = du2 - c1 * _dot(c1, du2)
    dc1 += -a2 * _dot(c1, du2) - d * du2
    # c1 = a1 / |a1|
    da1 = (dc1 - c1 * _dot(c1, dc1)) / n1
    return np.concatenate([da1, da2], axis=-1)


def fk_forward(local_rot: np.ndarray, skel: body.Skeleton):
    """FK with cache. local_rot (..., 24, 3, 3) -> (G, P, cache)."""
    G, P = body.fk_batched(local_rot, skel)
    return G, P, (local_rot, G)


def fk_backward(cache, skel: body.Skeleton, dG: np.ndarray | None,
                dP: np.ndarray | None) -> np.ndarray:
    """Backprop through FK to the local rotations.

    dG/dP may be None when that output is unused. Returns dLocal with the
    same shape as the cached local rotations.
    """
    local_rot, G = cache
    n = body.NUM_JOINTS
    dGacc = np.zeros_like(G) if dG is None else np.array(dG, dtype=np.float64, copy=True)
    dPacc = None if dP is None else np.array(dP, dtype=np.float64, copy=True)
    dLocal = np.empty_like(local_rot)
    off = skel.rest_offset
    for j in range(n - 1, 0, -1):
        p = skel.parent[j]
        dGj = dGacc[..., j, :, :]
        if dPacc is not None:
            # global_pos[j] = global_pos[p] + G[p] @ off[j]
            dPacc[..., p, :] += dPacc[..., j, :]
            dGacc[..., p, :, :] += dPacc[..., j, :, None] * off[j][None, :]
        # G[j] = G[p] @ L[j]
        Gp_T = np.swapaxes(G[..., p, :, :], -1, -2)
        dLocal[..., j, :, :] = Gp_T @ dGj
        Lj_T = np.swapaxes(local_rot[..., j, :, :], -1, -2)
        dGacc[..., p, :, :] += dGj @ Lj_T
    dLocal[..., 0, :, :] = dGacc[..., 0, :, :]
    return dLocal
