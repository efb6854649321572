"""Rotation representations: quaternions, 3x3 matrices, 6D encoding, geodesic distance.

All functions are batch-aware: they accept a single item (shape (6,), (3,3),
(4,)) or any leading batch shape. Math is float64; 32-bit appears only at
file/wire boundaries.
"""

import numpy as np

ORTHO_TOL = 1e-6
QUAT_NORM_TOL = 1e-3
DEGENERATE_TOL = 1e-6


class DegenerateRotation(ValueError):
    """6D input whose two columns are (near-)zero or (near-)parallel."""


class NonUnitQuaternion(ValueError):
    """Quaternion norm deviates from 1 beyond tolerance."""


def rot6d_to_matrix(r6: np.ndarray) -> np.ndarray:
    """Decode 6D rotation (first two matrix columns) via Gram-Schmidt.

    Raises DegenerateRotation if a first column is near zero or the two
    columns are parallel within ~1e-6 rad.
    """
    r6 = np.asarray(r6, dtype=np.float64)
    a1 = r6[..., 0:3]
    a2 = r6[..., 3:6]
    n1 = np.linalg.norm(a1, axis=-1, keepdims=True)
    n2 = np.linalg.norm(a2, axis=-1, keepdims=True)
    if np.any(n1 <= 1e-12) or np.any(n2 <= 1e-12):
        raise DegenerateRotation("zero column in 6D rotation")
    c1 = a1 / n1
    u2 = a2 - np.sum(c1 * a2, axis=-1, keepdims=True) * c1
    nu = np.linalg.norm(u2, axis=-1, keepdims=True)
    if np.any(nu <= DEGENERATE_TOL * n2):
        raise DegenerateRotation("parallel columns in 6D rotation")
    c2 = u2 / nu
    c3 = np.cross(c1, c2)
    return np.stack([c1, c2, c3], axis=-1)


def matrix_to_rot6d(R: np.ndarray) -> np.ndarray:
    """Encode a rotation matrix as its first two columns."""
    R = np.asarray(R, dtype=np.float64)
    return np.concatenate([R[..., :, 0], R[..., :, 1]], axis=-1)


def geodesic_angle_deg(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Angle of the relative rotation A Bᵀ, in degrees, in [0, 180]."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    # trace(A Bᵀ) without forming the product
    tr = np.einsum("...ij,...ij->...", A, B)
    cos = np.clip((tr - 1.0) / 2.0, -1.0, 1.0)
    return np.degrees(np.arccos(cos))


def _check_unit(q: np.ndarray) -> None:
    norm = np.linalg.norm(q, axis=-1)
    if np.any(np.abs(norm - 1.0) > QUAT_NORM_TOL):
        raise NonUnitQuaternion(f"quaternion norm off unit by > {QUAT_NORM_TOL}")


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    """Unit quaternion (w, x, y, z) to rotation matrix."""
    q = np.asarray(q, dtype=np.float64)
    _check_unit(q)
    q = q / np.linalg.norm(q, axis=-1, keepdims=True)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    R = np.empty(q.shape[:-1] + (3, 3), dtype=np.float64)
    R[..., 0, 0] = 1 - 2 * (y * y + z * z)
    R[..., 0, 1] = 2 * (x * y - w * z)
    R[..., 0, 2] = 2 * (x * z + w * y)
    R[..., 1, 0] = 2 * (x * y + w * z)
    R[..., 1, 1] = 1 - 2 * (x * x + z * z)
    R[..., 1, 2] = 2 * (y * z - w * x)
    R[..., 2, 0] = 2 * (x * z - w * y)
    R[..., 2, 1] = 2 * (y * z + w * x)
    R[..., 2, 2] = 1 - 2 * (x * x + y * y)
    return R


def matrix_to_quat(R: np.ndarray) -> np.ndarray:
    """Rotation matrix to unit quaternion (w, x, y, z), w >= 0."""
    R = np.asarray(R, dtype=np.float64)
    batch = R.shape[:-2]
    R = R.reshape((-1, 3, 3))
    n = R.shape[0]
    q = np.empty((n, 4), dtype=np.float64)
    # Shepperd's method: pick the largest of (w, x, y, z) pivots per matrix
    tr = np.trace(R, axis1=-2, axis2=-1)
    d = np.stack([tr, R[:, 0, 0], R[:, 1, 1], R[:, 2, 2]], axis=-1)
    pivot = np.argmax(d, axis=-1)
    for i in range(n):
        m = R[i]
        p = pivot[i]
        if p == 0:
            s = np.sqrt(tr[i] + 1.0) * 2.0
            q[i] = (0.25 * s, (m[2, 1] - m[1, 2]) / s,
                    (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s)
        elif p == 1:
            s = np.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2.0
            q[i] = ((m[2, 1] - m[1, 2]) / s, 0.25 * s,
                    (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s)
        elif p == 2:
            s = np.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2.0
            q[i] = ((m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s,
                    0.25 * s, (m[1, 2] + m[2, 1]) / s)
        else:
            s = np.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2.0
            q[i] = ((m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s,
                    (m[1, 2] + m[2, 1]) / s, 0.25 * s)
        if q[i, 0] < 0:
            q[i] = -q[i]
    q /= np.linalg.norm(q, axis=-1, keepdims=True)
    return q.reshape(batch + (4,))


def quat_mul(q1: np.ndarray, q2: np.ndarray) -> np.ndarray:
    """Hamilton product q1 * q2, both (w, x, y, z)."""
    q1 = np.asarray(q1, dtype=np.float64)
    q2 = np.asarray(q2, dtype=np.float64)
    w1, x1, y1, z1 = q1[..., 0], q1[..., 1], q1[..., 2], q1[..., 3]
    w2, x2, y2, z2 = q2[..., 0], q2[..., 1], q2[..., 2], q2[..., 3]
    return np.stack([
        w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
        w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
        w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
    ], axis=-1)


def slerp(q0: np.ndarray, q1: np.ndarray, t) -> np.ndarray:
    """Shortest-arc spherical interpolation between unit quaternions."""
    q0 = np.asarray(q0, dtype=np.float64)
    q1 = np.asarray(q1, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    dot = np.sum(q0 * q1, axis=-1, keepdims=True)
    q1 = np.where(dot < 0, -q1, q1)
    dot = np.abs(dot)
    dot = np.clip(dot, -1.0, 1.0)
    theta = np.arccos(dot)
    sin_theta = np.sin(theta)
    t = t[..., None] if t.ndim < dot.ndim else t
    # fall back to lerp when the arc is tiny
    small = sin_theta < 1e-9
    w0 = np.where(small, 1.0 - t, np.sin((1.0 - t) * theta) / np.where(small, 1.0, sin_theta))
    w1 = np.where(small, t, np.sin(t * theta) / np.where(small, 1.0, sin_theta))
    out = w0 * q0 + w1 * q1
    return out / np.linalg.norm(out, axis=-1, keepdims=True)


def axis_angle_to_matrix(axis, angle) -> np.ndarray:
    """Rodrigues rotation about a (not necessarily unit) axis, angle in radians."""
    axis = np.asarray(axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis, axis=-1, keepdims=True)
    angle = np.asarray(angle, dtype=np.float64)
    x, y, z = axis[..., 0], axis[..., 1], axis[..., 2]
    c, s = np.cos(angle), np.sin(angle)
    t = 1.0 - c
    R = np.empty(np.broadcast(x, angle).shape + (3, 3), dtype=np.float64)
    R[..., 0, 0] = t * x * x + c
    R[..., 0, 1] = t * x * y - s * z
    R[..., 0, 2] = t * x * z + s * y
    R[..., 1, 0] = t * x * y + s * z
    R[..., 1, 1] = t * y * y + c
    R[..., 1, 2] = t * y * z - s * x
    R[..., 2, 0] = t * x * z - s * y
    R[..., 2, 1] = t * y * z + s * x
    R[..., 2, 2] = t * z * z + c
    return R


def axis_angle_to_quat(axis, angle) -> np.ndarray:
    axis = np.asarray(axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis, axis=-1, keepdims=True)
    angle = np.asarray(angle, dtype=np.float64)
    half = angle / 2.0
    w = np.cos(half)
    xyz = axis * np.sin(half)[..., None]
    return np.concatenate([w[..., None], xyz], axis=-1)


def nearest_rotation(M: np.ndarray) -> np.ndarray:
    """Project a near-rotation matrix onto SO(3) (orthogonal Procrustes)."""
    M = np.asarray(M, dtype=np.float64)
    U, _, Vt = np.linalg.svd(M)
    R = U @ Vt
    det = np.linalg.det(R)
    # flip the smallest singular direction when the projection lands in O(3)\SO(3)
    flip = np.where(det < 0, -1.0, 1.0)
    if np.any(det < 0):
        U = U.copy()
        U[..., :, 2] = U[..., :, 2] * flip[..., None]
        R = U @ Vt
    return R


def is_rotation(R: np.ndarray, tol: float = ORTHO_TOL) -> bool:
    """True if RᵀR = I and det R = +1 within tol."""
    R = np.asarray(R, dtype=np.float64)
    eye = np.eye(3)
    ortho = np.max(np.abs(np.einsum("...ji,...jk->...ik", R, R) - eye))
    det = np.max(np.abs(np.linalg.det(R) - 1.0))
    return bool(ortho <= tol and det <= tol)
