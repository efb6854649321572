"""Per-frame IK refinement of instrumented bones against measured orientations.

For each active sensor location a small set of ancestor joints is optimized
(in 6D parameter space, Adam, fixed iteration count) so the FK global
orientation of the instrumented bone approaches the measurement. All other
joints pass through untouched and the best iterate is kept, so the reported
objective never exceeds the initial one.
"""

from dataclasses import dataclass, field

import numpy as np

from . import body, diff, rotmath
from .combos import Location, LocationMask

# sensor location -> instrumented joint
INSTRUMENTED_JOINT = {
    Location.LEFT_WRIST: 20,
    Location.RIGHT_WRIST: 21,
    Location.LEFT_POCKET: 1,
    Location.RIGHT_POCKET: 2,
    Location.HEAD: 15,
}

# which joints each location's measurement may adjust
DEFAULT_OPTIMIZED_JOINTS = {
    Location.LEFT_WRIST: (18, 16),    # elbow, shoulder
    Location.RIGHT_WRIST: (19, 17),
    Location.HEAD: (12, 15),          # neck, head
    Location.LEFT_POCKET: (1,),       # the hip itself
    Location.RIGHT_POCKET: (2,),
}


@dataclass(frozen=True)
class RefineConfig:
    iterations: int = 10
    step_size: float = 0.05
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    optimized_joints: dict = field(default_factory=lambda: dict(DEFAULT_OPTIMIZED_JOINTS))

    def validate(self, skel: body.Skeleton) -> None:
        for loc, joints in self.optimized_joints.items():
            target = INSTRUMENTED_JOINT[loc]
            for j in joints:
                if not skel.is_descendant(target, j):
                    raise ValueError(f"joint {j} is not an ancestor of "
                                     f"{loc.name}'s instrumented joint")


def objective_and_grad(local_rot: np.ndarray, params6d: dict, measured: dict,
                       skel: body.Skeleton):
    """Frobenius residual over instrumented bones and its gradient.

    params6d maps optimized joint index -> (6,) parameters; measured maps
    instrumented joint index -> target global rotation. Returns
    (J, grads: joint -> (6,)).
    """
    rot = np.array(local_rot, copy=True)
    caches = {}
    for j, p in params6d.items():
        R, c = diff.rot6d_forward(p)
        rot[j] = R
        caches[j] = c
    G, _, fk_cache = diff.fk_forward(rot, skel)

    J = 0.0
    dG = np.zeros_like(G)
    for j, target in measured.items():
        resid = G[j] - target
        J += float(np.sum(resid ** 2))
        dG[j] = 2.0 * resid
    dLocal = diff.fk_backward(fk_cache, skel, dG=dG, dP=None)
    grads = {j: diff.rot6d_backward(caches[j], dLocal[j]) for j in params6d}
    return J, grads


def refine(pose: body.PoseEstimate, measured: dict, mask: LocationMask,
           skel: body.Skeleton, cfg: RefineConfig | None = None) -> body.PoseEstimate:
    """Refine a pose estimate against measured bone orientations.

    `measured` maps each active Location to the calibrated global bone
    rotation of its instrumented joint; exactly the mask's locations must be
    present.
    """
    cfg = cfg or RefineConfig()
    cfg.validate(skel)
    active = list(mask)
    if set(measured) != set(active):
        raise ValueError("measurements must cover exactly the mask's locations")
    if not active:
        return pose

    targets = {INSTRUMENTED_JOINT[loc]: np.asarray(measured[loc], dtype=np.float64)
               for loc in active}
    opt_joints = sorted({j for loc in active for j in cfg.optimized_joints[loc]})
    if not opt_joints:
        return pose

    params = {j: rotmath.matrix_to_rot6d(pose.local_rot[j]) for j in opt_joints}
    m = {j: np.zeros(6) for j in opt_joints}
    v = {j: np.zeros(6) for j in opt_joints}

    J0, grads = objective_and_grad(pose.local_rot, params, targets, skel)
    best_J, best_params = J0, {j: p.copy() for j, p in params.items()}
    for it in range(1, cfg.iterations + 1):
        corr1 = 1.0 - cfg.beta1 ** it
        corr2 = 1.0 - cfg.beta2 ** it
        for j in opt_joints:
            g = grads[j]
            m[j] += (1.0 - cfg.beta1) * (g - m[j])
            v[j] += (1.0 - cfg.beta2) * (g * g - v[j])
            params[j] = params[j] - cfg.step_size * (m[j] / corr1) / (
                np.sqrt(v[j] / corr2) + cfg.eps)
        J, grads = objective_and_grad(pose.local_rot, params, targets, skel)
        if J < best_J:
            best_J = J
            best_params = {j: p.copy() for j, p in params.items()}

    out6d = pose.local_rot6d.copy()
    out_rot = pose.local_rot.copy()
    for j, p in best_params.items():
        out6d[j] = p
        out_rot[j] = rotmath.rot6d_to_matrix(p)
    return body.PoseEstimate(out6d, out_rot)
