"""24-joint kinematic body model: skeleton, forward kinematics, skinned vertices.

Joint order follows the standard SMPL convention so external pose and weight
files interoperate. The bundled vertex set is a low-poly capsule-per-bone
stand-in for a licensed body mesh; a real vertex set can be loaded from file.
"""

from dataclasses import dataclass, field

import numpy as np

from . import rotmath

JOINT_NAMES = [
    "pelvis",
    "left_hip", "right_hip", "spine1",
    "left_knee", "right_knee", "spine2",
    "left_ankle", "right_ankle", "spine3",
    "left_foot", "right_foot",
    "neck", "left_collar", "right_collar", "head",
    "left_shoulder", "right_shoulder",
    "left_elbow", "right_elbow",
    "left_wrist", "right_wrist",
    "left_hand", "right_hand",
]

PARENTS = np.array([
    -1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8,
    9, 9, 9, 12, 13, 14, 16, 17, 18, 19, 20, 21,
], dtype=np.int64)

NUM_JOINTS = 24
ROOT = 0

# Rest (T-pose) offsets in meters, y up, x to the body's left, z forward.
# Proportions target a ~1.7 m figure.
_REST_OFFSETS = np.array([
    [0.000, 0.000, 0.000],    # pelvis
    [0.090, -0.060, 0.000],   # left_hip
    [-0.090, -0.060, 0.000],  # right_hip
    [0.000, 0.105, 0.000],    # spine1
    [0.000, -0.400, 0.000],   # left_knee
    [0.000, -0.400, 0.000],   # right_knee
    [0.000, 0.120, 0.000],    # spine2
    [0.000, -0.410, 0.000],   # left_ankle
    [0.000, -0.410, 0.000],   # right_ankle
    [0.000, 0.120, 0.000],    # spine3
    [0.000, -0.060, 0.120],   # left_foot
    [0.000, -0.060, 0.120],   # right_foot
    [0.000, 0.120, 0.000],    # neck
    [0.060, 0.090, 0.000],    # left_collar
    [-0.060, 0.090, 0.000],   # right_collar
    [0.000, 0.110, 0.000],    # head
    [0.110, 0.015, 0.000],    # left_shoulder
    [-0.110, 0.015, 0.000],   # right_shoulder
    [0.260, 0.000, 0.000],    # left_elbow
    [-0.260, 0.000, 0.000],   # right_elbow
    [0.250, 0.000, 0.000],    # left_wrist
    [-0.250, 0.000, 0.000],   # right_wrist
    [0.080, 0.000, 0.000],    # left_hand
    [-0.080, 0.000, 0.000],   # right_hand
])

# leaf joints that get an extra tip capsule so their own rotation moves geometry
_LEAF_TIPS = {
    10: (0.0, -0.02, 0.10),   # left_foot toes
    11: (0.0, -0.02, 0.10),   # right_foot toes
    15: (0.0, 0.16, 0.00),    # head crown
    22: (0.08, 0.0, 0.0),     # left_hand fingers
    23: (-0.08, 0.0, 0.0),    # right_hand fingers
}

BODY_FILE_MAGIC = "sparsepose-body"
BODY_FILE_VERSION = 1


@dataclass
class Skeleton:
    parent: np.ndarray            # (24,) int, parent[root] = -1
    rest_offset: np.ndarray       # (24, 3) meters, parent-local
    joint_names: list = field(default_factory=lambda: list(JOINT_NAMES))

    def __post_init__(self):
        self.parent = np.asarray(self.parent, dtype=np.int64)
        self.rest_offset = np.asarray(self.rest_offset, dtype=np.float64)
        if self.parent.shape != (NUM_JOINTS,) or self.rest_offset.shape != (NUM_JOINTS, 3):
            raise ValueError("skeleton must have 24 joints")
        if self.parent[ROOT] != -1 or np.count_nonzero(self.parent < 0) != 1:
            raise ValueError("exactly one root expected")
        if np.any(self.parent[1:] >= np.arange(1, NUM_JOINTS)):
            raise ValueError("joints must be topologically ordered (parent[i] < i)")
        self._rest_pos = None

    @property
    def rest_joint_positions(self) -> np.ndarray:
        """Joint positions in the rest pose, root at origin. (24, 3)"""
        if self._rest_pos is None:
            pos = np.zeros((NUM_JOINTS, 3))
            for j in range(1, NUM_JOINTS):
                pos[j] = pos[self.parent[j]] + self.rest_offset[j]
            self._rest_pos = pos
        return self._rest_pos

    def is_descendant(self, joint: int, ancestor: int) -> bool:
        j = joint
        while j != -1:
            if j == ancestor:
                return True
            j = int(self.parent[j])
        return False


@dataclass
class Pose:
    """Joint-local rotations; index 0 is the global root orientation."""

    local_rot: np.ndarray         # (24, 3, 3)

    def __post_init__(self):
        self.local_rot = np.asarray(self.local_rot, dtype=np.float64)
        if self.local_rot.shape != (NUM_JOINTS, 3, 3):
            raise ValueError("pose must hold 24 rotation matrices")

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.broadcast_to(np.eye(3), (NUM_JOINTS, 3, 3)).copy())


@dataclass
class FkResult:
    global_rot: np.ndarray        # (24, 3, 3)
    global_pos: np.ndarray        # (24, 3), root at origin


@dataclass
class PoseEstimate:
    """Network output: 24 joint rotations in 6D plus their decoded matrices."""

    local_rot6d: np.ndarray       # (24, 6)
    local_rot: np.ndarray         # (24, 3, 3)

    def fk(self, skel: Skeleton) -> FkResult:
        return forward_kinematics(Pose(self.local_rot), skel)


@dataclass
class SkinnedVertexSet:
    vertices: np.ndarray          # (N, 3) rest positions
    weights: np.ndarray           # (N, 24), rows sum to 1, non-negative

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64)
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.shape != (len(self.vertices), NUM_JOINTS):
            raise ValueError("weights must be (N, 24)")
        if np.any(self.weights < -1e-12):
            raise ValueError("negative skinning weight")
        if np.max(np.abs(self.weights.sum(axis=1) - 1.0)) > 1e-6:
            raise ValueError("skinning weights must sum to 1")


def fk_batched(local_rot: np.ndarray, skel: Skeleton) -> tuple[np.ndarray, np.ndarray]:
    """Forward kinematics over (..., 24, 3, 3) local rotations.

    Returns (global_rot (..., 24, 3, 3), global_pos (..., 24, 3)); the root
    stays at the origin.
    """
    local_rot = np.asarray(local_rot, dtype=np.float64)
    batch = local_rot.shape[:-3]
    G = np.empty_like(local_rot)
    P = np.zeros(batch + (NUM_JOINTS, 3))
    G[..., ROOT, :, :] = local_rot[..., ROOT, :, :]
    off = skel.rest_offset
    for j in range(1, NUM_JOINTS):
        p = skel.parent[j]
        Gp = G[..., p, :, :]
        np.matmul(Gp, local_rot[..., j, :, :], out=G[..., j, :, :])
        P[..., j, :] = P[..., p, :] + Gp @ off[j]
    return G, P


def forward_kinematics(pose: Pose, skel: Skeleton) -> FkResult:
    """Compose local rotations root-to-joint; accumulate joint positions."""
    G, P = fk_batched(pose.local_rot, skel)
    return FkResult(G, P)


def skin_vertices(fk: FkResult, skel: Skeleton, mesh: SkinnedVertexSet) -> np.ndarray:
    """Linear blend skinning of the rest vertices by the posed joints. (N, 3)"""
    rest = skel.rest_joint_positions       # (24, 3)
    # rigid image of every vertex under every joint: (N, 24, 3)
    local = mesh.vertices[:, None, :] - rest[None, :, :]
    rigid = np.einsum("jab,njb->nja", fk.global_rot, local) + fk.global_pos[None, :, :]
    return np.einsum("nj,nja->na", mesh.weights, rigid)


def default_skeleton() -> Skeleton:
    return Skeleton(PARENTS.copy(), _REST_OFFSETS.copy())


def default_vertex_set(skel: Skeleton | None = None, ring: int = 4, rings_per_bone: int = 3,
                       radius: float = 0.05) -> SkinnedVertexSet:
    """Capsule-per-bone vertex set, one-hot skinned on the bone's driving joint.

    Each bone parent->joint contributes rings of vertices weighted on the
    parent (the joint whose rotation moves that segment); leaf joints get a
    tip capsule weighted on themselves.
    """
    skel = skel or default_skeleton()
    rest = skel.rest_joint_positions
    verts = []
    weights = []

    def add_capsule(a, b, owner):
        axis = b - a
        length = np.linalg.norm(axis)
        if length < 1e-9:
            return
        axis = axis / length
        # orthonormal frame around the bone axis
        helper = np.array([1.0, 0.0, 0.0]) if abs(axis[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
        u = np.cross(axis, helper)
        u /= np.linalg.norm(u)
        v = np.cross(axis, u)
        for i in range(rings_per_bone):
            s = (i + 0.5) / rings_per_bone
            center = a + s * (b - a)
            for k in range(ring):
                ang = 2.0 * np.pi * k / ring
                verts.append(center + radius * (np.cos(ang) * u + np.sin(ang) * v))
                w = np.zeros(NUM_JOINTS)
                w[owner] = 1.0
                weights.append(w)

    for j in range(1, NUM_JOINTS):
        p = int(skel.parent[j])
        add_capsule(rest[p], rest[j], owner=p)
    for j, tip in _LEAF_TIPS.items():
        add_capsule(rest[j], rest[j] + np.asarray(tip), owner=j)
    return SkinnedVertexSet(np.asarray(verts), np.asarray(weights))


def save_body_file(path, skel: Skeleton, mesh: SkinnedVertexSet) -> None:
    """Write skeleton + vertex set as a versioned text table."""
    with open(path, "w") as f:
        f.write(f"{BODY_FILE_MAGIC} {BODY_FILE_VERSION}\n")
        f.write(f"joints {NUM_JOINTS}\n")
        for j in range(NUM_JOINTS):
            ox, oy, oz = (float(x) for x in skel.rest_offset[j])
            f.write(f"{skel.joint_names[j]} {skel.parent[j]} {ox!r} {oy!r} {oz!r}\n")
        f.write(f"vertices {len(mesh.vertices)}\n")
        for v, w in zip(mesh.vertices, mesh.weights):
            nz = np.nonzero(w)[0]
            pairs = " ".join(f"{j}:{float(w[j])!r}" for j in nz)
            f.write(f"{float(v[0])!r} {float(v[1])!r} {float(v[2])!r} {pairs}\n")


def load_body_file(path) -> tuple[Skeleton, SkinnedVertexSet]:
    with open(path) as f:
        header = f.readline().split()
        if len(header) != 2 or header[0] != BODY_FILE_MAGIC:
            raise ValueError("not a body file")
        if int(header[1]) != BODY_FILE_VERSION:
            raise ValueError(f"unsupported body file version {header[1]}")
        tag, njoint = f.readline().split()
        if tag != "joints" or int(njoint) != NUM_JOINTS:
            raise ValueError("body file must declare 24 joints")
        names, parent, offsets = [], [], []
        for _ in range(NUM_JOINTS):
            parts = f.readline().split()
            names.append(parts[0])
            parent.append(int(parts[1]))
            offsets.append([float(x) for x in parts[2:5]])
        tag, nvert = f.readline().split()
        if tag != "vertices":
            raise ValueError("missing vertex table")
        verts = np.empty((int(nvert), 3))
        weights = np.zeros((int(nvert), NUM_JOINTS))
        for i in range(int(nvert)):
            parts = f.readline().split()
            verts[i] = [float(x) for x in parts[:3]]
            for pair in parts[3:]:
                j, w = pair.split(":")
                weights[i, int(j)] = float(w)
    skel = Skeleton(np.asarray(parent), np.asarray(offsets), names)
    return skel, SkinnedVertexSet(verts, weights)


def pose_estimate_from_6d(r6: np.ndarray, fallback_rot: np.ndarray | None = None) -> PoseEstimate:
    """Decode a 144-vector into a PoseEstimate.

    Degenerate joints fall back to `fallback_rot` (24, 3, 3) when given,
    typically the previous frame's rotations.
    """
    r6 = np.asarray(r6, dtype=np.float64).reshape(NUM_JOINTS, 6)
    try:
        rot = rotmath.rot6d_to_matrix(r6)
    except rotmath.DegenerateRotation:
        if fallback_rot is None:
            raise
        rot = np.empty((NUM_JOINTS, 3, 3))
        for j in range(NUM_JOINTS):
            try:
                rot[j] = rotmath.rot6d_to_matrix(r6[j])
            except rotmath.DegenerateRotation:
                rot[j] = fallback_rot[j]
    return PoseEstimate(r6, rot)
