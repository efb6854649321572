import numpy as np
import pytest

from sparsepose import body


def random_quats(rng, n):
    q = rng.normal(size=(n, 4))
    q /= np.linalg.norm(q, axis=-1, keepdims=True)
    q[q[:, 0] < 0] *= -1
    return q


def random_rotations(rng, n):
    from sparsepose import rotmath
    return rotmath.quat_to_matrix(random_quats(rng, n))


@pytest.fixture(scope="session")
def skel():
    return body.default_skeleton()


@pytest.fixture(scope="session")
def mesh(skel):
    return body.default_vertex_set(skel)
