"""Deterministic procedural motion sequences for desk-scale experiments."""

import numpy as np

from . import rotmath
from .synth import MotionSequence

KINDS = ("walk", "armswing", "jacks")

X = np.array([1.0, 0.0, 0.0])
Y = np.array([0.0, 1.0, 0.0])
Z = np.array([0.0, 0.0, 1.0])

# joint indices
L_HIP, R_HIP = 1, 2
L_KNEE, R_KNEE = 4, 5
NECK, HEAD = 12, 15
L_SHOULDER, R_SHOULDER = 16, 17
L_ELBOW, R_ELBOW = 18, 19


def _identity_quats(T):
    q = np.zeros((T, 24, 4))
    q[:, :, 0] = 1.0
    return q


def generate(kind: str, seconds: float, fps: float = 25.0, seed: int = 0) -> MotionSequence:
    """Procedural walk / arm-swing / jumping-jack sequences, seeded."""
    if kind not in KINDS:
        raise ValueError(f"unknown motion kind {kind!r}; choose from {KINDS}")
    T = int(round(seconds * fps))
    if T < 3:
        raise ValueError("sequence too short")
    rng = np.random.default_rng(seed)
    t = np.arange(T) / fps
    quat = _identity_quats(T)
    trans = np.zeros((T, 3))

    # per-sequence variation so different seeds give different motions
    rate = 1.0 + 0.2 * rng.uniform(-1, 1)
    amp = 1.0 + 0.15 * rng.uniform(-1, 1)
    phase = rng.uniform(0, 2 * np.pi)

    if kind == "walk":
        w = 2 * np.pi * 0.9 * rate
        swing = np.deg2rad(28.0 * amp) * np.sin(w * t + phase)
        knee = np.deg2rad(20.0 * amp) * (1 - np.cos(w * t + phase)) / 2
        arm = np.deg2rad(18.0 * amp) * np.sin(w * t + phase)
        quat[:, L_HIP] = rotmath.axis_angle_to_quat(X, swing)
        quat[:, R_HIP] = rotmath.axis_angle_to_quat(X, -swing)
        quat[:, L_KNEE] = rotmath.axis_angle_to_quat(X, knee)
        quat[:, R_KNEE] = rotmath.axis_angle_to_quat(X, np.deg2rad(20.0 * amp)
                                                     * (1 + np.cos(w * t + phase)) / 2)
        # arms counter-swing about the shoulder
        quat[:, L_SHOULDER] = rotmath.axis_angle_to_quat(X, -arm)
        quat[:, R_SHOULDER] = rotmath.axis_angle_to_quat(X, arm)
        quat[:, 0] = rotmath.axis_angle_to_quat(Y, np.deg2rad(4.0) * np.sin(w * t / 2))
        trans[:, 2] = 1.1 * t * rate
        trans[:, 1] = 0.02 * amp * np.abs(np.sin(w * t + phase))
    elif kind == "armswing":
        w = 2 * np.pi * 0.5 * rate
        # raise arms from hanging (T-pose zero) up and down about z
        lift = np.deg2rad(60.0 * amp) * (1 - np.cos(w * t + phase)) / 2
        quat[:, L_SHOULDER] = rotmath.axis_angle_to_quat(Z, lift)
        quat[:, R_SHOULDER] = rotmath.axis_angle_to_quat(Z, -lift)
        quat[:, L_ELBOW] = rotmath.axis_angle_to_quat(Z, 0.4 * lift)
        quat[:, R_ELBOW] = rotmath.axis_angle_to_quat(Z, -0.4 * lift)
        quat[:, HEAD] = rotmath.axis_angle_to_quat(X, np.deg2rad(8.0) * np.sin(w * t))
    else:  # jacks
        w = 2 * np.pi * 0.8 * rate
        cyc = (1 - np.cos(w * t + phase)) / 2
        arm = np.deg2rad(80.0 * amp) * cyc
        leg = np.deg2rad(22.0 * amp) * cyc
        quat[:, L_SHOULDER] = rotmath.axis_angle_to_quat(Z, arm)
        quat[:, R_SHOULDER] = rotmath.axis_angle_to_quat(Z, -arm)
        quat[:, L_HIP] = rotmath.axis_angle_to_quat(Z, leg)
        quat[:, R_HIP] = rotmath.axis_angle_to_quat(Z, -leg)
        trans[:, 1] = 0.06 * amp * np.maximum(np.sin(w * t + phase), 0.0)

    return MotionSequence(fps, trans, quat)
