"""Rolling-window online inference."""

import numpy as np

from .. import body
from . import model as model_mod


class OnlinePoseEstimator:
    """Full-window recompute per tick over the last `window` input frames.

    The buffer is zero-padded until full and advances one sample per push.
    Degenerate 6D outputs fall back to the previous frame's rotation for the
    affected joint.
    """

    def __init__(self, weights: model_mod.ModelWeights, window: int = 125):
        self.weights = weights
        self.window = window
        self._buf = np.zeros((window, weights.config.input_dim), dtype=weights.dtype)
        self._prev_rot = np.broadcast_to(np.eye(3), (24, 3, 3)).copy()

    def push(self, frame: np.ndarray) -> body.PoseEstimate:
        """Append one 60-dim input frame and estimate the newest frame's pose."""
        self._buf[:-1] = self._buf[1:]
        self._buf[-1] = np.asarray(frame, dtype=self.weights.dtype)
        y = model_mod.last_step_forward(self.weights, self._buf)
        est = body.pose_estimate_from_6d(np.asarray(y, dtype=np.float64),
                                         fallback_rot=self._prev_rot)
        self._prev_rot = est.local_rot
        return est


def infer_online(weights: model_mod.ModelWeights, frames: np.ndarray,
                 window: int = 125) -> list[body.PoseEstimate]:
    """Feed frames (T, 60) tick by tick; one PoseEstimate per tick."""
    ctx = OnlinePoseEstimator(weights, window)
    return [ctx.push(f) for f in np.asarray(frames)]


def evaluate_online(weights: model_mod.ModelWeights, frames: np.ndarray,
                    window: int = 125, chunk: int = 256) -> np.ndarray:
    """Vectorized emulation of per-tick online inference. (T, 144)

    Builds every stride-1 window (zero-padded warmup) and batches the forward
    pass; row t equals the per-tick estimator's output at tick t.
    """
    frames = np.asarray(frames, dtype=weights.dtype)
    T = len(frames)
    out = np.empty((T, weights.config.output_dim), dtype=weights.dtype)
    padded = np.concatenate([np.zeros((window - 1, frames.shape[1]), dtype=frames.dtype),
                             frames])
    for start in range(0, T, chunk):
        stop = min(start + chunk, T)
        wins = np.stack([padded[t:t + window] for t in range(start, stop)])
        y = model_mod.forward_batch(weights, wins)
        out[start:stop] = y[:, -1]
    return out


def decode_sequence(pred_6d: np.ndarray) -> np.ndarray:
    """(T, 144) network output -> (T, 24, 3, 3) with degenerate fallback."""
    prev = np.broadcast_to(np.eye(3), (24, 3, 3)).copy()
    out = np.empty((len(pred_6d), 24, 3, 3))
    for t, row in enumerate(pred_6d):
        est = body.pose_estimate_from_6d(np.asarray(row, dtype=np.float64),
                                         fallback_rot=prev)
        out[t] = est.local_rot
        prev = est.local_rot
    return out
