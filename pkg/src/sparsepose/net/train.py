"""Windowed training loop with Adam."""

from dataclasses import dataclass, field

import numpy as np

from .. import body
from . import model as model_mod
from .loss import loss_forward, pose_to_6d


class EmptyDataset(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    batch: int = 256
    lr: float = 3e-4
    window: int = 125        # 5 s at 25 fps
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    epochs: int = 1
    max_steps: int | None = None


@dataclass
class TrainStream:
    """One masked stream of paired inputs and ground-truth rotations."""

    inputs: np.ndarray        # (T, 60)
    gt_rot: np.ndarray        # (T, 24, 3, 3)


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0


def adam_step(weights: model_mod.ModelWeights, grads: dict, state: AdamState,
              cfg: TrainConfig) -> None:
    state.t += 1
    b1, b2 = cfg.beta1, cfg.beta2
    corr1 = 1.0 - b1 ** state.t
    corr2 = 1.0 - b2 ** state.t
    for name in sorted(weights.tensors):
        g = grads[name]
        if name not in state.m:
            state.m[name] = np.zeros_like(g)
            state.v[name] = np.zeros_like(g)
        m = state.m[name]
        v = state.v[name]
        m += (1.0 - b1) * (g - m)
        v += (1.0 - b2) * (g * g - v)
        weights.tensors[name] -= cfg.lr * (m / corr1) / (np.sqrt(v / corr2) + cfg.eps)


def extract_windows(streams: list[TrainStream], window: int):
    """Non-overlapping chunks per stream; incomplete tails are dropped."""
    xs, gts = [], []
    for s in streams:
        T = len(s.inputs)
        for start in range(0, T - window + 1, window):
            xs.append(s.inputs[start:start + window])
            gts.append(s.gt_rot[start:start + window])
    return xs, gts


def train(streams: list[TrainStream], model_config: model_mod.ModelConfig,
          train_config: TrainConfig, seed: int = 0,
          weights: model_mod.ModelWeights | None = None,
          progress=None):
    """Adam over shuffled non-overlapping windows; deterministic under seed.

    Returns (weights, history) where history is the per-epoch mean train loss.
    """
    xs, gts = extract_windows(streams, train_config.window)
    if not xs:
        raise EmptyDataset("no complete training windows")
    X = np.asarray(np.stack(xs), dtype=np.float64)
    GT = np.stack(gts)
    gt6 = pose_to_6d(GT)
    skel = body.default_skeleton()
    _, gt_pos = body.fk_batched(GT, skel)

    if weights is None:
        weights = model_mod.init_weights(model_config, seed=seed)
    rng = np.random.default_rng(seed + 1)
    state = AdamState()
    history = []
    steps = 0
    n = len(xs)
    for _ in range(train_config.epochs):
        order = rng.permutation(n)
        epoch_losses = []
        for start in range(0, n, train_config.batch):
            idx = order[start:start + train_config.batch]
            pred, cache = model_mod.forward_batch(weights, X[idx], want_cache=True)
            total, d_pred, _ = loss_forward(pred, gt6[idx], gt_pos[idx], skel)
            grads = model_mod.backward_batch(weights, cache, d_pred)
            adam_step(weights, grads, state, train_config)
            epoch_losses.append(total)
            steps += 1
            if progress is not None:
                progress(steps, total)
            if train_config.max_steps is not None and steps >= train_config.max_steps:
                history.append(float(np.mean(epoch_losses)))
                return weights, history
        history.append(float(np.mean(epoch_losses)))
    return weights, history
