"""Pose network: model, loss, training, online inference, weight files."""

from .model import (ModelConfig, ModelWeights, ShapeMismatch, forward,
                    forward_batch, backward_batch, init_weights, zero_weights,
                    last_step_forward, tensor_shapes)
from .loss import loss, loss_forward, pose_to_6d
from .train import AdamState, EmptyDataset, TrainConfig, TrainStream, adam_step, train
from .online import OnlinePoseEstimator, decode_sequence, evaluate_online, infer_online
from .weights_io import WeightFileError, load_weights, save_weights

__all__ = [
    "ModelConfig", "ModelWeights", "ShapeMismatch", "forward", "forward_batch",
    "backward_batch", "init_weights", "zero_weights", "last_step_forward",
    "tensor_shapes", "loss", "loss_forward", "pose_to_6d", "AdamState",
    "EmptyDataset", "TrainConfig", "TrainStream", "adam_step", "train",
    "OnlinePoseEstimator", "decode_sequence", "evaluate_online", "infer_online",
    "WeightFileError", "load_weights", "save_weights",
]
