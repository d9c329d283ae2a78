"""Desk-scale CNN training engine in numpy."""
from .checkpoint import CheckpointError, checkpoint_restore, checkpoint_save
from .data import Dataset, IdxError, load_idx, mnist_subset, synthetic_dataset
from .model import Model, softmax_cross_entropy
from .train import TrainConfig, evaluate, fit, gradient_check, loss_and_grads, predict, train_epoch

__all__ = [
    "CheckpointError", "Dataset", "IdxError", "Model", "TrainConfig", "checkpoint_restore",
    "checkpoint_save", "evaluate", "fit", "gradient_check", "load_idx", "loss_and_grads",
    "mnist_subset", "predict", "softmax_cross_entropy", "synthetic_dataset", "train_epoch",
]
