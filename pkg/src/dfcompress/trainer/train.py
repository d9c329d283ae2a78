from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import softmax_cross_entropy

EVAL_BATCH = 500


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.02
    momentum: float = 0.9
    batch_size: int = 64
    epochs: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.lr < 0 or not 0 <= self.momentum < 1:
            raise ValueError("lr must be >= 0 and momentum in [0, 1)")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size must be positive and epochs non-negative")


def sgd_step(model, grads, lr, momentum):
    """Momentum SGD; weight gradients are masked so pruned weights never move."""
    for layer, (dw, db) in zip(model.weight_layers, grads):
        dw = dw.reshape(layer.weight.shape) * layer.mask
        layer.v_weight *= momentum
        layer.v_weight += dw
        layer.v_weight *= layer.mask
        layer.v_bias *= momentum
        layer.v_bias += db
        layer.weight -= lr * layer.v_weight
        layer.bias -= lr * layer.v_bias
        layer.weight *= layer.mask


def train_epoch(model, dataset, config=TrainConfig()):
    """One shuffled pass of mini-batch SGD; returns the mean batch loss."""
    rng = np.random.default_rng([config.seed, model.epochs_trained])
    order = rng.permutation(len(dataset))
    losses = []
    for start in range(0, len(order), config.batch_size):
        idx = order[start:start + config.batch_size]
        logits = model.forward(dataset.images[idx], train=True)
        loss, dlogits = softmax_cross_entropy(logits, dataset.labels[idx])
        grads = model.backward(dlogits.astype(model.dtype, copy=False))
        sgd_step(model, grads, config.lr, config.momentum)
        losses.append(loss)
    model.epochs_trained += 1
    return float(np.mean(losses)) if losses else float("nan")


def fit(model, dataset, config=TrainConfig()):
    return [train_epoch(model, dataset, config) for _ in range(config.epochs)]


def predict(model, images):
    out = [model.forward(images[i:i + EVAL_BATCH]).argmax(axis=1)
           for i in range(0, len(images), EVAL_BATCH)]
    return np.concatenate(out)


def evaluate(model, dataset):
    """Top-1 accuracy in [0, 1]."""
    if len(dataset) == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    return float(np.mean(predict(model, dataset.images) == dataset.labels))


def loss_and_grads(model, images, labels):
    logits = model.forward(images, train=True)
    loss, dlogits = softmax_cross_entropy(logits, labels)
    return loss, model.backward(dlogits)


def gradient_check(model, images, labels, step=1e-4, max_per_tensor=None, seed=0):
    """Compare analytic gradients against central differences in float64 with
    all quantization disabled.

    The error of a tensor is ``max|analytic - numeric| / max(max|analytic|,
    max|numeric|)``; the maximum over all weight and bias tensors is returned.
    ``max_per_tensor`` samples that many coordinates per tensor.
    """
    m = model.astype(np.float64)
    m.set_bits(None)
    m.quantize_activations = False
    images = np.asarray(images, dtype=np.float64)
    _, grads = loss_and_grads(m, images, labels)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for layer, (dw, db) in zip(m.weight_layers, grads):
        for param, grad in ((layer.weight, dw.reshape(layer.weight.shape) * layer.mask),
                            (layer.bias, db)):
            flat = param.reshape(-1)
            coords = np.arange(flat.size)
            if max_per_tensor is not None and flat.size > max_per_tensor:
                coords = rng.choice(flat.size, max_per_tensor, replace=False)
            analytic = grad.reshape(-1)[coords]
            numeric = np.empty(len(coords))
            for j, c in enumerate(coords):
                old = flat[c]
                flat[c] = old + step
                up = softmax_cross_entropy(m.forward(images), labels)[0]
                flat[c] = old - step
                down = softmax_cross_entropy(m.forward(images), labels)[0]
                flat[c] = old
                numeric[j] = (up - down) / (2 * step)
            if param is layer.weight:
                numeric *= layer.mask.reshape(-1)[coords]
            scale = max(np.abs(analytic).max(), np.abs(numeric).max())
            if scale > 0:
                worst = max(worst, float(np.abs(analytic - numeric).max() / scale))
    return worst
