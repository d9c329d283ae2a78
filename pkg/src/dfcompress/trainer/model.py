"""Numpy CNN with masked, fake-quantized weights.

Each weight layer keeps full-precision latent weights.  The forward pass uses
``quantize(w * mask) * mask``; the backward pass hands the gradient of those
effective weights straight through to the latent weights, masked.
"""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..compression import quantize_weights
from ..network import CONV, FC

ACT_BITS = 10


class WeightLayer:
    def __init__(self, spec, weight, bias):
        self.spec = spec
        self.weight = weight
        self.bias = bias
        self.mask = np.ones_like(weight)
        self.bits = None          # None: unquantized
        self.v_weight = np.zeros_like(weight)
        self.v_bias = np.zeros_like(bias)

    @property
    def kind(self):
        return self.spec.kind

    def effective_weight(self):
        w = self.weight * self.mask
        if self.bits is None:
            return w
        return quantize_weights(w, self.bits) * self.mask


class Model:
    """A plain chain of conv / fully-connected layers with ReLU and max-pool."""

    def __init__(self, net, seed=0, dtype=np.float32, quantize_activations=True,
                 act_bits=ACT_BITS, init=True):
        self.net = net
        self.seed = seed
        self.dtype = np.dtype(dtype)
        self.quantize_activations = quantize_activations
        self.act_bits = act_bits
        self.epochs_trained = 0
        self.weight_layers = []
        rng = np.random.default_rng(seed)
        for spec in net.layers:
            shape = (spec.c_out, spec.c_in) if spec.kind == FC else spec.weight_shape
            fan_in = spec.c_in * spec.f_x * spec.f_y
            if init:
                bound = np.sqrt(6.0 / fan_in)  # He-uniform
                w = rng.uniform(-bound, bound, size=shape).astype(self.dtype)
            else:
                w = np.zeros(shape, self.dtype)
            self.weight_layers.append(WeightLayer(spec, w, np.zeros(spec.c_out, self.dtype)))
        self._cache = None

    def __len__(self):
        return len(self.weight_layers)

    def astype(self, dtype):
        """Copy of this model with all tensors cast to ``dtype``."""
        other = Model(self.net, self.seed, dtype, self.quantize_activations, self.act_bits,
                      init=False)
        other.epochs_trained = self.epochs_trained
        for src, dst in zip(self.weight_layers, other.weight_layers):
            for name in ("weight", "bias", "mask", "v_weight", "v_bias"):
                setattr(dst, name, getattr(src, name).astype(dtype))
            dst.bits = src.bits
        return other

    def copy(self):
        return self.astype(self.dtype)

    def set_bits(self, bits):
        for layer in self.weight_layers:
            layer.bits = bits

    # -- forward / backward -------------------------------------------------

    def forward(self, x, train=False):
        x = np.asarray(x, dtype=self.dtype)
        c, h, w = self.net.input_shape
        if x.ndim != 4 or x.shape[1:] != (c, h, w):
            raise ValueError(f"batch shape {x.shape} does not match model input {(c, h, w)}")
        cache = []
        for layer in self.weight_layers:
            spec = layer.spec
            w_eff = layer.effective_weight()
            if spec.kind == CONV:
                x, ctx = _conv_forward(x, w_eff, layer.bias, spec.stride, spec.padding)
            else:
                x_shape = x.shape
                x = x.reshape(x.shape[0], -1)
                ctx = (x, x_shape, w_eff)
                x = x @ w_eff.T + layer.bias
            relu_mask = None
            if spec.activation == "relu":
                relu_mask = x > 0
                x = x * relu_mask
                if self.quantize_activations:
                    x = _quantize_activations(x, self.act_bits)
            pool_ctx = None
            if spec.pool:
                x, pool_ctx = _pool_forward(x, spec.pool)
            cache.append((ctx, relu_mask, pool_ctx))
        if train:
            self._cache = cache
        return x

    def backward(self, dout):
        """Gradients of the effective weights and biases, from the last ``forward(train=True)``."""
        if self._cache is None:
            raise RuntimeError("backward() requires a preceding forward(train=True)")
        grads = [None] * len(self.weight_layers)
        for i in range(len(self.weight_layers) - 1, -1, -1):
            layer = self.weight_layers[i]
            ctx, relu_mask, pool_ctx = self._cache[i]
            if pool_ctx is not None:
                dout = _pool_backward(dout, pool_ctx)
            if relu_mask is not None:
                dout = dout * relu_mask  # activation quantizer is straight-through
            if layer.kind == CONV:
                dout, dw, db = _conv_backward(dout, ctx, need_dx=i > 0)
            else:
                x, x_shape, w_eff = ctx
                dw = dout.T @ x
                db = dout.sum(axis=0)
                dout = (dout @ w_eff).reshape(x_shape) if i > 0 else None
            grads[i] = (dw, db)
        self._cache = None
        return grads


def _quantize_activations(x, bits):
    """Unsigned uniform grid per sample, scaled to that sample's maximum."""
    n = x.shape[0]
    top = x.reshape(n, -1).max(axis=1)
    levels = 2 ** bits - 1
    s = np.where(top > 0, top / levels, 1).astype(x.dtype)
    s = s.reshape((n,) + (1,) * (x.ndim - 1))
    return np.floor(x / s + 0.5) * s


def _im2col(xp, fx, fy, stride, ox, oy):
    win = sliding_window_view(xp, (fx, fy), axis=(2, 3))[:, :, ::stride, ::stride][:, :, :ox, :oy]
    n, c = xp.shape[:2]
    return win.transpose(0, 2, 3, 1, 4, 5).reshape(n * ox * oy, c * fx * fy)


def _conv_forward(x, w, b, stride, padding):
    n = x.shape[0]
    co, ci, fx, fy = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x
    ox = (xp.shape[2] - fx) // stride + 1
    oy = (xp.shape[3] - fy) // stride + 1
    cols = _im2col(xp, fx, fy, stride, ox, oy)
    out = cols @ w.reshape(co, -1).T + b
    out = out.reshape(n, ox, oy, co).transpose(0, 3, 1, 2)
    return np.ascontiguousarray(out), (cols, x.shape, xp.shape, w, stride, padding)


def _conv_backward(dout, ctx, need_dx=True):
    cols, x_shape, xp_shape, w, stride, padding = ctx
    n, co, ox, oy = dout.shape
    _, ci, fx, fy = w.shape
    dmat = dout.transpose(0, 2, 3, 1).reshape(-1, co)
    dw = (dmat.T @ cols).reshape(w.shape)
    db = dmat.sum(axis=0)
    if not need_dx:
        return None, dw, db
    dcols = (dmat @ w.reshape(co, -1)).reshape(n, ox, oy, ci, fx, fy)
    dxp = np.zeros(xp_shape, dtype=dout.dtype)
    for i in range(fx):
        for j in range(fy):
            dxp[:, :, i:i + stride * ox:stride, j:j + stride * oy:stride] += \
                dcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
    if padding:
        dxp = dxp[:, :, padding:padding + x_shape[2], padding:padding + x_shape[3]]
    return dxp, dw, db


def _pool_forward(x, k):
    n, c, h, w = x.shape
    oh, ow = h // k, w // k
    xc = x[:, :, :oh * k, :ow * k]
    blocks = xc.reshape(n, c, oh, k, ow, k).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, oh, ow, k * k)
    arg = blocks.argmax(axis=-1)
    out = np.take_along_axis(blocks, arg[..., None], axis=-1)[..., 0]
    return out, (arg, x.shape, k)


def _pool_backward(dout, ctx):
    arg, x_shape, k = ctx
    n, c, oh, ow = dout.shape
    blocks = np.zeros((n, c, oh, ow, k * k), dtype=dout.dtype)
    np.put_along_axis(blocks, arg[..., None], dout[..., None], axis=-1)
    dx = np.zeros(x_shape, dtype=dout.dtype)
    dx[:, :, :oh * k, :ow * k] = (blocks.reshape(n, c, oh, ow, k, k)
                                  .transpose(0, 1, 2, 4, 3, 5).reshape(n, c, oh * k, ow * k))
    return dx


def softmax_cross_entropy(logits, labels):
    """Mean cross-entropy and its gradient w.r.t. the logits."""
    z = logits - logits.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    n = logits.shape[0]
    loss = -logp[np.arange(n), labels].mean()
    grad = np.exp(logp)
    grad[np.arange(n), labels] -= 1
    return float(loss), grad / n
