"""Per-layer quantization depth / pruning remaining amount, the discounted
step schedule, and the weight transforms that realise them."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

Q_MIN, Q_MAX = 1.0, 8.0
P_MIN, P_MAX = 0.01, 1.0
DELTA_Q_MAX = 1.0
DELTA_P_MAX = 0.1


def round_half_away(v):
    """Round to nearest, ties away from zero (numpy's ``rint`` ties to even)."""
    return np.sign(v) * np.floor(np.abs(v) + 0.5)


@dataclass(frozen=True)
class CompressionState:
    q: tuple                 # continuous quantization depth per layer, bits
    p: tuple                 # continuous remaining fraction per layer
    t: int = 0
    gamma: float = 0.9
    history: tuple = field(default=(), compare=False)  # ((q, p), ...) before each step

    def __post_init__(self):
        if len(self.q) != len(self.p):
            raise ValueError("q and p must have one entry per layer")
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must be in (0, 1]")
        if self.t < 0:
            raise ValueError("step index must be non-negative")

    @classmethod
    def initial(cls, n_layers, gamma=0.9, q0=8.0, p0=1.0):
        return cls(q=(float(q0),) * n_layers, p=(float(p0),) * n_layers, gamma=gamma)

    @property
    def n_layers(self):
        return len(self.q)

    @property
    def bits(self):
        return tuple(effective_bits(v) for v in self.q)

    def to_dict(self):
        return {"q": list(self.q), "p": list(self.p), "t": self.t, "gamma": self.gamma,
                "history": [[list(q), list(p)] for q, p in self.history]}

    @classmethod
    def from_dict(cls, d):
        return cls(q=tuple(d["q"]), p=tuple(d["p"]), t=d["t"], gamma=d["gamma"],
                   history=tuple((tuple(q), tuple(p)) for q, p in d.get("history", [])))


def schedule_update(state, dq, dp, dq_max=DELTA_Q_MAX, dp_max=DELTA_P_MAX):
    """Advance one step: ``Q += dq * gamma**t``, ``P += dp * gamma**t``, clamped."""
    dq = np.asarray(dq, dtype=np.float64)
    dp = np.asarray(dp, dtype=np.float64)
    if dq.shape != (state.n_layers,) or dp.shape != (state.n_layers,):
        raise ValueError(f"expected {state.n_layers} deltas per kind")
    if np.any(np.abs(dq) > dq_max + 1e-12) or np.any(np.abs(dp) > dp_max + 1e-12):
        raise ValueError(f"deltas exceed bounds |dq| <= {dq_max}, |dp| <= {dp_max}")
    g = state.gamma ** state.t
    q = np.clip(np.asarray(state.q) + dq * g, Q_MIN, Q_MAX)
    p = np.clip(np.asarray(state.p) + dp * g, P_MIN, P_MAX)
    return CompressionState(q=tuple(q.tolist()), p=tuple(p.tolist()), t=state.t + 1,
                            gamma=state.gamma,
                            history=state.history + ((state.q, state.p),))


def closed_form(initial, deltas, gamma):
    """``initial + sum_i deltas[i] * gamma**i`` (no clamping)."""
    deltas = np.asarray(deltas, dtype=np.float64)
    weights = gamma ** np.arange(len(deltas))
    return np.asarray(initial, dtype=np.float64) + np.tensordot(weights, deltas, axes=1)


def effective_bits(q):
    return int(math.floor(q + 0.5)) if q >= 0 else -int(math.floor(-q + 0.5))


def quantize_weights(w, q_bits):
    """Symmetric uniform fake quantization to ``q_bits`` bits.

    ``q_bits >= 2`` snaps to ``s * round(w / s)`` with ``s = max|w| / (2**(q-1) - 1)``.
    ``q_bits == 1`` binarizes to ``sign(w) * mean|w|`` over the nonzero entries.
    """
    w = np.asarray(w)
    if int(q_bits) != q_bits or not 1 <= q_bits <= 8:
        raise ValueError(f"q_bits must be an integer in [1, 8], got {q_bits}")
    # scale computed in float64 so re-quantizing float32 weights is exact
    w64 = w.astype(np.float64)
    mag = np.abs(w64)
    if q_bits == 1:
        nz = mag[mag > 0]
        if nz.size == 0:
            return np.zeros_like(w)
        return (np.sign(w64) * nz.mean()).astype(w.dtype)
    top = mag.max() if w.size else 0.0
    if top == 0:
        return np.zeros_like(w)
    s = top / (2 ** (q_bits - 1) - 1)
    return (s * round_half_away(w64 / s)).astype(w.dtype)


def quantization_step(w, q_bits):
    if q_bits < 2:
        return None
    top = np.abs(np.asarray(w, dtype=np.float64)).max()
    return top / (2 ** (q_bits - 1) - 1)


def prune_mask(w, remaining):
    """Keep the ``round(remaining * n)`` largest-magnitude entries (at least one);
    ties keep the lower flat index."""
    if not 0 < remaining <= 1:
        raise ValueError(f"remaining fraction must be in (0, 1], got {remaining}")
    w = np.asarray(w)
    n = w.size
    k = max(1, int(round_half_away(remaining * n)))
    order = np.argsort(-np.abs(w).ravel(), kind="stable")
    mask = np.zeros(n, dtype=w.dtype if w.dtype.kind == "f" else np.float64)
    mask[order[:k]] = 1
    return mask.reshape(w.shape)


def compress_layer(w, q_bits, remaining):
    """Prune first, then quantize the survivors; returns ``(weights, mask)``."""
    mask = prune_mask(w, remaining)
    return quantize_weights(w * mask, q_bits) * mask, mask


def apply_compression(model, state):
    """Prune and quantize every weight layer of ``model`` in place per ``state``.

    The masks are stored on the model so fine-tuning keeps pruned weights at
    zero, and the layer quantizers are set to the rounded depth.
    """
    layers = model.weight_layers
    if len(layers) != state.n_layers:
        raise ValueError(f"model has {len(layers)} weight layers, state has {state.n_layers}")
    for layer, q, p in zip(layers, state.q, state.p):
        bits = effective_bits(q)
        layer.weight[...], layer.mask[...] = compress_layer(layer.weight, bits, p)
        layer.bits = bits
    return model
