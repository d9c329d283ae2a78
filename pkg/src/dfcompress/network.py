"""Network and layer descriptors, JSON network files, and the reference
six-loop convolution used as ground truth by the trainer tests.

Layer geometry follows the usual accelerator notation: ``c_out``/``c_in`` are
output/input channels, ``x``/``y`` the output feature-map extent and
``f_x``/``f_y`` the filter extent.  Arrays are laid out ``(channel, x, y)``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import kernels

CONV = "conv"
FC = "fc"


class NetworkError(ValueError):
    """Raised for malformed or inconsistent network descriptions."""

    def __init__(self, message, layer=None):
        if layer is not None:
            message = f"layer {layer}: {message}"
        super().__init__(message)
        self.layer = layer


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    c_out: int
    c_in: int
    x: int = 1
    y: int = 1
    f_x: int = 1
    f_y: int = 1
    stride: int = 1
    padding: int = 0
    # input extent; needed because stride > 1 makes it ambiguous from x/y
    in_x: int = 1
    in_y: int = 1
    pool: int | None = None
    activation: str | None = None

    def __post_init__(self):
        if self.kind not in (CONV, FC):
            raise NetworkError(f"unknown layer kind {self.kind!r}")
        for name in ("c_out", "c_in", "x", "y", "f_x", "f_y", "stride", "in_x", "in_y"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise NetworkError(f"{name} must be a positive integer, got {v!r}")
        if self.padding < 0:
            raise NetworkError(f"padding must be non-negative, got {self.padding}")
        if self.kind == CONV and (self.f_x % 2 == 0 or self.f_y % 2 == 0):
            raise NetworkError(f"conv filter must be odd, got {self.f_x}x{self.f_y}")
        if self.kind == FC and (self.x, self.y, self.f_x, self.f_y, self.in_x, self.in_y) != (1,) * 6:
            raise NetworkError("fully-connected layers have unit spatial extents")

    @classmethod
    def fc(cls, c_in, c_out, **kw):
        return cls(FC, c_out=c_out, c_in=c_in, **kw)

    @classmethod
    def conv(cls, c_in, c_out, in_x, in_y, f_x, f_y=None, stride=1, padding=0, **kw):
        f_y = f_x if f_y is None else f_y
        x = (in_x + 2 * padding - f_x) // stride + 1
        y = (in_y + 2 * padding - f_y) // stride + 1
        return cls(CONV, c_out=c_out, c_in=c_in, x=x, y=y, f_x=f_x, f_y=f_y,
                   stride=stride, padding=padding, in_x=in_x, in_y=in_y, **kw)

    @property
    def weight_shape(self):
        return (self.c_out, self.c_in, self.f_x, self.f_y)

    @property
    def input_elements(self):
        return self.c_in * self.in_x * self.in_y

    @property
    def output_elements(self):
        return self.c_out * self.x * self.y


@dataclass(frozen=True)
class NetworkSpec:
    name: str
    input_shape: tuple
    layers: tuple = field(default_factory=tuple)

    def __len__(self):
        return len(self.layers)

    def __iter__(self):
        return iter(self.layers)

    def feature_map_elements(self):
        """Element counts of every feature map: the network input followed by
        each layer's output (before pooling)."""
        c, h, w = self.input_shape
        return [c * h * w] + [layer.output_elements for layer in self.layers]

    @property
    def num_classes(self):
        return self.layers[-1].c_out


def mac_count(layer):
    return layer.c_out * layer.c_in * layer.x * layer.y * layer.f_x * layer.f_y


def param_count(layer):
    """Weight element count; biases are not counted."""
    return layer.c_out * layer.c_in * layer.f_x * layer.f_y


# -- JSON network files --------------------------------------------------------

def _as_int(v, what, idx):
    if isinstance(v, bool) or not isinstance(v, int):
        raise NetworkError(f"{what} must be an integer, got {v!r}", idx)
    return v


def network_from_dict(doc):
    if not isinstance(doc, dict):
        raise NetworkError("network description must be a JSON object")
    try:
        name = str(doc["name"])
        shape = doc["input_shape"]
        raw_layers = doc["layers"]
    except KeyError as e:
        raise NetworkError(f"missing key {e.args[0]!r}") from None
    if not (isinstance(shape, list) and len(shape) == 3):
        raise NetworkError("input_shape must be [channels, height, width]")
    c, h, w = (_as_int(v, "input_shape entry", None) for v in shape)
    if not isinstance(raw_layers, list) or not raw_layers:
        raise NetworkError("layers must be a non-empty list")

    layers = []
    flattened = False
    for idx, spec in enumerate(raw_layers):
        if not isinstance(spec, dict):
            raise NetworkError("layer entry must be an object", idx)
        kind = spec.get("kind")
        c_out = _as_int(spec.get("c_out"), "c_out", idx)
        pool = spec.get("pool")
        act = spec.get("activation")
        if pool is not None:
            pool = _as_int(pool, "pool", idx)
            if pool < 1:
                raise NetworkError("pool must be positive", idx)
        if act not in (None, "relu"):
            raise NetworkError(f"unsupported activation {act!r}", idx)
        if kind == CONV:
            if flattened:
                raise NetworkError("conv layer after a fully-connected layer", idx)
            f = spec.get("f", [1, 1])
            if not (isinstance(f, list) and len(f) == 2):
                raise NetworkError("f must be [fx, fy]", idx)
            fx, fy = (_as_int(v, "filter size", idx) for v in f)
            if fx % 2 == 0 or fy % 2 == 0:
                raise NetworkError(f"conv filter must be odd, got {fx}x{fy}", idx)
            if "c_in" in spec and spec["c_in"] != c:
                raise NetworkError(
                    f"c_in {spec['c_in']} does not match previous output channels {c}", idx)
            stride = _as_int(spec.get("stride", 1), "stride", idx)
            padding = _as_int(spec.get("padding", 0), "padding", idx)
            if h + 2 * padding < fx or w + 2 * padding < fy:
                raise NetworkError(f"filter {fx}x{fy} larger than padded input {h}x{w}", idx)
            try:
                layer = LayerSpec.conv(c, c_out, h, w, fx, fy, stride=stride, padding=padding,
                                       pool=pool, activation=act)
            except NetworkError as e:
                raise NetworkError(str(e), idx) from None
            c, h, w = layer.c_out, layer.x, layer.y
        elif kind == FC:
            features = c * h * w
            if "c_in" in spec and spec["c_in"] != features:
                raise NetworkError(
                    f"c_in {spec['c_in']} does not match flattened input size {features}", idx)
            if pool is not None:
                raise NetworkError("pooling is not allowed on a fully-connected layer", idx)
            layer = LayerSpec.fc(features, c_out, activation=act)
            flattened = True
            c, h, w = c_out, 1, 1
        else:
            raise NetworkError(f"unknown layer kind {kind!r}", idx)
        if pool:
            if h < pool or w < pool:
                raise NetworkError(f"pool {pool} larger than feature map {h}x{w}", idx)
            h, w = h // pool, w // pool
        layers.append(layer)
    return NetworkSpec(name=name, input_shape=tuple(int(v) for v in shape), layers=tuple(layers))


def parse_network(content):
    """Parse a JSON network description (bytes or str) into a NetworkSpec."""
    if isinstance(content, bytes):
        content = content.decode("utf-8")
    try:
        doc = json.loads(content)
    except json.JSONDecodeError as e:
        raise NetworkError(f"malformed JSON: {e}") from None
    return network_from_dict(doc)


def network_to_dict(net):
    layers = []
    for layer in net.layers:
        entry = {"kind": layer.kind, "c_out": layer.c_out}
        if layer.kind == CONV:
            entry.update(f=[layer.f_x, layer.f_y], stride=layer.stride, padding=layer.padding)
        entry.update(pool=layer.pool, activation=layer.activation)
        layers.append(entry)
    return {"name": net.name, "input_shape": list(net.input_shape), "layers": layers}


def serialize_network(net):
    return json.dumps(network_to_dict(net), indent=2) + "\n"


BUNDLED = ("lenet5", "vgg_small", "tiny")


def load_network(name_or_path):
    """Load a bundled network by name (``lenet5``, ``vgg_small``) or a JSON file."""
    if name_or_path in BUNDLED:
        text = resources.files("dfcompress.networks").joinpath(f"{name_or_path}.json").read_text()
    else:
        text = Path(name_or_path).read_text()
    return parse_network(text)


# -- reference convolution -----------------------------------------------------

def reference_convolution(inputs, weights, layer):
    """Literal six-loop convolution on ``(n, c_in, in_x, in_y)`` inputs.

    Returns ``(n, c_out, x, y)`` in float64.  Slow by design; it is the
    independent oracle for the trainer's vectorised convolution.
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if layer.kind == FC and inputs.ndim == 2:
        inputs = inputs.reshape(inputs.shape[0], -1, 1, 1)
    if layer.kind == FC and weights.ndim == 2:
        weights = weights.reshape(weights.shape[0], weights.shape[1], 1, 1)
    if inputs.ndim != 4 or inputs.shape[1:] != (layer.c_in, layer.in_x, layer.in_y):
        raise ValueError(f"input shape {inputs.shape} does not match layer "
                         f"({layer.c_in}, {layer.in_x}, {layer.in_y})")
    if weights.shape != layer.weight_shape:
        raise ValueError(f"weight shape {weights.shape} does not match {layer.weight_shape}")
    p = layer.padding
    padded = np.pad(inputs, ((0, 0), (0, 0), (p, p), (p, p)))
    out = np.zeros((inputs.shape[0], layer.c_out, layer.x, layer.y))
    for n in range(inputs.shape[0]):
        kernels.conv_nest(np.ascontiguousarray(padded[n]), np.ascontiguousarray(weights),
                          out[n], layer.stride)
    return out
