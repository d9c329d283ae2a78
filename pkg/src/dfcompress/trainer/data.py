"""Datasets: IDX (MNIST) ingestion, the bundled MNIST subset, and a seeded
synthetic blob set for fast tests."""
from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801


class IdxError(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    images: np.ndarray   # (n, c, h, w) float32 in [0, 1]
    labels: np.ndarray   # (n,) int64
    classes: int = 10
    split: str = "train"

    def __post_init__(self):
        if self.images.ndim != 4:
            raise ValueError("images must be (n, c, h, w)")
        if len(self.images) != len(self.labels):
            raise ValueError(f"{len(self.images)} images but {len(self.labels)} labels")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.classes):
            raise ValueError("labels out of range")

    def __len__(self):
        return len(self.labels)

    @property
    def shape(self):
        return self.images.shape[1:]

    def take(self, n):
        return Dataset(self.images[:n], self.labels[:n], self.classes, self.split)


def _read(source):
    data = source if isinstance(source, (bytes, bytearray)) else Path(source).read_bytes()
    if data[:2] == b"\x1f\x8b":
        data = gzip.decompress(data)
    return bytes(data)


def parse_idx_images(data):
    if len(data) < 16:
        raise IdxError("image file truncated before header end")
    magic, n, rows, cols = struct.unpack(">IIII", data[:16])
    if magic != IMAGES_MAGIC:
        raise IdxError(f"bad image magic 0x{magic:08x}, expected 0x{IMAGES_MAGIC:08x}")
    expected = n * rows * cols
    if len(data) - 16 < expected:
        raise IdxError(f"image payload truncated: {len(data) - 16} bytes, expected {expected}")
    return np.frombuffer(data, dtype=np.uint8, count=expected, offset=16).reshape(n, rows, cols)


def parse_idx_labels(data):
    if len(data) < 8:
        raise IdxError("label file truncated before header end")
    magic, n = struct.unpack(">II", data[:8])
    if magic != LABELS_MAGIC:
        raise IdxError(f"bad label magic 0x{magic:08x}, expected 0x{LABELS_MAGIC:08x}")
    if len(data) - 8 < n:
        raise IdxError(f"label payload truncated: {len(data) - 8} bytes, expected {n}")
    return np.frombuffer(data, dtype=np.uint8, count=n, offset=8)


def load_idx(images, labels, split="train"):
    """Load an IDX image/label pair (raw or gzipped paths, or bytes)."""
    x = parse_idx_images(_read(images))
    y = parse_idx_labels(_read(labels))
    if len(x) != len(y):
        raise IdxError(f"count mismatch: {len(x)} images, {len(y)} labels")
    imgs = (x.astype(np.float32) / 255.0)[:, None, :, :]
    return Dataset(imgs, y.astype(np.int64), classes=10, split=split)


def encode_idx_images(images):
    images = np.asarray(images, dtype=np.uint8)
    n, rows, cols = images.shape
    return struct.pack(">IIII", IMAGES_MAGIC, n, rows, cols) + images.tobytes()


def encode_idx_labels(labels):
    labels = np.asarray(labels, dtype=np.uint8)
    return struct.pack(">II", LABELS_MAGIC, len(labels)) + labels.tobytes()


def mnist_subset(split="train", n=None):
    """The bundled 10,000-image MNIST subset (8,000 train / 2,000 test)."""
    if split not in ("train", "test"):
        raise ValueError("split must be 'train' or 'test'")
    root = resources.files("dfcompress.data")
    ds = load_idx(root.joinpath(f"mnist-subset-{split}-images-idx3-ubyte.gz").read_bytes(),
                  root.joinpath(f"mnist-subset-{split}-labels-idx1-ubyte.gz").read_bytes(),
                  split=split)
    return ds.take(n) if n is not None else ds


def synthetic_dataset(seed, n, classes=2, size=8, split="train"):
    """Seeded single-channel blob images; each class has its own blob centre
    on a ring, so classes are linearly separable."""
    if n < classes:
        raise ValueError("need at least one sample per class")
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % classes
    labels = labels[rng.permutation(n)]
    angle = 2 * np.pi * np.arange(classes) / classes
    centre = (size - 1) / 2
    radius = size / 4
    cx = centre + radius * np.cos(angle)
    cy = centre + radius * np.sin(angle)
    gx, gy = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    templates = np.exp(-((gx[None] - cx[:, None, None]) ** 2 + (gy[None] - cy[:, None, None]) ** 2)
                       / (2 * 1.0 ** 2))
    shift = rng.uniform(0.85, 1.0, size=(n, 1, 1))
    noise = rng.uniform(0.0, 0.1, size=(n, size, size))
    imgs = np.clip(templates[labels] * shift + noise, 0, 1).astype(np.float32)
    return Dataset(imgs[:, None], labels.astype(np.int64), classes=classes, split=split)
