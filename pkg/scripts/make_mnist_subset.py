"""Rebuild the bundled MNIST subset from the npm ``mnist`` package (v1.1.0).

That package ships 10,000 real MNIST digits as JSON arrays of pixel/255
rounded to three decimals; rounding back to bytes is exact.

    npm pack mnist@1.1.0 && tar xzf mnist-1.1.0.tgz
    python scripts/make_mnist_subset.py package/src/digits src/dfcompress/data
"""
import gzip
import json
import struct
import sys
from pathlib import Path

import numpy as np

SPLIT_SEED = 20200601
N_TRAIN = 8000


def write_idx(path, magic, dims, payload):
    with open(path, "wb") as raw:
        with gzip.GzipFile(fileobj=raw, mode="wb", mtime=0, filename="") as f:
            f.write(struct.pack(">I", magic))
            f.write(b"".join(struct.pack(">I", d) for d in dims))
            f.write(payload.tobytes())


def main(src, out):
    src, out = Path(src), Path(out)
    images, labels = [], []
    for digit in range(10):
        values = np.array(json.loads((src / f"{digit}.json").read_text())["data"])
        pixels = np.rint(values * 255).astype(np.uint8).reshape(-1, 28, 28)
        images.append(pixels)
        labels.append(np.full(len(pixels), digit, np.uint8))
    x = np.concatenate(images)
    y = np.concatenate(labels)
    perm = np.random.default_rng(SPLIT_SEED).permutation(len(x))
    x, y = x[perm], y[perm]
    for split, sl in (("train", slice(0, N_TRAIN)), ("test", slice(N_TRAIN, None))):
        xs, ys = x[sl], y[sl]
        write_idx(out / f"mnist-subset-{split}-images-idx3-ubyte.gz", 0x803, xs.shape, xs)
        write_idx(out / f"mnist-subset-{split}-labels-idx1-ubyte.gz", 0x801, ys.shape, ys)


if __name__ == "__main__":
    main(*sys.argv[1:3])
