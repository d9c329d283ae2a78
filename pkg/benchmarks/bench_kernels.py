"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]

Prints one line per workload with the median wall time of each backend and
the speed-up.  Exits non-zero if the two backends disagree on any result.
"""
import argparse
import statistics
import sys
import time

import numpy as np

from dfcompress import _kernels_py
from dfcompress.cost import POLICIES, Dataflow
from dfcompress.network import LayerSpec, load_network

try:
    from dfcompress import _kernels as compiled
except ImportError:
    compiled = None


def oracle_workload(layer, dataflow):
    pol = POLICIES[dataflow]
    bounds = (layer.c_out, layer.c_in, layer.x, layer.y, layer.f_x, layer.f_y)
    args = (bounds, pol.spatial, pol.temporal, layer.stride,
            layer.in_x + 2 * layer.padding, layer.in_y + 2 * layer.padding,
            pol.input, pol.weight, pol.weight_latch, pol.output)
    return lambda mod: tuple(int(c) for c in mod.simulate_loop_nest(*args))


def conv_workload(layer, seed=0):
    rng = np.random.default_rng(seed)
    p = layer.padding
    padded = rng.standard_normal((layer.c_in, layer.in_x + 2 * p, layer.in_y + 2 * p))
    weights = rng.standard_normal(layer.weight_shape)

    def run(mod):
        out = np.zeros((layer.c_out, layer.x, layer.y))
        mod.conv_nest(padded, weights, out, layer.stride)
        return out
    return run


def timed(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        result = fn()
        times.append(time.perf_counter() - t)
    return statistics.median(times), result


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if compiled is None:
        print("compiled extension not built; run `pip install -e .` first", file=sys.stderr)
        return 1

    lenet = load_network("lenet5")
    small = LayerSpec.conv(4, 6, 10, 10, 3, padding=1)
    workloads = [(f"oracle {df.value} 4x6x10x10 f3", oracle_workload(small, df))
                 for df in Dataflow]
    workloads += [("oracle cico lenet conv2", oracle_workload(lenet.layers[1], Dataflow.CICO)),
                  ("conv lenet conv1", conv_workload(lenet.layers[0])),
                  ("conv lenet conv2", conv_workload(lenet.layers[1]))]

    print(f"{'workload':<30}{'python s':>11}{'compiled s':>12}{'speed-up':>10}")
    ok = True
    for name, work in workloads:
        t_py, r_py = timed(lambda: work(_kernels_py), args.repeat)
        t_c, r_c = timed(lambda: work(compiled), args.repeat)
        same = np.array_equal(r_py, r_c) if isinstance(r_py, np.ndarray) else r_py == r_c
        ok &= bool(same)
        print(f"{name:<30}{t_py:>11.4f}{t_c:>12.5f}{t_py / t_c:>9.0f}x"
              + ("" if same else "  MISMATCH"))
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
