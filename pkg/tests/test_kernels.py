import itertools
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dfcompress import _kernels_py, kernels
from dfcompress.cost import POLICIES, Dataflow

POLICY_CHOICES = [_kernels_py.PER_PE, _kernels_py.BROADCAST, _kernels_py.STATIONARY]


def _conv(mod, x, w, stride):
    c_out, _, fx, fy = w.shape
    ox = (x.shape[1] - fx) // stride + 1
    oy = (x.shape[2] - fy) // stride + 1
    out = np.zeros((c_out, ox, oy))
    mod.conv_nest(x, w, out, stride)
    return out


@given(st.integers(0, 2**32 - 1), st.integers(1, 2))
def test_conv_backends_agree_bitwise(seed, stride):
    r = np.random.default_rng(seed)
    x = r.normal(size=(2, 6, 5))
    w = r.normal(size=(3, 2, 3, 1))
    ref = _conv(_kernels_py, x, w, stride)
    try:
        from dfcompress import _kernels
    except ImportError:
        pytest.skip("extension not built")
    assert np.array_equal(_conv(_kernels, x, w, stride), ref)


def test_conv_accumulates_into_output(kernel_module):
    x = np.ones((1, 3, 3))
    w = np.ones((1, 1, 3, 3))
    out = np.full((1, 1, 1), 5.0)
    kernel_module.conv_nest(x, w, out, 1)
    assert out[0, 0, 0] == 14.0


@pytest.mark.parametrize("df", list(Dataflow))
def test_loop_nest_backends_agree(kernel_module, df):
    pol = POLICIES[df]
    r = np.random.default_rng(7)
    for _ in range(15):
        co, ci, x, y = r.integers(1, 4, size=4)
        fx, fy = r.choice([1, 3], size=2)
        s = int(r.integers(1, 3))
        px, py = (x - 1) * s + fx, (y - 1) * s + fy
        args = ((co, ci, x, y, fx, fy), pol.spatial, pol.temporal, s, px, py,
                pol.input, pol.weight, pol.weight_latch, pol.output)
        assert tuple(kernel_module.simulate_loop_nest(*args)) == \
            tuple(_kernels_py.simulate_loop_nest(*args))


@pytest.mark.parametrize("spatial", list(itertools.combinations(range(6), 2)))
def test_all_fifteen_loop_pairs_simulate(kernel_module, spatial):
    temporal = tuple(d for d in range(6) if d not in spatial)
    bounds = (2, 2, 2, 2, 3, 1)
    for inp, wt in itertools.product(POLICY_CHOICES[:2], POLICY_CHOICES):
        counts = kernel_module.simulate_loop_nest(bounds, spatial, temporal, 1, 4, 3, inp, wt,
                                                  True, _kernels_py.SPILL)
        assert tuple(counts) == tuple(_kernels_py.simulate_loop_nest(
            bounds, spatial, temporal, 1, 4, 3, inp, wt, True, _kernels_py.SPILL))
        assert all(c >= 0 for c in counts)


def test_backend_reported():
    assert kernels.BACKEND in ("python", "compiled")


def test_pure_python_override():
    env = dict(os.environ, EDC_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import dfcompress; print(dfcompress.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
