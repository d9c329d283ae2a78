import importlib

import numpy as np
import pytest
from hypothesis import settings

from dfcompress import _kernels_py
from dfcompress.network import load_network

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


def _kernel_modules():
    mods = [pytest.param(_kernels_py, id="python")]
    try:
        mods.append(pytest.param(importlib.import_module("dfcompress._kernels"), id="compiled"))
    except ImportError:
        mods.append(pytest.param(None, id="compiled",
                                 marks=pytest.mark.skip(reason="extension not built")))
    return mods


@pytest.fixture(params=_kernel_modules())
def kernel_module(request):
    return request.param


@pytest.fixture(scope="session")
def lenet():
    return load_network("lenet5")


@pytest.fixture(scope="session")
def vgg():
    return load_network("vgg_small")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
