"""Dataflow-aware energy modeling and compression search for CNN accelerators."""
from .kernels import BACKEND

__version__ = "0.1.0"
