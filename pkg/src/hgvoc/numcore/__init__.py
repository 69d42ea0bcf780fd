"""Numeric core: tensors, the op tape, and differentiable kernels."""

from .engine import Graph, GraphError, Tensor, backward, const, frozen, param
from . import ops

__all__ = [
    "Graph", "GraphError", "Tensor", "backward", "const", "frozen", "param",
    "ops",
]
