"""Kernel backend selection.

Two interchangeable implementations of the hot convolution kernels exist:
the compiled extension ``hgvoc._kernels`` (built with ``python build_ext.py``)
and ``hgvoc.kernels_numpy``, which lowers the convolutions to BLAS matmuls.
The active one is chosen once at import, or forced with the environment
variable ``HGVOC_KERNELS`` set to ``compiled`` or ``numpy``.  ``hgvoc bench
--kernels both`` times them side by side; on BLAS-backed NumPy builds the
matmul lowering wins at model-sized shapes, so ``auto`` resolves to it.

Within one backend results are bit-deterministic for a fixed thread count;
across backends they agree to float rounding (different summation order).
"""

import os

from . import kernels_numpy

try:
    from . import _kernels as _compiled
except ImportError:
    _compiled = None

_FORCED = os.environ.get("HGVOC_KERNELS", "auto")
if _FORCED == "compiled" and _compiled is None:
    raise ImportError(
        "HGVOC_KERNELS=compiled but hgvoc._kernels is not built; "
        "run 'python build_ext.py' first")

_active = _compiled if (_FORCED == "compiled") else kernels_numpy


def available_backends():
    names = ["numpy"]
    if _compiled is not None:
        names.insert(0, "compiled")
    return names


def active_backend():
    return "compiled" if _active is _compiled else "numpy"


def use_backend(name):
    """Switch kernels at runtime ('compiled' or 'numpy'). Returns prior name."""
    global _active
    prior = active_backend()
    if name == "numpy":
        _active = kernels_numpy
    elif name == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled kernels not built; run 'python build_ext.py'")
        _active = _compiled
    else:
        raise ValueError(f"unknown kernel backend {name!r}")
    return prior


def conv1d_forward(xpad, w, dilation, stride, groups):
    return _active.conv1d_forward(xpad, w, dilation, stride, groups)


def conv1d_backward_input(gy, w, dilation, stride, groups, t_pad):
    return _active.conv1d_backward_input(gy, w, dilation, stride, groups, t_pad)


def conv1d_backward_weight(gy, xpad, dilation, stride, groups, k):
    return _active.conv1d_backward_weight(gy, xpad, dilation, stride, groups, k)


def fnv1a64(data):
    if _compiled is not None:
        return _compiled.fnv1a64(data)
    return kernels_numpy.fnv1a64(data)
