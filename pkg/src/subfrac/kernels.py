"""Backend selection for the pair-sum kernels.

The compiled core (``_ckernels``) is used when it imports; otherwise the numpy
fallback. Setting ``SUBFRAC_PURE_PYTHON=1`` forces the fallback.
"""
import os

from . import _pykernels

if os.environ.get("SUBFRAC_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels
        BACKEND = "python"

pair_rows = _impl.pair_rows
kernel_matrix = _impl.kernel_matrix
dense_pgrad = _impl.dense_pgrad
tail_rows = _impl.tail_rows

MODE_KERNEL, MODE_ENERGY, MODE_FLUX, MODE_WEAK = 0, 1, 2, 3


def available_backends():
    out = {"python": _pykernels}
    try:
        from . import _ckernels

        out["cython"] = _ckernels
    except ImportError:
        pass
    return out
