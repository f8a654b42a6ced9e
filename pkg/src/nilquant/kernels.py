"""Hot-loop dispatch: the compiled extension when it was built, numpy otherwise.

Set ``NILQUANT_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _kernels_py

BACKEND = "python"
if os.environ.get("NILQUANT_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
else:
    _impl = _kernels_py

twisted_convolution = _impl.twisted_convolution
weyl_apply = _impl.weyl_apply

__all__ = ["BACKEND", "twisted_convolution", "weyl_apply"]
