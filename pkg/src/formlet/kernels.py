"""Select the compiled kernels when available, else the pure-Python ones.

Set ``FORMLET_PURE=1`` in the environment to force the fallback.
"""
import os

from . import _kernels as pure

BACKEND = "python"
_impl = pure
if not os.environ.get("FORMLET_PURE"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = pure

canon_factors = _impl.canon_factors
sort_args = _impl.sort_args
