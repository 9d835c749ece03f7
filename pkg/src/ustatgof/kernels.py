"""Backend selection for the hot loops.

The compiled extension is used when it imported cleanly, unless the
environment variable ``USTATGOF_PURE_PYTHON`` is set to a non-empty value
other than ``0``.
"""
import os

from . import _kernels_py as fallback

try:
    from . import _kernels as compiled
except ImportError:  # extension not built
    compiled = None

_force_pure = os.environ.get("USTATGOF_PURE_PYTHON", "") not in ("", "0")

if compiled is not None and not _force_pure:
    BACKEND = "compiled"
    _impl = compiled
else:
    BACKEND = "python"
    _impl = fallback

count_sums = _impl.count_sums
kernel_moments = _impl.kernel_moments
