"""Pick the compiled kernels when they import, the numpy twins otherwise.

Set ``EXTREMAL_SV_PURE=1`` to force the fallback.
"""
import os

from . import _kernels_py

BACKEND = "python"
kernels = _kernels_py

if not os.environ.get("EXTREMAL_SV_PURE"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        pass
    else:
        kernels = _compiled
        BACKEND = "cython"

ma_filter = kernels.ma_filter
lp_candidates = kernels.lp_candidates
custom_tail_quantile = kernels.custom_tail_quantile

__all__ = ["BACKEND", "kernels", "ma_filter", "lp_candidates", "custom_tail_quantile"]
