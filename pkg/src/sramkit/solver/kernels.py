"""Select the simplex kernel backend at import time.

The compiled Cython core is preferred; the numpy fallback implements the
identical API.  Set SRAMKIT_PURE_PYTHON=1 to force the fallback (used by
the benchmark for comparisons).
"""

from __future__ import annotations

import os

if os.environ.get("SRAMKIT_PURE_PYTHON"):
    from . import _kernels_py as _impl
else:
    try:
        from . import _simplex_core as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _kernels_py as _impl

BACKEND = _impl.BACKEND
price_dantzig = _impl.price_dantzig
price_bland = _impl.price_bland
ratio_test = _impl.ratio_test
pivot_update = _impl.pivot_update
dual_pick_row = _impl.dual_pick_row
dual_ratio = _impl.dual_ratio


def backends() -> dict:
    """Both kernel implementations keyed by name (for benchmarks/tests)."""
    from . import _kernels_py

    out = {"python": _kernels_py}
    try:
        from . import _simplex_core

        out["compiled"] = _simplex_core
    except ImportError:
        pass
    return out
