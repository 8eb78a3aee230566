"""Backend selection for the hot loops.

The compiled ``_kernels`` extension is used when it imports; otherwise, or
when the environment variable ``DICKECR_PURE_PYTHON=1`` is set, the NumPy
implementations from ``_fallback`` are used. ``BACKEND`` names the choice.
"""

import os

from . import _fallback

if os.environ.get("DICKECR_PURE_PYTHON") == "1":
    _impl = _fallback
else:
    try:
        from . import _kernels as _impl
    except ImportError:  # extension not built
        _impl = _fallback

BACKEND = "cython" if _impl is not _fallback else "python"

chebyshev_series = _impl.chebyshev_series
bessel_j_sequence = _impl.bessel_j_sequence
rk4_spin_field = _impl.rk4_spin_field


def backends():
    """Mapping of every importable backend name to its module (used by tests and benchmarks)."""
    found = {"python": _fallback}
    try:
        from . import _kernels
    except ImportError:
        pass
    else:
        found["cython"] = _kernels
    return found
