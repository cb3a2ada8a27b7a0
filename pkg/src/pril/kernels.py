"""Backend selection for the hot loops.

The compiled extension is used when it was built; otherwise, or when the
environment variable ``PRIL_PURE_PYTHON`` is set, the numpy twins are used.
Both backends return bit-identical results.
"""

import os

from pril import _kernels_py

try:
    if os.environ.get("PRIL_PURE_PYTHON"):
        raise ImportError("pure-Python backend requested")
    from pril import _kernels as _impl

    BACKEND = "compiled"
except ImportError:
    _impl = _kernels_py
    BACKEND = "python"

OPTIMAL = _kernels_py.OPTIMAL
UNBOUNDED = _kernels_py.UNBOUNDED
ITERATION_LIMIT = _kernels_py.ITERATION_LIMIT

bellman_sweeps = _impl.bellman_sweeps
simplex_iterate = _impl.simplex_iterate


def available_backends():
    """Map of backend name to kernel module, for benchmarks and cross-checks."""
    backends = {"python": _kernels_py}
    try:
        from pril import _kernels

        backends["compiled"] = _kernels
    except ImportError:
        pass
    return backends
