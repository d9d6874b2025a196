"""Backend selection for the hot loops.

The compiled Cython module is used when it was built; otherwise the numpy /
pure-Python fallback is used. Set ``PLPRIOR_PURE_PYTHON=1`` to force the
fallback, and ``PLPRIOR_NUM_THREADS`` to cap worker threads.
"""
import math
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import _fallback

_compiled = None
if os.environ.get("PLPRIOR_PURE_PYTHON", "") != "1":
    try:
        from . import _kernels as _compiled
    except ImportError:
        _compiled = None

BACKEND = "cython" if _compiled is not None else "python"
_impl = _compiled if _compiled is not None else _fallback

sum_abs_det_first = _impl.sum_abs_det_first
segment_graph = _impl.segment_graph


def get_backend(name=None):
    """Module implementing the kernels: ``"cython"``, ``"python"`` or the default."""
    if name is None:
        return _impl
    if name == "python":
        return _fallback
    if name == "cython":
        if _compiled is None:
            raise RuntimeError("compiled kernels are not available")
        return _compiled
    if hasattr(name, "sum_abs_det_first"):
        return name
    raise ValueError(f"unknown backend {name!r}")


def compiled_available():
    return _compiled is not None


def default_threads():
    env = os.environ.get("PLPRIOR_NUM_THREADS")
    if env:
        n = int(env)
        if n < 1:
            raise ValueError("PLPRIOR_NUM_THREADS must be >= 1")
        return n
    return os.cpu_count() or 1


def sum_abs_det_all(pts, threads=None, impl=None):
    """Sum of |det| over every unordered 4-subset of ``pts``.

    Work is partitioned by lowest index and the partial sums are combined
    with ``math.fsum`` in index order, so the result does not depend on the
    number of threads.
    """
    fn = get_backend(impl).sum_abs_det_first
    pts = np.ascontiguousarray(pts, dtype=np.float64)
    n = len(pts)
    firsts = range(max(n - 3, 0))
    threads = threads or default_threads()
    if threads == 1 or n < 8:
        partials = [fn(pts, i) for i in firsts]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            partials = list(pool.map(lambda i: fn(pts, i), firsts))
    return math.fsum(partials)
