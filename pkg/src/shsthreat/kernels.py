"""Kernel dispatch: the compiled extension when available, numpy otherwise.

Set ``SHSTHREAT_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _pykernels

try:
    if os.environ.get("SHSTHREAT_PURE_PYTHON") == "1":
        raise ImportError("pure python forced")
    from . import _ckernels as _impl
    BACKEND = "cython"
except ImportError:
    _impl = _pykernels
    BACKEND = "python"

NOISE = _pykernels.NOISE
points_in_polygon = _impl.points_in_polygon
min_edge_distance = _impl.min_edge_distance
dbscan_labels = _impl.dbscan_labels
gini_best_split = _impl.gini_best_split


def implementations():
    """All importable implementations keyed by name (for tests and benchmarks)."""
    out = {"python": _pykernels}
    try:
        from . import _ckernels
        out["cython"] = _ckernels
    except ImportError:
        pass
    return out
