"""Backend selection for the clustering hot loops.

The compiled ``_clinkage`` extension is used when it was built; otherwise
the numpy fallback. ``DEMANDSHIFT_PURE_PYTHON=1`` forces the fallback.
"""
import logging
import os

from . import _pylinkage

logger = logging.getLogger(__name__)

_backend = _pylinkage
if not os.environ.get("DEMANDSHIFT_PURE_PYTHON"):
    try:
        from . import _clinkage as _backend
    except ImportError:
        logger.debug("compiled linkage core unavailable, using numpy fallback")

BACKEND = _backend.BACKEND
cosine_distance_matrix = _backend.cosine_distance_matrix
average_linkage = _backend.average_linkage


def get_backend(name=None):
    """Return the kernel module by name (``"cython"``/``"python"``), or the active one."""
    if name is None:
        return _backend
    if name == "python":
        return _pylinkage
    if name == "cython":
        from . import _clinkage

        return _clinkage
    raise ValueError(f"unknown backend {name!r}")
