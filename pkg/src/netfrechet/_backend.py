"""Kernel backend selection.

The compiled extension is preferred; set ``NETFRECHET_PURE_PYTHON=1`` to
force the NumPy fallback (the choice is made once, at import).
"""

import os

from . import _pykernels

_available = {"python": _pykernels}

try:
    from . import _kernels as _ckernels
except ImportError:  # extension not built
    _ckernels = None
else:
    _available["cython"] = _ckernels

if _ckernels is not None and os.environ.get("NETFRECHET_PURE_PYTHON", "") in ("", "0"):
    kernels = _ckernels
else:
    kernels = _pykernels

BACKEND = kernels.NAME


def available():
    return sorted(_available)


def get(name=None):
    """Return the kernel module called ``name`` (default: the active one)."""
    if name is None:
        return kernels
    try:
        return _available[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} not available; have {available()}") from None
