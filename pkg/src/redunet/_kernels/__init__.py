"""Descent kernels: compiled core with a pure-numpy fallback.

The compiled module is used when it imports; set ``REDUNET_BACKEND=python``
to force the fallback.
"""

import os

from . import _pydescent

BACKENDS = {"python": _pydescent.descend}

try:
    from ._descent import descend as _compiled_descend
except ImportError:  # extension not built
    _compiled_descend = None
else:
    BACKENDS["cython"] = _compiled_descend

_requested = os.environ.get("REDUNET_BACKEND", "").strip().lower()
if _requested and _requested not in BACKENDS:
    raise ImportError(f"REDUNET_BACKEND={_requested!r} is not available; have {sorted(BACKENDS)}")
BACKEND = _requested or ("cython" if "cython" in BACKENDS else "python")

descend_generic = _pydescent.descend_generic
MAX_ITERS, GRAD_TOL, DIVERGED = _pydescent.MAX_ITERS, _pydescent.GRAD_TOL, _pydescent.DIVERGED


def get_descend(name=None):
    """Return the descent function for ``name`` (default: the active backend)."""
    name = name or BACKEND
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"unknown or unavailable backend {name!r}; have {sorted(BACKENDS)}") from None
