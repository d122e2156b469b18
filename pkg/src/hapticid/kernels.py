"""Backend selection for the hot kernels.

The compiled extension is used when it imports; otherwise the numpy
fallback is loaded. Set ``HAPTICID_PURE_PYTHON=1`` to force the fallback.
"""

import os

from hapticid import _pykernels

if os.environ.get("HAPTICID_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
else:
    try:
        from hapticid import _ckernels as _impl
    except ImportError:
        _impl = _pykernels

BACKEND = _impl.BACKEND
first_hits = _impl.first_hits
pair_cosines = _impl.pair_cosines
encode = _impl.encode
lookup_counts = _impl.lookup_counts


def available_backends():
    """Map backend name to module for every backend importable here."""
    found = {"python": _pykernels}
    try:
        from hapticid import _ckernels
    except ImportError:
        pass
    else:
        found["cython"] = _ckernels
    return found
