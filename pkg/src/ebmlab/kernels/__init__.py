"""Hot-kernel backend selection.

The compiled extension is preferred when it imports; the NumPy fallback is
semantically identical (same rotation order, same random streams).  Set
EBMLAB_PURE_PYTHON=1 to force the fallback.
"""

import os

from . import pyfallback

if os.environ.get("EBMLAB_PURE_PYTHON"):
    _impl = pyfallback
else:
    try:
        from . import _core as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = pyfallback

jacobi_eigh = _impl.jacobi_eigh
simulate_hitting_times = _impl.simulate_hitting_times

BACKEND = "compiled" if _impl is not pyfallback else "python"
