"""Select the compiled graph kernels when importable, else the numpy fallback.

Set ``DIMENET_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _graph_py

BACKENDS = {"python": _graph_py}

try:
    from . import _graph_ext
except ImportError:  # extension not built
    _graph_ext = None
else:
    BACKENDS["compiled"] = _graph_ext

if os.environ.get("DIMENET_PURE_PYTHON", "") not in ("", "0") or _graph_ext is None:
    BACKEND = "python"
else:
    BACKEND = "compiled"

_impl = BACKENDS[BACKEND]
radius_edges = _impl.radius_edges
triplets = _impl.triplets
