"""Import-time selection of the hot-kernel backend.

The compiled extension is preferred when present; set the environment
variable ``SUBTRACK_PURE_PYTHON=1`` to force the numpy fallback (used by the
backend benchmark and by tests that pin a backend).
"""

import os

if os.environ.get("SUBTRACK_PURE_PYTHON"):
    from . import _core_numpy as core
else:
    try:
        from . import _core as core  # type: ignore[no-redef]
    except ImportError:
        from . import _core_numpy as core  # type: ignore[no-redef]


def backend_name() -> str:
    """Name of the active kernel backend: ``"compiled"`` or ``"numpy"``."""
    return core.NAME
