"""Kernel backend selection: compiled extension when available, pure Python otherwise.

Set PITCHSTAB_PURE_PYTHON=1 to force the pure backend (useful for debugging
and for the backend benchmark).
"""

import os

if os.environ.get("PITCHSTAB_PURE_PYTHON"):
    from . import _pure as impl
else:
    try:
        from . import _native as impl  # type: ignore[no-redef]
    except ImportError:
        from . import _pure as impl  # type: ignore[no-redef]

BACKEND = impl.BACKEND


def available_backends():
    """All importable kernel backends, compiled one first."""
    from . import _pure

    backends = []
    try:
        from . import _native
    except ImportError:
        pass
    else:
        backends.append(_native)
    backends.append(_pure)
    return backends
