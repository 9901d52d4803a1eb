"""Kernel backend selection.

The compiled Cython kernel is preferred when built; the NumPy implementation
is the fallback. Set GEOBLOCK_BACKEND=numpy or GEOBLOCK_BACKEND=compiled to
force one (forcing the compiled backend raises if the extension is missing).
"""

from __future__ import annotations

import os

from . import _profile_np

_forced = os.environ.get("GEOBLOCK_BACKEND")
if _forced not in (None, "", "numpy", "compiled"):
    raise ImportError(f"GEOBLOCK_BACKEND must be 'numpy' or 'compiled', got {_forced!r}")

if _forced == "numpy":
    _impl = _profile_np
else:
    try:
        from . import _profile_cy as _impl  # type: ignore[no-redef]
    except ImportError:
        if _forced == "compiled":
            raise
        _impl = _profile_np

BACKEND = _impl.BACKEND_NAME
profile_masses = _impl.profile_masses

__all__ = ["BACKEND", "profile_masses"]
