"""Kernel backend selection.

Prefers the compiled extension, falls back to NumPy. Override with
``GOSSIPMAP_BACKEND=compiled`` (fail if missing) or
``GOSSIPMAP_BACKEND=python``.
"""

from __future__ import annotations

import os

from . import _purepy

_choice = os.environ.get("GOSSIPMAP_BACKEND", "").strip().lower()
if _choice not in ("", "compiled", "python"):
    raise ImportError(f"GOSSIPMAP_BACKEND must be 'compiled' or 'python', got {_choice!r}")

_impl = None
if _choice != "python":
    try:
        from . import _core as _impl
    except ImportError:
        if _choice == "compiled":
            raise
        _impl = None

if _impl is None:
    _impl = _purepy
    BACKEND = "python"
else:
    BACKEND = "compiled"

rbf_gram = _impl.rbf_gram
frame_samples = _impl.frame_samples
