"""Kernel dispatch: compiled extension when available, numpy otherwise.

Set ``SHEETDCE_PURE=1`` to force the numpy fallback.
"""
from __future__ import annotations

import logging
import os

from . import _fallback

log = logging.getLogger(__name__)

BACKEND = "python"
phase_roots = _fallback.phase_roots
rk4_propagate = _fallback.rk4_propagate

if os.environ.get("SHEETDCE_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels
    except ImportError as exc:  # extension not built
        log.debug("compiled kernels unavailable (%s); using numpy fallback", exc)
    else:
        phase_roots = _kernels.phase_roots
        rk4_propagate = _kernels.rk4_propagate
        BACKEND = "compiled"
