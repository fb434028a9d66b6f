"""Pick the DP kernel implementation at import time.

The compiled extension is used when importable; ``STORYALIGN_PURE=1`` forces
the pure-Python kernels (useful for debugging and for the benchmark).
"""

import logging
import os

from . import _fallback

logger = logging.getLogger(__name__)

pure = _fallback
compiled = None

try:
    from . import _kernels as compiled  # type: ignore[attr-defined]
except ImportError:  # extension not built
    compiled = None

if compiled is not None and os.environ.get("STORYALIGN_PURE", "") not in ("1", "true", "yes"):
    kernels = compiled
    BACKEND = "cython"
else:
    kernels = pure
    BACKEND = "python"
    if compiled is None:
        logger.debug("compiled DP kernels unavailable; using pure-Python fallback")
