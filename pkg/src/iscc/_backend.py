"""Pick the compiled kernels when available, else the pure-Python ones.

Set ``ISCC_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _fallback

if os.environ.get("ISCC_PURE_PYTHON", "") not in ("", "0"):
    kernels = _fallback
else:
    try:
        from . import _kernels as kernels
    except ImportError:  # extension not built
        kernels = _fallback

NAME = "python" if kernels is _fallback else "compiled"
