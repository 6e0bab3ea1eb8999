"""Select the compiled kernels when importable, else the numpy reference.

Set ``DROOPCERT_PURE_PYTHON=1`` to force the reference implementation.
"""

import os

from . import _kernels_py

if os.environ.get("DROOPCERT_PURE_PYTHON", "") not in ("", "0"):
    kernels = _kernels_py
    COMPILED = False
else:
    try:
        from . import _kernels as kernels  # type: ignore[attr-defined]

        COMPILED = True
    except ImportError:
        kernels = _kernels_py
        COMPILED = False

NAME = "cython" if COMPILED else "python"
