"""Kernel backend selection.

The hot loops (orbit iteration, Green escape rates, multi-start Newton) have
two implementations with identical call signatures: a numba-compiled one and
a vectorized pure-numpy fallback.  Selection happens once, at import time,
from the environment:

    HENONMIX_BACKEND=numba   force numba (ImportError if unavailable)
    HENONMIX_BACKEND=numpy   force the pure-numpy fallback
    unset / "auto"           numba when importable, else numpy
"""

import os

_requested = os.environ.get("HENONMIX_BACKEND", "auto").strip().lower() or "auto"

if _requested == "auto":
    try:
        import numba  # noqa: F401

        BACKEND = "numba"
    except ImportError:  # pragma: no cover - exercised only without numba
        BACKEND = "numpy"
elif _requested in ("numba", "numpy"):
    BACKEND = _requested
else:
    raise ValueError(
        f"HENONMIX_BACKEND={_requested!r} not understood; use 'numba', 'numpy' or 'auto'"
    )

USE_NUMBA = BACKEND == "numba"
