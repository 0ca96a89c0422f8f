"""Backend selection for the recurrent-cell kernels.

The env var GAMESCRIBE_BACKEND picks the implementation:

  numba  - jit-compiled kernels (default when numba is importable)
  numpy  - pure numpy fallback

Both backends compute identical values; benchmarks/bench_backends.py times
them side by side.
"""

import os

from . import reference

_requested = os.environ.get("GAMESCRIBE_BACKEND", "").strip().lower()

if _requested not in ("", "numba", "numpy"):
    raise RuntimeError(
        f"GAMESCRIBE_BACKEND={_requested!r} not understood; use 'numba' or 'numpy'"
    )

if _requested == "numpy":
    _impl = reference
    BACKEND = "numpy"
else:
    try:
        from . import jit as _impl

        BACKEND = "numba"
    except ImportError:
        if _requested == "numba":
            raise RuntimeError("GAMESCRIBE_BACKEND=numba but numba is not installed")
        _impl = reference
        BACKEND = "numpy"


def backend_name() -> str:
    return BACKEND


sigmoid = _impl.sigmoid
gru_forward = _impl.gru_forward
gru_backward = _impl.gru_backward
lstm_forward = _impl.lstm_forward
lstm_backward = _impl.lstm_backward
