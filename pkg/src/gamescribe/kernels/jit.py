"""Numba-compiled variants of the reference kernels.

The bodies live in kernels.reference; here each one is wrapped with
@njit(cache=True), so the two backends cannot drift apart.  Importing this
module raises ImportError when numba is unavailable.
"""

import numba

from . import reference

_njit = numba.njit(cache=True)

sigmoid = _njit(reference.sigmoid)
gru_forward = _njit(reference.gru_forward)
gru_backward = _njit(reference.gru_backward)
lstm_forward = _njit(reference.lstm_forward)
lstm_backward = _njit(reference.lstm_backward)
