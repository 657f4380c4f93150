"""Kernel backend selection.

The hot numeric kernels (Bernstein design matrices and batched monotone
inversion) ship in two implementations: numba ``@njit`` and pure numpy.
The active one is chosen at import time from the ``MCTM_BACKEND``
environment variable:

* ``auto`` (default): numba if importable, numpy otherwise
* ``numba``: require the numba kernels
* ``numpy``: force the pure-numpy fallback

``benchmarks/bench_kernels.py`` compares the two.
"""

import os

from .exceptions import ConfigurationError

_choice = os.environ.get("MCTM_BACKEND", "auto").strip().lower()
if _choice not in {"auto", "numba", "numpy"}:
    raise ConfigurationError(
        f"MCTM_BACKEND must be one of auto|numba|numpy, got {_choice!r}"
    )

if _choice in {"auto", "numba"}:
    try:
        from . import kernels_numba as _kernels
        BACKEND = "numba"
    except ImportError:
        if _choice == "numba":
            raise
        from . import kernels_numpy as _kernels
        BACKEND = "numpy"
else:
    from . import kernels_numpy as _kernels
    BACKEND = "numpy"

binomial_coefficients = _kernels.binomial_coefficients
bernstein_design = _kernels.bernstein_design
bernstein_deriv_design = _kernels.bernstein_deriv_design
invert_bernstein = _kernels.invert_bernstein
