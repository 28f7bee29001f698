"""Kernel backend selection.

The hot loops (element tabulation, CSR matrix-vector products) exist in
two versions: numba-jitted cell loops and vectorized pure numpy.  The
environment variable ``QUADNC_BACKEND`` picks one:

* ``auto`` (default): numba when importable, numpy otherwise;
* ``numba``: require numba, fail loudly if missing;
* ``numpy``: force the pure-numpy path even when numba is installed.

``benchmarks/backend_bench.py`` compares the two paths on identical
problems.
"""

import os

_choice = os.environ.get("QUADNC_BACKEND", "auto").strip().lower()
if _choice not in ("auto", "numba", "numpy"):
    raise ValueError(
        f"QUADNC_BACKEND={_choice!r}: expected 'auto', 'numba' or 'numpy'"
    )

try:
    import numba  # noqa: F401

    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False

if _choice == "numba" and not HAS_NUMBA:
    raise ImportError("QUADNC_BACKEND=numba but numba is not importable")

USE_NUMBA = HAS_NUMBA and _choice != "numpy"


def selected() -> str:
    """Name of the active backend ('numba' or 'numpy')."""
    return "numba" if USE_NUMBA else "numpy"
