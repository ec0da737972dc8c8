"""Pick the GF(2^8) kernel backend once, at import.

The compiled extension is preferred. Set ``LAMPNET_PURE_PYTHON=1`` to force
the numpy fallback (tests run both).
"""

import os

from . import _gf_numpy

BACKEND = "numpy"
impl = _gf_numpy

if os.environ.get("LAMPNET_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _gfcore
    except ImportError:  # extension not built
        pass
    else:
        impl = _gfcore
        BACKEND = "cython"

axpy = impl.axpy
matmul = impl.matmul
rref = impl.rref
insert_row = impl.insert_row
