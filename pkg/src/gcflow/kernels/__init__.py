"""Backend selection for the hot per-step kernels.

The compiled extension is preferred when importable.  Set
``GCFLOW_BACKEND=numpy`` to force the vectorized fallback, or
``GCFLOW_BACKEND=compiled`` to turn a missing extension into an import
error.  Both backends evaluate identical IEEE expressions per node, so a
run produces the same bits whichever one is active.
"""

import os

from gcflow.kernels import _numpy
from gcflow.kernels._numpy import (  # noqa: F401  (shared row layout)
    N_ROWS,
    ROW_DENOM,
    ROW_DET,
    ROW_GSQ,
    ROW_UC,
    ROW_UX,
    ROW_UXX,
    ROW_UXY,
    ROW_UY,
    ROW_UYY,
)

_requested = os.environ.get("GCFLOW_BACKEND", "").strip().lower()
if _requested not in ("", "compiled", "numpy"):
    raise ImportError(
        f"GCFLOW_BACKEND must be 'compiled' or 'numpy', got {_requested!r}"
    )

if _requested == "numpy":
    _impl = _numpy
    BACKEND = "numpy"
else:
    try:
        from gcflow.kernels import _core as _impl

        BACKEND = "compiled"
    except ImportError:
        if _requested == "compiled":
            raise
        _impl = _numpy
        BACKEND = "numpy"

prepare = _impl.prepare
update = _impl.update
boundary = _impl.boundary


def available_backends():
    """Names of importable backends, compiled first when present."""
    names = []
    try:
        from gcflow.kernels import _core  # noqa: F401

        names.append("compiled")
    except ImportError:
        pass
    names.append("numpy")
    return tuple(names)


def get_backend(name):
    """Return the backend module for `name` ('compiled' or 'numpy')."""
    if name == "numpy":
        return _numpy
    if name == "compiled":
        from gcflow.kernels import _core

        return _core
    raise KeyError(f"unknown kernel backend {name!r}")
