"""Kernel backend selection.

Two interchangeable implementations of the hot inner loops exist:

* ``sepmix._accel._kernels`` -- Cython extension compiled at install time;
* ``sepmix._accel.kernels_py`` -- numpy/scipy fallback.

The compiled module is preferred when importable. ``SEPMIX_BACKEND`` forces
the choice: ``compiled``, ``python``, or ``auto`` (default). Both backends
produce identical results up to floating-point summation order (~1 ulp);
within one backend results are bit-reproducible.
"""

import os

from . import kernels_py

_choice = os.environ.get("SEPMIX_BACKEND", "auto").lower()
if _choice not in ("auto", "compiled", "python"):
    raise ValueError(f"SEPMIX_BACKEND must be auto|compiled|python, got {_choice!r}")

if _choice == "python":
    _impl = kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
        BACKEND = "compiled"
    except ImportError:
        if _choice == "compiled":
            raise ImportError(
                "SEPMIX_BACKEND=compiled but the sepmix._accel._kernels "
                "extension is not built; reinstall with a C compiler or "
                "use SEPMIX_BACKEND=python"
            ) from None
        _impl = kernels_py
        BACKEND = "python"

fir_rational_filter = _impl.fir_rational_filter
biquad_cascade = _impl.biquad_cascade
overlap_add = _impl.overlap_add
