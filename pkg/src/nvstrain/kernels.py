"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy
implementation is used. Setting ``NVSTRAIN_PURE_PYTHON=1`` forces the
fallback (used by the test suite and the benchmark).
"""
import os

from . import _kernels_py

python_backend = _kernels_py

compiled_backend = None
if not os.environ.get("NVSTRAIN_PURE_PYTHON"):
    try:
        from . import _kernels as compiled_backend
    except ImportError:
        compiled_backend = None

backend = compiled_backend if compiled_backend is not None else python_backend
BACKEND_NAME = "cython" if backend is compiled_backend else "python"

dual_lorentzian = backend.dual_lorentzian
jacobian = backend.jacobian
normal_equations = backend.normal_equations
