"""Backend selection for the numerical kernels.

The compiled extension ``_fast`` is used when it imports; otherwise, or when
the environment variable ``COHERELAB_PURE_PYTHON`` is set to a non-empty value
other than ``0``, the numpy implementation in ``_reference`` is used.
"""
import os

from . import _reference as reference

fast = None
if os.environ.get("COHERELAB_PURE_PYTHON", "") in ("", "0"):
    try:
        from . import _fast as fast
    except ImportError:  # extension not built
        fast = None

backend = fast if fast is not None else reference
BACKEND = "cython" if fast is not None else "python"

profile_from_moduli = backend.profile_from_moduli
soft_threshold = backend.soft_threshold
lasso_kkt = backend.lasso_kkt
fista_lasso = backend.fista_lasso
pdhg_l1 = backend.pdhg_l1

__all__ = [
    "BACKEND", "backend", "fast", "reference",
    "profile_from_moduli", "soft_threshold", "lasso_kkt", "fista_lasso", "pdhg_l1",
]
