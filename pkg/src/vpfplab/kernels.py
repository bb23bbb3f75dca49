"""Backend selection for the hot kernels.

The compiled extension is used when importable; set ``VPFPLAB_PURE=1`` to
force the numpy fallback.
"""
import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py
if os.environ.get("VPFPLAB_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on the build
        _impl = _kernels_py

thomas_batched = _impl.thomas_batched
pfc_shift_periodic = _impl.pfc_shift_periodic
pfc_shift_open = _impl.pfc_shift_open

__all__ = ["BACKEND", "thomas_batched", "pfc_shift_periodic", "pfc_shift_open"]
