"""Backend dispatch for the distance kernels.

Prefers the compiled extension; falls back to the numpy implementation
when the extension is missing or CHORUSID_PURE_PYTHON=1 is set.
"""

import os

if os.environ.get("CHORUSID_PURE_PYTHON", "") not in ("", "0"):
    from . import _kernels_np as _impl

    BACKEND = "numpy"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        from . import _kernels_np as _impl

        BACKEND = "numpy"

l1_csr = _impl.l1_csr
hellinger_csr = _impl.hellinger_csr
kl_csr = _impl.kl_csr


def backend() -> str:
    """Name of the kernel backend in use ('cython' or 'numpy')."""
    return BACKEND
