"""Backend selection for the hot kernels.

The compiled extension is used when it imports; otherwise the numpy
fallback.  Set ``DCGAN_PURE_PYTHON=1`` to force the fallback.
"""

import os

if os.environ.get("DCGAN_PURE_PYTHON", "") not in ("", "0"):
    from dcgan import _kernels_py as _impl
else:
    try:
        from dcgan import _kernels as _impl
    except ImportError:  # extension not built
        from dcgan import _kernels_py as _impl

BACKEND = _impl.BACKEND
batch_signature = _impl.batch_signature
stream_signature = _impl.stream_signature
opinion_drift = _impl.opinion_drift
level_offsets = _impl.level_offsets

__all__ = ["BACKEND", "batch_signature", "stream_signature", "opinion_drift", "level_offsets"]
