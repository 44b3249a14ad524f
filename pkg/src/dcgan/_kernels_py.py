"""Pure numpy implementations of the hot kernels.

Used when the compiled ``_kernels`` extension is unavailable or when
``DCGAN_PURE_PYTHON=1`` is set.  Signatures and results match the compiled
module to rounding.
"""

import numpy as np

BACKEND = "python"

_ROW_CHUNK = 512


def level_offsets(dim, depth):
    """Start offset of each level in the flat layout (level 0 first)."""
    offsets = [0]
    size = 1
    for _ in range(depth + 1):
        offsets.append(offsets[-1] + size)
        size *= dim
    return offsets


def batch_signature(increments, depth):
    """Truncated signatures of piecewise-linear paths given their increments.

    Parameters
    ----------
    increments : ndarray, shape (B, J, D)
        Segment increments of B paths with J segments in D channels.
    depth : int
        Truncation level.

    Returns
    -------
    ndarray, shape (B, 1 + D + ... + D**depth)
        Flat signatures, level 0 first, row-major multi-indices within a level.
    """
    return stream_signature(increments, depth, final_only=True)


def stream_signature(increments, depth, final_only=False):
    """Signatures of every prefix: shape (B, J, total), entry j after segment j."""
    inc = np.ascontiguousarray(increments, dtype=np.float64)
    B, J, D = inc.shape
    total = level_offsets(D, depth)[-1]
    out = None if final_only else np.empty((B, J, total))
    levels = [np.ones((B, 1))] + [np.zeros((B, D**k)) for k in range(1, depth + 1)]
    for j in range(J):
        z = inc[:, j, :]
        # Horner update: S <- S (x) exp(z), highest level first so lower
        # levels are still the old values when read.
        for k in range(depth, 0, -1):
            buf = z / k
            for i in range(1, k):
                buf = ((buf + levels[i])[:, :, None] * z[:, None, :] / (k - i)).reshape(B, -1)
            levels[k] += buf
        if out is not None:
            out[:, j, :] = np.concatenate(levels, axis=1)
    if out is None:
        return np.concatenate(levels, axis=1)
    return out


def opinion_drift(y, theta1, theta2):
    """Mean-field drift ``-(1/n) sum_j phi(|y_i - y_j|) (y_i - y_j)``."""
    y = np.ascontiguousarray(y, dtype=np.float64)
    n = y.shape[0]
    out = np.empty(n)
    for start in range(0, n, _ROW_CHUNK):
        stop = min(start + _ROW_CHUNK, n)
        diff = y[start:stop, None] - y[None, :]
        r = np.abs(diff)
        u = (r - theta2) ** 2
        inside = (r > 0.0) & (u < 1.0)
        phi = np.zeros_like(r)
        phi[inside] = theta1 * np.exp(-0.01 / (1.0 - u[inside]))
        out[start:stop] = -(phi * diff).sum(axis=1) / n
    return out
