"""Truncated tensor algebra and signatures of piecewise-linear paths.

Level ``k`` of a :class:`TruncatedTensor` over ``R^d`` holds ``d**k``
coefficients; multi-index ``(i_1, ..., i_k)`` (zero-based) sits at flat
offset ``sum_j i_j * d**(k - j)``, i.e. C order of the ``k``-fold outer
product.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from dcgan import autodiff as ad
from dcgan import kernels


class SignatureError(ValueError):
    """Invalid input to a tensor-algebra or signature routine."""


@dataclass(frozen=True)
class TruncatedTensor:
    """Element of the depth-``depth`` truncated tensor algebra over ``R^dim``."""

    dim: int
    depth: int
    levels: tuple[np.ndarray, ...]

    def __post_init__(self):
        if self.dim < 1 or self.depth < 0:
            raise SignatureError(f"invalid dim/depth ({self.dim}, {self.depth})")
        if len(self.levels) != self.depth + 1:
            raise SignatureError(f"expected {self.depth + 1} levels, got {len(self.levels)}")
        fixed = []
        for k, block in enumerate(self.levels):
            block = np.asarray(block, dtype=np.float64).reshape(-1)
            if block.size != self.dim**k:
                raise SignatureError(f"level {k} has {block.size} entries, expected {self.dim**k}")
            fixed.append(block)
        object.__setattr__(self, "levels", tuple(fixed))

    @classmethod
    def unit(cls, dim: int, depth: int) -> "TruncatedTensor":
        levels = [np.ones(1)] + [np.zeros(dim**k) for k in range(1, depth + 1)]
        return cls(dim, depth, tuple(levels))

    @classmethod
    def from_flat(cls, flat, dim: int, depth: int) -> "TruncatedTensor":
        flat = np.asarray(flat, dtype=np.float64)
        offs = kernels.level_offsets(dim, depth)
        if flat.size != offs[-1]:
            raise SignatureError(f"flat tensor has {flat.size} entries, expected {offs[-1]}")
        return cls(dim, depth, tuple(flat[offs[k] : offs[k + 1]] for k in range(depth + 1)))

    def flat(self) -> np.ndarray:
        return np.concatenate(self.levels)

    def level(self, k: int) -> np.ndarray:
        """Level ``k`` reshaped to a ``k``-dimensional array."""
        return self.levels[k].reshape((self.dim,) * k)

    def __sub__(self, other: "TruncatedTensor") -> "TruncatedTensor":
        _check_compatible(self, other)
        return TruncatedTensor(self.dim, self.depth, tuple(a - b for a, b in zip(self.levels, other.levels)))

    def norm(self, start_level: int = 0) -> float:
        return float(np.sqrt(sum(float(np.dot(b, b)) for b in self.levels[start_level:])))

    def allclose(self, other: "TruncatedTensor", rtol=1e-12, atol=1e-14) -> bool:
        _check_compatible(self, other)
        return all(np.allclose(a, b, rtol=rtol, atol=atol) for a, b in zip(self.levels, other.levels))

    def to_csv(self) -> str:
        """Debug dump as ``level,flat_index,value`` rows."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["level", "flat_index", "value"])
        for k, block in enumerate(self.levels):
            for idx, v in enumerate(block):
                w.writerow([k, idx, repr(float(v))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, dim: int) -> "TruncatedTensor":
        rows = list(csv.DictReader(io.StringIO(text)))
        depth = max(int(r["level"]) for r in rows)
        levels = [np.zeros(dim**k) for k in range(depth + 1)]
        for r in rows:
            levels[int(r["level"])][int(r["flat_index"])] = float(r["value"])
        return cls(dim, depth, tuple(levels))


def _check_compatible(a: TruncatedTensor, b: TruncatedTensor):
    if a.dim != b.dim or a.depth != b.depth:
        raise SignatureError(f"incompatible tensors: dim/depth ({a.dim}, {a.depth}) vs ({b.dim}, {b.depth})")


@dataclass(frozen=True)
class PathSample:
    """One multichannel series: ``values[j]`` is the state at ``times[j]``."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64).reshape(-1)
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2 or values.shape[0] != times.size or values.shape[1] < 1:
            raise SignatureError(f"values shape {values.shape} does not fit a grid of {times.size} points")
        if times.size > 1 and np.any(np.diff(times) <= 0):
            raise SignatureError("times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @property
    def n_channels(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class PathBatch:
    """Paths on one shared grid, stored as ``values[path, time, channel]``."""

    times: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64).reshape(-1)
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim == 2:
            values = values[:, :, None]
        if values.ndim != 3 or values.shape[1] != times.size or values.shape[2] < 1:
            raise SignatureError(f"values shape {values.shape} does not fit a grid of {times.size} points")
        if times.size > 1 and np.any(np.diff(times) <= 0):
            raise SignatureError("times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_paths(cls, paths: Sequence[PathSample]) -> "PathBatch":
        if not paths:
            raise SignatureError("empty batch")
        times = paths[0].times
        n = paths[0].n_channels
        for i, p in enumerate(paths):
            if p.n_channels != n or p.times.shape != times.shape or not np.array_equal(p.times, times):
                raise SignatureError(f"path {i} does not share the grid/channels of path 0")
        return cls(times, np.stack([p.values for p in paths]))

    def __len__(self) -> int:
        return self.values.shape[0]

    def __getitem__(self, i: int) -> PathSample:
        return PathSample(self.times, self.values[i])

    def __iter__(self) -> Iterator[PathSample]:
        return (self[i] for i in range(len(self)))

    @property
    def n_channels(self) -> int:
        return self.values.shape[2]

    def subset(self, idx) -> "PathBatch":
        return PathBatch(self.times, self.values[np.asarray(idx)], dict(self.meta))

    def with_values(self, values) -> "PathBatch":
        return PathBatch(self.times, values, dict(self.meta))


def add_time_channel(batch: PathBatch) -> PathBatch:
    """Prepend the grid time as channel 0."""
    t = np.broadcast_to(batch.times[None, :, None], (len(batch), batch.times.size, 1))
    return batch.with_values(np.concatenate([t, batch.values], axis=2))


def add_basepoint(batch: PathBatch) -> PathBatch:
    """Prepend a zero state one grid step before the first time.

    The signature then also sees the starting value, not only increments.
    """
    t = batch.times
    dt = t[1] - t[0] if t.size > 1 else 1.0
    times = np.concatenate([[t[0] - dt], t])
    zero = np.zeros((len(batch), 1, batch.n_channels))
    return PathBatch(times, np.concatenate([zero, batch.values], axis=1), dict(batch.meta))


def segment_exponential(increment, dim: int, depth: int) -> TruncatedTensor:
    """Signature of a straight segment: level ``k`` is ``increment^{(x)k} / k!``."""
    z = np.asarray(increment, dtype=np.float64).reshape(-1)
    if z.size != dim:
        raise SignatureError(f"increment has length {z.size}, expected {dim}")
    if depth < 1:
        raise SignatureError("depth must be >= 1")
    levels = [np.ones(1)]
    for k in range(1, depth + 1):
        levels.append(np.outer(levels[-1], z).reshape(-1) / k)
    return TruncatedTensor(dim, depth, tuple(levels))


def chen_product(a: TruncatedTensor, b: TruncatedTensor) -> TruncatedTensor:
    """Truncated tensor product; the signature of ``a``'s path followed by ``b``'s."""
    _check_compatible(a, b)
    out = []
    for k in range(a.depth + 1):
        acc = np.zeros(a.dim**k)
        for i in range(k + 1):
            acc += np.outer(a.levels[i], b.levels[k - i]).reshape(-1)
        out.append(acc)
    return TruncatedTensor(a.dim, a.depth, tuple(out))


def signature(path: PathSample, depth: int) -> TruncatedTensor:
    """Depth-``depth`` signature of the linear interpolation of ``path``."""
    if path.values.shape[0] < 2:
        raise SignatureError("a signature needs at least two time points")
    if depth < 1:
        raise SignatureError("depth must be >= 1")
    inc = np.diff(path.values, axis=0)[None]
    flat = kernels.batch_signature(inc, depth)[0]
    return TruncatedTensor.from_flat(flat, path.n_channels, depth)


def batch_signatures(batch: PathBatch, depth: int) -> np.ndarray:
    """Flat signatures of every path, shape ``(M, 1 + d + ... + d**depth)``."""
    if batch.times.size < 2:
        raise SignatureError("a signature needs at least two time points")
    if depth < 1:
        raise SignatureError("depth must be >= 1")
    return kernels.batch_signature(np.diff(batch.values, axis=1), depth)


def expected_signature(batch: PathBatch, depth: int) -> TruncatedTensor:
    """Coefficient-wise mean of the signatures in ``batch``."""
    if len(batch) == 0:
        raise SignatureError("empty batch")
    return TruncatedTensor.from_flat(batch_signatures(batch, depth).mean(axis=0), batch.n_channels, depth)


def sig_w1(batch_a: PathBatch, batch_b: PathBatch, depth: int) -> float:
    """l2 distance between expected truncated signatures (levels 1..depth)."""
    if batch_a.n_channels != batch_b.n_channels:
        raise SignatureError(f"channel mismatch: {batch_a.n_channels} vs {batch_b.n_channels}")
    diff = expected_signature(batch_a, depth) - expected_signature(batch_b, depth)
    return diff.norm(start_level=1)


def total_variation(path: PathSample) -> float:
    """Length of the piecewise-linear path in the Euclidean norm."""
    return float(np.linalg.norm(np.diff(path.values, axis=0), axis=1).sum())


def factorial_decay_bound(length: float, k: int) -> float:
    return length**k / math.factorial(k)


# --------------------------------------------------------------------------
# differentiable versions, recorded on an autodiff tape


def tape_signature(increments, depth: int):
    """Signature levels 1..depth of a batch of paths, recorded on a tape.

    ``increments`` is a sequence of tape variables of shape ``(B, D)``, one
    per segment.  Returns the list of level variables ``[(B, D), (B, D**2),
    ...]``; level 0 is the constant 1 and is omitted.
    """
    if depth < 1:
        raise SignatureError("depth must be >= 1")
    if not increments:
        raise SignatureError("a signature needs at least one segment")
    levels = [None] * (depth + 1)
    for z in increments:
        zs = [None] + [z / j for j in range(1, depth + 1)]
        for k in range(depth, 0, -1):
            buf = zs[k]
            for i in range(1, k):
                if levels[i] is not None:
                    buf = buf + levels[i]
                buf = ad.outer(buf, zs[k - i])
            levels[k] = buf if levels[k] is None else levels[k] + buf
    return levels[1:]


def tape_sig_w1(fake_levels, target_flat):
    """``|| mean_b S(fake_b) - target ||_2`` over levels 1..depth.

    ``target_flat`` is the flat expected signature of the real batch
    without level 0 (a constant; it receives no gradient).
    """
    tape = fake_levels[0].tape
    pieces = [ad.mean(lv, axis=0) for lv in fake_levels]
    expected = ad.concat(pieces, axis=0)
    diff = expected - tape.constant(target_flat)
    return ad.sqrt(ad.sum_(ad.square(diff)))


def sig_view(batch: PathBatch, time_channel: bool, basepoint: bool) -> PathBatch:
    """Apply the channel transforms used before signatures (time first, then basepoint)."""
    if time_channel:
        batch = add_time_channel(batch)
    if basepoint:
        batch = add_basepoint(batch)
    return batch
