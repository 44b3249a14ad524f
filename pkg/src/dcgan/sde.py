"""Brownian noise, Euler-Maruyama, and the directed-chain Euler step.

Noise is keyed, not drawn sequentially: the Gaussian block of a path is
a pure function of ``(seed, namespace, path_id)``, so generating paths in
any order or in parallel gives the same numbers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from dcgan import autodiff as ad
from dcgan import nn
from dcgan.signature import PathBatch, PathSample


class SdeError(ValueError):
    pass


@dataclass(frozen=True)
class TimeGrid:
    times: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.float64).reshape(-1)
        if t.size < 2 or np.any(np.diff(t) <= 0):
            raise SdeError("a time grid needs >= 2 strictly increasing points")
        object.__setattr__(self, "times", t)

    @classmethod
    def uniform(cls, T: float, n_steps: int) -> "TimeGrid":
        return cls(np.linspace(0.0, T, n_steps + 1))

    @property
    def n_steps(self) -> int:
        return self.times.size - 1

    @property
    def dt(self) -> np.ndarray:
        return np.diff(self.times)


@dataclass(frozen=True)
class NoiseStream:
    """Counter-based Gaussian source keyed by ``(seed, *namespace, path_id)``."""

    seed: int
    namespace: tuple[int, ...] = ()

    def child(self, *keys: int) -> "NoiseStream":
        return NoiseStream(self.seed, self.namespace + tuple(int(k) for k in keys))

    def generator(self, path_id: int) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed), spawn_key=self.namespace + (int(path_id),))
        return np.random.Generator(np.random.Philox(key=ss.generate_state(2, np.uint64)))

    def normals(self, path_id: int, shape) -> np.ndarray:
        """Standard normals for one path; entry order is C order of ``shape``."""
        return self.generator(path_id).standard_normal(shape)

    def uniforms(self, path_id: int, shape) -> np.ndarray:
        return self.generator(path_id).random(shape)

    def increments(self, path_ids, grid: TimeGrid, dim: int) -> np.ndarray:
        """Brownian increments, shape ``(len(path_ids), J, dim)``."""
        sd = np.sqrt(grid.dt)[:, None]
        return np.stack([self.normals(p, (grid.n_steps, dim)) * sd for p in path_ids])


def brownian_path(dim: int, grid: TimeGrid, stream: NoiseStream, path_id: int) -> PathSample:
    """Standard ``dim``-dimensional Brownian motion on ``grid``, started at 0."""
    if dim < 1:
        raise SdeError("dim must be >= 1")
    inc = stream.increments([path_id], grid, dim)[0]
    return PathSample(grid.times, np.vstack([np.zeros((1, dim)), np.cumsum(inc, axis=0)]))


def brownian_batch(dim: int, grid: TimeGrid, stream: NoiseStream, path_ids) -> PathBatch:
    inc = stream.increments(path_ids, grid, dim)
    values = np.concatenate([np.zeros((len(path_ids), 1, dim)), np.cumsum(inc, axis=1)], axis=1)
    return PathBatch(grid.times, values)


def euler_maruyama(
    drift: Callable[[float, np.ndarray], np.ndarray],
    diffusion: Callable[[float, np.ndarray], np.ndarray],
    x0,
    grid: TimeGrid,
    noise: PathSample | PathBatch,
):
    """Euler-Maruyama on ``grid`` driven by the given Brownian path(s).

    ``drift(t, x)`` returns the shape of ``x``; ``diffusion(t, x)`` returns
    ``x.shape + (d,)``.  ``x0`` of shape ``(N,)`` with a :class:`PathSample`
    noise gives a :class:`PathSample`; ``x0`` of shape ``(M, N)`` with a
    :class:`PathBatch` noise gives a :class:`PathBatch`.
    """
    if not np.array_equal(noise.times, grid.times):
        raise SdeError("noise grid differs from the state grid")
    batched = isinstance(noise, PathBatch)
    dB = np.diff(noise.values, axis=1 if batched else 0)
    x = np.array(x0, dtype=np.float64)
    out = [x]
    for j in range(grid.n_steps):
        t = grid.times[j]
        h = grid.times[j + 1] - t
        db = dB[:, j] if batched else dB[j]
        sig = diffusion(t, x)
        x = x + drift(t, x) * h + np.einsum("...nd,...d->...n", sig, db)
        if not np.all(np.isfinite(x)):
            raise ad.NumericError(f"non-finite state after step {j}")
        out.append(x)
    if batched:
        return PathBatch(grid.times, np.stack(out, axis=1))
    return PathSample(grid.times, np.stack(out))


# --------------------------------------------------------------------------
# directed chain step


def _block_sum(n: int, d: int) -> np.ndarray:
    """``(n*d, n)`` matrix summing consecutive blocks of ``d`` columns."""
    return np.kron(np.eye(n), np.ones((d, 1)))


def _net_inputs(gen, t: float, x: np.ndarray, nb: np.ndarray) -> np.ndarray:
    tcol = np.full((x.shape[0], 1), t * gen.time_scale)
    if gen.neighbor_masked:
        nb = np.zeros_like(nb)
    return np.concatenate([tcol, x, nb], axis=1)


def _check_shapes(gen, xi, dB, neighbor_values, times):
    M, J1, N = neighbor_values.shape
    if N != gen.state_dim:
        raise SdeError(f"neighbor has {N} channels, generator expects {gen.state_dim}")
    if xi.shape != (M, N):
        raise SdeError(f"initial states have shape {xi.shape}, expected {(M, N)}")
    if dB.shape != (M, J1 - 1, gen.noise_dim):
        raise SdeError(f"noise increments have shape {dB.shape}, expected {(M, J1 - 1, gen.noise_dim)}")
    if times.size != J1:
        raise SdeError("neighbor grid does not match the time grid")


def dc_generate_batch(gen, xi, dB, neighbor: PathBatch) -> PathBatch:
    """Directed-chain Euler scheme for a batch, in plain numpy.

    ``X_{j+1} = X_j + V0(t_j, X_j, nb_j) dt + V1(t_j, X_j, nb_j) dB_j``
    with ``V1`` reshaped to ``N x d``.  ``dB`` holds increments
    ``(M, J, d)`` on ``neighbor.times``.
    """
    xi = np.asarray(xi, dtype=np.float64)
    dB = np.asarray(dB, dtype=np.float64)
    times = neighbor.times
    nbv = neighbor.values
    _check_shapes(gen, xi, dB, nbv, times)
    N, d = gen.state_dim, gen.noise_dim
    S = _block_sum(N, d)
    x = xi
    out = [x]
    for j in range(times.size - 1):
        h = times[j + 1] - times[j]
        inp = _net_inputs(gen, times[j], x, nbv[:, j])
        drift = nn.mlp_apply(gen.v0_net, inp)
        diff = (nn.mlp_apply(gen.v1_net, inp) * np.tile(dB[:, j], N)) @ S
        x = x + (drift * h + diff)
        if not np.all(np.isfinite(x)):
            raise ad.NumericError(f"non-finite state after step {j}")
        out.append(x)
    return PathBatch(times, np.stack(out, axis=1))


def dc_generate(gen, xi, noise: PathSample, neighbor: PathSample) -> PathSample:
    """Single-path directed-chain generation driven by a Brownian path."""
    if not np.array_equal(noise.times, neighbor.times):
        raise SdeError("noise and neighbor grids differ")
    dB = np.diff(noise.values, axis=0)[None]
    nb = PathBatch(neighbor.times, neighbor.values[None])
    out = dc_generate_batch(gen, np.asarray(xi, dtype=np.float64).reshape(1, -1), dB, nb)
    return out[0]


def dc_rollout_tape(gen, tape: ad.Tape, v0_vars, v1_vars, xi, dB, neighbor_values, times):
    """Record the directed-chain rollout; returns per-step state increments.

    Same arithmetic as :func:`dc_generate_batch`, so forward values agree
    bitwise.  ``xi``, ``dB`` and the neighbor enter as constants.
    """
    xi = np.asarray(xi, dtype=np.float64)
    _check_shapes(gen, xi, dB, neighbor_values, times)
    N, d = gen.state_dim, gen.noise_dim
    S = tape.constant(_block_sum(N, d))
    x = tape.constant(xi)
    M = xi.shape[0]
    incs = []
    for j in range(times.size - 1):
        h = times[j + 1] - times[j]
        tcol = tape.constant(np.full((M, 1), times[j] * gen.time_scale))
        nb = np.zeros((M, N)) if gen.neighbor_masked else neighbor_values[:, j]
        inp = ad.concat([tcol, x, tape.constant(nb)], axis=1)
        drift = nn.mlp_forward(gen.v0_net, inp, tape, v0_vars)
        sig = nn.mlp_forward(gen.v1_net, inp, tape, v1_vars)
        diff = ad.matmul(sig * tape.constant(np.tile(dB[:, j], N)), S)
        inc = drift * h + diff
        x = x + inc
        if not np.all(np.isfinite(x.value)):
            raise ad.NumericError(f"non-finite state after step {j}")
        incs.append(inc)
    return incs
