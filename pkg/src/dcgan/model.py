"""Directed chain generator, SigWGAN training, and decorrelate-and-branch sampling."""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from dcgan import autodiff as ad
from dcgan import nn
from dcgan.sde import NoiseStream, TimeGrid, dc_generate_batch, dc_rollout_tape
from dcgan.signature import (
    PathBatch,
    SignatureError,
    batch_signatures,
    sig_view,
    tape_sig_w1,
    tape_signature,
)

log = logging.getLogger(__name__)

# namespace tags for keyed noise
_TRAIN = 11
_WALK = 12
_XI = 1
_BM = 2
_BATCH = 3
_SHUFFLE = 4


@dataclass(frozen=True)
class InitSampler:
    """Per-channel law of the initial state: ``uniform`` (low, high) or ``gaussian`` (mean, std)."""

    family: str
    a: tuple[float, ...]
    b: tuple[float, ...]

    def __post_init__(self):
        if self.family not in ("uniform", "gaussian"):
            raise ValueError(f"unknown initial-law family {self.family!r}")
        if len(self.a) != len(self.b):
            raise ValueError("parameter tuples differ in length")

    @classmethod
    def fit(cls, first_rows: np.ndarray, family: str) -> "InitSampler":
        x = np.asarray(first_rows, dtype=np.float64)
        if family == "uniform":
            return cls(family, tuple(x.min(axis=0).tolist()), tuple(x.max(axis=0).tolist()))
        return cls(family, tuple(x.mean(axis=0).tolist()), tuple(x.std(axis=0).tolist()))

    def sample(self, stream: NoiseStream, path_ids) -> np.ndarray:
        a, b = np.array(self.a), np.array(self.b)
        n = a.size
        if self.family == "uniform":
            return np.stack([a + (b - a) * stream.uniforms(i, n) for i in path_ids])
        return np.stack([a + b * stream.normals(i, n) for i in path_ids])


@dataclass(frozen=True)
class DcGenerator:
    """Drift net ``V0: (t, x, x~) -> R^N`` and diffusion net ``V1: (t, x, x~) -> R^{N x d}``."""

    v0_net: nn.MlpParams
    v1_net: nn.MlpParams
    state_dim: int
    noise_dim: int
    init_sampler: InitSampler
    neighbor_masked: bool = False
    time_scale: float = 1.0
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        n_in = 1 + 2 * self.state_dim
        if self.v0_net.sizes[0] != n_in or self.v1_net.sizes[0] != n_in:
            raise ValueError(f"networks must take {n_in} inputs (time, state, neighbor)")
        if self.v0_net.sizes[-1] != self.state_dim:
            raise ValueError("drift net output must equal the state dimension")
        if self.v1_net.sizes[-1] != self.state_dim * self.noise_dim:
            raise ValueError("diffusion net output must equal state_dim * noise_dim")

    @property
    def arrays(self) -> list[np.ndarray]:
        return self.v0_net.arrays + self.v1_net.arrays

    def with_arrays(self, arrays) -> "DcGenerator":
        k = len(self.v0_net.arrays)
        return replace(self, v0_net=self.v0_net.with_arrays(arrays[:k]), v1_net=self.v1_net.with_arrays(arrays[k:]))

    def generate(self, xi, dB, neighbor: PathBatch) -> PathBatch:
        return dc_generate_batch(self, xi, dB, neighbor)


@dataclass(frozen=True)
class TrainConfig:
    depth: int = 4
    batch_size: int = 256
    steps: int = 500
    lr: float = 1e-3
    decay_factor: float = 0.1
    decay_period: int = 500
    hidden: tuple[int, ...] = (64, 64)
    noise_dim: int = 3
    activation: str = "tanh"
    # None: append time only for 1-channel data
    time_channel: bool | None = None
    basepoint: bool = True
    init_family: str = "uniform"
    normalize_time: bool = False
    neighbor_masked: bool = False
    clip_norm: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError("signature depth must be >= 1")
        if self.batch_size < 1 or self.steps < 0:
            raise ValueError("batch_size must be >= 1 and steps >= 0")

    def uses_time_channel(self, n_channels: int) -> bool:
        return n_channels == 1 if self.time_channel is None else bool(self.time_channel)

    def digest(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class TrainResult:
    generator: DcGenerator
    losses: list[float]


def init_generator(data: PathBatch, cfg: TrainConfig, masked: bool | None = None, seed: int | None = None) -> DcGenerator:
    seed = cfg.seed if seed is None else seed
    masked = cfg.neighbor_masked if masked is None else masked
    N, d = data.n_channels, cfg.noise_dim
    n_in = 1 + 2 * N
    ss = np.random.SeedSequence(seed, spawn_key=(7,))
    s0, s1 = (int(x) for x in ss.generate_state(2, np.uint64))
    v0 = nn.mlp_init((n_in, *cfg.hidden, N), s0, cfg.activation)
    v1 = nn.mlp_init((n_in, *cfg.hidden, N * d), s1, cfg.activation)
    span = float(data.times[-1] - data.times[0])
    time_scale = 1.0 / span if cfg.normalize_time and span > 0 else 1.0
    family = data.meta.get("init_family", cfg.init_family)
    sampler = InitSampler.fit(data.values[:, 0, :], family)
    meta = {
        "seed": seed,
        "config_hash": cfg.digest(),
        "time_channel": cfg.uses_time_channel(N),
        "basepoint": cfg.basepoint,
        "depth": cfg.depth,
    }
    return DcGenerator(v0, v1, N, d, sampler, masked, time_scale, meta)


def make_baseline(data: PathBatch, cfg: TrainConfig, seed: int | None = None) -> DcGenerator:
    """Degenerate generator: the networks only ever see zeros in the neighbor slots."""
    return init_generator(data, cfg, masked=True, seed=seed)


def _segment_increments(tape, incs, xi, times, time_channel, basepoint):
    M = xi.shape[0]
    dts = np.diff(times)
    segs = []
    if basepoint:
        first = np.concatenate([np.zeros((M, 1)), xi], axis=1) if time_channel else xi
        segs.append(tape.constant(first))
    for j, inc in enumerate(incs):
        if time_channel:
            inc = ad.concat([tape.constant(np.full((M, 1), dts[j])), inc], axis=1)
        segs.append(inc)
    return segs


def sigw1_loss_and_grad(gen: DcGenerator, real: PathBatch, xi, dB, depth: int, time_channel: bool, basepoint: bool):
    """Loss ``Sig-W1(real, G(xi, B, real))`` and its gradient w.r.t. all network parameters."""
    target = batch_signatures(sig_view(real, time_channel, basepoint), depth).mean(axis=0)[1:]
    tape = ad.Tape()
    v0_vars = nn.bind(gen.v0_net, tape)
    v1_vars = nn.bind(gen.v1_net, tape)
    incs = dc_rollout_tape(gen, tape, v0_vars, v1_vars, xi, dB, real.values, real.times)
    segs = _segment_increments(tape, incs, np.asarray(xi, dtype=np.float64), real.times, time_channel, basepoint)
    loss = tape_sig_w1(tape_signature(segs, depth), target)
    adj = ad.backward(tape, loss)
    grads = [adj.get(v.id, np.zeros_like(v.value)) for v in v0_vars + v1_vars]
    return float(loss.value), grads


def train_sigwgan(data: PathBatch, cfg: TrainConfig, seed: int | None = None, generator: DcGenerator | None = None) -> TrainResult:
    """Minimize the signature Wasserstein-1 loss with Adam.

    Each step draws a mini-batch of real paths without replacement, uses it
    both as neighbors and as the loss target, and drives the generator with
    fresh keyed ``(xi, B)``.
    """
    if len(data) == 0:
        raise SignatureError("empty training data")
    seed = cfg.seed if seed is None else seed
    gen = generator if generator is not None else init_generator(data, cfg, seed=seed)
    if gen.state_dim != data.n_channels:
        raise ValueError(f"generator state dim {gen.state_dim} != data channels {data.n_channels}")
    B = min(cfg.batch_size, len(data))
    grid = TimeGrid(data.times)
    time_channel = cfg.uses_time_channel(data.n_channels)
    root = NoiseStream(seed, (_TRAIN,))
    arrays = gen.arrays
    state = nn.adam_init(
        arrays, lr=cfg.lr, decay_factor=cfg.decay_factor, decay_period=cfg.decay_period, clip_norm=cfg.clip_norm
    )
    losses: list[float] = []
    for step in range(cfg.steps):
        rng = root.child(step, _BATCH).generator(0)
        idx = np.sort(rng.choice(len(data), size=B, replace=False))
        real = data.subset(idx)
        xi = gen.init_sampler.sample(root.child(step, _XI), range(B))
        dB = root.child(step, _BM).increments(range(B), grid, gen.noise_dim)
        loss, grads = sigw1_loss_and_grad(gen, real, xi, dB, cfg.depth, time_channel, cfg.basepoint)
        if not np.isfinite(loss):
            raise ad.NumericError(f"non-finite loss at step {step}")
        arrays, state = nn.adam_step(arrays, grads, state)
        gen = gen.with_arrays(arrays)
        losses.append(loss)
        if step % 50 == 0:
            log.info("step %d loss %.5f", step, loss)
    meta = dict(gen.metadata)
    meta.update({"steps": cfg.steps, "seed": seed, "config_hash": cfg.digest()})
    return TrainResult(replace(gen, metadata=meta), losses)


# --------------------------------------------------------------------------
# sampling


def decorrelate(data: PathBatch, gen: DcGenerator, q: int, seed: int, chain: int = 0, shuffle: bool = False) -> PathBatch:
    """Walk ``q - 1`` steps along the chain starting from ``data``.

    Step ``k`` generates ``X_k = G(xi_k, B_k, X_{k-1})`` path by path; ``q = 1``
    returns ``data`` itself.  ``shuffle`` re-pairs neighbors at every step.
    """
    if q < 1:
        raise ValueError("q must be >= 1")
    if data.n_channels != gen.state_dim:
        raise ValueError(f"data has {data.n_channels} channels, generator expects {gen.state_dim}")
    grid = TimeGrid(data.times)
    M = len(data)
    x = data
    for k in range(2, q + 1):
        s = NoiseStream(seed, (_WALK, chain, k))
        nb = x
        if shuffle:
            nb = x.subset(s.child(_SHUFFLE).generator(0).permutation(M))
        xi = gen.init_sampler.sample(s.child(_XI), range(M))
        dB = s.child(_BM).increments(range(M), grid, gen.noise_dim)
        x = dc_generate_batch(gen, xi, dB, nb)
    return PathBatch(x.times, x.values, dict(data.meta))


def branch(data: PathBatch, gen: DcGenerator, q: int, n_chains: int, seed: int) -> list[PathBatch]:
    """``n_chains`` independent walks from the same data, each on its own key space."""
    if n_chains < 1:
        raise ValueError("n_chains must be >= 1")
    return [decorrelate(data, gen, q, seed, chain=c) for c in range(n_chains)]


# --------------------------------------------------------------------------
# persistence


def save_generator(gen: DcGenerator, directory) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    nn.save_mlp(gen.v0_net, d / "v0")
    nn.save_mlp(gen.v1_net, d / "v1")
    side = {
        "state_dim": gen.state_dim,
        "noise_dim": gen.noise_dim,
        "neighbor_masked": gen.neighbor_masked,
        "time_scale": repr(gen.time_scale),
        "init_sampler": {"family": gen.init_sampler.family, "a": [repr(v) for v in gen.init_sampler.a], "b": [repr(v) for v in gen.init_sampler.b]},
        "metadata": gen.metadata,
    }
    (d / "generator.json").write_text(json.dumps(side, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_generator(directory) -> DcGenerator:
    d = Path(directory)
    side = json.loads((d / "generator.json").read_text(encoding="utf-8"))
    s = side["init_sampler"]
    sampler = InitSampler(s["family"], tuple(float(v) for v in s["a"]), tuple(float(v) for v in s["b"]))
    return DcGenerator(
        nn.load_mlp(d / "v0"),
        nn.load_mlp(d / "v1"),
        int(side["state_dim"]),
        int(side["noise_dim"]),
        sampler,
        bool(side["neighbor_masked"]),
        float(side["time_scale"]),
        side.get("metadata", {}),
    )
