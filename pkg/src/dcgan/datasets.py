"""Particle simulators for the two synthetic corpora.

* Stochastic opinion dynamics: a McKean-Vlasov SDE whose law is
  approximated by the empirical measure of ``n_particles`` particles.
* Stochastic FitzHugh-Nagumo network, single population, state
  ``(V, w, y)`` per neuron.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from dcgan import kernels
from dcgan.autodiff import NumericError
from dcgan.sde import NoiseStream, TimeGrid
from dcgan.signature import PathBatch

# namespace tags for the keyed noise streams
_INIT = 1
_DRIVE = 2


@dataclass(frozen=True)
class OpinionParams:
    theta1: float = 6.0
    theta2: float = 0.2
    sigma: float = 0.1
    n_particles: int = 8192
    T: float = 1.0
    dt: float = 0.01
    init_low: float = -2.0
    init_high: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if self.theta1 < 0 or self.theta2 <= 0:
            # theta1 = 0 is allowed: it switches the interaction off
            raise ValueError("theta1 must be >= 0 and theta2 > 0")
        if self.sigma < 0 or self.n_particles < 2 or self.dt <= 0 or self.T <= 0:
            raise ValueError("invalid opinion-model parameters")

    @property
    def grid(self) -> TimeGrid:
        return TimeGrid.uniform(self.T, int(round(self.T / self.dt)))


def opinion_kernel(r, theta1: float, theta2: float):
    """Interaction strength; zero for ``r <= 0`` and outside ``|r - theta2| < 1``."""
    r = np.asarray(r, dtype=np.float64)
    u = (r - theta2) ** 2
    inside = (r > 0.0) & (u < 1.0)
    out = np.zeros_like(r)
    out[inside] = theta1 * np.exp(-0.01 / (1.0 - u[inside]))
    return out if out.ndim else float(out)


def opinion_euler(y0, dW, theta1: float, theta2: float, sigma: float, grid: TimeGrid) -> np.ndarray:
    """Euler scheme of the particle system; returns ``(n, J+1)`` trajectories."""
    y = np.array(y0, dtype=np.float64)
    dW = np.asarray(dW, dtype=np.float64)
    out = np.empty((y.size, grid.n_steps + 1))
    out[:, 0] = y
    for j in range(grid.n_steps):
        h = grid.times[j + 1] - grid.times[j]
        drift = kernels.opinion_drift(y, theta1, theta2) if theta1 != 0 else np.zeros_like(y)
        y = y + drift * h + sigma * dW[:, j]
        if not np.all(np.isfinite(y)):
            raise NumericError(f"opinion simulation blew up at step {j}")
        out[:, j + 1] = y
    return out


def opinion_initial(params: OpinionParams) -> np.ndarray:
    s = NoiseStream(params.seed, (_INIT,))
    u = np.array([s.uniforms(i, 1)[0] for i in range(params.n_particles)])
    return params.init_low + (params.init_high - params.init_low) * u


def opinion_noise(params: OpinionParams) -> np.ndarray:
    """Brownian increments ``(n, J)`` keyed by particle index."""
    stream = NoiseStream(params.seed, (_DRIVE,))
    return stream.increments(range(params.n_particles), params.grid, 1)[:, :, 0]


def simulate_opinion(params: OpinionParams) -> PathBatch:
    grid = params.grid
    traj = opinion_euler(opinion_initial(params), opinion_noise(params), params.theta1, params.theta2, params.sigma, grid)
    meta = {"dataset": "opinion", "init_family": "uniform"}
    meta.update({k: v for k, v in asdict(params).items()})
    return PathBatch(grid.times, traj[:, :, None], meta)


# --------------------------------------------------------------------------
# FitzHugh-Nagumo


@dataclass(frozen=True)
class FhnParams:
    V0_mean: float = 0.0
    sigma_V0: float = 0.4
    a: float = 0.7
    b: float = 0.8
    c: float = 0.08
    I: float = 0.5
    sigma_ext: float = 0.5
    w0_mean: float = 0.5
    sigma_w0: float = 0.4
    V_rev: float = 1.0
    a_r: float = 1.0
    a_d: float = 1.0
    T_max: float = 1.0
    lam: float = 0.2
    y0_mean: float = 0.3
    sigma_y0: float = 0.05
    J: float = 1.0
    sigma_J: float = 0.2
    V_T: float = 2.0
    Gamma: float = 0.1
    Lambda: float = 0.5
    n_particles: int = 4096
    T: float = 1.0
    dt: float = 0.01
    seed: int = 0
    # "printed": coupling reads the neuron's own y; "presynaptic": mean of y_j
    coupling: str = "printed"

    def __post_init__(self):
        if min(self.sigma_V0, self.sigma_w0, self.sigma_y0, self.sigma_ext, self.sigma_J) < 0:
            raise ValueError("noise scales must be nonnegative")
        if self.dt <= 0 or self.T <= 0 or self.n_particles < 1:
            raise ValueError("invalid FitzHugh-Nagumo grid/particle count")
        if self.coupling not in ("printed", "presynaptic"):
            raise ValueError(f"unknown coupling {self.coupling!r}")

    @property
    def grid(self) -> TimeGrid:
        return TimeGrid.uniform(self.T, int(round(self.T / self.dt)))


def fhn_chi(y, Gamma: float, Lambda: float):
    """``Gamma * exp(-Lambda / (1 - (2y - 1)^2))`` on ``(0, 1)``, zero elsewhere."""
    y = np.asarray(y, dtype=np.float64)
    inside = (y > 0.0) & (y < 1.0)
    out = np.zeros_like(y)
    yi = y[inside]
    out[inside] = Gamma * np.exp(-Lambda / (1.0 - (2.0 * yi - 1.0) ** 2))
    return out if out.ndim else float(out)


def fhn_euler(x0, dW, p: FhnParams, grid: TimeGrid) -> np.ndarray:
    """Euler scheme; ``x0`` is ``(n, 3)``, ``dW`` is ``(n, J, 3)`` ordered
    (membrane noise, synaptic noise, coupling noise).  Returns ``(n, J+1, 3)``."""
    x = np.array(x0, dtype=np.float64)
    dW = np.asarray(dW, dtype=np.float64)
    n = x.shape[0]
    out = np.empty((n, grid.n_steps + 1, 3))
    out[:, 0] = x
    V, w, y = x[:, 0].copy(), x[:, 1].copy(), x[:, 2].copy()
    for j in range(grid.n_steps):
        h = grid.times[j + 1] - grid.times[j]
        S = p.T_max / (1.0 + np.exp(-p.lam * (V - p.V_T)))
        fV = V - V**3 / 3.0 - w + p.I
        fw = p.c * (V + p.a - p.b * w)
        fy = p.a_r * S * (1.0 - y) - p.a_d * y
        ybar = y if p.coupling == "printed" else np.full(n, math.fsum(y) / n)
        drive = (V - p.V_rev) * ybar
        chi = fhn_chi(y, p.Gamma, p.Lambda)
        sig_y = np.zeros(n)
        on = chi > 0.0
        sig_y[on] = np.sqrt(np.maximum(p.a_r * S[on] * (1.0 - y[on]) + p.a_d * y[on], 0.0)) * chi[on]
        V_new = V + (fV - p.J * drive) * h + p.sigma_ext * dW[:, j, 0] - p.sigma_J * drive * dW[:, j, 2]
        w = w + fw * h
        y = y + fy * h + sig_y * dW[:, j, 1]
        V = V_new
        if not (np.all(np.isfinite(V)) and np.all(np.isfinite(w)) and np.all(np.isfinite(y))):
            raise NumericError(f"FitzHugh-Nagumo simulation blew up at step {j}")
        out[:, j + 1, 0] = V
        out[:, j + 1, 1] = w
        out[:, j + 1, 2] = y
    return out


def fhn_initial(p: FhnParams) -> np.ndarray:
    s = NoiseStream(p.seed, (_INIT,))
    z = np.stack([s.normals(i, 3) for i in range(p.n_particles)])
    mean = np.array([p.V0_mean, p.w0_mean, p.y0_mean])
    sd = np.array([p.sigma_V0, p.sigma_w0, p.sigma_y0])
    return mean + sd * z


def simulate_fhn(p: FhnParams) -> PathBatch:
    grid = p.grid
    dW = NoiseStream(p.seed, (_DRIVE,)).increments(range(p.n_particles), grid, 3)
    traj = fhn_euler(fhn_initial(p), dW, p, grid)
    meta = {"dataset": "fhn", "init_family": "gaussian"}
    meta.update(asdict(p))
    return PathBatch(grid.times, traj, meta)
