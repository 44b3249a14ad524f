"""Directed chain GANs for time series.

Generators are directed-chain SDEs whose drift and diffusion networks
read a neighbor path; they are trained by matching expected truncated
signatures and sampled with a decorrelating walk along the chain.
"""

from dcgan.kernels import BACKEND
from dcgan.model import (
    DcGenerator,
    TrainConfig,
    branch,
    decorrelate,
    load_generator,
    make_baseline,
    save_generator,
    train_sigwgan,
)
from dcgan.signature import PathBatch, PathSample, TruncatedTensor, sig_w1, signature

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "DcGenerator",
    "PathBatch",
    "PathSample",
    "TrainConfig",
    "TruncatedTensor",
    "branch",
    "decorrelate",
    "load_generator",
    "make_baseline",
    "save_generator",
    "sig_w1",
    "signature",
    "train_sigwgan",
]
