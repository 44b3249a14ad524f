"""Evaluation scores: signature MMD, cross-correlation independence,
discriminative and predictive scores, and a KDE mode counter.

The discriminative and predictive models are linear models on signature
features (logistic / ridge), not recurrent networks, so only orderings
between generators are meaningful.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from sklearn.linear_model import LogisticRegression, Ridge
from sklearn.preprocessing import StandardScaler

from dcgan import kernels
from dcgan.signature import PathBatch, batch_signatures, sig_view, sig_w1

METRIC_MODELS = "signature-logistic/ridge"


def default_timestamps(T: float) -> list[float]:
    return [T * k / 10 for k in range(1, 11)]


def _time_index(times: np.ndarray, t: float) -> int:
    j = int(np.argmin(np.abs(times - t)))
    if abs(times[j] - t) > 1e-9 * max(1.0, abs(t)):
        raise ValueError(f"timestamp {t} is not on the grid")
    return j


def _check_pair(a: PathBatch, b: PathBatch):
    if a.n_channels != b.n_channels:
        raise ValueError(f"channel counts differ: {a.n_channels} vs {b.n_channels}")


def independence_score(real: PathBatch, fake: PathBatch, timestamps=None) -> float:
    """Max over timestamps of the entrywise L1 norm of the Pearson
    cross-correlation matrix between ``real_t`` and ``fake_t``."""
    _check_pair(real, fake)
    if len(real) != len(fake):
        raise ValueError(f"batches are not paired: {len(real)} vs {len(fake)} paths")
    if not np.allclose(real.times, fake.times):
        raise ValueError("batches live on different grids")
    if timestamps is None:
        t0 = float(real.times[0])
        timestamps = [t0 + t for t in default_timestamps(float(real.times[-1]) - t0)]
    best = 0.0
    for t in timestamps:
        j = _time_index(real.times, t)
        x = real.values[:, j, :] - real.values[:, j, :].mean(axis=0)
        y = fake.values[:, j, :] - fake.values[:, j, :].mean(axis=0)
        # same dot routine for covariances and variances, so self-pairing gives |rho| = 1 exactly
        N = x.shape[1]
        rho = np.zeros((N, N))
        for a in range(N):
            vx = float(np.dot(x[:, a], x[:, a]))
            for b in range(N):
                vy = float(np.dot(y[:, b], y[:, b]))
                if vx <= 0 or vy <= 0:
                    warnings.warn(f"zero-variance channel at t={t}; its correlations count as 0", RuntimeWarning)
                    continue
                rho[a, b] = float(np.dot(x[:, a], y[:, b])) / np.sqrt(vx * vy)
        rho = np.clip(rho, -1.0, 1.0)
        best = max(best, float(np.abs(rho).sum()))
    return best


def null_independence_level(M: int) -> float:
    """Mean of ``|rho|`` for two independent samples of size ``M``."""
    return math.sqrt(2.0 / (math.pi * M))


def sig_mmd_score(real: PathBatch, fake: PathBatch, depth: int = 4, time_channel: bool | None = None, basepoint: bool = True) -> float:
    """Sig-W1 between the two batches; time is appended for 1-channel data by default."""
    _check_pair(real, fake)
    tc = real.n_channels == 1 if time_channel is None else time_channel
    return sig_w1(sig_view(real, tc, basepoint), sig_view(fake, tc, basepoint), depth)


def _sig_features(batch: PathBatch, depth: int) -> np.ndarray:
    return batch_signatures(sig_view(batch, True, True), depth)[:, 1:]


def discriminative_score(real: PathBatch, fake: PathBatch, seed: int = 0, depth: int = 4) -> float:
    """``|test accuracy - 0.5|`` of a real-vs-fake logistic classifier.

    Classes are balanced by subsampling the larger batch, split 80/20,
    and features are standardized on the training split.
    """
    _check_pair(real, fake)
    n = min(len(real), len(fake))
    n_test = n - int(round(0.8 * n))
    if n < 5 or n_test < 1:
        raise ValueError(f"need at least 5 paths per class, got {n}")
    rng = np.random.default_rng(seed)
    ir = rng.permutation(len(real))[:n]
    jf = rng.permutation(len(fake))[:n]
    fr = _sig_features(real.subset(ir), depth)
    ff = _sig_features(fake.subset(jf), depth)
    n_train = n - n_test
    Xtr = np.vstack([fr[:n_train], ff[:n_train]])
    ytr = np.r_[np.ones(n_train), np.zeros(n_train)]
    Xte = np.vstack([fr[n_train:], ff[n_train:]])
    yte = np.r_[np.ones(n_test), np.zeros(n_test)]
    scaler = StandardScaler().fit(Xtr)
    clf = LogisticRegression(max_iter=2000, random_state=seed)
    clf.fit(scaler.transform(Xtr), ytr)
    acc = float((clf.predict(scaler.transform(Xte)) == yte).mean())
    return abs(acc - 0.5)


def _prefix_design(batch: PathBatch, depth: int):
    """Prefix signatures up to ``t_j`` (j = 1..J-1) and last-channel targets at ``t_{j+1}``."""
    view = sig_view(batch, True, True)
    inc = np.diff(view.values, axis=1)
    stream = kernels.stream_signature(inc, depth)[:, :, 1:]
    # stream[:, 0] covers the basepoint jump only, i.e. the prefix up to t_0
    X = stream[:, 1:-1, :]
    y = batch.values[:, 2:, -1]
    return X.reshape(-1, X.shape[-1]), y.reshape(-1)


def persistence_error(batch: PathBatch) -> float:
    """MAE of predicting ``x_{t_{j+1}} = x_{t_j}`` in the last channel, j = 1..J-1."""
    v = batch.values[:, :, -1]
    return float(np.abs(v[:, 2:] - v[:, 1:-1]).mean())


def predictive_score(real: PathBatch, fake: PathBatch, seed: int = 0, depth: int = 3, alpha: float = 1e-3) -> float:
    """Train-on-fake / test-on-real one-step prediction MAE of the last channel."""
    _check_pair(real, fake)
    if real.times.size < 3:
        raise ValueError("predictive score needs at least 3 time points")
    Xf, yf = _prefix_design(fake, depth)
    Xr, yr = _prefix_design(real, depth)
    if np.allclose(yf, yf[0]) and np.allclose(Xf, Xf[0]):
        # constant training data: the only sensible predictor is that constant
        return float(np.abs(yr - yf[0]).mean())
    rank = np.linalg.matrix_rank(Xf - Xf.mean(axis=0))
    if rank < Xf.shape[1]:
        warnings.warn(f"rank-deficient design ({rank} < {Xf.shape[1]}); ridge floor alpha={alpha}", RuntimeWarning)
    model = Ridge(alpha=alpha, random_state=seed).fit(Xf, yf)
    return float(np.abs(model.predict(Xr) - yr).mean())


def kde_mode_count(samples, bandwidth: float) -> int:
    """Number of strict local maxima of a Gaussian KDE with height >= 5% of the peak.

    The density is evaluated on 512 points spanning the samples +/- 3
    bandwidths.  A run of equal grid values counts as one maximum if it is
    higher than both of its neighbors.
    """
    x = np.asarray(samples, dtype=np.float64).reshape(-1)
    if x.size < 10:
        raise ValueError("kde_mode_count needs at least 10 samples")
    if not bandwidth > 0:
        raise ValueError("bandwidth must be positive")
    grid = np.linspace(x.min() - 3 * bandwidth, x.max() + 3 * bandwidth, 512)
    dens = np.zeros_like(grid)
    for s in range(0, x.size, 4096):
        z = (grid[:, None] - x[None, s : s + 4096]) / bandwidth
        dens += np.exp(-0.5 * z * z).sum(axis=1)
    # collapse plateaus
    keep = np.r_[True, dens[1:] != dens[:-1]]
    d = dens[keep]
    padded = np.r_[-np.inf, d, -np.inf]
    peak = (padded[1:-1] > padded[:-2]) & (padded[1:-1] > padded[2:])
    return int(np.sum(peak & (d >= 0.05 * d.max())))


# --------------------------------------------------------------------------
# reports

_FIELDS = ("label", "sig_mmd", "independence", "discriminative", "predictive", "timestamps", "seed", "config_hash", "metric_models")


@dataclass
class MetricReport:
    label: str
    sig_mmd: float | None = None
    independence: float | None = None
    discriminative: float | None = None
    predictive: float | None = None
    timestamps: tuple[float, ...] = ()
    seed: int = 0
    config_hash: str = ""
    metric_models: str = METRIC_MODELS
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("sig_mmd", "independence", "discriminative", "predictive"):
            v = getattr(self, name)
            if v is not None and not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and >= 0, got {v}")

    def row(self) -> list[str]:
        def fmt(v):
            return "" if v is None else repr(float(v))

        return [
            self.label,
            fmt(self.sig_mmd),
            fmt(self.independence),
            fmt(self.discriminative),
            fmt(self.predictive),
            ";".join(repr(float(t)) for t in self.timestamps),
            str(self.seed),
            self.config_hash,
            self.metric_models,
        ]

    @classmethod
    def from_row(cls, row: dict) -> "MetricReport":
        def val(k):
            return float(row[k]) if row.get(k) else None

        ts = tuple(float(t) for t in row["timestamps"].split(";")) if row.get("timestamps") else ()
        return cls(
            row["label"], val("sig_mmd"), val("independence"), val("discriminative"), val("predictive"),
            ts, int(row.get("seed") or 0), row.get("config_hash", ""), row.get("metric_models", METRIC_MODELS),
        )


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(_FIELDS)
    for r in reports:
        w.writerow(r.row())
    return buf.getvalue()


def reports_from_csv(text: str) -> list[MetricReport]:
    return [MetricReport.from_row(r) for r in csv.DictReader(io.StringIO(text))]


def reports_to_markdown(reports) -> str:
    """Mean (std) per label, columns ordered like the results tables."""
    cols = ("discriminative", "predictive", "sig_mmd", "independence")
    heads = ("Discriminative", "Predictive", "MMD", "Independence")
    groups: dict[str, list[MetricReport]] = {}
    for r in reports:
        groups.setdefault(r.label, []).append(r)
    lines = ["| Model | " + " | ".join(heads) + " | Seeds |", "|---" * (len(heads) + 2) + "|"]
    for label, rs in groups.items():
        cells = []
        for c in cols:
            vals = [getattr(r, c) for r in rs if getattr(r, c) is not None]
            if not vals:
                cells.append("-")
            elif len(vals) == 1:
                cells.append(f"{vals[0]:.4f}")
            else:
                cells.append(f"{np.mean(vals):.4f} ({np.std(vals, ddof=1):.4f})")
        lines.append(f"| {label} | " + " | ".join(cells) + f" | {len(rs)} |")
    lines.append("")
    lines.append(f"Discriminative/predictive models: {METRIC_MODELS}.")
    return "\n".join(lines) + "\n"
