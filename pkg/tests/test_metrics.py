import numpy as np
import pytest

from dcgan.metrics import (
    MetricReport,
    discriminative_score,
    independence_score,
    kde_mode_count,
    null_independence_level,
    persistence_error,
    predictive_score,
    reports_from_csv,
    reports_to_csv,
    reports_to_markdown,
    sig_mmd_score,
)
from dcgan.signature import PathBatch
from tests.conftest import random_batch

T = np.linspace(0.0, 1.0, 101)


def _walks(rng, M, N=1):
    return PathBatch(T, np.cumsum(rng.normal(scale=0.1, size=(M, 101, N)), axis=1))


def test_independence_self_and_negation(rng):
    a = _walks(rng, 500)
    assert independence_score(a, a) == 1.0
    assert independence_score(a, a.with_values(-a.values)) == 1.0


def test_independence_symmetric_and_affine_invariant(rng):
    a, b = _walks(rng, 400, 2), _walks(rng, 400, 2)
    s = independence_score(a, b)
    assert np.isclose(s, independence_score(b, a), rtol=1e-12)
    scaled = a.with_values(a.values * np.array([3.0, 0.5]) + np.array([1.0, -7.0]))
    assert np.isclose(s, independence_score(scaled, b), rtol=1e-9)


def test_independence_single_timestamp_null_level():
    # |rho| at one time averages sqrt(2/(pi M)) for independent samples
    M = 2048
    vals = []
    for seed in range(40):
        rng = np.random.default_rng(seed)
        a, b = PathBatch(T, rng.normal(size=(M, 101, 1))), PathBatch(T, rng.normal(size=(M, 101, 1)))
        vals.append(independence_score(a, b, [1.0]))
    assert abs(np.mean(vals) / null_independence_level(M) - 1.0) < 0.15


def test_independence_errors(rng):
    with pytest.raises(ValueError):
        independence_score(_walks(rng, 10), _walks(rng, 11))
    with pytest.raises(ValueError):
        independence_score(_walks(rng, 10), _walks(rng, 10), [0.123])


def test_independence_zero_variance_warns(rng):
    a = PathBatch(T, np.zeros((20, 101, 1)))
    with pytest.warns(RuntimeWarning):
        assert independence_score(a, _walks(rng, 20)) == 0.0


def test_sig_mmd(rng):
    a, b = random_batch(rng, 30), random_batch(rng, 30)
    assert sig_mmd_score(a, a) == 0.0
    assert sig_mmd_score(a, b) == sig_mmd_score(b, a) > 0


def test_discriminative_same_law_and_shift(rng):
    a = _walks(rng, 2000)
    h1, h2 = a.subset(range(1000)), a.subset(range(1000, 2000))
    assert discriminative_score(h1, h2, seed=0) < 0.1
    assert discriminative_score(h1, h1.with_values(h1.values + 10.0), seed=0) > 0.45


def test_discriminative_deterministic(rng):
    a, b = _walks(rng, 200), _walks(rng, 200)
    assert discriminative_score(a, b, seed=3) == discriminative_score(a, b, seed=3)


def test_discriminative_too_small(rng):
    with pytest.raises(ValueError):
        discriminative_score(_walks(rng, 3), _walks(rng, 3))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_predictive_oracles(rng):
    a = _walks(rng, 600)
    assert predictive_score(a, a) <= persistence_error(a)
    noise = PathBatch(T, rng.normal(size=(600, 101, 1)))
    assert predictive_score(a, noise) > persistence_error(a)
    const = PathBatch(T, np.ones((20, 101, 1)))
    assert predictive_score(const, const) == 0.0


def test_predictive_rank_warning(rng):
    with pytest.warns(RuntimeWarning, match="rank-deficient"):
        # two identical channels duplicate signature features
        w = _walks(rng, 50)
        dup = w.with_values(np.concatenate([w.values, w.values], axis=2))
        predictive_score(dup, dup)


def test_kde_modes(rng):
    x = np.r_[rng.normal(-1, 0.05, 2048), rng.normal(1, 0.05, 2048)]
    assert kde_mode_count(x, 0.1) == 2
    assert kde_mode_count(rng.normal(size=4096), 0.3) == 1
    assert kde_mode_count(np.full(50, 2.0), 0.1) == 1


def test_kde_errors():
    with pytest.raises(ValueError):
        kde_mode_count(np.arange(5.0), 0.1)
    with pytest.raises(ValueError):
        kde_mode_count(np.arange(20.0), 0.0)


def test_report_roundtrip_and_markdown():
    reps = [
        MetricReport("dc", 0.07, 0.009, 0.1, 0.3, (0.5, 1.0), seed=1, config_hash="ab"),
        MetricReport("dc", 0.08, 0.010, 0.2, 0.31, (0.5, 1.0), seed=2),
        MetricReport("base", 0.12, None, None, None),
    ]
    back = reports_from_csv(reports_to_csv(reps))
    assert [r.row() for r in back] == [r.row() for r in reps]
    md = reports_to_markdown(reps)
    assert "| dc |" in md and "| base |" in md and "MMD" in md


def test_report_rejects_negative():
    with pytest.raises(ValueError):
        MetricReport("x", sig_mmd=-1.0)
