import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dcgan.signature import (
    PathBatch,
    PathSample,
    SignatureError,
    TruncatedTensor,
    add_basepoint,
    add_time_channel,
    chen_product,
    expected_signature,
    segment_exponential,
    sig_w1,
    signature,
    total_variation,
)
from tests.conftest import random_path


def test_segment_exponential_1d():
    s = segment_exponential([1.0], 1, 3)
    assert np.allclose(s.flat(), [1, 1, 0.5, 1 / 6], rtol=0, atol=1e-15)


def test_segment_exponential_zero_is_unit():
    s = segment_exponential(np.zeros(3), 3, 3)
    assert s.allclose(TruncatedTensor.unit(3, 3))


def test_segment_exponential_2d_level2():
    lv = segment_exponential([1.0, 0.0], 2, 2).level(2).reshape(2, 2)
    assert lv[0, 0] == 0.5
    assert lv[0, 1] == lv[1, 0] == lv[1, 1] == 0.0


def test_segment_exponential_bad_dim():
    with pytest.raises(SignatureError):
        segment_exponential([1.0, 2.0], 3, 2)


def test_chen_identity_and_inverse(rng):
    u = rng.normal(size=3)
    unit = TruncatedTensor.unit(3, 4)
    a = segment_exponential(u, 3, 4)
    assert chen_product(unit, a).allclose(a)
    assert chen_product(a, segment_exponential(-u, 3, 4)).allclose(unit, atol=1e-13)


def test_chen_1d_commutes():
    a, b = segment_exponential([0.7], 1, 5), segment_exponential([-1.9], 1, 5)
    assert chen_product(a, b).allclose(segment_exponential([0.7 - 1.9], 1, 5))


def test_chen_mismatch():
    with pytest.raises(SignatureError):
        chen_product(TruncatedTensor.unit(2, 3), TruncatedTensor.unit(2, 2))


def test_monotone_line_any_grid():
    t = np.array([0.0, 0.1, 0.5, 0.55, 1.0])
    s = signature(PathSample(t, t[:, None]), 3)
    assert np.allclose(s.flat(), [1, 1, 0.5, 1 / 6], atol=1e-15)


def test_constant_path_is_unit():
    s = signature(PathSample(np.arange(4.0), np.ones((4, 2))), 3)
    assert s.allclose(TruncatedTensor.unit(2, 3))


def test_l_shaped_path():
    p = PathSample(np.arange(3.0), np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]]))
    lv = signature(p, 2).level(2).reshape(2, 2)
    # frozen from the brute-force iterated integrals of the two legs
    assert lv[0, 1] == 1.0 and lv[1, 0] == 0.0
    assert lv[0, 0] == 0.5 and lv[1, 1] == 0.5


def test_level1_is_increment(rng):
    p = random_path(rng, 9, 3)
    assert np.allclose(signature(p, 3).level(1), p.values[-1] - p.values[0], atol=1e-14)


def test_single_point_rejected():
    with pytest.raises(SignatureError):
        signature(PathSample(np.array([0.0]), np.zeros((1, 1))), 2)


def test_refinement_invariance(rng):
    p = random_path(rng, 6, 2)
    t = np.sort(np.r_[p.times, (p.times[:-1] + p.times[1:]) / 2])
    v = np.stack([np.interp(t, p.times, p.values[:, c]) for c in range(2)], axis=1)
    a, b = signature(p, 4), signature(PathSample(t, v), 4)
    assert np.allclose(a.flat(), b.flat(), rtol=1e-12, atol=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 10), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_chen_split_property(n, dim, seed):
    rng = np.random.default_rng(seed)
    p = random_path(rng, n, dim)
    k = int(rng.integers(1, n - 1))
    left = PathSample(p.times[: k + 1], p.values[: k + 1])
    right = PathSample(p.times[k:], p.values[k:])
    whole = signature(p, 4).flat()
    prod = chen_product(signature(left, 4), signature(right, 4)).flat()
    assert np.allclose(whole, prod, rtol=1e-12, atol=1e-12 * np.abs(whole).max())


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 12), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_factorial_decay_property(n, dim, seed):
    p = random_path(np.random.default_rng(seed), n, dim)
    L = total_variation(p)
    s = signature(p, 5)
    for k in range(1, 6):
        assert np.linalg.norm(s.level(k)) <= L**k / math.factorial(k) * (1 + 1e-12)


def test_expected_signature_cases(rng):
    p = random_path(rng, 5, 2)
    b1 = PathBatch.from_paths([p])
    assert expected_signature(b1, 3).allclose(signature(p, 3))
    bk = PathBatch.from_paths([p] * 4)
    assert expected_signature(bk, 3).allclose(signature(p, 3))
    t = np.array([0.0, 1.0])
    rev = PathBatch(t, np.array([[[0.0], [0.8]], [[0.0], [-0.8]]]))
    assert expected_signature(rev, 3).level(1)[0] == 0.0


def test_empty_batch_rejected():
    b = PathBatch(np.array([0.0, 1.0]), np.zeros((0, 2, 1)))
    with pytest.raises(SignatureError):
        expected_signature(b, 2)


def test_sig_w1_basics(rng):
    t = np.array([0.0, 1.0])
    line = PathBatch(t, np.array([[[0.0], [1.0]]]))
    const = PathBatch(t, np.zeros((1, 2, 1)))
    assert sig_w1(line, const, 1) == 1.0
    a = PathBatch(np.linspace(0, 1, 5), rng.normal(size=(6, 5, 2)))
    b = PathBatch(np.linspace(0, 1, 5), rng.normal(size=(6, 5, 2)))
    assert sig_w1(a, a, 3) == 0.0
    assert sig_w1(a, b, 3) == sig_w1(b, a, 3) > 0
    with pytest.raises(SignatureError):
        sig_w1(a, line, 2)


def test_sig_w1_shrinks_with_sample_size():
    # average over repeats so the M^{-1/2} trend is not masked by noise
    t = np.linspace(0, 1, 11)
    means = []
    for M in (512, 1024, 2048):
        vals = []
        for rep in range(6):
            rng = np.random.default_rng(100 * M + rep)
            bm = lambda: np.concatenate([np.zeros((M, 1, 1)), np.cumsum(rng.normal(scale=0.1**0.5, size=(M, 10, 1)) , axis=1)], axis=1)
            a, b = PathBatch(t, bm()), PathBatch(t, bm())
            vals.append(sig_w1(add_time_channel(a), add_time_channel(b), 4))
        means.append(np.mean(vals))
    assert means[0] > means[1] > means[2]


def test_tensor_csv_roundtrip(rng):
    s = signature(random_path(rng, 5, 3), 3)
    back = TruncatedTensor.from_csv(s.to_csv(), 3)
    assert np.array_equal(back.flat(), s.flat())


def test_path_validation():
    with pytest.raises(SignatureError):
        PathSample(np.array([0.0, 0.0]), np.zeros((2, 1)))
    with pytest.raises(SignatureError):
        PathSample(np.array([0.0, 1.0]), np.zeros((3, 1)))


def test_augmentations():
    b = PathBatch(np.array([0.0, 0.5, 1.0]), np.array([[[2.0], [3.0], [4.0]]]))
    tb = add_time_channel(b)
    assert tb.values[0, :, 0].tolist() == [0.0, 0.5, 1.0]
    bp = add_basepoint(b)
    assert bp.times[0] == -0.5 and bp.values[0, 0, 0] == 0.0
    assert signature(bp[0], 1).level(1)[0] == 4.0
