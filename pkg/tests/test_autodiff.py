import numpy as np
import pytest

from dcgan import autodiff as ad
from dcgan import nn
from dcgan.signature import sig_w1, tape_sig_w1, tape_signature
from dcgan.signature import PathBatch

TOL = 1e-5


def test_shapes():
    t = ad.Tape()
    a, b = t.variable(np.ones(3)), t.variable(np.ones(3))
    assert ad.add(a, b).shape == (3,)
    assert ad.matvec(t.variable(np.ones((2, 3))), a).shape == (2,)
    assert ad.concat([t.variable(np.ones(2)), a]).shape == (5,)


def test_sum_adjoint_is_ones():
    t = ad.Tape()
    x = t.variable(np.arange(4.0))
    g = ad.backward(t, ad.sum_(x))
    assert np.array_equal(g[x.id], np.ones(4))


def test_square_adjoint():
    t = ad.Tape()
    x = t.variable(3.0)
    assert ad.backward(t, ad.square(x))[x.id] == 6.0


def test_non_scalar_loss_rejected():
    t = ad.Tape()
    x = t.variable(np.ones(2))
    with pytest.raises(ad.TapeError):
        ad.backward(t, x * 2.0)


def test_cross_tape_rejected():
    t1, t2 = ad.Tape(), ad.Tape()
    with pytest.raises(ad.TapeError):
        ad.add(t1.variable(1.0), t2.variable(1.0))


def test_x_dot_x():
    assert ad.gradient_check(lambda t, x: ad.sum_(x * x), [2.0]) < 1e-8


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_nonfinite_forward():
    with pytest.raises(ad.NumericError):
        ad.gradient_check(lambda t, x: ad.sum_(ad.sqrt(x)), [-1.0])


def test_relu_subgradient_zero():
    t = ad.Tape()
    x = t.variable(np.array([-1.0, 0.0, 2.0]))
    g = ad.backward(t, ad.sum_(ad.relu(x)))[x.id]
    assert g.tolist() == [0.0, 0.0, 1.0]


def test_accumulation_two_consumers():
    t = ad.Tape()
    x = t.variable(np.array([0.3, -0.7]))
    y = ad.sum_(ad.tanh(x)) + ad.sum_(ad.square(x))
    g = ad.backward(t, y)[x.id]
    assert np.allclose(g, 1 - np.tanh(x.value) ** 2 + 2 * x.value, atol=1e-15)


def test_constants_get_no_gradient():
    t = ad.Tape()
    c = t.constant(np.ones(2))
    x = t.variable(np.ones(2))
    g = ad.backward(t, ad.sum_(c * x))
    assert c.id not in g and x.id in g


def test_deterministic_adjoints(rng):
    p = rng.normal(size=5)

    def run():
        t = ad.Tape()
        x = t.variable(p)
        return ad.backward(t, ad.sum_(ad.tanh(ad.outer(x, x))))[x.id]

    assert np.array_equal(run(), run())


# one composite per primitive, each reduced to a scalar
_B = np.random.default_rng(7).normal(size=(3, 4))
_CASES = {
    "add": lambda t, x: ad.sum_(ad.square(ad.add(x, t.constant(_B[0])))),
    "sub": lambda t, x: ad.sum_(ad.square(ad.sub(t.constant(_B[0]), x))),
    "mul": lambda t, x: ad.sum_(ad.mul(x, ad.tanh(x))),
    "scale": lambda t, x: ad.sum_(ad.square(ad.scale(x, -1.7))),
    "matvec": lambda t, x: ad.sum_(ad.tanh(ad.matvec(t.constant(_B), x))),
    "matmul": lambda t, x: ad.sum_(ad.tanh(ad.matmul(t.constant(_B), ad.concat([x, ad.square(x)], axis=0)))),
    "matmul_t": lambda t, x: ad.sum_(ad.tanh(ad.matmul(t.constant(_B), ad.concat([x, x * 0.5], axis=0), trans_b=True))),
    "tanh": lambda t, x: ad.sum_(ad.tanh(x)),
    "relu": lambda t, x: ad.sum_(ad.square(ad.relu(x))),
    "concat": lambda t, x: ad.sum_(ad.square(ad.concat([x, ad.tanh(x)]))),
    "slice": lambda t, x: ad.sum_(ad.square(ad.slice_(x, slice(1, 3)))),
    "sum": lambda t, x: ad.square(ad.sum_(x)),
    "mean": lambda t, x: ad.square(ad.mean(x)),
    "square": lambda t, x: ad.sum_(ad.square(x)),
    "sqrt": lambda t, x: ad.sqrt(ad.sum_(ad.square(x))),
    "outer": lambda t, x: ad.sum_(ad.tanh(ad.outer(x, x))),
}


@pytest.mark.parametrize("name", sorted(_CASES))
def test_primitive_vjp(name):
    shape = {"matmul": (2, 3), "matmul_t": (3, 4), "matvec": (4,)}.get(name, (4,))
    x = np.random.default_rng(sorted(_CASES).index(name)).normal(size=shape) + 0.1
    assert ad.gradient_check(_CASES[name], x) < TOL


def test_every_primitive_covered():
    covered = {"add", "sub", "mul", "scale", "matvec", "matmul", "tanh", "relu", "concat", "slice", "sum", "mean", "square", "sqrt", "outer"}
    assert set(ad.PRIMITIVES) <= covered


def test_mlp_gradient():
    params = nn.mlp_init((2, 8, 1), seed=5)
    point = np.random.default_rng(0).normal(size=2)

    def f(t, x):
        return ad.sum_(nn.mlp_forward(params, x, t))

    assert ad.gradient_check(f, point) < TOL


def test_mlp_parameter_gradient(rng):
    params = nn.mlp_init((3, 5, 2), seed=1)
    X = rng.normal(size=(6, 3))
    W0 = params.weights[0]

    def f(t, w):
        bound = [w] + [t.constant(a) for a in params.arrays[1:]]
        return ad.sum_(ad.square(nn.mlp_forward(params, t.constant(X), t, bound)))

    assert ad.gradient_check(f, W0) < TOL


def test_sig_w1_gradient_wrt_path(rng):
    target = rng.normal(size=(1, 6, 2))
    tb = PathBatch(np.linspace(0, 1, 6), target)
    from dcgan.signature import batch_signatures

    flat = batch_signatures(tb, 3).mean(axis=0)[1:]
    p0 = rng.normal(size=(5, 2)) * 0.5

    def f(t, x):
        rows = [ad.slice_(x, slice(i, i + 1)) for i in range(5)]
        return tape_sig_w1(tape_signature(rows, 3), flat)

    assert ad.gradient_check(f, p0) < TOL


def test_tape_signature_matches_kernel(rng):
    from dcgan.signature import batch_signatures

    vals = rng.normal(size=(4, 6, 2))
    b = PathBatch(np.linspace(0, 1, 6), vals)
    ref = batch_signatures(b, 4)
    t = ad.Tape()
    inc = np.diff(vals, axis=1)
    lv = tape_signature([t.constant(inc[:, j]) for j in range(5)], 4)
    got = np.concatenate([np.ones((4, 1))] + [v.value for v in lv], axis=1)
    assert np.allclose(got, ref, rtol=1e-13, atol=1e-14)
    loss = tape_sig_w1(lv, ref[:2].mean(axis=0)[1:])
    assert np.isclose(float(loss.value), sig_w1(b, b.subset([0, 1]), 4), rtol=1e-12)
