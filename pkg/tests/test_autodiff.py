import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vessam import autodiff as ad
from vessam.autodiff import Tape, Tensor, backward, grad_check, load_params, save_params
from vessam.errors import (
    DetachedLoss,
    EmptyConcat,
    NonDivisibleExtent,
    NonIntegralOutput,
    NotScalar,
    SchemaViolation,
    ShapeMismatch,
)


def T(a, grad=False):
    return Tensor(np.asarray(a, dtype=float), requires_grad=grad)


def matmul_oracle(a, b):
    m, k = a.shape
    n = b.shape[1]
    out = np.zeros((m, n))
    for i in range(m):
        for j in range(n):
            for t in range(k):
                out[i, j] += a[i, t] * b[t, j]
    return out


def conv_oracle(x, w, stride, pad):
    c_in, h, wd = x.shape
    c_out, _, kh, kw = w.shape
    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
    ho = (h + 2 * pad - kh) // stride + 1
    wo = (wd + 2 * pad - kw) // stride + 1
    out = np.zeros((c_out, ho, wo))
    for o in range(c_out):
        for i in range(ho):
            for j in range(wo):
                for c in range(c_in):
                    for u in range(kh):
                        for v in range(kw):
                            out[o, i, j] += w[o, c, u, v] * xp[c, i * stride + u, j * stride + v]
    return out


def depthwise_oracle(x, w, stride, pad):
    c, h, wd = x.shape
    _, kh, kw = w.shape
    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
    ho = (h + 2 * pad - kh) // stride + 1
    wo = (wd + 2 * pad - kw) // stride + 1
    out = np.zeros((c, ho, wo))
    for ch in range(c):
        for i in range(ho):
            for j in range(wo):
                for u in range(kh):
                    for v in range(kw):
                        out[ch, i, j] += w[ch, u, v] * xp[ch, i * stride + u, j * stride + v]
    return out


class TestForward:
    def test_matmul_identity(self, rng):
        a = rng.normal(size=(4, 3))
        assert np.array_equal(ad.matmul(T(a), T(np.eye(3))).data, a)

    def test_matmul_hand(self):
        assert ad.matmul(T([[1, 2], [3, 4]]), T([[1], [1]])).data.tolist() == [[3], [7]]

    def test_matmul_oracle(self, rng):
        a, b = rng.normal(size=(5, 7)), rng.normal(size=(7, 3))
        assert np.abs(ad.matmul(T(a), T(b)).data - matmul_oracle(a, b)).max() <= 1e-12

    def test_matmul_mismatch(self):
        with pytest.raises(ShapeMismatch):
            ad.matmul(T(np.ones((2, 3))), T(np.ones((2, 3))))

    def test_conv_identity_kernel(self, rng):
        x = rng.normal(size=(2, 4, 5))
        w = np.zeros((2, 2, 1, 1))
        w[0, 0] = w[1, 1] = 1
        assert np.array_equal(ad.conv2d(T(x), T(w)).data, x)

    def test_conv_one_hot(self):
        x = np.zeros((1, 5, 5))
        x[0, 2, 2] = 1
        out = ad.conv2d(T(x), T(np.ones((1, 1, 3, 3))), padding=1).data[0]
        expect = np.zeros((5, 5))
        expect[1:4, 1:4] = 1
        assert np.array_equal(out, expect)

    @pytest.mark.parametrize("stride,pad,size", [(1, 0, 6), (2, 1, 7), (1, 2, 5), (3, 0, 8)])
    def test_conv_oracle(self, rng, stride, pad, size):
        x, w = rng.normal(size=(3, size, size)), rng.normal(size=(4, 3, 3, 3))
        if (size + 2 * pad - 3) % stride:
            with pytest.raises(NonIntegralOutput):
                ad.conv2d(T(x), T(w), stride=stride, padding=pad)
            return
        out = ad.conv2d(T(x), T(w), stride=stride, padding=pad).data
        assert np.abs(out - conv_oracle(x, w, stride, pad)).max() <= 1e-12

    def test_conv_errors(self):
        with pytest.raises(ShapeMismatch):
            ad.conv2d(T(np.ones((2, 4, 4))), T(np.ones((1, 3, 3, 3))))
        with pytest.raises(NonIntegralOutput):
            ad.conv2d(T(np.ones((1, 6, 6))), T(np.ones((1, 1, 3, 3))), stride=2)
        with pytest.raises(ShapeMismatch):
            ad.conv2d(T(np.ones((1, 2, 2))), T(np.ones((1, 1, 3, 3))))

    def test_depthwise_oracle(self, rng):
        x, w = rng.normal(size=(3, 7, 7)), rng.normal(size=(3, 3, 3))
        for stride, pad in ((1, 1), (2, 0)):
            out = ad.depthwise_conv2d(T(x), T(w), stride=stride, padding=pad).data
            assert np.abs(out - depthwise_oracle(x, w, stride, pad)).max() <= 1e-12

    def test_depthwise_is_block_diagonal_conv(self, rng):
        x, w = rng.normal(size=(3, 6, 6)), rng.normal(size=(3, 3, 3))
        full = np.zeros((3, 3, 3, 3))
        for c in range(3):
            full[c, c] = w[c]
        a = ad.depthwise_conv2d(T(x), T(w), padding=1).data
        b = ad.conv2d(T(x), T(full), padding=1).data
        assert np.abs(a - b).max() <= 1e-12

    def test_depthwise_scales_channels(self, rng):
        x = rng.normal(size=(2, 3, 3))
        w = np.array([2.0, -0.5]).reshape(2, 1, 1)
        assert np.allclose(ad.depthwise_conv2d(T(x), T(w)).data, x * w, rtol=0, atol=0)

    def test_softmax_constant(self):
        assert np.allclose(ad.softmax(T(np.full(6, 3.0))).data, 1 / 6, rtol=0, atol=1e-15)

    def test_softmax_rows_sum_to_one(self, rng):
        s = ad.softmax(T(rng.normal(size=(4, 9)) * 30), axis=1).data
        assert np.allclose(s.sum(axis=1), 1.0, atol=1e-12)

    @given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=20))
    def test_relu_abs(self, xs):
        x = np.array(xs)
        assert np.array_equal(ad.add(ad.relu(T(-x)), ad.relu(T(x))).data, np.abs(x))

    def test_layer_norm_moments(self, rng):
        x = rng.normal(3.0, 5.0, size=(6, 11))
        y = ad.layer_norm(T(x), axis=1, eps=0.0).data
        assert np.abs(y.mean(axis=1)).max() <= 1e-9
        assert np.abs(y.var(axis=1) - 1).max() <= 1e-9

    def test_resample(self, rng):
        x = rng.normal(size=(2, 4, 6))
        assert np.array_equal(ad.downsample(T(x), 1).data, x)
        assert np.array_equal(ad.upsample(T(x), 1).data, x)
        assert ad.downsample(T([[[1, 2], [3, 4]]]), 2).data.tolist() == [[[2.5]]]
        assert ad.upsample(T([[[2.5]]]), 2).data.tolist() == [[[2.5, 2.5], [2.5, 2.5]]]
        up = ad.upsample(ad.downsample(T(x), 2), 2).data
        assert np.allclose(ad.downsample(T(up), 2).data, ad.downsample(T(x), 2).data, rtol=0, atol=1e-15)
        with pytest.raises(NonDivisibleExtent):
            ad.downsample(T(np.ones((1, 3, 4))), 2)

    def test_no_broadcasting(self):
        with pytest.raises(ShapeMismatch):
            ad.add(T(np.ones((2, 3))), T(np.ones(3)))
        with pytest.raises(ShapeMismatch):
            ad.mul(T(np.ones((2, 3))), T(np.ones((3, 2))))

    def test_concat_errors(self):
        with pytest.raises(EmptyConcat):
            ad.concat([])
        with pytest.raises(ShapeMismatch):
            ad.concat([T(np.ones((2, 3))), T(np.ones((2, 4)))], axis=0)


class TestBackward:
    def test_sum(self, rng):
        x = T(rng.normal(size=(3, 4)), grad=True)
        with Tape() as tape:
            loss = ad.sum(x)
        backward(loss, tape)
        assert np.array_equal(x.grad, np.ones((3, 4)))

    def test_sum_of_squares(self, rng):
        x = T(rng.normal(size=5), grad=True)
        with Tape() as tape:
            loss = ad.sum(ad.mul(x, x))
        backward(loss, tape)
        assert np.allclose(x.grad, 2 * x.data, rtol=0, atol=1e-15)

    def test_multiple_consumers_accumulate(self, rng):
        x = T(rng.normal(size=4), grad=True)
        with Tape() as tape:
            loss = ad.sum(ad.add(ad.scale(x, 3.0), ad.mul(x, x)))
        backward(loss, tape)
        assert np.allclose(x.grad, 3 + 2 * x.data, rtol=0, atol=1e-15)

    def test_not_scalar(self):
        x = T(np.ones(3), grad=True)
        with Tape() as tape:
            y = ad.scale(x, 2.0)
        with pytest.raises(NotScalar):
            backward(y, tape)

    def test_detached(self):
        x = T(np.ones(3), grad=True)
        with Tape():
            pass
        loss = ad.sum(x)
        with Tape() as other:
            pass
        with pytest.raises(DetachedLoss):
            backward(loss, other)

    def test_deterministic(self, rng):
        x = T(rng.normal(size=(4, 4)), grad=True)
        w = T(rng.normal(size=(4, 4)))
        with Tape() as tape:
            loss = ad.mean(ad.mul(ad.softmax(ad.matmul(x, w), axis=1), ad.matmul(x, w)))
        backward(loss, tape)
        first = x.grad.copy()
        x.zero_grad()
        backward(loss, tape)
        assert np.array_equal(first, x.grad)

    def test_concat_grads_are_slices(self, rng):
        a, b = T(rng.normal(size=(2, 3)), grad=True), T(rng.normal(size=(4, 3)), grad=True)
        g = rng.normal(size=(6, 3))
        with Tape() as tape:
            loss = ad.sum(ad.mul(ad.concat([a, b], axis=0), T(g)))
        backward(loss, tape)
        assert np.array_equal(a.grad, g[:2]) and np.array_equal(b.grad, g[2:])

    def test_no_tape_entry_without_grad(self):
        with Tape() as tape:
            ad.relu(T(np.ones(3)))
        assert len(tape) == 0


# op name -> (function of x, list of 3 input shapes)
def _conv_case(rng, c_out, stride, pad):
    def make(shape):
        w = T(rng.normal(size=(c_out, shape[0], 3, 3)))
        b = T(rng.normal(size=c_out))
        return lambda x: ad.conv2d(x, w, b, stride=stride, padding=pad)
    return make


def unary_cases(rng):
    def fixed(shape):
        return T(rng.normal(size=shape))

    cases = {
        "matmul": (lambda s: (lambda x, m=fixed((s[-1], 3)): ad.matmul(x, m)), [(2, 3), (4, 5), (1, 7)]),
        "matmul_batched": (lambda s: (lambda x, m=fixed((s[0], s[2], 2)): ad.matmul(x, m)), [(2, 3, 4), (3, 2, 2), (1, 5, 3)]),
        "transpose": (lambda s: (lambda x: ad.transpose(x)), [(2, 3), (4, 1), (3, 3)]),
        "reshape": (lambda s: (lambda x: ad.reshape(x, (-1,))), [(2, 3), (4, 2, 1), (5,)]),
        "conv2d": (_conv_case(rng, 2, 1, 1), [(1, 4, 4), (2, 5, 5), (3, 3, 6)]),
        "conv2d_strided": (_conv_case(rng, 3, 2, 1), [(1, 5, 5), (2, 7, 7), (2, 3, 5)]),
        "depthwise_conv2d": (lambda s: (lambda x, w=fixed((s[0], 3, 3)), b=fixed((s[0],)): ad.depthwise_conv2d(x, w, b, padding=1)), [(1, 4, 4), (2, 5, 3), (3, 6, 6)]),
        "downsample": (lambda s: (lambda x: ad.downsample(x, 2)), [(1, 2, 2), (2, 4, 6), (3, 6, 4)]),
        "upsample": (lambda s: (lambda x: ad.upsample(x, 2)), [(1, 1, 1), (2, 3, 2), (3, 2, 4)]),
        "relu": (lambda s: (lambda x: ad.relu(x)), [(5,), (2, 3), (2, 2, 2)]),
        "sigmoid": (lambda s: (lambda x: ad.sigmoid(x)), [(5,), (2, 3), (2, 2, 2)]),
        "softplus": (lambda s: (lambda x: ad.softplus(x)), [(5,), (2, 3), (2, 2, 2)]),
        "log": (lambda s: (lambda x: ad.log(ad.add_scalar(ad.mul(x, x), 1.0))), [(5,), (2, 3), (2, 2, 2)]),
        "add": (lambda s: (lambda x, o=fixed(s): ad.add(x, o)), [(5,), (2, 3), (2, 2, 2)]),
        "sub": (lambda s: (lambda x, o=fixed(s): ad.sub(o, x)), [(5,), (2, 3), (2, 2, 2)]),
        "mul": (lambda s: (lambda x, o=fixed(s): ad.mul(x, o)), [(5,), (2, 3), (2, 2, 2)]),
        "div": (lambda s: (lambda x, o=fixed(s): ad.div(o, ad.add_scalar(ad.mul(x, x), 1.0))), [(5,), (2, 3), (2, 2, 2)]),
        "scale": (lambda s: (lambda x: ad.scale(x, -1.7)), [(5,), (2, 3), (2, 2, 2)]),
        "add_scalar": (lambda s: (lambda x: ad.add_scalar(x, 0.3)), [(5,), (2, 3), (2, 2, 2)]),
        "bias_add": (lambda s: (lambda x, b=fixed((s[-1],)): ad.bias_add(x, b)), [(5,), (2, 3), (2, 2, 4)]),
        "feature_mul": (lambda s: (lambda x, g=fixed((s[-1],)): ad.feature_mul(x, g)), [(5,), (2, 3), (2, 2, 4)]),
        "concat": (lambda s: (lambda x, o=fixed(s): ad.concat([o, x, x], axis=0)), [(2,), (2, 3), (1, 2, 2)]),
        "take": (lambda s: (lambda x: ad.take(x, 1, s[0], axis=0)), [(3,), (2, 3), (4, 2, 2)]),
        "gather_rows": (lambda s: (lambda x: ad.gather_rows(x, [1, 0, 1])), [(2, 3), (3, 1), (2, 5)]),
        "sum": (lambda s: (lambda x: ad.sum(x, axes=0)), [(5,), (2, 3), (2, 2, 2)]),
        "mean": (lambda s: (lambda x: ad.mean(x, axes=-1)), [(5,), (2, 3), (2, 2, 2)]),
        "softmax": (lambda s: (lambda x: ad.softmax(x, axis=-1)), [(5,), (2, 3), (2, 2, 4)]),
        "layer_norm": (lambda s: (lambda x: ad.layer_norm(x, axis=-1)), [(5,), (2, 3), (2, 2, 4)]),
    }
    return cases


def weighted(fn, rng, x_shape):
    """Scalarize fn(x) with a fixed random weighting so every output matters."""
    out_shape = fn(T(np.zeros(x_shape))).shape
    r = T(rng.normal(size=out_shape))
    return lambda x: ad.sum(ad.mul(fn(x), r))


OPS = sorted(unary_cases(np.random.default_rng(0)))


@pytest.mark.parametrize("op", OPS)
def test_op_grad_check(op):
    rng = np.random.default_rng(abs(hash(op)) % 2**32)
    make, shapes = unary_cases(rng)[op]
    assert len(shapes) >= 3
    for shape in shapes:
        fn = make(shape)
        x = T(rng.normal(size=shape))
        report = grad_check(weighted(fn, rng, shape), x)
        assert report.passed, (op, shape, report)


def test_scale_by_tensor_grad(rng):
    x = T(rng.normal(size=(3, 2)))
    s = T([0.7])
    assert grad_check(lambda v: ad.sum(ad.mul(ad.scale(x, v), x)), s).passed
    assert grad_check(lambda v: ad.sum(ad.mul(ad.scale(v, s), v)), x).passed


def test_two_operand_grads(rng):
    a, b = T(rng.normal(size=(3, 4))), T(rng.normal(size=(4, 2)))
    assert grad_check(lambda v: ad.sum(ad.sigmoid(ad.matmul(a, v))), b).passed
    x, w = T(rng.normal(size=(2, 5, 5))), T(rng.normal(size=(3, 2, 3, 3)))
    assert grad_check(lambda v: ad.sum(ad.relu(ad.conv2d(x, v, stride=2))), w).passed
    bias = T(rng.normal(size=3))
    assert grad_check(lambda v: ad.sum(ad.mul(ad.conv2d(x, w, v, padding=1), ad.conv2d(x, w, v, padding=1))), bias).passed
    dw = T(rng.normal(size=(2, 3, 3)))
    assert grad_check(lambda v: ad.sum(ad.sigmoid(ad.depthwise_conv2d(x, v, stride=2))), dw).passed


class TestGradCheck:
    def test_sum_of_squares(self, rng):
        r = grad_check(lambda x: ad.sum(ad.mul(x, x)), T(rng.normal(size=(4, 3))))
        assert r.passed and r.max_rel_err < 1e-6

    def test_chain(self, rng):
        # weighted, since softmax rows sum to one and a plain mean is constant
        w, r = T(rng.normal(size=(5, 4))), T(rng.normal(size=(3, 4)))
        report = grad_check(lambda x: ad.mean(ad.mul(ad.softmax(ad.matmul(x, w), axis=1), r)), T(rng.normal(size=(3, 5))))
        assert report.passed

    def test_negated_adjoint_fails(self, rng):
        def bad_square(x):
            return ad.record(x.data ** 2, (x,), lambda g: (-2 * x.data * g,))

        r = grad_check(lambda x: ad.sum(bad_square(x)), T(rng.normal(size=5) + 2))
        assert not r.passed and r.max_rel_err > 0.5

    def test_restores_flags(self, rng):
        x = T(rng.normal(size=3))
        grad_check(lambda v: ad.sum(ad.mul(v, v)), x)
        assert not x.requires_grad and x.grad is None

    def test_kink_coordinates_are_resampled(self):
        x = T([1e-7, 1.0, -2.0, 3.0])
        r = grad_check(lambda v: ad.sum(ad.relu(v)), x, eps=1e-5)
        assert r.n_kinks == 1 and r.n_checked == 3 and r.passed
        unguarded = grad_check(lambda v: ad.sum(ad.relu(v)), x, eps=1e-5, skip_kinks=False)
        assert not unguarded.passed

    def test_rel_err_formula(self):
        assert ad.rel_err(1.0, 1.0) == 0
        assert ad.rel_err(0.0, 1e-9) == pytest.approx(1e-9 / 1e-8)
        assert ad.rel_err(2.0, 1.0) == pytest.approx(1 / 3)


class TestCheckpoint:
    def test_roundtrip(self, rng):
        params = {"b": T(rng.normal(size=(2, 3))), "a": T(rng.normal(size=4)), "s": T([1.5])}
        back = load_params(save_params(params))
        assert set(back) == set(params)
        for k in params:
            assert back[k].dtype == np.float64 and np.array_equal(back[k], params[k].data)

    def test_layout(self, rng):
        params = {"w": T([[1.0, 2.0]])}
        blob = save_params(params)
        header, payload = blob.split(b"\n", 1)
        assert b'"offset"' in header
        assert payload == np.array([1.0, 2.0], dtype="<f8").tobytes()

    def test_deterministic(self, rng):
        params = {"w": T(rng.normal(size=(3, 3))), "v": T(rng.normal(size=2))}
        assert save_params(params) == save_params(dict(reversed(list(params.items()))))

    @pytest.mark.parametrize("blob", [b"", b"nonsense", b'{"format": "x"}\n', b'{"format":"vessam-params","version":1,"params":[{"name":"w","shape":[4],"offset":0}]}\n\x00'])
    def test_bad_file(self, blob):
        with pytest.raises(SchemaViolation):
            load_params(blob)


def test_relu_propagates_nan():
    out = ad.relu(Tensor(np.array([np.nan, -1.0, 2.0])))
    assert np.isnan(out.data[0]) and out.data[1:].tolist() == [0.0, 2.0]
