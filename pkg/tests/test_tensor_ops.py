import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from irlsr.tensor import (
    ShapeError,
    Tape,
    Tensor,
    add,
    backward,
    concat_channels,
    conv2d,
    l1_loss,
    l2_loss,
    mean,
    no_grad,
    pixel_shuffle,
    pixel_unshuffle,
    relu,
    scale,
)


def direct_conv(x, w, b, p):
    """Brute-force reference: explicit loops over every output element."""
    n, ci, h, wd = x.shape
    co, _, k, _ = w.shape
    xp = np.zeros((n, ci, h + 2 * p, wd + 2 * p))
    xp[:, :, p:p + h, p:p + wd] = x
    ho, wo = h + 2 * p - k + 1, wd + 2 * p - k + 1
    out = np.zeros((n, co, ho, wo))
    for a in range(n):
        for o in range(co):
            for y in range(ho):
                for z in range(wo):
                    out[a, o, y, z] = np.sum(xp[a, :, y:y + k, z:z + k] * w[o]) + b[o]
    return out


def test_conv_ones_hand_computed():
    x = Tensor(np.ones((1, 1, 3, 3)))
    w = Tensor(np.ones((1, 1, 3, 3)))
    b = Tensor(np.zeros(1))
    out = conv2d(x, w, b, padding=1).data[0, 0]
    expected = np.array([[4, 6, 4], [6, 9, 6], [4, 6, 4]], dtype=np.float32)
    np.testing.assert_array_equal(out, expected)


def test_conv_dirac_is_identity():
    rng = np.random.default_rng(3)
    x = Tensor(rng.standard_normal((2, 3, 5, 7)))
    w = np.zeros((3, 3, 1, 1))
    w[np.arange(3), np.arange(3)] = 1.0
    out = conv2d(x, Tensor(w), Tensor(np.zeros(3)), padding=0)
    np.testing.assert_array_equal(out.data, x.data)


def test_conv_shape_rule():
    rng = np.random.default_rng(0)
    out = conv2d(Tensor(rng.standard_normal((2, 3, 8, 8))),
                 Tensor(rng.standard_normal((5, 3, 3, 3))), Tensor(np.zeros(5)), padding=1)
    assert out.shape == (2, 5, 8, 8)


@pytest.mark.parametrize("k,p", [(1, 0), (3, 0), (3, 1), (5, 2), (3, 2)])
def test_conv_matches_direct_loops(k, p):
    rng = np.random.default_rng(k * 10 + p)
    x = rng.standard_normal((2, 3, 6, 7))
    w = rng.standard_normal((4, 3, k, k))
    b = rng.standard_normal(4)
    out = conv2d(Tensor(x, dtype=np.float64), Tensor(w, dtype=np.float64),
                 Tensor(b, dtype=np.float64), padding=p)
    np.testing.assert_allclose(out.data, direct_conv(x, w, b, p), rtol=1e-12, atol=1e-12)


def test_conv_errors():
    x = Tensor(np.zeros((1, 2, 4, 4)))
    with pytest.raises(ShapeError, match="channel mismatch"):
        conv2d(x, Tensor(np.zeros((1, 3, 3, 3))), Tensor(np.zeros(1)), 1)
    with pytest.raises(ShapeError, match="larger than padded"):
        conv2d(x, Tensor(np.zeros((1, 2, 7, 7))), Tensor(np.zeros(1)), 1)


def test_relu_examples():
    x = Tensor(np.array([-1.0, 0.0, 2.0]), requires_grad=True)
    np.testing.assert_array_equal(relu(x).data, [0, 0, 2])

    neg = Tensor(-np.abs(np.random.default_rng(0).standard_normal((1, 2, 3, 3))) - 0.1,
                 requires_grad=True)
    with Tape() as tape:
        y = relu(neg)
        tape.backward(mean(y))
    assert not y.data.any()
    assert not neg.grad.any()

    pos = Tensor(np.abs(np.random.default_rng(1).standard_normal((1, 2, 3, 3))) + 0.1,
                 requires_grad=True)
    with Tape() as tape:
        y = relu(pos)
        tape.backward(mean(y))
    np.testing.assert_array_equal(y.data, pos.data)
    np.testing.assert_allclose(pos.grad * pos.size, 1.0, rtol=1e-6)


def test_add_scale_examples():
    a = Tensor(np.array([1.0, 2.0]))
    np.testing.assert_array_equal(add(a, Tensor(np.zeros(2))).data, a.data)
    np.testing.assert_array_equal(scale(a, 1.0).data, a.data)
    np.testing.assert_array_equal(add(a, Tensor(np.array([3.0, 4.0]))).data, [4, 6])
    with pytest.raises(ShapeError):
        add(a, Tensor(np.zeros(3)))


def test_concat_examples():
    a = Tensor(np.ones((1, 2, 2, 2)))
    b = Tensor(np.full((1, 2, 2, 2), 2.0))
    out = concat_channels([a, b]).data
    assert out.shape == (1, 4, 2, 2)
    assert (out[:, :2] == 1).all() and (out[:, 2:] == 2).all()
    assert concat_channels([Tensor(np.zeros((1, 4, 8, 8))), Tensor(np.zeros((1, 6, 8, 8)))]).shape == (1, 10, 8, 8)
    assert concat_channels([a]) is a
    with pytest.raises(ShapeError):
        concat_channels([a, Tensor(np.zeros((1, 2, 3, 2)))])


def test_concat_backward_slices_in_order():
    a = Tensor(np.ones((1, 1, 2, 2)), requires_grad=True)
    b = Tensor(np.ones((1, 2, 2, 2)), requires_grad=True)
    with Tape() as tape:
        y = concat_channels([a, b])
        w = np.arange(12, dtype=np.float32).reshape(1, 3, 2, 2)
        tape.backward(l2_loss(y, Tensor(y.data - w)))
    # d/dy mean((y - (y - w))^2) = 2 w / N
    np.testing.assert_allclose(a.grad, 2 * w[:, :1] / 12, rtol=1e-6)
    np.testing.assert_allclose(b.grad, 2 * w[:, 1:] / 12, rtol=1e-6)


def test_pixel_shuffle_examples():
    assert pixel_shuffle(Tensor(np.zeros((1, 4, 2, 2))), 2).shape == (1, 1, 4, 4)
    x = np.zeros((1, 4, 2, 2))
    for q in range(4):
        x[0, q] = q
    out = pixel_shuffle(Tensor(x), 2).data[0, 0]
    # brute-force enumeration of the index map
    tile = np.array([[0, 1], [2, 3]])
    np.testing.assert_array_equal(out, np.tile(tile, (2, 2)))
    y = Tensor(np.random.default_rng(0).standard_normal((2, 3, 4, 5)))
    np.testing.assert_array_equal(pixel_shuffle(y, 1).data, y.data)
    with pytest.raises(ShapeError):
        pixel_shuffle(Tensor(np.zeros((1, 3, 2, 2))), 2)


def test_pixel_shuffle_index_map_enumerated():
    rng = np.random.default_rng(5)
    r = 3
    x = rng.standard_normal((2, 2 * r * r, 3, 4)).astype(np.float32)
    out = pixel_shuffle(Tensor(x), r).data
    for n in range(2):
        for c in range(2):
            for h in range(3):
                for w in range(4):
                    for i in range(r):
                        for j in range(r):
                            assert out[n, c, h * r + i, w * r + j] == x[n, c * r * r + i * r + j, h, w]


@settings(max_examples=50, deadline=None)
@given(r=st.integers(1, 4), c=st.integers(1, 3), h=st.integers(1, 5), w=st.integers(1, 5),
       seed=st.integers(0, 2**16))
def test_pixel_shuffle_roundtrip_bit_exact(r, c, h, w, seed):
    x = np.random.default_rng(seed).standard_normal((2, c * r * r, h, w)).astype(np.float32)
    back = pixel_unshuffle(pixel_shuffle(Tensor(x), r), r).data
    assert back.tobytes() == x.tobytes()


def test_loss_examples():
    t = Tensor(np.array([5.0, 7.0]))
    assert l1_loss(t, t).item() == 0.0
    assert l2_loss(t, t).item() == 0.0
    pred = Tensor(np.array([1.0, -1.0]), requires_grad=True)
    zero = Tensor(np.zeros(2))
    assert l1_loss(pred, zero).item() == 1.0
    with Tape() as tape:
        loss = l2_loss(pred, zero)
        tape.backward(loss)
    assert loss.item() == 1.0
    np.testing.assert_array_equal(pred.grad, [1.0, -1.0])
    d = Tensor(np.array([2.0, 0.0]))
    assert l1_loss(d, zero).item() == 1.0
    assert l2_loss(d, zero).item() == 2.0
    with pytest.raises(ShapeError):
        l1_loss(d, Tensor(np.zeros(3)))


def test_backward_examples():
    x = Tensor(np.arange(6, dtype=np.float32), requires_grad=True)
    backward(mean(x))
    np.testing.assert_allclose(x.grad, 1 / 6)

    x = Tensor(np.array([3.0]), requires_grad=True)
    backward(l2_loss(x, Tensor(np.zeros(1))))
    np.testing.assert_array_equal(x.grad, [6.0])

    x = Tensor(np.ones(4), requires_grad=True)
    backward(mean(add(x, x)))
    np.testing.assert_allclose(x.grad, 2 / 4)


def test_backward_rejects_non_scalar():
    x = Tensor(np.ones((2, 2)), requires_grad=True)
    with pytest.raises(ValueError, match="scalar"):
        backward(scale(x, 2.0))


def test_identity_chain_grad_is_one():
    x = Tensor(np.random.default_rng(0).standard_normal((1, 2, 3, 3)), requires_grad=True)
    zero = Tensor(np.zeros((1, 2, 3, 3)))
    with Tape() as tape:
        y = x
        for _ in range(5):
            y = add(y, zero)
        tape.backward(scale(mean(y), float(y.size)))
    np.testing.assert_allclose(x.grad, 1.0, rtol=1e-6)


def test_frozen_leaf_gets_no_grad():
    x = Tensor(np.ones((1, 1, 3, 3)), requires_grad=True)
    w = Tensor(np.ones((1, 1, 3, 3)), requires_grad=False)
    b = Tensor(np.zeros(1), requires_grad=True)
    backward(mean(conv2d(x, w, b, 1)))
    assert w.grad is None
    assert x.grad is not None and b.grad is not None


def test_grads_accumulate_until_zeroed():
    x = Tensor(np.ones(3), requires_grad=True)
    backward(mean(x))
    backward(mean(x))
    np.testing.assert_allclose(x.grad, 2 / 3)
    x.zero_grad()
    backward(mean(x))
    np.testing.assert_allclose(x.grad, 1 / 3)


def test_intermediate_grads_populated():
    x = Tensor(np.ones((1, 1, 2, 2)), requires_grad=True)
    with Tape() as tape:
        h = scale(x, 3.0)
        y = relu(h)
        tape.backward(mean(y))
    assert h.grad is not None and y.grad is not None
    assert h.grad.shape == h.shape


def test_no_grad_records_nothing():
    x = Tensor(np.ones(3), requires_grad=True)
    with Tape() as tape:
        with no_grad():
            y = scale(x, 2.0)
        assert len(tape) == 0
        assert not y.requires_grad


def test_tape_order_is_topological():
    x = Tensor(np.ones((1, 1, 2, 2)), requires_grad=True)
    with Tape() as tape:
        a = scale(x, 2.0)
        b = relu(a)
        c = add(a, b)
        seen = {id(x)}
        for e in tape.entries:
            assert all(id(i) in seen for i in e.inputs if i.requires_grad)
            seen.add(id(e.out))
        tape.backward(mean(c))


def test_tape_determinism():
    def run():
        rng = np.random.default_rng(11)
        x = Tensor(rng.standard_normal((2, 3, 6, 6)), requires_grad=True)
        w = Tensor(rng.standard_normal((4, 3, 3, 3)), requires_grad=True)
        b = Tensor(rng.standard_normal(4), requires_grad=True)
        with Tape() as tape:
            loss = l1_loss(relu(conv2d(x, w, b, 1)), Tensor(np.zeros((2, 4, 6, 6))))
            tape.backward(loss)
        return loss.data.tobytes(), x.grad.tobytes(), w.grad.tobytes(), b.grad.tobytes()

    assert run() == run()
