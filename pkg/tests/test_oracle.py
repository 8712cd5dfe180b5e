import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pscnn.kws import kws_model
from pscnn.model import Conv1d, Dense, ModelSpec, Pool
from pscnn.oracle import count_macs, ref_conv1d, ref_infer, ref_pool


def naive_conv(x, w, stride, bias):
    """Second implementation: explicit loops, channel-outer order."""
    c_out, k, c_in = w.shape
    n = (x.shape[0] - k) // stride + 1
    out = np.zeros((n, c_out), dtype=np.uint8)
    for q in range(c_out):
        for t in range(n):
            s = 0 if bias is None else int(bias[q])
            for c in range(c_in):
                for j in range(k):
                    s += int(x[t * stride + j, c]) * int(w[q, j, c])
            out[t, q] = s >= 0
    return out


def test_single_weight():
    assert ref_conv1d([[1]], [[[1]]]).tolist() == [[1]]


def test_tie_is_one():
    assert ref_conv1d([[1, 1]], [[[1, -1]]]).tolist() == [[1]]


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(1, 5), st.integers(1, 5), st.integers(1, 3),
       st.booleans(), st.integers(0, 2**32 - 1))
def test_conv_matches_naive(k, c_in, c_out, stride, with_bias, seed):
    rng = np.random.default_rng(seed)
    x = rng.integers(0, 2, (k + int(rng.integers(0, 8)), c_in))
    w = rng.choice([-1, 1], (c_out, k, c_in))
    b = rng.integers(-3, 4, c_out) if with_bias else None
    assert np.array_equal(ref_conv1d(x, w, stride, b), naive_conv(x, w, stride, b))


def test_shape_mismatch():
    with pytest.raises(ValueError):
        ref_conv1d(np.zeros((4, 3)), np.ones((1, 1, 2)))
    with pytest.raises(ValueError):
        ref_conv1d(np.zeros((1, 2)), np.ones((1, 3, 2)))


def test_pool_examples():
    assert ref_pool([[1], [0], [0], [0]], 2).tolist() == [[1], [0]]
    x = np.random.default_rng(0).integers(0, 2, (8, 5))
    assert np.array_equal(ref_pool(x, 8), x.max(axis=0, keepdims=True))
    assert ref_pool([[0], [0], [1]], 2).tolist() == [[0], [1]]


def test_identity_weights_reproduce_input():
    # one +1 weight per output channel and a -1 bias: out = (x - 1 >= 0) = x
    x = np.random.default_rng(1).integers(0, 2, (30, 1)).astype(np.uint8)
    m = ModelSpec(30, 1, [Conv1d(1, 1, 1, weights=np.ones((1, 1, 1), dtype=np.int8),
                                 bias=np.array([-1]))] * 3)
    for out in ref_infer(m, x):
        assert np.array_equal(out, x)


def test_infer_chain_and_dense():
    rng = np.random.default_rng(2)
    m = ModelSpec(20, 3, [Conv1d(3, 4, 3, pool=2), Pool(2), Dense(5 * 4, 6)]).randomize(1)
    x = rng.integers(0, 2, (20, 3))
    outs = ref_infer(m, x)
    assert [o.shape for o in outs] == [(9, 4), (5, 4), (1, 6)]
    flat = outs[1].ravel().astype(int)
    assert np.array_equal(outs[2][0], (m.layers[2].weights @ flat >= 0).astype(np.uint8))
    with pytest.raises(ValueError):
        ref_infer(m, x[:5])


def test_macs_closed_form():
    m = ModelSpec(18, 64, [Conv1d(64, 128, 3)]).randomize()
    assert count_macs(m) == 16 * 128 * 3 * 64 == 393_216


def test_kws_reconstruction_aggregates():
    m = kws_model()
    assert m.n_weights == 667_648                       # 652K
    macs = count_macs(m)
    assert macs == 349_586_432
    assert abs(macs - 350e6) / 350e6 < 0.0012
    assert m.layers[-1].out_features == 12
