import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pscnn.isa import Pointer
from pscnn.memory import FeatureSramSystem
from pscnn.oracle import ref_pool
from pscnn.pwb import PoolState, bypass_pool, pool_flush, pool_step, pooled_length


def vec(*ones):
    v = np.zeros(128, dtype=np.uint8)
    v[list(ones)] = 1
    return v


def test_window2_or():
    s = PoolState(2)
    s, e = pool_step(s, vec())
    assert e is None
    s, e = pool_step(s, vec(0))
    assert e[0] == 1 and e.sum() == 1 and s.fill == 0


def test_window1_pass_through():
    v = vec(3, 77)
    _, e = pool_step(PoolState(1), v)
    assert np.array_equal(e, v)


def test_bad_window():
    with pytest.raises(ValueError):
        PoolState(3)


@settings(max_examples=50)
@given(st.sampled_from([1, 2, 4, 8]), st.integers(1, 40), st.integers(0, 2**32 - 1))
def test_stream_matches_brute_force(window, n, seed):
    xs = np.random.default_rng(seed).integers(0, 2, (n, 128)).astype(np.uint8)
    s, out = PoolState(window), []
    for v in xs:
        s, e = pool_step(s, v)
        if e is not None:
            out.append(e)
    s, e = pool_flush(s)
    if e is not None:
        out.append(e)
    assert len(out) == pooled_length(n, window)
    # brute-force max over each window
    expect = [xs[i:i + window].max(axis=0) for i in range(0, n, window)]
    assert np.array_equal(np.array(out), np.array(expect))


def test_window4_eight_vectors():
    xs = np.random.default_rng(5).integers(0, 2, (8, 128)).astype(np.uint8)
    s, out = PoolState(4), []
    for v in xs:
        s, e = pool_step(s, v)
        if e is not None:
            out.append(e)
    assert len(out) == 2
    assert np.array_equal(out[1], np.bitwise_or.reduce(xs[4:]))


def setup(n, wpp=1):
    m = FeatureSramSystem()
    m.apply_pointer(Pointer(0, 0, 1, 0))
    words = np.random.default_rng(n).integers(0, 2, (n * wpp, 128)).astype(np.uint8)
    m.data[0, :n * wpp] = words
    return m, words


def test_bypass_abcd():
    m, w = setup(4)
    cycles = bypass_pool(m, 4, 2, 1, 0)
    assert np.array_equal(m.data[1, 0], w[0] | w[1])
    assert np.array_equal(m.data[1, 1], w[2] | w[3])
    assert cycles == 6


def test_bypass_counters():
    m, _ = setup(512)
    cycles = bypass_pool(m, 512, 8, 1, 0)
    assert (m.reads[0], m.writes[1], cycles) == (512, 64, 576)


def test_bypass_ragged():
    m, w = setup(3)
    bypass_pool(m, 3, 2, 1, 0)
    assert np.array_equal(m.data[1, 1], w[2])
    assert m.writes[1] == 2


def test_bypass_multiword_matches_oracle():
    m, w = setup(10, wpp=3)
    bypass_pool(m, 10, 4, 3, 0)
    fmap = w.reshape(10, 384)
    expect = ref_pool(fmap, 4).reshape(-1, 128)
    assert np.array_equal(m.data[1, :len(expect)], expect)
