import numpy as np

from stabilab.seeding import child_seed, rademacher_signs, stream_key, substream


def test_stream_key_distinguishes_paths():
    assert stream_key(1, "a") != stream_key(1, "b")
    assert stream_key(1, "a") != stream_key(2, "a")
    assert stream_key(1, "a", 1) != stream_key(1, "a", 2)
    # Labels are path components, not concatenated text.
    assert stream_key(1, "ab") != stream_key(1, "a", "b")


def test_child_seed_range_and_determinism():
    s = child_seed(42, "stage", 7)
    assert 0 <= s < 2**63
    assert s == child_seed(42, "stage", 7)


def test_substream_replayable():
    a = substream(5, "x").normal(size=8)
    b = substream(5, "x").normal(size=8)
    c = substream(5, "y").normal(size=8)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_rademacher_signs_values():
    signs = rademacher_signs(substream(0, "signs"), 1000)
    assert set(np.unique(signs)) == {-1.0, 1.0}
    assert signs.dtype == np.float64
    block = rademacher_signs(substream(0, "signs"), (4, 3))
    assert block.shape == (4, 3)
