import numpy as np
import pytest

from app.errors import StreamExhaustedError, UsageError
from app.models.sampling import StreamKind
from app.services.uniform_streams import LhsStream, SobolStream, lhs_block, make_stream

KINDS = ["srs", "lhs", "sobol"]


def test_sobol_first_points():
    s = make_stream("sobol", 2, randomize=False)
    pts = s.next_block(3)
    assert pts.tolist() == [[0.5, 0.5], [0.75, 0.25], [0.25, 0.75]]
    assert s.points_emitted == 3
    assert s.coordinates_emitted == 6


@pytest.mark.parametrize("kind", KINDS)
def test_points_lie_in_unit_cube(kind):
    pts = make_stream(kind, 4, seed=2, block_size=64).next_block(500)
    assert pts.shape == (500, 4)
    assert np.all(pts >= 0) and np.all(pts < 1)


@pytest.mark.parametrize("kind", KINDS)
def test_skip_matches_consumed_prefix(kind):
    full = make_stream(kind, 3, seed=5, block_size=16).next_block(40)
    skipped = make_stream(kind, 3, seed=5, skip=25, block_size=16).next_block(15)
    assert np.array_equal(skipped, full[25:])


@pytest.mark.parametrize("kind", KINDS)
def test_block_splitting_is_invisible(kind):
    a = make_stream(kind, 2, seed=7, block_size=32)
    b = make_stream(kind, 2, seed=7, block_size=32)
    pieces = np.vstack([a.next_block(3), a.next_block(0), a.next_point()[None], a.next_block(60)])
    assert np.array_equal(pieces, b.next_block(64))
    assert a.position == 64


@pytest.mark.parametrize("kind", KINDS)
def test_seeds_differ(kind):
    assert not np.array_equal(make_stream(kind, 2, seed=1).next_block(8),
                              make_stream(kind, 2, seed=2).next_block(8))


def test_shuffled_sobol_seeds_differ():
    a = make_stream("sobol", 2, seed=1, shuffle=True).next_block(8)
    b = make_stream("sobol", 2, seed=2, shuffle=True).next_block(8)
    assert not np.array_equal(a, b)


def test_shuffled_skip_matches_consumed_prefix():
    full = make_stream("sobol", 3, seed=5, block_size=16, shuffle=True).next_block(40)
    skipped = make_stream("sobol", 3, seed=5, skip=25, block_size=16, shuffle=True).next_block(15)
    assert np.array_equal(skipped, full[25:])


def test_lhs_block_is_stratified():
    block = lhs_block(50, 3, seed=4)
    for j in range(3):
        assert sorted(np.floor(block[:, j] * 50).astype(int)) == list(range(50))


def test_lhs_stream_blocks_are_stratified():
    s = LhsStream(2, seed=1, block_size=20)
    s.next_block(20)
    second = s.next_block(20)
    for j in range(2):
        assert sorted(np.floor(second[:, j] * 20).astype(int)) == list(range(20))


def test_lhs_without_refill_is_exhausted():
    s = LhsStream(1, seed=0, block_size=8, refill=False)
    s.next_block(8)
    with pytest.raises(StreamExhaustedError):
        s.next_point()


def test_scrambled_sobol():
    raw = SobolStream(2, randomize=False).next_block(64)
    scrambled = SobolStream(2, seed=3).next_block(64)
    again = SobolStream(2, seed=3).next_block(64)
    assert np.array_equal(scrambled, again)
    assert not np.array_equal(raw, scrambled)
    assert np.all(scrambled >= 0) and np.all(scrambled < 1)
    # an aligned block of 64 points is stratified in each coordinate
    for j in range(2):
        assert sorted(np.floor(scrambled[:, j] * 64).astype(int)) == list(range(64))


def test_shuffle_permutes_each_block():
    plain = SobolStream(2, seed=3, block_size=64).next_block(128)
    shuffled = SobolStream(2, seed=3, block_size=64, shuffle=True).next_block(128)
    for lo in (0, 64):
        a, b = plain[lo:lo + 64], shuffled[lo:lo + 64]
        assert sorted(map(tuple, a)) == sorted(map(tuple, b))
        assert not np.array_equal(a, b)


def test_lhs_ecdf_matches_uniform():
    u = np.sort(lhs_block(1000, 1, seed=9)[:, 0])
    ecdf_gap = np.max(np.maximum(np.arange(1, 1001) / 1000 - u, u - np.arange(1000) / 1000))
    assert ecdf_gap <= 1 / 1000 + 1 / 1000


def test_stream_arguments():
    with pytest.raises(UsageError):
        make_stream("srs", 0)
    with pytest.raises(UsageError):
        make_stream("sobol", 65)
    with pytest.raises(UsageError):
        make_stream("lhs", 2, skip=-1)
    with pytest.raises(UsageError):
        make_stream("srs", 2).next_block(-1)
    assert make_stream(StreamKind.LHS, 1).kind == StreamKind.LHS


def _radical_inverse(i: int, bits: int = 32) -> float:
    out = 0
    for _ in range(bits):
        out = (out << 1) | (i & 1)
        i >>= 1
    return out / float(1 << bits)


def test_sobol_first_dimension_is_gray_coded_van_der_corput():
    pts = make_stream("sobol", 1, randomize=False).next_block(1024)[:, 0]
    expected = [_radical_inverse(i ^ (i >> 1)) for i in range(1, 1025)]
    assert pts.tolist() == expected
