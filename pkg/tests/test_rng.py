import numpy as np
import pytest

from taskcascade import _kernels
from taskcascade.rng import CASCADE, RANKING, RngStream, row_width, stream_key, uniforms


def test_row_width():
    assert [row_width(n) for n in (0, 1, 4, 5, 723)] == [4, 4, 4, 8, 724]


def test_runs_are_addressable():
    full = uniforms(7, 3, CASCADE, 50, 11)
    assert np.array_equal(uniforms(7, 3, CASCADE, range(20, 30), 11), full[20:30])
    assert np.array_equal(RngStream(7, 3, 42).cascade_uniforms(11), full[42])


def test_streams_distinct():
    a = uniforms(7, 3, CASCADE, 5, 9)
    assert not np.array_equal(a, uniforms(7, 3, RANKING, 5, 9))
    assert not np.array_equal(a, uniforms(7, 4, CASCADE, 5, 9))
    assert not np.array_equal(a, uniforms(8, 3, CASCADE, 5, 9))
    assert np.array_equal(a, uniforms(7, 3, CASCADE, 5, 9))


def test_noncontiguous_runs_rejected():
    with pytest.raises(ValueError):
        uniforms(0, 0, CASCADE, range(0, 10, 2), 5)


@pytest.mark.parametrize("master,seed,purpose,n", [(0, 0, CASCADE, 3), (2018, 17, RANKING, 13),
                                                   (2**70 + 5, 722, CASCADE, 723)])
def test_compiled_philox_matches_numpy(master, seed, purpose, n):
    key = stream_key(master, seed, purpose)
    width = row_width(n)
    ref = uniforms(master, seed, purpose, range(3, 9), n)
    got = np.array([[_kernels.uniform_at(key, k * width + j) for j in range(n)] for k in range(3, 9)])
    assert np.array_equal(got, ref)


def test_uniform_range():
    u = uniforms(1, 1, CASCADE, 200, 50)
    assert u.min() >= 0.0 and u.max() < 1.0
    assert abs(u.mean() - 0.5) < 0.01
