import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st
from hypothesis.extra.numpy import arrays

from cbfshield.saliency import (
    DimensionMismatchError,
    InvalidMapError,
    ZeroVarianceError,
    attention_mass,
    normalized_entropy,
    pearson_alignment,
    read_map,
    read_map_csv,
    write_map,
)
from oracles import entropy_oracle, mass_oracle, pearson_oracle

DATA = Path(__file__).parent / "data"
MAP_A = read_map_csv(DATA / "map_a.csv")
MAP_B = read_map_csv(DATA / "map_b.csv")
MAP_C = read_map_csv(DATA / "map_c.csv")
MASK_A = read_map_csv(DATA / "mask_a.csv") != 0


# -- examples -----------------------------------------------------------------

def test_uniform_is_one():
    assert normalized_entropy(np.ones((8, 8))) == pytest.approx(1.0, abs=1e-15)


def test_one_hot_is_zero():
    m = np.zeros((8, 8))
    m[3, 5] = 2.0
    assert normalized_entropy(m) == 0.0


def test_two_by_two_example():
    expected = -(0.25 * math.log(0.25) * 2 + 0.5 * math.log(0.5)) / math.log(4)
    assert normalized_entropy([[1, 1], [2, 0]]) == pytest.approx(expected, abs=1e-15)
    assert expected == pytest.approx(0.75)


def test_single_pixel():
    assert normalized_entropy([[3.0]]) == 0.0


def test_pearson_self_and_anti():
    assert pearson_alignment(MAP_A, MAP_A) == pytest.approx(1.0, abs=1e-15)
    assert pearson_alignment(MAP_A, 5.0 - MAP_A) == pytest.approx(-1.0, abs=1e-15)


def test_mass_examples():
    m = np.ones((10, 10))
    assert attention_mass(MAP_A, np.ones((3, 3), bool)) == 1.0
    assert attention_mass(MAP_A, np.zeros((3, 3), bool)) == 0.0
    mask = np.zeros(100, bool)
    mask[[3, 8, 11, 17, 22, 29, 31, 40, 46, 53, 58, 61, 70, 77, 85, 92, 99]] = True
    assert attention_mass(m, mask.reshape(10, 10)) == pytest.approx(0.17, abs=1e-15)


# -- fixture oracles ----------------------------------------------------------

@pytest.mark.parametrize("m", [MAP_A, MAP_B, MAP_C], ids=["a", "b", "c"])
def test_entropy_fixture_oracle(m):
    assert abs(normalized_entropy(m) - entropy_oracle(m.tolist())) <= 1e-12


def test_pearson_fixture_oracle():
    for x, y in ((MAP_A, MAP_B), (MAP_A, MAP_C), (MAP_B, MAP_C)):
        assert abs(pearson_alignment(x, y) - pearson_oracle(x.tolist(), y.tolist())) <= 1e-12


def test_mass_fixture_oracle():
    for m in (MAP_A, MAP_B, MAP_C):
        assert abs(attention_mass(m, MASK_A) - mass_oracle(m.tolist(), MASK_A.tolist())) <= 1e-12


# -- properties --------------------------------------------------------------

shapes = st.tuples(st.integers(1, 12), st.integers(1, 12))
weights = shapes.flatmap(lambda s: arrays(np.float64, s, elements=st.floats(0.0, 1e3)))
valid_maps = weights.filter(lambda a: np.any(a > 0))


@given(valid_maps, st.data())
def test_bounds(m, data):
    assert 0.0 <= normalized_entropy(m) <= 1.0
    mask = data.draw(arrays(np.bool_, m.shape))
    assert 0.0 <= attention_mass(m, mask) <= 1.0
    ref = data.draw(arrays(np.float64, m.shape, elements=st.floats(0.0, 1e3)))
    assume(np.any(ref > 0))
    try:
        r = pearson_alignment(m, ref)
    except ZeroVarianceError:
        # constant input, or a spread so tiny its square underflows
        assert np.var(m) == 0.0 or np.var(ref) == 0.0
    else:
        assert -1.0 <= r <= 1.0


def test_random_maps_against_oracles(rng):
    for _ in range(1000):
        h, w = rng.integers(1, 10, 2)
        m = rng.uniform(0, 1, (h, w)) * (rng.uniform(size=(h, w)) < 0.8)
        m.flat[0] += 0.1
        ref = rng.uniform(0, 1, (h, w))
        mask = rng.uniform(size=(h, w)) < 0.4
        e = normalized_entropy(m)
        assert 0.0 <= e <= 1.0 and abs(e - entropy_oracle(m.tolist())) <= 1e-12
        assert abs(attention_mass(m, mask) - mass_oracle(m.tolist(), mask.tolist())) <= 1e-12
        if m.size > 1 and np.ptp(m) > 0:
            r = pearson_alignment(m, ref)
            assert -1.0 <= r <= 1.0 and abs(r - pearson_oracle(m.tolist(), ref.tolist())) <= 1e-12
        alpha = float(np.exp(rng.uniform(-5, 5)))
        assert normalized_entropy(alpha * m) == pytest.approx(e, abs=1e-12)
        assert attention_mass(alpha * m, mask) == pytest.approx(attention_mass(m, mask), abs=1e-12)
        if m.size > 1 and np.ptp(m) > 0:
            assert pearson_alignment(alpha * m, ref) == pytest.approx(r, abs=1e-12)


@given(valid_maps, st.floats(1e-3, 1e3), st.randoms(use_true_random=False))
def test_scale_and_permutation(m, alpha, rnd):
    e = normalized_entropy(m)
    assert normalized_entropy(alpha * m) == pytest.approx(e, abs=1e-12)
    perm = list(range(m.size))
    rnd.shuffle(perm)
    shuffled = m.ravel()[perm].reshape(m.shape)
    assert normalized_entropy(shuffled) == pytest.approx(e, abs=1e-12)
    mask = (np.arange(m.size) % 3 == 0).reshape(m.shape)
    assert attention_mass(shuffled, mask.ravel()[perm].reshape(m.shape)) == pytest.approx(attention_mass(m, mask), abs=1e-12)


# -- errors ------------------------------------------------------------------

def test_errors_are_distinct():
    with pytest.raises(InvalidMapError):
        normalized_entropy(np.zeros((3, 3)))
    with pytest.raises(InvalidMapError):
        normalized_entropy([[1.0, -0.1]])
    with pytest.raises(InvalidMapError):
        normalized_entropy([[1.0, np.nan]])
    with pytest.raises(InvalidMapError):
        normalized_entropy([1.0, 2.0])
    with pytest.raises(ZeroVarianceError):
        pearson_alignment(np.ones((3, 3)), MAP_A)
    with pytest.raises(DimensionMismatchError):
        pearson_alignment(MAP_A, np.ones((3, 4)))
    with pytest.raises(DimensionMismatchError):
        attention_mass(MAP_A, np.ones((2, 3), bool))
    assert not issubclass(ZeroVarianceError, DimensionMismatchError)


# -- files ---------------------------------------------------------------------

def test_binary_roundtrip(tmp_path):
    write_map(tmp_path / "a.smap", MAP_A)
    blob = (tmp_path / "a.smap").read_bytes()
    assert blob[:4] == b"SMAP" and len(blob) == 12 + 4 * 9
    np.testing.assert_array_equal(read_map(tmp_path / "a.smap"), MAP_A.astype(np.float32))


def test_binary_errors(tmp_path):
    (tmp_path / "short").write_bytes(b"SMA")
    (tmp_path / "magic").write_bytes(b"XMAP" + bytes(8))
    write_map(tmp_path / "cut", MAP_A)
    (tmp_path / "cut").write_bytes((tmp_path / "cut").read_bytes()[:-2])
    for name in ("short", "magic", "cut"):
        with pytest.raises(InvalidMapError):
            read_map(tmp_path / name)


def test_csv_dispatch():
    np.testing.assert_array_equal(read_map(DATA / "map_b.csv"), MAP_B)
    assert MAP_B.shape == (3, 3)
