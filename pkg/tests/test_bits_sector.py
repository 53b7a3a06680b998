from math import comb

import numpy as np
import pytest
from hypothesis import given, strategies as st

from schwinger_skqd import bits
from schwinger_skqd.sector import SectorBasis


@pytest.mark.parametrize(
    "b, n, text",
    [(0b0011, 4, "0011"), (0b0101, 4, "0101"), (0b10, 2, "10"), (0, 3, "000")],
)
def test_label_roundtrip(b, n, text):
    assert bits.label(b, n) == text
    assert bits.parse(text) == b
    assert bits.parse(f"|{text}>", n) == b


def test_parse_rejects_garbage():
    with pytest.raises(ValueError):
        bits.parse("01a1")
    with pytest.raises(ValueError):
        bits.parse("0101", n_sites=6)


def test_z_values_convention():
    # bit set -> Z = -1; site 0 is the rightmost character
    assert bits.z_values(0b0011, 4) == [-1, -1, 1, 1]


def test_alternating_patterns():
    assert bits.label(bits.alternating(6, 1), 6) == "010101"
    assert bits.label(bits.alternating(4, 0), 4) == "1010"


def test_bit_matrix_columns_are_sites():
    m = bits.bit_matrix(np.array([0b0110]), 4)
    assert m.tolist() == [[0, 1, 1, 0]]


@pytest.mark.parametrize("n", [2, 4, 6, 8, 10, 12])
def test_sector_dimension_and_order(n):
    basis = SectorBasis(n)
    assert len(basis) == comb(n, n // 2)
    assert np.all(np.diff(basis.states) > 0)
    assert all(bits.weight(int(b)) == n // 2 for b in basis.states)


def test_sector_dimension_n20():
    assert len(SectorBasis(20)) == 184756


@given(st.integers(2, 24).filter(lambda n: n % 2 == 0), st.data())
def test_rank_unrank_roundtrip(n, data):
    basis = SectorBasis(n)
    r = data.draw(st.integers(0, len(basis) - 1))
    b = basis.unrank(r)
    assert bits.weight(b) == n // 2
    assert basis.rank(b) == r


@pytest.mark.parametrize("n, w", [(6, 2), (8, 4), (7, 3)])
def test_rank_matches_sorted_position(n, w):
    basis = SectorBasis(n, w)
    ranks = basis.rank(basis.states)
    assert np.array_equal(ranks, np.arange(len(basis)))


def test_rank_rejects_wrong_weight():
    with pytest.raises(ValueError):
        SectorBasis(4).rank(0b0111)


def test_unrank_out_of_range():
    with pytest.raises(IndexError):
        SectorBasis(4).unrank(6)
