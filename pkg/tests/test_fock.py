from math import comb, sqrt

import numpy as np
import pytest

from ghzlattice.fock import (
    FockState, SectorError, apply_ladder, enumerate_basis, sector_dimension,
)


def test_dimension_formula():
    for N, M in [(1, 1), (2, 2), (4, 4), (6, 6), (3, 5)]:
        assert enumerate_basis(N, M).dim == comb(N + 2 * M - 1, N) == sector_dimension(N, M)
    assert sector_dimension(6, 6) == 12376


def test_n2_m2_ordering():
    b = enumerate_basis(2, 2)
    assert str(b.state_at(0)) == "|2,0;0,0>"
    assert str(b.state_at(b.dim - 1)) == "|0,0;0,2>"
    # descending lexicographic order of occA || occB
    rows = [tuple(r) for r in b.occupations.tolist()]
    assert rows == sorted(rows, reverse=True)


def test_roundtrip_and_vectorised_lookup():
    b = enumerate_basis(4, 3)
    for k, s in enumerate(b):
        assert b.index_of(s) == k
    idx = b.indices_of(b.occupations[::-1])
    assert np.array_equal(idx, np.arange(b.dim)[::-1])


def test_index_of_wrong_sector():
    b = enumerate_basis(2, 2)
    with pytest.raises(SectorError):
        b.index_of(FockState((1, 1), (1, 0)))
    with pytest.raises(SectorError):
        b.index_of(FockState((1, 0, 0), (1, 0, 0)))


def test_invalid_inputs():
    with pytest.raises(ValueError):
        enumerate_basis(-1, 2)
    with pytest.raises(ValueError):
        enumerate_basis(2, 0)
    with pytest.raises(ValueError):
        enumerate_basis(30, 30)


def test_ladder_coefficients():
    s = FockState((0, 0), (2, 0))
    r = apply_ladder(s, 1, "B", "annihilate")
    assert r.coefficient == pytest.approx(sqrt(2))
    r2 = apply_ladder(r.state, 2, "B", "create")
    assert r2.state == FockState((0, 0), (1, 1))
    assert r2.coefficient == pytest.approx(1.0)
    assert apply_ladder(s, 2, "A", "annihilate").state is None
    assert apply_ladder(FockState((3,), (0,)), 1, "A", "create").coefficient == pytest.approx(2.0)
    with pytest.raises(IndexError):
        apply_ladder(s, 3, "A", "create")
    with pytest.raises(ValueError):
        apply_ladder(s, 1, "C", "create")
