import numpy as np
import pytest

from ghzlattice.fock import enumerate_basis
from ghzlattice.oracle import (
    OracleMismatch, OracleParams, analytic_state, initial_coefficients, oracle_vs_numeric,
    label_order_check, prepared_state, to_label_order, write_oracle_csv,
)

P = OracleParams(1.0, 0.5, 0.475)


def test_permutation_table():
    label_order_check(enumerate_basis(2, 2))


def test_initial_state():
    assert np.abs(analytic_state(0.0, P) - initial_coefficients(P)).max() < 1e-14
    _, _, psi = prepared_state(P)
    assert np.abs(to_label_order(psi) - initial_coefficients(P)).max() < 1e-12


def test_norm_and_symmetry():
    rng = np.random.default_rng(0)
    for t in rng.uniform(0, 50, 100):
        c = analytic_state(t, P)
        assert np.sum(np.abs(c) ** 2) == pytest.approx(1.0, abs=1e-12)
        assert c[2] == c[7] == c[9] == c[0] and c[5] == c[4] and c[6] == c[3] and c[8] == c[1]


def test_against_matrix_exponential():
    from scipy.linalg import expm
    _, H, psi = prepared_state(P)
    for t in (0.7, 3.3):
        exact = to_label_order(expm(-1j * t * H.toarray()) @ psi)
        assert np.abs(exact - analytic_state(t, P)).max() < 1e-12


def test_weak_hopping_limit():
    c = analytic_state(2.0, OracleParams(1e-6, 0.5, 0.475))
    assert np.abs(c[[0, 2, 3, 6, 7, 9]]).max() < 1e-5


def test_rk4_agreement_and_order():
    d1 = oracle_vs_numeric(5.0, P, 1e-3)
    d2 = oracle_vs_numeric(5.0, P, 2e-3)
    assert d1 < 1e-8
    assert np.log2(d2 / d1) == pytest.approx(4.0, abs=0.3)
    assert oracle_vs_numeric(0.0, P, 1e-3) < 1e-12
    with pytest.raises(OracleMismatch):
        oracle_vs_numeric(5.0, P, 0.2, tol=1e-8)


def test_csv(tmp_path):
    write_oracle_csv(tmp_path / "o.csv", 1.0, P, 1e-2, n_samples=5)
    lines = (tmp_path / "o.csv").read_text().splitlines()
    assert lines[0].startswith("path,t,|c1|^2") and len(lines) == 11
    with pytest.raises(ValueError):
        OracleParams(0.0, 1.0, 1.0)
