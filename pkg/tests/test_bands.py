import numpy as np
import pytest

from ghzlattice.bands import (
    AB_RATIO, LatticeGeometry, ParamsInterpolant, build_wannier, compute_hopping,
    compute_interaction, gaussian_approximations, lattice_params, read_params_csv,
    reconstruct_band, solve_bands, wannier_overlap, write_params_csv,
)

UNIT = LatticeGeometry(a_AA=np.pi, a_BB=np.pi, a_AB=np.pi)  # eta = 1


@pytest.fixture(scope="module")
def v10():
    s = solve_bands(10.0)
    return s, build_wannier(s)


def test_hopping_reference_values():
    # frozen from the plane-wave solver; J(10) is the textbook 0.0192 E_R
    for V0, J in [(3, 0.11102731903486766), (10, 0.0191824521472333), (40, 0.0001068693519645017)]:
        assert compute_hopping(solve_bands(V0), 1) == pytest.approx(J, rel=1e-9)


def test_shallow_limit_free_band():
    s = solve_bands(1e-6)
    assert s.E_q.max() == pytest.approx(1.0, abs=1e-5)  # q^2 at the zone edge


def test_convergence_in_cutoff(v10):
    s, w = v10
    s2 = solve_bands(10.0, n_pw=41, n_q=256)
    w2 = build_wannier(s2)
    J1, J2 = compute_hopping(s, 1), compute_hopping(s2, 1)
    assert abs(J1 - J2) / J1 < 1e-6
    U1, U2 = compute_interaction(w, UNIT), compute_interaction(w2, UNIT)
    assert abs(U1 - U2) / U1 < 1e-6


def test_wannier_orthonormal(v10):
    _, w = v10
    assert wannier_overlap(w, 0) == pytest.approx(1.0, abs=1e-9)
    for n in (1, 2):
        assert abs(wannier_overlap(w, n)) < 1e-6


def test_band_reconstruction(v10):
    s, _ = v10
    assert np.abs(reconstruct_band(s, 30) - s.E_q).max() < 1e-6


def test_gaussian_limits():
    U_g, J_app = gaussian_approximations(10.0, UNIT)
    assert U_g == pytest.approx(np.sqrt(32 / np.pi) * 10 ** 0.25)
    assert J_app == pytest.approx(4 / np.sqrt(np.pi) * 10 ** 0.75 * np.exp(-2 * np.sqrt(10)))
    with pytest.raises(ValueError):
        gaussian_approximations(0.0, UNIT)


def test_params_and_table_roundtrip(tmp_path):
    geom = LatticeGeometry()
    rows = [lattice_params(v, geom) for v in (3.0, 5.0, 8.0, 12.0)]
    for r in rows:
        assert r.U_AB == pytest.approx(AB_RATIO * r.U_AA)
        assert r.U_BB == r.U_AA
    Js = [r.J for r in rows]
    Us = [r.U_AA for r in rows]
    assert all(np.diff(Js) < 0) and all(np.diff(Us) > 0)
    write_params_csv(rows, tmp_path / "t.csv")
    back = read_params_csv(tmp_path / "t.csv")
    assert back[2].J == pytest.approx(rows[2].J, rel=1e-11)
    tab = ParamsInterpolant(back)
    assert tab(5.0).J == pytest.approx(rows[1].J, rel=1e-10)
    with pytest.raises(ValueError):
        tab(2.0)


def test_interpolant_accuracy():
    tab = ParamsInterpolant.compute(3.0, 40.0, 200)
    exact = lattice_params(17.3, LatticeGeometry())
    p = tab(17.3)
    assert abs(p.J - exact.J) / exact.J < 1e-6
    assert abs(p.U_AA - exact.U_AA) / exact.U_AA < 1e-6


def test_input_validation():
    with pytest.raises(ValueError):
        solve_bands(5.0, n_pw=20)
    with pytest.raises(ValueError):
        solve_bands(5.0, n_q=8)
    with pytest.raises(ValueError):
        compute_hopping(solve_bands(5.0, n_q=32), 20)
