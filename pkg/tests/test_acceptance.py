"""Acceptance criteria, one PASS/FAIL line per criterion.

The long-running criteria (1, 2, 7) share ramp runs through ``RUNS``.  Setting
GHZ_ACCEPTANCE_CACHE to a directory stores the run summaries there so a rerun
can skip the ramps; the default is to compute everything.
"""

import json
import math
import os
import time
from pathlib import Path

import numpy as np
import pytest

from ghzlattice import cli
from ghzlattice.bands import (
    LatticeGeometry, ParamsInterpolant, build_wannier, compute_hopping, compute_interaction,
    gaussian_approximations, reconstruct_band, solve_bands,
)
from ghzlattice.evolution import ground_state
from ghzlattice.fock import enumerate_basis
from ghzlattice.observables import (
    condensate_fraction, correlator, ghz_reference, phase_state_identities, product_state,
    site_variance, symmetric_superposition, two_phase_ghz,
)
from ghzlattice.operators import S_PLUS, S_ROT, HamiltonianParts, spin_rotation
from ghzlattice.oracle import REFERENCE_ROTATION, OracleParams, matrix_to_label_order, oracle_vs_numeric
from ghzlattice.testkit import (
    audit_lemma, audit_separability_bound, coherent_product_state, max_correlator_search,
)

BOUND6 = 2.0**-12
TAU_MAIN = 19100
# 5000..19000 are spaced closely enough (< pi change in every phase) to unwrap
SWEEP = [1000, 5000, 8000, 11000, 14000, 17000, 19000, 30000]
LINEAR_TAUS = [5000, 8000, 11000, 14000, 17000, 19000]
SMOKE_TAUS = [1000, 2500, 5000, 10000]

PHASE_TOL = 0.15
NORM_TOL = 1e-8
NUMBER_TOL = 1e-10

RUNS = {}
_TABLE = {}


def verdict(capsys, n, ok, detail):
    with capsys.disabled():
        print(f"\nCRITERION {n:>2} {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, detail


def circ_dist(a, b):
    return abs((a - b + math.pi) % (2 * math.pi) - math.pi)


def table():
    if "t" not in _TABLE:
        _TABLE["t"] = ParamsInterpolant.compute(3.0, 40.0, 200)
    return _TABLE["t"]


def _cache_path(N, tau):
    root = os.environ.get("GHZ_ACCEPTANCE_CACHE")
    if not root:
        return None
    g = LatticeGeometry()
    tag = f"N{N}_tau{tau:g}_dt{cli.DEFAULTS['ramp']['dt']:g}_a{g.a_AA:.8g}"
    return Path(root) / f"{tag}.json"


def ramp_run(tau, N=6):
    """Summary of the full protocol (ground state, pulse, ramp 3 -> 40)."""
    key = (N, tau)
    if key in RUNS:
        return RUNS[key]
    path = _cache_path(N, tau)
    if path is not None and path.exists():
        RUNS[key] = json.loads(path.read_text())
        return RUNS[key]
    cfg = cli.validate("ramp", {**cli.DEFAULTS["common"], **cli.DEFAULTS["ramp"],
                                "N": N, "M": N, "tau": float(tau)})
    t0 = time.time()
    result, obs = cli.protocol(cfg, float(tau), table())
    s = cli.ramp_summary(result, obs, cfg)
    s["runtime_s"] = time.time() - t0
    s = json.loads(json.dumps(s, default=cli._jsonable))
    RUNS[key] = s
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(s))
    return s


@pytest.mark.slow
def test_criterion_01_ghz_protocol(capsys):
    s = ramp_run(TAU_MAIN)
    d = s["decomposition"]
    c2_ok = 0.21 <= s["C2_final"] <= 0.25
    errs = {"phi42": circ_dist(d["phi42"], 0.0), "phi51": circ_dist(d["phi51"], math.pi / 2),
            "phi33": circ_dist(d["phi33"], math.pi / 2)}
    mags = [d[f"c{k}"] for k in ("60", "51", "42", "33")]
    mag_ok = all(abs(m - 0.125) <= 0.1 * 0.125 for m in mags)
    ok = c2_ok and max(errs.values()) < PHASE_TOL and mag_ok
    verdict(capsys, 1, ok,
            f"tau={TAU_MAIN}: C2={s['C2_final']:.4f} in [0.21, 0.25]; phase errors "
            + ", ".join(f"{k}={v:.3f}" for k, v in errs.items())
            + f" (< {PHASE_TOL}); |c| = " + ", ".join(f"{m:.4f}" for m in mags)
            + f"; bound broken from t={s['bound_broken_from']}; {s['runtime_s']:.0f}s")


@pytest.mark.slow
def test_criterion_02_bound_window(capsys):
    vals = {tau: ramp_run(tau)["C2_final"] for tau in SWEEP}
    above = all(vals[t] > 1.1 * BOUND6 for t in (5000, 19000, 30000))
    below = vals[1000] < 0.9 * BOUND6
    window = cli.bound_window(SWEEP, [vals[t] for t in SWEEP], BOUND6)
    ok = len(SWEEP) >= 8 and above and below
    verdict(capsys, 2, ok,
            f"{len(SWEEP)} taus, C2/bound = "
            + ", ".join(f"{t}:{vals[t] / BOUND6:.3g}" for t in SWEEP)
            + f"; observed window {window}")


def test_criterion_03_n4_smoke(capsys):
    t0 = time.time()
    table()
    vals = {tau: ramp_run(tau, N=4)["C2_final"] for tau in SMOKE_TAUS}
    elapsed = time.time() - t0
    best = max(vals, key=vals.get)
    ok = vals[best] > 2.0**-8 and elapsed < 300
    verdict(capsys, 3, ok,
            f"N=M=4 max C2={vals[best]:.4f} at tau={best} (> {2.0**-8:.4f}); {elapsed:.0f}s < 300s")


def test_criterion_04_oracle(capsys):
    p = OracleParams(1.0, 0.5, 0.475)
    t0 = time.time()
    d1 = oracle_vs_numeric(5.0, p, 1e-3)
    d2 = oracle_vs_numeric(5.0, p, 2e-3)
    order = math.log2(d2 / d1)
    ok = d1 < 1e-8 and abs(order - 4) <= 0.3
    verdict(capsys, 4, ok, f"deviation {d1:.3e} < 1e-8, Richardson order {order:.3f}; "
                           f"{time.time() - t0:.1f}s")


def test_criterion_05_algebra(capsys):
    b6 = enumerate_basis(6, 6)
    b2 = enumerate_basis(2, 2)
    errs = {}
    t0 = time.time()
    errs["ghz_plus"] = abs(correlator(ghz_reference(b6), b6, S_PLUS)[1] - 0.25)
    errs["ghz_rot"] = abs(correlator(two_phase_ghz(b6), b6, S_ROT)[1] - 0.25)
    s = np.full(6, 1 / math.sqrt(2))
    errs["coherent_fock"] = abs(correlator(product_state(s, s, b6), b6, S_PLUS)[1] - 2.0**-12)
    errs["coherent_closed"] = max(abs(abs(coherent_product_state(M).correlator(S_PLUS)) ** 2
                                      - 2.0 ** (-2 * M)) for M in range(2, 9))
    errs["identities"] = max(phase_state_identities(b6).values())
    psi = symmetric_superposition({"60": 1 / 8, "51": 1j / 8, "42": 1 / 8, "33": 1j / 8}, b6)
    errs["ghz_form"] = np.abs(psi - two_phase_ghz(b6)).max()
    R = matrix_to_label_order(spin_rotation(b2, "y", math.pi / 2).toarray())
    errs["rotation"] = np.abs(R - REFERENCE_ROTATION).max()
    J, U, V = 0.7, 0.3, 0.25
    H = matrix_to_label_order(HamiltonianParts.build(b2).assemble(J, U, U, V).toarray())
    r2 = 2 * math.sqrt(2) * J
    HAA = np.array([[U, -r2, 0], [-r2, 0, -r2], [0, -r2, U]])
    HAB = np.array([[V, -2 * J, -2 * J, 0], [-2 * J, 0, 0, -2 * J],
                    [-2 * J, 0, 0, -2 * J], [0, -2 * J, -2 * J, V]])
    errs["blocks"] = max(np.abs(H[:3, :3] - HAA).max(), np.abs(H[3:7, 3:7] - HAB).max(),
                         np.abs(H[7:, 7:] - HAA).max())
    tol = {"coherent_fock": 1e-10, "coherent_closed": 1e-10}
    ok = all(v < tol.get(k, 1e-12) for k, v in errs.items())
    verdict(capsys, 5, ok, ", ".join(f"{k}={v:.1e}" for k, v in errs.items())
            + f"; {time.time() - t0:.1f}s")


def test_criterion_06_audits(capsys):
    t0 = time.time()
    lines, ok = [], True
    for M in (2, 3):
        for name, e in (("plus", S_PLUS), ("rot", S_ROT)):
            r = audit_separability_bound(M, e, n_samples=10000, seed=M, n_mixtures=1000)
            lm = audit_lemma(M, e, 10000, seed=M + 10)
            ok &= r.passed and lm.passed
            lines.append(f"M={M} {name}: {r.max_value:.5g}<={r.bound:.5g}, "
                         f"lemma {lm.max_value:.5g}<={lm.bound:.3g}")
        s = max_correlator_search(M, S_PLUS, seed=M)
        top = max(s.value, s.stochastic_max)
        ok &= top <= 0.25 + 1e-6
        lines.append(f"M={M} max search {top:.6f}<=0.25")
    elapsed = time.time() - t0
    ok &= elapsed < 120
    verdict(capsys, 6, ok, "; ".join(lines) + f"; {elapsed:.0f}s")


def linear_r2(x, y):
    slope, icept = np.polyfit(x, y, 1)
    res = y - (slope * x + icept)
    return 1 - np.sum(res**2) / np.sum((y - y.mean()) ** 2), slope


@pytest.mark.slow
def test_criterion_07_phase_linearity(capsys):
    taus = np.array(LINEAR_TAUS, dtype=float)
    fits = {}
    for k in ("phi51", "phi42", "phi33"):
        phases = np.unwrap([ramp_run(t)["decomposition"][k] for t in LINEAR_TAUS])
        fits[k] = linear_r2(taus, phases)
    ok = len(taus) >= 6 and all(r2 > 0.99 for r2, _ in fits.values())
    verdict(capsys, 7, ok, f"{len(taus)} taus in [{taus[0]:g}, {taus[-1]:g}]: "
            + ", ".join(f"{k} R2={r2:.5f} slope={s:.3e}" for k, (r2, s) in fits.items()))


def test_criterion_08_phase_diagram(capsys):
    M = 5
    mott, sf = [], []
    for N in (3, 5, 8):
        parts = HamiltonianParts.build(enumerate_basis(N, M))
        for ju in (0.005, 0.01, 0.019, 1.5, 3.0):
            _, psi = ground_state(parts.assemble(ju, 1.0, 1.0, 0.95))
            if ju < 0.02 and N == M:
                mott.append(site_variance(psi, parts.basis, 1))
            if ju > 1:
                sf.append(condensate_fraction(psi, parts.basis))
    ok = max(mott) < 0.1 and min(sf) > 0.8
    verdict(capsys, 8, ok, f"M=5: max delta1 at nu=1, J/U<0.02 = {max(mott):.4f} (< 0.1); "
                           f"min f_c at J/U>1 over nu in {{0.6,1,1.6}} = {min(sf):.4f} (> 0.8)")


def test_criterion_09_band_module(capsys):
    geom = LatticeGeometry()
    rows = []
    for V in (3, 4, 5, 6, 8, 10, 12, 15, 20, 25, 30, 40):
        spec = solve_bands(V)
        w = build_wannier(spec)
        J1, J2 = compute_hopping(spec, 1), compute_hopping(spec, 2)
        U, U1 = compute_interaction(w, geom), compute_interaction(w, geom, (0, 0, 0, 1))
        Ug, Ja = gaussian_approximations(V, geom)
        recon = np.abs(reconstruct_band(spec, 30) - spec.E_q).max()
        rows.append((V, J1, J2, U, U1, Ug, Ja, recon))
    # deviation measured as |exact / approximation - 1|
    gauss_J = max(abs(J1 / Ja - 1) for V, J1, _, _, _, _, Ja, _ in rows if V <= 20)
    gauss_J_alt = max(abs(Ja / J1 - 1) for V, J1, _, _, _, _, Ja, _ in rows if V <= 20)
    recon = max(r[-1] for r in rows)
    gauss_U = max(abs(U / Ug - 1) for V, _, _, U, _, Ug, _, _ in rows if V >= 5)
    gauss_U_alt = max(abs(Ug / U - 1) for V, _, _, U, _, Ug, _, _ in rows if V >= 5)
    nnn_J = max(abs(J2 / J1) for _, J1, J2, *_ in rows)
    nnn_U = max(abs(U1 / U) for _, _, _, U, U1, *_ in rows)
    checks = {"J vs gaussian <= 0.35": gauss_J <= 0.35, "reconstruction < 1e-6": recon < 1e-6,
              "U vs V0^1/4 law <= 0.15": gauss_U <= 0.15, "|J2/J1| < 0.1": nnn_J < 0.1,
              "|U0001/U0000| < 0.1": nnn_U < 0.1}
    failed = [k for k, v in checks.items() if not v]
    verdict(capsys, 9, not failed,
            f"J rel dev {gauss_J:.3f} (relative to exact {gauss_J_alt:.3f}), recon {recon:.1e}, "
            f"U rel dev {gauss_U:.3f} (relative to exact {gauss_U_alt:.3f}), "
            f"max|J2/J1| {nnn_J:.4f}, max|U0001/U0000| {nnn_U:.4f}"
            + (f"; failed: {', '.join(failed)}" if failed else ""))


def test_criterion_10_conservation(capsys):
    if not any(N == 4 for N, _ in RUNS):
        for tau in SMOKE_TAUS:
            ramp_run(tau, N=4)
    norm = max(s["max_norm_error"] for s in RUNS.values())
    number = max(s["max_number_error"] for s in RUNS.values())
    ok = norm < NORM_TOL and number < NUMBER_TOL
    verdict(capsys, 10, ok, f"{len(RUNS)} ramps: max |norm-1| {norm:.2e} (< 1e-8), "
                            f"max |<N>-N| {number:.2e} (< 1e-10)")
