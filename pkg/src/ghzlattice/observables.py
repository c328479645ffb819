"""Observables on Fock-basis state vectors: condensate fraction, number variance,
spin correlators, quasimomentum occupations and the decomposition of N = M
states into symmetric one-per-site components.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from math import comb

import numpy as np

from .fock import BasisIndex
from .operators import (
    InadmissibleDirection,
    build_correlator_operator,
    is_admissible,
    mode_index,
    site_number,
    transfer,
)

RESIDUAL_FLAG = 0.05


class OccupancyError(ValueError):
    pass


def _check_norm(psi, tol=1e-6):
    n = np.linalg.norm(psi)
    if abs(n - 1) > tol:
        raise ValueError(f"state is not normalised (norm {n:.8f})")


def one_body_density(psi: np.ndarray, basis: BasisIndex) -> np.ndarray:
    """rho[s, i, j] = <alpha_i^+ alpha_j> for species s in (A, B), sites 0-based."""
    M = basis.M
    rho = np.zeros((2, M, M), dtype=complex)
    for s, species in enumerate("AB"):
        for i in range(1, M + 1):
            for j in range(i, M + 1):
                op = transfer(basis, mode_index(M, i, species), mode_index(M, j, species))
                val = np.vdot(psi, op @ psi)
                rho[s, i - 1, j - 1] = val
                rho[s, j - 1, i - 1] = np.conj(val)
    return rho


def condensate_fraction(psi: np.ndarray, basis: BasisIndex, rho=None) -> float:
    """(1 / N M) sum over species and site pairs of <alpha_i^+ alpha_j>."""
    _check_norm(psi)
    rho = one_body_density(psi, basis) if rho is None else rho
    return float(rho.sum().real / (basis.N * basis.M))


def site_variance(psi: np.ndarray, basis: BasisIndex, site: int) -> float:
    _check_norm(psi)
    n = site_number(basis, site)
    p = np.abs(psi) ** 2
    mean = p @ n
    return float(p @ n**2 - mean**2)


def quasimomentum_grid(M: int, d: float = math.pi) -> np.ndarray:
    """Allowed q = 2 pi k / (M d), k = 0..M-1."""
    return 2 * math.pi * np.arange(M) / (M * d)


def quasimomentum_occupation(psi: np.ndarray, basis: BasisIndex, q: float,
                             d: float = math.pi, rho=None) -> float:
    """<N_q^A + N_q^B> with alpha_q = M^{-1/2} sum_j exp(-i q x_j) alpha_j, x_j = j d."""
    M = basis.M
    k = q * M * d / (2 * math.pi)
    if abs(k - round(k)) > 1e-9:
        raise ValueError(f"q={q} is not on the lattice grid 2 pi k / (M d)")
    rho = one_body_density(psi, basis) if rho is None else rho
    x = np.arange(M) * d
    u = np.exp(1j * q * x) / math.sqrt(M)
    # <alpha_q^+ alpha_q> = sum_ij u_i rho_ij conj(u_j)
    val = sum(u @ rho[s] @ u.conj() for s in range(2))
    return float(val.real)


def correlator(state, basis: BasisIndex, e, op=None) -> tuple[complex, float]:
    """C_e = <prod_j S_e^(j)> and |C_e|^2.

    ``state`` is a vector or a list of (weight, vector) pairs describing a
    mixture of pure states.
    """
    e = np.asarray(e, dtype=complex)
    if not is_admissible(e):
        raise InadmissibleDirection(f"direction {e} has max |e.n| > 1")
    op = build_correlator_operator(basis, e) if op is None else op
    if isinstance(state, np.ndarray):
        val = complex(np.vdot(state, op @ state))
    else:
        weights = np.array([w for w, _ in state], dtype=float)
        if np.any(weights < 0) or abs(weights.sum() - 1) > 1e-12:
            raise ValueError("mixture weights must be non-negative and sum to one")
        val = complex(sum(w * np.vdot(v, op @ v) for w, v in state))
    return val, abs(val) ** 2


# -- one-particle-per-site structure ------------------------------------------

def one_per_site(basis: BasisIndex) -> np.ndarray:
    """Mask of Fock states with exactly one atom on every site."""
    return np.all(basis.occA + basis.occB == 1, axis=1)


def build_symmetric_state(N_A: int, N_B: int, basis: BasisIndex) -> tuple[np.ndarray, float]:
    """Unnormalised equal-weight sum over one-per-site states with N_A atoms of type A."""
    M = basis.M
    if N_A < 0 or N_B < 0 or N_A + N_B != M or basis.N != M:
        raise OccupancyError(f"need N_A + N_B = M = N, got ({N_A}, {N_B}) on {basis}")
    mask = one_per_site(basis) & (basis.occA.sum(axis=1) == N_A)
    v = mask.astype(complex)
    return v, math.sqrt(comb(M, N_A))


@dataclass
class DecompositionReport:
    """Paired coefficients c_{ab} = (c_{ab} + c_{ba}) / 2 of the symmetric states.

    ``raw`` keeps the unpaired coefficient of every |S_{a,M-a}> (keyed by a);
    phases are relative to c_{M0}, in [0, 2 pi).
    """

    magnitudes: dict
    phases: dict
    residual: float
    raw: dict
    asymmetry: float

    @property
    def flagged(self) -> bool:
        return self.residual > RESIDUAL_FLAG

    def label(self, a: int) -> str:
        M = len(self.raw) - 1
        return f"{a}{M - a}"

    def weight(self) -> float:
        M = len(self.raw) - 1
        return sum(comb(M, a) * abs(c) ** 2 for a, c in self.raw.items())

    def as_dict(self) -> dict:
        out = {f"c{k}": v for k, v in self.magnitudes.items()}
        out.update({f"phi{k}": v for k, v in self.phases.items()})
        out["residual"] = self.residual
        return out


def decompose_final_state(psi: np.ndarray, basis: BasisIndex) -> DecompositionReport:
    """Project on the |S_{a,M-a}> and pair each a with M - a."""
    M = basis.M
    if basis.N != M:
        raise OccupancyError("decomposition needs N = M")
    ones = one_per_site(basis)
    nA = basis.occA.sum(axis=1)
    raw = {}
    for a in range(M + 1):
        idx = np.flatnonzero(ones & (nA == a))
        raw[a] = complex(psi[idx].sum() / len(idx))
    resid = float(np.linalg.norm(psi) ** 2 - sum(comb(M, a) * abs(c) ** 2 for a, c in raw.items()))
    ref = raw[M] + raw[0]
    gauge = np.conj(ref) / abs(ref) if abs(ref) > 0 else 1.0
    mags, phases = {}, {}
    asym = 0.0
    for a in range(M, (M - 1) // 2, -1):
        c = (raw[a] + raw[M - a]) / 2
        asym = max(asym, abs(raw[a] - raw[M - a]))
        key = f"{a}{M - a}"
        mags[key] = abs(c)
        if a != M:
            phases[key] = float(np.angle(c * gauge) % (2 * math.pi))
    return DecompositionReport(mags, phases, max(resid, 0.0), raw, asym)


def reconstruct(report_or_coeffs, basis: BasisIndex) -> np.ndarray:
    """Inverse of the unpaired projection: sum_a c_a |S_{a,M-a}>."""
    raw = report_or_coeffs.raw if isinstance(report_or_coeffs, DecompositionReport) else report_or_coeffs
    out = np.zeros(basis.dim, dtype=complex)
    for a, c in raw.items():
        v, _ = build_symmetric_state(a, basis.M - a, basis)
        out += c * v
    return out


@dataclass
class PhaseState:
    phi: float
    vector: np.ndarray


def phase_state(phi: float, basis: BasisIndex) -> PhaseState:
    """prod_j (a_j^+ + e^{i phi} b_j^+) / sqrt 2 acting on the vacuum."""
    M = basis.M
    if basis.N != M:
        raise OccupancyError("phase states live in the N = M sector")
    ones = one_per_site(basis)
    nB = basis.occB.sum(axis=1)
    v = np.where(ones, np.exp(1j * phi * nB) / 2 ** (M / 2), 0.0)
    return PhaseState(phi, v.astype(complex))


def ghz_reference(basis: BasisIndex) -> np.ndarray:
    """(|1..1; 0..0> + |0..0; 1..1>) / sqrt 2."""
    M = basis.M
    if basis.N != M:
        raise OccupancyError("the reference GHZ state lives in the N = M sector")
    v = np.zeros(basis.dim, dtype=complex)
    ones = one_per_site(basis)
    nA = basis.occA.sum(axis=1)
    v[np.flatnonzero(ones & (nA == M))] = 1 / math.sqrt(2)
    v[np.flatnonzero(ones & (nA == 0))] = 1 / math.sqrt(2)
    return v


def product_state(alphas, betas, basis: BasisIndex) -> np.ndarray:
    """prod_j (alpha_j a_j^+ + beta_j b_j^+) |vac> in the N = M sector."""
    alphas = np.asarray(alphas, dtype=complex)
    betas = np.asarray(betas, dtype=complex)
    if basis.N != basis.M or len(alphas) != basis.M or len(betas) != basis.M:
        raise OccupancyError("product states need one amplitude pair per site and N = M")
    ones = one_per_site(basis)
    occA = basis.occA.astype(bool)
    amp = np.where(occA, alphas[None, :], betas[None, :]).prod(axis=1)
    return np.where(ones, amp, 0.0).astype(complex)


class ObservableSet:
    """Caches the operators needed for the per-step log of a ramp.

    Produces the columns ``fc, var1..varM, C2, N0`` and, for N = M, the
    decomposition columns ``c60.. phi51..``.
    """

    def __init__(self, basis: BasisIndex, e, decomposition: bool | None = None):
        self.basis = basis
        self.e = np.asarray(e, dtype=complex)
        self.C = build_correlator_operator(basis, self.e)
        self.n_sites = [site_number(basis, j) for j in range(1, basis.M + 1)]
        M = basis.M
        self._hop = [[transfer(basis, mode_index(M, i, s), mode_index(M, j, s))
                      for i in range(1, M + 1) for j in range(1, M + 1)] for s in "AB"]
        self.decomposition = (basis.N == basis.M) if decomposition is None else decomposition

    def density(self, psi):
        M = self.basis.M
        rho = np.empty((2, M, M), dtype=complex)
        for s in range(2):
            for k, op in enumerate(self._hop[s]):
                rho[s, k // M, k % M] = np.vdot(psi, op @ psi)
        return rho

    def correlator(self, psi) -> complex:
        return complex(np.vdot(psi, self.C @ psi))

    def __call__(self, psi) -> dict:
        rho = self.density(psi)
        p = np.abs(psi) ** 2
        out = {"fc": float(rho.sum().real / (self.basis.N * self.basis.M))}
        for j, n in enumerate(self.n_sites, start=1):
            m = p @ n
            out[f"var{j}"] = float(p @ n**2 - m * m)
        out["C2"] = abs(self.correlator(psi)) ** 2
        if self.decomposition:
            rep = decompose_final_state(psi, self.basis)
            out.update({f"phi{k}": v for k, v in rep.phases.items()})
            out.update({f"c{k}": v for k, v in rep.magnitudes.items()})
        out["N0"] = float(rho.sum().real / self.basis.M)  # q = 0 mode, equals N fc
        return out


def phase_state_identities(basis: BasisIndex) -> dict:
    """Max deviation of each expansion of the |S_{a,b}> pairs in phase states (M = 6).

    The pi/2 and 3 pi/2 terms enter with opposite signs in the (5,1) and
    (3,3) rows; with equal signs those rows do not hold.
    """
    if basis.M != 6 or basis.N != 6:
        raise OccupancyError("the phase-state expansions are written for N = M = 6")
    P = {k: phase_state(k * math.pi / 6, basis).vector for k in range(12)}
    S = {a: build_symmetric_state(a, 6 - a, basis)[0] for a in range(7)}
    third = P[2] + P[4] + P[8] + P[10]
    checks = {
        "60": (0.75 * (S[6] + S[0]), P[0] + P[6] + third),
        "51": (0.5 * (S[5] + S[1]), P[0] - P[6] - 1j * (P[3] - P[9])),
        "42": (0.75 * (S[4] + S[2]), 2 * P[0] + 2 * P[6] - third),
        "33": (0.5 * S[3], P[0] - P[6] + 1j * (P[3] - P[9])),
    }
    return {k: float(np.max(np.abs(lhs - rhs))) for k, (lhs, rhs) in checks.items()}


def two_phase_ghz(basis: BasisIndex) -> np.ndarray:
    """e^{i pi/4} (|0> - i|pi>) / sqrt 2 in phase states."""
    return np.exp(1j * math.pi / 4) / math.sqrt(2) * (
        phase_state(0.0, basis).vector - 1j * phase_state(math.pi, basis).vector)


def symmetric_superposition(coeffs: dict, basis: BasisIndex) -> np.ndarray:
    """sum over pairs c_{ab} (|S_{a,b}> + |S_{b,a}>), with the a = b term counted once.

    ``coeffs`` maps labels like "60" to complex amplitudes.
    """
    M = basis.M
    out = np.zeros(basis.dim, dtype=complex)
    for key, c in coeffs.items():
        a = int(key[0])
        out += c * build_symmetric_state(a, M - a, basis)[0]
        if a != M - a:
            out += c * build_symmetric_state(M - a, a, basis)[0]
    return out
