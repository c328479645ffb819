"""Sparse operators in the Fock basis: Bose-Hubbard pieces, spins, correlators."""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np
import scipy.sparse as sp

from .fock import BasisIndex

HERMITIAN_TOL = 1e-12


class InadmissibleDirection(ValueError):
    """Direction vector violates max_{|n|=1} |e.n| <= 1."""


def mode_index(M: int, site: int, species: str) -> int:
    """Column of ``BasisIndex.occupations`` holding the given (1-based) site."""
    if not 1 <= site <= M:
        raise IndexError(f"site {site} outside 1..{M}")
    return site - 1 if species == "A" else M + site - 1


def transfer(basis: BasisIndex, dst: int, src: int) -> sp.csr_matrix:
    """Matrix of ``c_dst^dagger c_src`` for mode columns ``dst``, ``src``."""
    occ = basis.occupations
    D = basis.dim
    if dst == src:
        return sp.diags(occ[:, src].astype(float), format="csr")
    cols = np.flatnonzero(occ[:, src] > 0)
    new = occ[cols].astype(np.int64)
    n_src = new[:, src].copy()
    n_dst = new[:, dst].copy()
    new[:, src] -= 1
    new[:, dst] += 1
    rows = basis.indices_of(new)
    vals = np.sqrt(n_src * (n_dst + 1.0))
    return sp.csr_matrix((vals, (rows, cols)), shape=(D, D))


def check_hermitian(op, tol: float = HERMITIAN_TOL) -> float:
    """Return max |A - A^dagger|; raise if it exceeds ``tol``."""
    diff = op - op.conj().T
    resid = float(abs(diff).max()) if diff.nnz else 0.0
    if resid > tol:
        raise ValueError(f"operator is not hermitian: residual {resid:.3e}")
    return resid


def neighbour_pairs(M: int, periodic: bool = True) -> list[tuple[int, int]]:
    """Bonds (i, i+1), 1-based; with periodic wrap (M, 1) included."""
    pairs = [(i, i + 1) for i in range(1, M)]
    if periodic:
        pairs.append((M, 1))
    return pairs


def build_hopping(basis: BasisIndex, periodic: bool = True) -> sp.csr_matrix:
    """sum over bonds of (a_i^+ a_j + a_j^+ a_i + same for b); multiply by -J to use.

    For M = 2 with periodic wrap the two sites share two bonds, so every hop
    enters twice.
    """
    M = basis.M
    if M < 2:
        raise ValueError("hopping needs M >= 2")
    terms = []
    for species in "AB":
        for i, j in neighbour_pairs(M, periodic):
            mi, mj = mode_index(M, i, species), mode_index(M, j, species)
            t = transfer(basis, mi, mj)
            terms.append(t)
            terms.append(t.T)
    hop = reduce(lambda x, y: x + y, terms).tocsr()
    hop.sum_duplicates()
    check_hermitian(hop)
    return hop


def build_interaction(basis: BasisIndex) -> tuple[sp.csr_matrix, sp.csr_matrix, sp.csr_matrix]:
    """Diagonal ``sum n^A(n^A-1)/2``, ``sum n^B(n^B-1)/2`` and ``sum n^A n^B``."""
    nA = basis.occA.astype(float)
    nB = basis.occB.astype(float)
    dAA = 0.5 * (nA * (nA - 1)).sum(axis=1)
    dBB = 0.5 * (nB * (nB - 1)).sum(axis=1)
    dAB = (nA * nB).sum(axis=1)
    return tuple(sp.diags(d, format="csr") for d in (dAA, dBB, dAB))


def number_operator(basis: BasisIndex) -> sp.csr_matrix:
    return sp.diags(basis.occupations.sum(axis=1).astype(float), format="csr")


def site_number(basis: BasisIndex, site: int) -> np.ndarray:
    """Diagonal of n^A_i + n^B_i as a vector."""
    M = basis.M
    return (basis.occupations[:, mode_index(M, site, "A")]
            + basis.occupations[:, mode_index(M, site, "B")]).astype(float)


@dataclass(frozen=True)
class RampSchedule:
    V_i: float
    V_f: float
    tau: float

    def __post_init__(self):
        if self.tau < 0:
            raise ValueError("ramp time must be non-negative")

    def depth(self, t: float) -> float:
        if self.tau == 0:
            return self.V_f if t > 0 else self.V_i
        s = min(max(t / self.tau, 0.0), 1.0)
        return self.V_i + (self.V_f - self.V_i) * s


@dataclass
class HamiltonianParts:
    """Parameter-free pieces of the Bose-Hubbard Hamiltonian on one basis."""

    basis: BasisIndex
    hop: sp.csr_matrix
    opAA: sp.csr_matrix
    opBB: sp.csr_matrix
    opAB: sp.csr_matrix
    periodic: bool = True

    @classmethod
    def build(cls, basis: BasisIndex, periodic: bool = True) -> "HamiltonianParts":
        return cls(basis, build_hopping(basis, periodic), *build_interaction(basis), periodic)

    def band_top(self) -> float:
        """Largest eigenvalue of the single-particle hopping matrix (2 on a ring)."""
        M = self.basis.M
        A = np.zeros((M, M))
        for i, j in neighbour_pairs(M, self.periodic):
            A[i - 1, j - 1] += 1
            A[j - 1, i - 1] += 1
        return float(np.linalg.eigvalsh(A)[-1])

    def assemble(self, J: float, U_AA: float, U_BB: float, U_AB: float) -> sp.csr_matrix:
        H = -J * self.hop + U_AA * self.opAA + U_BB * self.opBB + U_AB * self.opAB
        return H.tocsr()

    def interaction_diagonal(self, U_AA, U_BB, U_AB) -> np.ndarray:
        return (U_AA * self.opAA.diagonal() + U_BB * self.opBB.diagonal()
                + U_AB * self.opAB.diagonal())


def hamiltonian_at(t: float, schedule: RampSchedule, table, parts: HamiltonianParts) -> sp.csr_matrix:
    """H(t) for a linear ramp; ``table`` maps depth -> LatticeParams."""
    p = table(schedule.depth(t))
    H = parts.assemble(p.J, p.U_AA, p.U_BB, p.U_AB)
    check_hermitian(H)
    return H


# -- spins -----------------------------------------------------------------

def _site_flip(basis: BasisIndex, site: int) -> sp.csr_matrix:
    """a_j^+ b_j on one site."""
    M = basis.M
    return transfer(basis, mode_index(M, site, "A"), mode_index(M, site, "B"))


def site_spin_components(basis: BasisIndex, site: int):
    """(S_x, S_y, S_z) acting on one site, embedded in the full space."""
    M = basis.M
    up = _site_flip(basis, site)  # S_+ = a^+ b
    down = up.T.tocsr()
    Sx = 0.5 * (up + down)
    Sy = (-0.5j) * (up - down)
    nA = basis.occupations[:, mode_index(M, site, "A")].astype(float)
    nB = basis.occupations[:, mode_index(M, site, "B")].astype(float)
    Sz = sp.diags(0.5 * (nA - nB), format="csr")
    return Sx.tocsr(), Sy.tocsr(), Sz


def build_collective_spin(basis: BasisIndex, axis: str) -> sp.csr_matrix:
    k = "xyz".index(axis)
    op = reduce(lambda x, y: x + y,
                (site_spin_components(basis, j)[k] for j in range(1, basis.M + 1)))
    op = op.tocsr()
    check_hermitian(op)
    return op


def direction_gram_lambda(e) -> float:
    """Largest eigenvalue of Re(e)Re(e)^T + Im(e)Im(e)^T, i.e. max_{|n|=1} |e.n|^2."""
    e = np.asarray(e, dtype=complex)
    if e.shape != (3,):
        raise ValueError("direction vector needs three components")
    G = np.outer(e.real, e.real) + np.outer(e.imag, e.imag)
    return float(np.linalg.eigvalsh(G)[-1])


def is_admissible(e, tol: float = 1e-12) -> bool:
    return direction_gram_lambda(e) <= 1.0 + tol


def special_direction(kind: str, alpha: float = 1.0, beta: float = 1.0) -> np.ndarray:
    """Members of the family (a, ib, 0), (ia, b, 0), (a, 0, ib), (ia, 0, b), (0, a, ib), (0, ia, b).

    ``kind`` names the pattern, e.g. ``"x,iy"`` for (a, ib, 0) or ``"y,iz"`` for (0, a, ib).
    """
    patterns = {
        "x,iy": (0, 1, False), "ix,y": (0, 1, True),
        "x,iz": (0, 2, False), "ix,z": (0, 2, True),
        "y,iz": (1, 2, False), "iy,z": (1, 2, True),
    }
    if kind not in patterns:
        raise KeyError(f"unknown pattern {kind!r}; choose from {sorted(patterns)}")
    if abs(alpha) > 1 or abs(beta) > 1:
        raise InadmissibleDirection("alpha and beta must lie in [-1, 1]")
    first, second, imag_first = patterns[kind]
    e = np.zeros(3, dtype=complex)
    if imag_first:
        e[first], e[second] = 1j * alpha, beta
    else:
        e[first], e[second] = alpha, 1j * beta
    return e


S_PLUS = np.array([1.0, 1.0j, 0.0])
S_ROT = np.array([0.0, 1.0, 1.0j])


def build_site_spin(basis: BasisIndex, site: int, e) -> sp.csr_matrix:
    e = np.asarray(e, dtype=complex)
    if not is_admissible(e):
        raise InadmissibleDirection(f"direction {e} has max |e.n| > 1")
    Sx, Sy, Sz = site_spin_components(basis, site)
    return (e[0] * Sx + e[1] * Sy + e[2] * Sz).tocsr()


def build_correlator_operator(basis: BasisIndex, e) -> sp.csr_matrix:
    """Product over all sites of the single-site spin along ``e``."""
    factors = [build_site_spin(basis, j, e) for j in range(1, basis.M + 1)]
    op = reduce(lambda x, y: (x @ y).tocsr(), factors)
    op.eliminate_zeros()
    return op


def spin_rotation(basis: BasisIndex, axis: str, angle: float) -> sp.csr_matrix:
    """exp(-i * angle * S_axis) from the spectral decomposition of S_axis.

    Spin operators keep every site's total occupation fixed, so S_axis is
    block diagonal over occupation patterns (n_1, ..., n_M); each block is
    diagonalised densely.
    """
    S = build_collective_spin(basis, axis).tocsr()
    totals = basis.occA + basis.occB
    _, label = np.unique(totals, axis=0, return_inverse=True)
    label = label.ravel()
    order = np.argsort(label, kind="stable")
    bounds = np.flatnonzero(np.diff(label[order])) + 1
    rows, cols, vals = [], [], []
    for block in np.split(order, bounds):
        sub = S[block][:, block].toarray()
        w, V = np.linalg.eigh(sub)
        R = (V * np.exp(-1j * angle * w)) @ V.conj().T
        r, c = np.nonzero(np.abs(R) > 1e-15)
        rows.append(block[r])
        cols.append(block[c])
        vals.append(R[r, c])
    D = basis.dim
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(D, D)
    )


def dump_coo(op, path) -> None:
    """Write ``row col re im`` lines, one per stored entry."""
    coo = sp.coo_matrix(op)
    vals = coo.data.astype(complex)
    with open(path, "w") as fh:
        for r, c, v in zip(coo.row, coo.col, vals):
            fh.write(f"{r} {c} {v.real:.12g} {v.imag:.12g}\n")
