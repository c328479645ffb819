"""Numerical audits of the separability bound, the per-site lemma and the
maximal correlator value on small one-particle-per-site systems.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .fock import BasisIndex, enumerate_basis
from .observables import correlator, product_state
from .operators import (
    InadmissibleDirection,
    build_correlator_operator,
    direction_gram_lambda,
    is_admissible,
)

AUDIT_TOL = 1e-10


def validate_direction(e) -> tuple[bool, float]:
    lam = direction_gram_lambda(e)
    return lam <= 1.0 + 1e-12, lam


def _require(e):
    e = np.asarray(e, dtype=complex)
    if not is_admissible(e):
        raise InadmissibleDirection(f"direction {e} has max |e.n| > 1")
    return e


def separability_bound(N: int, M: int) -> float:
    """(N / 2M)^(2M); equal to 2^(-2M) at unit filling."""
    return (N / (2 * M)) ** (2 * M)


@dataclass
class ProductState:
    """Site j holds (alpha_j a^+ + beta_j b^+)|0>."""

    alphas: np.ndarray
    betas: np.ndarray

    def __post_init__(self):
        norms = np.abs(self.alphas) ** 2 + np.abs(self.betas) ** 2
        if not np.allclose(norms, 1.0, atol=1e-12):
            raise ValueError("site amplitudes must be normalised")

    @property
    def M(self) -> int:
        return len(self.alphas)

    def site_spin(self) -> np.ndarray:
        """(M, 3) array of <S_x>, <S_y>, <S_z> on every site."""
        ab = np.conj(self.alphas) * self.betas
        sz = 0.5 * (np.abs(self.alphas) ** 2 - np.abs(self.betas) ** 2)
        return np.stack([ab.real, ab.imag, sz], axis=1)

    def site_expectations(self, e) -> np.ndarray:
        return self.site_spin() @ np.asarray(e, dtype=complex)

    def correlator(self, e) -> complex:
        return complex(np.prod(self.site_expectations(e)))

    def vector(self, basis: BasisIndex) -> np.ndarray:
        return product_state(self.alphas, self.betas, basis)


@dataclass
class SeparableMixture:
    weights: np.ndarray
    components: list

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if np.any(w < 0) or abs(w.sum() - 1) > 1e-12:
            raise ValueError("weights must be non-negative and sum to one")
        self.weights = w

    def correlator(self, e) -> complex:
        return complex(sum(p * c.correlator(e) for p, c in zip(self.weights, self.components)))


def _haar_sites(rng, M):
    z = rng.normal(size=(M, 2)) + 1j * rng.normal(size=(M, 2))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    return z[:, 0], z[:, 1]


def random_product_state(M: int, seed=None, rng=None) -> ProductState:
    """Independent Haar-random spin-1/2 state on every site."""
    rng = np.random.default_rng(seed) if rng is None else rng
    return ProductState(*_haar_sites(rng, M))


def random_mixture(M: int, rng, max_components: int = 8) -> SeparableMixture:
    k = int(rng.integers(1, max_components + 1))
    return SeparableMixture(rng.dirichlet(np.ones(k)), [random_product_state(M, rng=rng) for _ in range(k)])


def coherent_product_state(M: int) -> ProductState:
    """Every site in (a^+ + b^+)/sqrt 2: saturates the separability bound."""
    s = np.full(M, 1 / math.sqrt(2), dtype=complex)
    return ProductState(s, s.copy())


def random_site_product_vector(basis: BasisIndex, rng) -> np.ndarray:
    """Product over sites of random states with a random occupation pattern.

    Unlike :class:`ProductState` a site may hold zero or several atoms.
    """
    M, N = basis.M, basis.N
    totals = np.zeros(M, dtype=int)
    for _ in range(N):
        totals[rng.integers(M)] += 1
    site_amp = []
    for n in totals:
        z = rng.normal(size=n + 1) + 1j * rng.normal(size=n + 1)
        site_amp.append(z / np.linalg.norm(z))  # indexed by n_A on the site
    occA, occB = basis.occA, basis.occB
    match = np.all(occA + occB == totals[None, :], axis=1)
    vec = np.zeros(basis.dim, dtype=complex)
    for k in np.flatnonzero(match):
        vec[k] = np.prod([site_amp[j][occA[k, j]] for j in range(M)])
    return vec


@dataclass
class AuditReport:
    name: str
    M: int
    e: np.ndarray
    n_samples: int
    max_value: float
    bound: float
    seed: int | None
    worst_sample: int | None = None
    extra: dict | None = None

    @property
    def margin(self) -> float:
        return self.bound - self.max_value

    @property
    def passed(self) -> bool:
        return self.max_value <= self.bound + AUDIT_TOL

    def to_dict(self) -> dict:
        out = {
            "check": self.name, "M": self.M,
            "e": [[float(z.real), float(z.imag)] for z in self.e],
            "n_samples": self.n_samples, "max_value": self.max_value, "bound": self.bound,
            "margin": self.margin, "seed": self.seed, "passed": self.passed,
        }
        if self.worst_sample is not None:
            out["worst_sample"] = self.worst_sample
        if self.extra:
            out.update(self.extra)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def audit_separability_bound(M: int, e, n_samples: int = 10_000, seed: int = 0,
                             n_mixtures: int = 1000, full_space: bool | None = None) -> AuditReport:
    """Largest |C_e|^2 over random product states and finite separable mixtures.

    Product-state values are cross-checked against the full Fock-space
    operator for M <= 4; at M = 2 random site-product states with arbitrary
    occupations are included as well.
    """
    e = _require(e)
    if M > 4 and full_space:
        raise ValueError("full-space evaluation is limited to M <= 4")
    full_space = M <= 4 if full_space is None else full_space
    rng = np.random.default_rng(seed)
    best, worst = 0.0, None
    cross = 0.0
    basis = op = None
    if full_space:
        basis = enumerate_basis(M, M)
        op = build_correlator_operator(basis, e)
    for k in range(n_samples):
        s = random_product_state(M, rng=rng)
        c = s.correlator(e)
        if full_space and k < 1000:
            cross = max(cross, abs(c - correlator(s.vector(basis), basis, e, op)[0]))
        if abs(c) ** 2 > best:
            best, worst = abs(c) ** 2, k
    for k in range(n_mixtures):
        mix = random_mixture(M, rng)
        v = abs(mix.correlator(e)) ** 2
        if v > best:
            best, worst = v, n_samples + k
    if full_space and M == 2:
        for k in range(n_mixtures):
            comps = [random_site_product_vector(basis, rng) for _ in range(int(rng.integers(1, 9)))]
            w = rng.dirichlet(np.ones(len(comps)))
            v = abs(correlator(list(zip(w, comps)), basis, e, op)[0]) ** 2
            if v > best:
                best, worst = v, n_samples + n_mixtures + k
    if cross > 1e-12:
        raise AssertionError(f"closed-form and Fock-space correlators differ by {cross:.2e}")
    return AuditReport("separability_bound", M, e, n_samples + n_mixtures, float(best),
                       separability_bound(M, M), seed, worst,
                       {"n_products": n_samples, "n_mixtures": n_mixtures, "crosscheck": cross})


def audit_lemma(M: int, e, samples=10_000, seed: int = 0) -> AuditReport:
    """Largest sum_j |<S_e^(j)>| over product states; also checks that the
    geometric mean of the per-site moduli never exceeds their arithmetic mean.
    """
    e = _require(e)
    rng = np.random.default_rng(seed)
    if isinstance(samples, int):
        samples = [random_product_state(M, rng=rng) for _ in range(samples)]
    best, worst, amgm = 0.0, None, -np.inf
    for k, s in enumerate(samples):
        m = np.abs(s.site_expectations(e))
        total = float(m.sum())
        amgm = max(amgm, float(np.prod(m) ** (1 / M) - m.mean()))
        if total > best:
            best, worst = total, k
    if amgm > AUDIT_TOL:
        raise AssertionError(f"geometric mean exceeded arithmetic mean by {amgm:.2e}")
    return AuditReport("lemma", M, e, len(samples), best, M / 2, seed, worst,
                       {"max_gm_minus_am": amgm})


def _raising_frame(e):
    """For e = u + i v with orthonormal u, v return w = u x v, else None."""
    u, v = e.real, e.imag
    if abs(np.linalg.norm(u) - 1) > 1e-9 or abs(np.linalg.norm(v) - 1) > 1e-9 or abs(u @ v) > 1e-9:
        return None
    return np.cross(u, v)


def _spin_up(n):
    """Spin-1/2 (A, B) amplitudes of the +1/2 and -1/2 states along unit vector n."""
    theta = math.acos(max(-1.0, min(1.0, n[2])))
    phi = math.atan2(n[1], n[0])
    up = np.array([math.cos(theta / 2), np.exp(1j * phi) * math.sin(theta / 2)])
    down = np.array([-np.exp(-1j * phi) * math.sin(theta / 2), math.cos(theta / 2)])
    return up, down


def two_branch_state(basis: BasisIndex, theta: float, phi: float, w=(0.0, 0.0, 1.0)) -> np.ndarray:
    """sin(theta)|down..down> + e^{i phi} cos(theta)|up..up>, quantised along w."""
    M = basis.M
    up, down = _spin_up(np.asarray(w, dtype=float))
    vu = product_state(np.full(M, up[0]), np.full(M, up[1]), basis)
    vd = product_state(np.full(M, down[0]), np.full(M, down[1]), basis)
    return math.sin(theta) * vd + np.exp(1j * phi) * math.cos(theta) * vu


def numerical_radius_sq(op, n_angles: int = 721) -> float:
    """max_psi |<psi|A|psi>|^2 via max over angles of lambda_max(Re(e^{i a} A))."""
    A = op.toarray() if hasattr(op, "toarray") else np.asarray(op)
    best = 0.0
    for a in np.linspace(0, 2 * math.pi, n_angles, endpoint=False):
        H = 0.5 * (np.exp(1j * a) * A + np.exp(-1j * a) * A.conj().T)
        best = max(best, float(np.linalg.eigvalsh(H)[-1]))
    return best**2


@dataclass
class SearchResult:
    value: float
    theta: float | None
    phi: float | None
    state: np.ndarray
    stochastic_max: float
    exact_max: float


def max_correlator_search(M: int, e, n_theta: int = 181, n_phi: int = 72,
                          n_restarts: int = 20, n_iter: int = 400, seed: int = 0) -> SearchResult:
    """Scan the two-branch family and hill-climb random states of the N = M sector."""
    if M > 4:
        raise ValueError("exhaustive search is limited to M <= 4")
    e = _require(e)
    basis = enumerate_basis(M, M)
    op = build_correlator_operator(basis, e)
    best = (-1.0, None, None, None)
    w = _raising_frame(e)
    if w is not None:
        for th in np.linspace(0, math.pi / 2, n_theta):
            for ph in np.linspace(0, 2 * math.pi, n_phi, endpoint=False):
                psi = two_branch_state(basis, th, ph, w)
                val = abs(np.vdot(psi, op @ psi)) ** 2
                if val > best[0]:
                    best = (val, th, ph, psi)
    rng = np.random.default_rng(seed)
    stoch, stoch_psi = 0.0, None
    D = basis.dim
    for _ in range(n_restarts):
        psi = rng.normal(size=D) + 1j * rng.normal(size=D)
        psi /= np.linalg.norm(psi)
        val = abs(np.vdot(psi, op @ psi)) ** 2
        step = 0.3
        for _ in range(n_iter):
            trial = psi + step * (rng.normal(size=D) + 1j * rng.normal(size=D))
            trial /= np.linalg.norm(trial)
            tv = abs(np.vdot(trial, op @ trial)) ** 2
            if tv > val:
                psi, val = trial, tv
            else:
                step = max(step * 0.97, 1e-4)
        if val > stoch:
            stoch, stoch_psi = val, psi
    if w is None:
        best = (stoch, None, None, stoch_psi)
    exact = numerical_radius_sq(op)
    return SearchResult(best[0], best[1], best[2], best[3], stoch, exact)
