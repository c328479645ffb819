"""Initial-state preparation and fixed-step RK4 integration of i d/dt psi = H(t) psi."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from .bands import ParamsInterpolant
from .fock import BasisIndex
from .operators import HamiltonianParts, RampSchedule, spin_rotation

NORM_TOL = 1e-8
DRIFT_ABORT = 1e-6
DENSE_LIMIT = 2000


class IntegrationError(RuntimeError):
    pass


class EigensolverError(RuntimeError):
    pass


def normalize(psi: np.ndarray) -> np.ndarray:
    return psi / np.linalg.norm(psi)


def all_a_indices(basis: BasisIndex) -> np.ndarray:
    return np.flatnonzero(basis.occB.sum(axis=1) == 0)


def ground_state(H, basis: BasisIndex | None = None, all_a: bool = False,
                 tol: float = 1e-9) -> tuple[float, np.ndarray]:
    """Lowest eigenpair of ``H``; with ``all_a`` only states with no B atoms are used.

    The returned vector is normalised, lives in the full space and has its
    largest component real and positive.
    """
    H = sp.csr_matrix(H)
    D = H.shape[0]
    if all_a:
        if basis is None:
            raise ValueError("all_a restriction needs the basis")
        keep = all_a_indices(basis)
    else:
        keep = np.arange(D)
    Hs = H[keep][:, keep]
    if len(keep) <= DENSE_LIMIT:
        w, v = np.linalg.eigh(Hs.toarray())
        E0, vec = w[0], v[:, 0]
    else:
        try:
            w, v = eigsh(Hs, k=1, which="SA", tol=1e-12, maxiter=20000)
        except ArpackNoConvergence as exc:
            raise EigensolverError(f"ground state did not converge: {exc}") from exc
        E0, vec = w[0], v[:, 0]
    psi = np.zeros(D, dtype=complex)
    psi[keep] = vec
    k = np.argmax(np.abs(psi))
    psi *= np.abs(psi[k]) / psi[k]
    psi = normalize(psi)
    resid = np.linalg.norm(H @ psi - E0 * psi)
    if resid > tol:
        raise EigensolverError(f"ground state residual {resid:.2e} exceeds {tol:.0e}")
    return float(E0), psi


def prepare_spin_coherent(gsA: np.ndarray, basis: BasisIndex) -> np.ndarray:
    """Apply the pi/2 pulse exp(-i pi/2 S_y)."""
    return spin_rotation(basis, "y", math.pi / 2) @ gsA


class RampHamiltonian:
    """H(t) = -J(t) hop + U_AA(t) opAA + U_BB(t) opBB + U_AB(t) opAB along a linear ramp.

    Calling it returns a lightweight snapshot supporting ``@``; the sparse
    matrix itself is only formed by :meth:`matrix`.
    """

    def __init__(self, parts: HamiltonianParts, schedule: RampSchedule, table,
                 shift: bool = False):
        if isinstance(table, ParamsInterpolant) and not table.covers(schedule.V_i, schedule.V_f):
            raise ValueError("parameter table does not cover the ramp")
        self.parts = parts
        self.schedule = schedule
        self.table = table
        # With ``shift`` the condensate kinetic energy -J z N is subtracted.  N is
        # fixed in the sector, so this only changes the global phase, but it
        # keeps the amplitudes slowly rotating and the RK4 norm error small.
        self.shift = shift
        self._z = parts.band_top() if shift else 0.0
        self._hop = parts.hop.astype(complex)
        self._dAA = parts.opAA.diagonal()
        self._dBB = parts.opBB.diagonal()
        self._dAB = parts.opAB.diagonal()

    def params(self, t: float):
        return self.table(self.schedule.depth(t))

    def __call__(self, t: float) -> "_Snapshot":
        p = self.params(t)
        diag = p.U_AA * self._dAA + p.U_BB * self._dBB + p.U_AB * self._dAB
        if self.shift:
            diag = diag + p.J * self._z * self.parts.basis.N
        return _Snapshot(self._hop, p.J, diag)

    def matrix(self, t: float) -> sp.csr_matrix:
        p = self.params(t)
        return self.parts.assemble(p.J, p.U_AA, p.U_BB, p.U_AB)

    def max_diagonal(self) -> float:
        """Largest |diagonal| of H over the ramp (U is monotone in depth)."""
        return max(float(np.max(np.abs(self(t).diag))) for t in (0.0, self.schedule.tau))


@dataclass
class _Snapshot:
    hop: sp.csr_matrix
    J: float
    diag: np.ndarray

    def __matmul__(self, x):
        return self.diag * x - self.J * (self.hop @ x)


def constant_hamiltonian(H) -> Callable[[float], object]:
    H = sp.csr_matrix(H).astype(complex)
    return lambda t: H


def rk4_step(psi: np.ndarray, t: float, dt: float, H_of_t) -> np.ndarray:
    """One classical RK4 step for d psi/dt = -i H(t) psi."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    H0, Hm, H1 = H_of_t(t), H_of_t(t + dt / 2), H_of_t(t + dt)
    k1 = -1j * (H0 @ psi)
    k2 = -1j * (Hm @ (psi + 0.5 * dt * k1))
    k3 = -1j * (Hm @ (psi + 0.5 * dt * k2))
    k4 = -1j * (H1 @ (psi + dt * k3))
    out = psi + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise IntegrationError(f"non-finite amplitudes after step at t={t:.6g}, dt={dt:.3g}")
    return out


@dataclass
class EvolutionLog:
    times: list = field(default_factory=list)
    V0s: list = field(default_factory=list)
    samples: dict = field(default_factory=dict)

    def record(self, t: float, V0: float, values: Mapping[str, float]):
        if self.times and t <= self.times[-1]:
            raise ValueError("log times must increase")
        self.times.append(float(t))
        self.V0s.append(float(V0))
        for k, v in values.items():
            self.samples.setdefault(k, []).append(float(v))

    def column(self, name: str) -> np.ndarray:
        return np.asarray(self.samples[name])

    def write_csv(self, path) -> None:
        names = list(self.samples)
        with open(path, "w") as fh:
            fh.write(",".join(["t", "V0", *names]) + "\n")
            for i, t in enumerate(self.times):
                vals = [t, self.V0s[i], *(self.samples[n][i] for n in names)]
                fh.write(",".join(f"{v:.12g}" for v in vals) + "\n")


@dataclass
class RampResult:
    psi: np.ndarray
    log: EvolutionLog
    steps: int
    dt: float
    max_norm_error: float


def run_ramp(psi0: np.ndarray, H_of_t: RampHamiltonian, dt: float = 0.01, cadence: int = 100,
             observables: Mapping[str, Callable[[np.ndarray], float]] | None = None,
             guard: float = 0.1, progress: Callable[[int, int], None] | None = None) -> RampResult:
    """Integrate over [0, tau] with fixed RK4 steps, sampling every ``cadence`` steps.

    The step is shrunk to tau / ceil(tau / dt) so the last step lands on tau.
    """
    schedule = H_of_t.schedule
    tau = schedule.tau
    observables = dict(observables or {})
    if dt <= 0 or cadence < 1:
        raise ValueError("dt must be positive and cadence >= 1")
    if dt * H_of_t.max_diagonal() >= guard:
        raise IntegrationError(
            f"dt={dt} too large: dt * max|diag H| = {dt * H_of_t.max_diagonal():.3g} >= {guard}")
    n_steps = math.ceil(tau / dt - 1e-9) if tau > 0 else 0
    h = tau / n_steps if n_steps else dt

    log = EvolutionLog()
    psi = np.array(psi0, dtype=complex)
    norm0 = np.linalg.norm(psi)
    worst = abs(norm0 - 1.0)

    def sample(t, psi):
        log.record(t, schedule.depth(t), {k: f(psi) for k, f in observables.items()})

    sample(0.0, psi)
    H_next = None
    for k in range(n_steps):
        t = k * h
        psi, H_next = _rk4_inplace(psi, t, h, H_of_t, H_next)
        if (k + 1) % cadence == 0 or k + 1 == n_steps:
            err = abs(np.linalg.norm(psi) - 1.0)
            worst = max(worst, err)
            if not np.isfinite(err):
                raise IntegrationError(f"non-finite state at t={t + h:.6g}")
            if err > DRIFT_ABORT:
                raise IntegrationError(
                    f"norm drift {err:.2e} at t={t + h:.6g} exceeds {DRIFT_ABORT:.0e}; reduce dt")
            sample(n_steps * h if k + 1 == n_steps else (k + 1) * h, psi)
            if progress is not None:
                progress(k + 1, n_steps)
    return RampResult(psi, log, n_steps, h, worst)


def _rk4_inplace(psi, t, dt, H_of_t, H0=None):
    # same arithmetic as rk4_step with fewer temporaries; H at the end of the
    # step is returned so the next step can start from it
    if H0 is None:
        H0 = H_of_t(t)
    Hm, H1 = H_of_t(t + 0.5 * dt), H_of_t(t + dt)
    k = H0 @ psi
    acc = k.copy()
    y = psi - (0.5j * dt) * k
    k = Hm @ y
    acc += 2 * k
    y = psi - (0.5j * dt) * k
    k = Hm @ y
    acc += 2 * k
    y = psi - (1j * dt) * k
    k = H1 @ y
    acc += k
    return psi - (1j * dt / 6.0) * acc, H1
