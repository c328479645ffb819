"""Closed-form N = M = 2 evolution under a constant symmetric Hamiltonian.

The ten labelled states |1>..|10> are

    |2,0;0,0> |1,1;0,0> |0,2;0,0> |1,0;1,0> |1,0;0,1>
    |0,1;1,0> |0,1;0,1> |0,0;2,0> |0,0;1,1> |0,0;0,2>

and ``LABEL_TO_INDEX[w - 1]`` is the position of |w> in our descending
lexicographic ordering.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .evolution import constant_hamiltonian, ground_state, prepare_spin_coherent, rk4_step
from .fock import FockState, enumerate_basis
from .operators import HamiltonianParts

LABELLED_STATES = [
    ((2, 0), (0, 0)), ((1, 1), (0, 0)), ((0, 2), (0, 0)), ((1, 0), (1, 0)), ((1, 0), (0, 1)),
    ((0, 1), (1, 0)), ((0, 1), (0, 1)), ((0, 0), (2, 0)), ((0, 0), (1, 1)), ((0, 0), (0, 2)),
]
LABEL_TO_INDEX = np.array([0, 1, 4, 2, 3, 5, 6, 7, 8, 9])

S2 = 1 / math.sqrt(2)
#: exp(-i pi/2 S_y) in the labelled order, as a closed-form reference.
REFERENCE_ROTATION = np.array([
    [.5, 0, 0, -S2, 0, 0, 0, .5, 0, 0],
    [0, .5, 0, 0, -.5, -.5, 0, 0, .5, 0],
    [0, 0, .5, 0, 0, 0, -S2, 0, 0, .5],
    [S2, 0, 0, 0, 0, 0, 0, -S2, 0, 0],
    [0, .5, 0, 0, .5, -.5, 0, 0, -.5, 0],
    [0, .5, 0, 0, -.5, .5, 0, 0, -.5, 0],
    [0, 0, S2, 0, 0, 0, 0, 0, 0, -S2],
    [.5, 0, 0, S2, 0, 0, 0, .5, 0, 0],
    [0, .5, 0, 0, .5, .5, 0, 0, .5, 0],
    [0, 0, .5, 0, 0, 0, S2, 0, 0, .5],
])


class OracleMismatch(AssertionError):
    def __init__(self, deviation, w, t):
        super().__init__(f"|c_{w}^num - c_{w}^exact| = {deviation:.3e} at t = {t:.6g}")
        self.deviation, self.w, self.t = deviation, w, t


@dataclass(frozen=True)
class OracleParams:
    J: float
    U_AA: float
    U_AB: float

    def __post_init__(self):
        if self.J <= 0:
            raise ValueError("J must be positive")

    def omega(self, U: float) -> float:
        # the square of U is needed for consistency with the all-A eigenvalues
        return math.sqrt(64 * self.J**2 + U**2)

    def Omega(self, U: float) -> tuple[float, float]:
        w = self.omega(U)
        return U + w, U - w

    @property
    def a(self) -> float:
        return self.Omega(self.U_AA)[0] / self.J


def label_order_check(basis) -> None:
    """Raise if LABEL_TO_INDEX does not map the listed states onto ``basis``."""
    for w, (occA, occB) in enumerate(LABELLED_STATES):
        if basis.index_of(FockState(occA, occB)) != LABEL_TO_INDEX[w]:
            raise AssertionError(f"state |{w + 1}> is misplaced")


def to_label_order(vec: np.ndarray) -> np.ndarray:
    return np.asarray(vec)[LABEL_TO_INDEX]


def matrix_to_label_order(A: np.ndarray) -> np.ndarray:
    return np.asarray(A)[np.ix_(LABEL_TO_INDEX, LABEL_TO_INDEX)]


def all_a_eigenvalues(p: OracleParams) -> np.ndarray:
    Op, Om = p.Omega(p.U_AA)
    return np.array([Om / 2, p.U_AA, Op / 2])


def initial_coefficients(p: OracleParams) -> np.ndarray:
    a = p.a
    r = 2 * math.sqrt(2)
    return np.array([r, a / 2, r, 4, a / 2, a / 2, 4, r, a / 2, r]) / math.sqrt(64 + a * a)


def analytic_state(t: float, p: OracleParams) -> np.ndarray:
    """c_1..c_10 at time t in the labelled order."""
    if t < 0:
        raise ValueError("t must be non-negative")
    J, U, V = p.J, p.U_AA, p.U_AB
    wAA, wAB = p.omega(U), p.omega(V)
    OAp, OAm = p.Omega(U)
    OBp, OBm = p.Omega(V)
    c1 = 2 * J * np.exp(-1j * t * OAm / 2) / math.sqrt(64 * J**2 + U * OAp)
    c2 = math.sqrt(OAp) * np.exp(-1j * t * OAm / 2) / (2 * math.sqrt(2 * wAA))
    c4 = (2 * J * np.exp(-1j * t * OBp / 2) * (OBp - OAp + np.exp(1j * t * wAB) * (OAp - OBm))
          / math.sqrt(wAB**2 * (64 * J**2 + OAp**2)))
    c5 = (np.exp(-1j * t * V / 2) / (2 * math.sqrt(2 * wAB**2 * (64 * J**2 + U * OAp)))
          * (OAp * wAB * np.cos(t * wAB / 2) + 1j * (64 * J**2 + OAp * V) * np.sin(t * wAB / 2)))
    return np.array([c1, c2, c1, c4, c5, c5, c4, c1, c2, c1], dtype=complex)


def prepared_state(p: OracleParams):
    """(basis, H, psi0) from the numerical pipeline at N = M = 2."""
    basis = enumerate_basis(2, 2)
    parts = HamiltonianParts.build(basis)
    H = parts.assemble(p.J, p.U_AA, p.U_AA, p.U_AB)
    _, gs = ground_state(H, basis, all_a=True)
    # fix the overall sign so the amplitudes match the closed form
    if gs.real.sum() < 0:
        gs = -gs
    return basis, H, prepare_spin_coherent(gs, basis)


def numeric_trajectory(t_max: float, p: OracleParams, dt: float, n_samples: int = 11):
    """RK4 amplitudes (labelled order) on ``n_samples`` equally spaced times."""
    basis, H, psi = prepared_state(p)
    Hc = constant_hamiltonian(H)
    times = np.linspace(0.0, t_max, n_samples)
    out = [to_label_order(psi)]
    t = 0.0
    for target in times[1:]:
        n = math.ceil((target - t) / dt - 1e-9)
        h = (target - t) / n if n > 0 else 0.0
        for _ in range(n):
            psi = rk4_step(psi, t, h, Hc)
            t += h
        t = target
        out.append(to_label_order(psi))
    return times, np.array(out)


def oracle_vs_numeric(t_max: float, p: OracleParams, dt: float, n_samples: int = 11,
                      tol: float | None = None) -> float:
    """max over w and sampled t of |c_w^num - c_w^exact|."""
    times, num = numeric_trajectory(t_max, p, dt, n_samples)
    exact = np.array([analytic_state(t, p) for t in times])
    diff = np.abs(num - exact)
    worst = float(diff.max())
    if tol is not None and worst > tol:
        k, w = np.unravel_index(np.argmax(diff), diff.shape)
        raise OracleMismatch(worst, w + 1, times[k])
    return worst


def write_oracle_csv(path, t_max: float, p: OracleParams, dt: float, n_samples: int = 51) -> None:
    """Rows ``path, t, |c1|^2..|c10|^2`` for the analytic and numeric trajectories."""
    times, num = numeric_trajectory(t_max, p, dt, n_samples)
    with open(path, "w") as fh:
        fh.write("path,t," + ",".join(f"|c{w}|^2" for w in range(1, 11)) + "\n")
        for label, rows in (("analytic", [analytic_state(t, p) for t in times]), ("numeric", num)):
            for t, c in zip(times, rows):
                fh.write(f"{label},{t:.12g}," + ",".join(f"{v:.12g}" for v in np.abs(c) ** 2) + "\n")
