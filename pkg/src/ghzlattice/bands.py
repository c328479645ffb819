"""Lowest Bloch band of V0 sin^2(k_L x), Wannier functions and Hubbard parameters.

Recoil units throughout: k_L = 1, E_R = hbar = 1, so positions are measured
in 1/k_L, the lattice period is d = pi and the first Brillouin zone is
-1 < q <= 1.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from math import exp, log, pi, sqrt

import numpy as np
from scipy.interpolate import CubicSpline

D_LATTICE = pi  # lattice period in units of 1/k_L

#: U_AB / U_AA used throughout the protocol.
AB_RATIO = 0.95


class BandSolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class LatticeGeometry:
    """Lengths in units of 1/k_L (so lambdaL defaults to 2 pi and d to pi).

    The interaction strength only enters through ``a * d / (Lx * Ly)``.  Nothing
    else in the model fixes its absolute value, so the default scattering
    length is calibrated: a = 0.0385 (eta = 0.01225) puts the N = M = 6 ramp
    with tau = 19100 on the GHZ phase pattern (see README).
    """

    lambdaL: float = 2 * pi
    Lx: float = pi
    Ly: float = pi
    a_AA: float = 0.0385
    a_BB: float = 0.0385
    a_AB: float = 0.95 * 0.0385

    def __post_init__(self):
        for name in ("lambdaL", "Lx", "Ly", "a_AA", "a_BB", "a_AB"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @property
    def d(self) -> float:
        return self.lambdaL / 2

    @property
    def kL(self) -> float:
        return 2 * pi / self.lambdaL

    def eta(self, pair: str = "AA") -> float:
        """Dimensionless coupling a_{pair} d / (Lx Ly)."""
        a = {"AA": self.a_AA, "BB": self.a_BB, "AB": self.a_AB}[pair]
        return a * self.d / (self.Lx * self.Ly)

    def coupling(self, pair: str = "AA") -> float:
        """Prefactor g such that U = g * int w^4 dx with x in units of 1/k_L.

        U/E_R = (2/k_L^2) (4 pi hbar^2 a / m) / (Lx Ly) * int w^4 = 8 eta int w^4.
        """
        return 8.0 * self.eta(pair)


@dataclass
class BlochSpectrum:
    V0: float
    q_grid: np.ndarray  # (n_q,) in (-1, 1]
    E_q: np.ndarray  # (n_q,) lowest band
    coefficients: np.ndarray  # (n_q, n_pw) plane-wave amplitudes, sum |c|^2 = 1
    orders: np.ndarray  # (n_pw,) integers m, plane wave exp(i (q + 2m) x)


@dataclass
class WannierData:
    x_grid: np.ndarray
    w: np.ndarray

    @property
    def dx(self) -> float:
        return float(self.x_grid[1] - self.x_grid[0])

    def shifted(self, sites: int) -> np.ndarray:
        """Samples of w(x - sites * d); requires the grid to contain whole periods."""
        per_period = int(round(D_LATTICE / self.dx))
        out = np.zeros_like(self.w)
        s = sites * per_period
        if s >= 0:
            out[s:] = self.w[: len(self.w) - s]
        else:
            out[:s] = self.w[-s:]
        return out


@dataclass(frozen=True)
class LatticeParams:
    V0: float
    J: float
    U_AA: float
    U_BB: float
    U_AB: float


def q_grid(n_q: int) -> np.ndarray:
    """n_q equally spaced quasimomenta in (-1, 1]."""
    return -1.0 + 2.0 * np.arange(1, n_q + 1) / n_q


def solve_bands(V0: float, n_pw: int = 21, n_q: int = 128) -> BlochSpectrum:
    if n_pw % 2 == 0 or n_pw < 11:
        raise ValueError("n_pw must be odd and >= 11")
    if n_q < 32:
        raise ValueError("n_q must be >= 32")
    K = n_pw // 2
    m = np.arange(-K, K + 1)
    qs = q_grid(n_q)
    off = -V0 / 4.0 * np.ones(n_pw - 1)
    E = np.empty(n_q)
    C = np.empty((n_q, n_pw))
    for k, q in enumerate(qs):
        h = np.diag((q + 2 * m) ** 2 + V0 / 2.0) + np.diag(off, 1) + np.diag(off, -1)
        try:
            w, v = np.linalg.eigh(h)
        except np.linalg.LinAlgError as exc:  # pragma: no cover
            raise BandSolverError(f"eigensolver failed at q={q}: {exc}") from exc
        c = v[:, 0]
        # gauge: psi_q(0) = sum_m c_m real positive
        if c.sum() < 0:
            c = -c
        E[k] = w[0]
        C[k] = c
    return BlochSpectrum(V0, qs, E, C, m)


def compute_hopping(spec: BlochSpectrum, separation: int) -> float:
    """J(n) = -(d/2 pi) int_{1BZ} E_q exp(-i n d q) dq on the discrete q grid."""
    n_q = len(spec.q_grid)
    if abs(separation) > n_q // 4:
        raise ValueError("separation too large for the q grid")
    phase = np.exp(-1j * separation * D_LATTICE * spec.q_grid)
    val = -np.mean(spec.E_q * phase)
    if abs(val.imag) > 1e-10:
        raise BandSolverError(f"hopping has imaginary part {val.imag:.2e}")
    return float(val.real)


def reconstruct_band(spec: BlochSpectrum, n_max: int) -> np.ndarray:
    """E_q rebuilt from J(0..n_max): -J(0) - sum_n 2 J(n) cos(n d q)."""
    out = -compute_hopping(spec, 0) * np.ones_like(spec.q_grid)
    for n in range(1, n_max + 1):
        out -= 2 * compute_hopping(spec, n) * np.cos(n * D_LATTICE * spec.q_grid)
    return out


def build_wannier(spec: BlochSpectrum, periods: int = 8, points_per_period: int = 64,
                  tol: float = 1e-8) -> WannierData:
    """w(x) for the site at x = 0 on [-periods*d, periods*d)."""
    n = 2 * periods * points_per_period
    x = (np.arange(n) - periods * points_per_period) * (D_LATTICE / points_per_period)
    n_q = len(spec.q_grid)
    dq = 2.0 / n_q
    # w(x) = sqrt(d/2pi) * sum_q dq * (2pi)^(-1/2) sum_m c_m(q) exp(i(q+2m)x)
    k = spec.q_grid[:, None] + 2 * spec.orders[None, :]
    amp = np.zeros(n, dtype=complex)
    for kq, cq in zip(k, spec.coefficients):
        amp += np.exp(1j * np.outer(x, kq)) @ cq
    amp *= sqrt(D_LATTICE / (2 * pi)) * dq / sqrt(2 * pi)
    resid = np.max(np.abs(amp.imag))
    if resid > tol:
        raise BandSolverError(f"Wannier function not real: residual {resid:.2e}")
    return WannierData(x, amp.real)


def wannier_overlap(w: WannierData, sites: int) -> float:
    return float(np.sum(w.w * w.shifted(sites)) * w.dx)


def compute_interaction(w: WannierData, geom: LatticeGeometry, offsets=(0, 0, 0, 0),
                        pair: str = "AA") -> float:
    """U_{ijkl} = g * int w(x-x_i) w(x-x_j) w(x-x_k) w(x-x_l) dx."""
    span = (w.x_grid[-1] - w.x_grid[0]) / D_LATTICE
    if span < 5:
        raise ValueError("Wannier grid must cover at least 5 lattice periods")
    prod = np.ones_like(w.w)
    for o in offsets:
        prod = prod * w.shifted(int(o))
    edge = max(abs(w.w[0]), abs(w.w[-1]))
    peak = np.max(np.abs(w.w))
    if (edge / peak) ** 2 > 1e-6:
        warnings.warn(f"Wannier tail {edge / peak:.1e} at grid edge; widen the grid",
                      RuntimeWarning, stacklevel=2)
    return geom.coupling(pair) * float(np.sum(prod) * w.dx)


def gaussian_wannier(x: np.ndarray, V0: float) -> np.ndarray:
    """Harmonic-oscillator ground state of one lattice well."""
    return (1 / pi) ** 0.25 * V0 ** 0.125 * np.exp(-sqrt(V0) * x ** 2 / 2)


def gaussian_approximations(V0: float, geom: LatticeGeometry, pair: str = "AA") -> tuple[float, float]:
    """(U_gauss, J_app) in units of E_R."""
    if V0 <= 0:
        raise ValueError("V0 must be positive")
    U = sqrt(32 / pi) * geom.eta(pair) * V0 ** 0.25
    J = 4 / sqrt(pi) * V0 ** 0.75 * np.exp(-2 * sqrt(V0))
    return U, float(J)


def lattice_params(V0: float, geom: LatticeGeometry, n_pw: int = 21, n_q: int = 128) -> LatticeParams:
    """J = J(1) and U_AA = U_BB from the band structure, U_AB = 0.95 U_AA."""
    spec = solve_bands(V0, n_pw, n_q)
    J = compute_hopping(spec, 1)
    U = compute_interaction(build_wannier(spec), geom)
    return LatticeParams(V0, J, U, U, AB_RATIO * U)


def params_table(V0_grid, geom: LatticeGeometry | None = None, n_pw: int = 21,
                 n_q: int = 128) -> list[LatticeParams]:
    geom = geom or LatticeGeometry()
    V0_grid = np.asarray(V0_grid, dtype=float)
    if V0_grid.min() < 1 or V0_grid.max() > 50:
        raise ValueError("depth grid must lie within [1, 50] E_R")
    return [lattice_params(float(v), geom, n_pw, n_q) for v in V0_grid]


def write_params_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["v0", "J", "U_AA", "U_BB", "U_AB"])
        for r in rows:
            out.writerow([f"{x:.12g}" for x in (r.V0, r.J, r.U_AA, r.U_BB, r.U_AB)])


def read_params_csv(path) -> list[LatticeParams]:
    with open(path, newline="") as fh:
        return [LatticeParams(*(float(row[k]) for k in ("v0", "J", "U_AA", "U_BB", "U_AB")))
                for row in csv.DictReader(fh)]


@dataclass
class ParamsInterpolant:
    """Cubic interpolation of (J, U) in V0; J is interpolated in log space."""

    rows: list[LatticeParams]
    _spline: CubicSpline = field(init=False, repr=False)

    def __post_init__(self):
        v = np.array([r.V0 for r in self.rows])
        if np.any(np.diff(v) <= 0):
            raise ValueError("table depths must be strictly increasing")
        self.V_min, self.V_max = float(v[0]), float(v[-1])
        # columns: log J, U_AA, U_BB, U_AB
        y = np.array([[log(r.J), r.U_AA, r.U_BB, r.U_AB] for r in self.rows])
        self._spline = CubicSpline(v, y)

    @classmethod
    def compute(cls, V_min: float, V_max: float, n_points: int = 200,
                geom: LatticeGeometry | None = None) -> "ParamsInterpolant":
        return cls(params_table(np.linspace(V_min, V_max, n_points), geom))

    def covers(self, V_lo: float, V_hi: float) -> bool:
        eps = 1e-9
        return self.V_min - eps <= min(V_lo, V_hi) and max(V_lo, V_hi) <= self.V_max + eps

    def __call__(self, V0: float) -> LatticeParams:
        if not self.covers(V0, V0):
            raise ValueError(f"V0={V0} outside table range [{self.V_min}, {self.V_max}]")
        logJ, U_AA, U_BB, U_AB = self._spline(V0).tolist()
        return LatticeParams(float(V0), exp(logJ), U_AA, U_BB, U_AB)
