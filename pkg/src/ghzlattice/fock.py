"""Two-species bosonic Fock basis for N particles on M lattice sites.

A basis state is written ``|nA_1..nA_M; nB_1..nB_M>``.  Inside a sector the
states are kept in *descending* lexicographic order of the concatenated
occupation vector ``occA || occB``, so the all-A state ``|N,0,..;0,..>`` always
has index 0 and the all-B state ``|0,..;..,0,N>`` has index D-1.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb, sqrt
from typing import Iterator

import numpy as np

#: Largest sector dimension accepted by :func:`enumerate_basis`.
MAX_DIM = 2_000_000


class SectorError(ValueError):
    """A state does not belong to the requested (N, M) sector."""


@dataclass(frozen=True)
class FockState:
    occA: tuple[int, ...]
    occB: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "occA", tuple(int(n) for n in self.occA))
        object.__setattr__(self, "occB", tuple(int(n) for n in self.occB))
        if len(self.occA) != len(self.occB):
            raise ValueError("occA and occB must have the same number of sites")
        if min(self.occA + self.occB, default=0) < 0:
            raise ValueError("occupations must be non-negative")

    @classmethod
    def from_modes(cls, modes) -> "FockState":
        modes = tuple(int(n) for n in modes)
        M = len(modes) // 2
        return cls(modes[:M], modes[M:])

    @property
    def M(self) -> int:
        return len(self.occA)

    @property
    def N(self) -> int:
        return sum(self.occA) + sum(self.occB)

    @property
    def modes(self) -> tuple[int, ...]:
        return self.occA + self.occB

    def __str__(self):
        a = ",".join(map(str, self.occA))
        b = ",".join(map(str, self.occB))
        return f"|{a};{b}>"


@dataclass(frozen=True)
class LadderResult:
    coefficient: float
    state: FockState | None


def sector_dimension(N: int, M: int) -> int:
    """Number of ways to put N bosons into 2M modes."""
    return comb(N + 2 * M - 1, N)


def _compositions(N: int, parts: int) -> Iterator[tuple[int, ...]]:
    # descending lexicographic order
    if parts == 1:
        yield (N,)
        return
    for first in range(N, -1, -1):
        for rest in _compositions(N - first, parts - 1):
            yield (first,) + rest


class BasisIndex:
    """Immutable bijection between the Fock states of a sector and 0..D-1.

    ``occupations`` is a ``(D, 2M)`` integer array; column ``i`` holds
    ``nA_{i+1}`` for ``i < M`` and ``nB_{i-M+1}`` otherwise.
    """

    def __init__(self, N: int, M: int, occupations: np.ndarray):
        self.N = N
        self.M = M
        self.occupations = occupations
        self.occupations.setflags(write=False)
        self._lookup = {tuple(row): k for k, row in enumerate(occupations.tolist())}
        self._radix = N + 1
        # integer keys for vectorised lookup; None when they would overflow int64
        if self._radix ** (2 * M) < 2**62:
            weights = self._radix ** np.arange(2 * M - 1, -1, -1, dtype=np.int64)
            self._weights = weights
            keys = occupations.astype(np.int64) @ weights
            # descending lex order => descending keys
            self._sorted_keys = keys[::-1].copy()
        else:
            self._weights = None
            self._sorted_keys = None

    @property
    def dim(self) -> int:
        return self.occupations.shape[0]

    @property
    def sector(self) -> tuple[int, int]:
        return (self.N, self.M)

    def __len__(self):
        return self.dim

    def __repr__(self):
        return f"BasisIndex(N={self.N}, M={self.M}, dim={self.dim})"

    @property
    def occA(self) -> np.ndarray:
        return self.occupations[:, : self.M]

    @property
    def occB(self) -> np.ndarray:
        return self.occupations[:, self.M :]

    def state_at(self, k: int) -> FockState:
        return FockState.from_modes(self.occupations[k])

    def index_of(self, s: FockState) -> int:
        if s.M != self.M or s.N != self.N:
            raise SectorError(f"{s} is not in sector N={self.N}, M={self.M}")
        return self._lookup[s.modes]

    def indices_of(self, occupations: np.ndarray) -> np.ndarray:
        """Vectorised :meth:`index_of` for a ``(K, 2M)`` array of in-sector rows."""
        occupations = np.asarray(occupations)
        if self._weights is None:
            return np.array([self._lookup[tuple(r)] for r in occupations.tolist()], dtype=np.int64)
        keys = occupations.astype(np.int64) @ self._weights
        pos = np.searchsorted(self._sorted_keys, keys)
        return self.dim - 1 - pos

    def __iter__(self):
        for k in range(self.dim):
            yield self.state_at(k)


def enumerate_basis(N: int, M: int) -> BasisIndex:
    if N < 0 or M < 1:
        raise ValueError(f"need N >= 0 and M >= 1, got N={N}, M={M}")
    D = sector_dimension(N, M)
    if D > MAX_DIM:
        raise ValueError(f"sector N={N}, M={M} has dimension {D} > cap {MAX_DIM}")
    occ = np.fromiter(
        (n for c in _compositions(N, 2 * M) for n in c),
        dtype=np.int16,
        count=D * 2 * M,
    ).reshape(D, 2 * M)
    return BasisIndex(N, M, occ)


def apply_ladder(s: FockState, site: int, species: str, kind: str) -> LadderResult:
    """Apply a creation or annihilation operator; ``site`` is 1-based."""
    if not 1 <= site <= s.M:
        raise IndexError(f"site {site} outside 1..{s.M}")
    if species not in ("A", "B"):
        raise ValueError(f"species must be 'A' or 'B', got {species!r}")
    occ = list(s.occA if species == "A" else s.occB)
    n = occ[site - 1]
    if kind == "create":
        occ[site - 1] = n + 1
        coeff = sqrt(n + 1)
    elif kind == "annihilate":
        if n == 0:
            return LadderResult(0.0, None)
        occ[site - 1] = n - 1
        coeff = sqrt(n)
    else:
        raise ValueError(f"kind must be 'create' or 'annihilate', got {kind!r}")
    occ = tuple(occ)
    new = FockState(occ, s.occB) if species == "A" else FockState(s.occA, occ)
    return LadderResult(coeff, new)
