"""Full-Hilbert-space model: four levels per atom, matrix-free operators.

The state vector lives on the 4^n product basis, stored as an ndarray of
shape (4,)*n so every operator reduces to axis slicing; no Hamiltonian
matrix is ever assembled.  Atom 0 is the data qubit when present.
Level encoding: 0 = |0>, 1 = |1>, 2 = |R>, 3 = |L> (absorbing loss).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .geometry import BlockadeMatrix, C6Table, Layout, pairwise_blockade
from .schedule import ANCILLA_0R, ANCILLA_1R, DATA_0R, TWO_PI

G0, G1, RYD, LOSS = 0, 1, 2, 3


def _axis_index(n_atoms: int, atom: int, level: int):
    idx = [slice(None)] * n_atoms
    idx[atom] = level
    return tuple(idx)


@dataclass
class DriveOperator:
    """A species-selective flip-flop coupling |g><R| + h.c. on a set of atoms."""

    target: str
    atoms: tuple[int, ...]
    ground_level: int


@dataclass
class AtomArrayModel:
    """Drives, diagonal blockade, and non-Hermitian decay for one atom array.

    ``blockade_diag`` and ``decay_diag`` are precomputed diagonal arrays of
    shape (4,)*n_atoms; blockade entries are angular (rad/us).
    """

    n_atoms: int
    drives: dict[str, DriveOperator]
    blockade_diag: np.ndarray
    decay_diag: np.ndarray
    gammas: np.ndarray
    data_index: int | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    # -- construction -------------------------------------------------

    @classmethod
    def from_parts(
        cls,
        blockade: BlockadeMatrix,
        gammas: np.ndarray,
        data_index: int | None = 0,
    ) -> "AtomArrayModel":
        n = blockade.n_atoms
        gammas = np.asarray(gammas, dtype=float)
        if gammas.shape != (n,):
            raise ValueError("one decay rate per atom required")
        shape = (4,) * n

        e_diag = np.zeros(shape)
        for i in range(n):
            for j in range(i + 1, n):
                if blockade.v_mhz[i, j] == 0.0:
                    continue
                idx = [slice(None)] * n
                idx[i] = RYD
                idx[j] = RYD
                e_diag[tuple(idx)] += TWO_PI * blockade.v_mhz[i, j]

        g_diag = np.zeros(shape)
        for i in range(n):
            g_diag[_axis_index(n, i, RYD)] += 0.5 * gammas[i]

        ancillae = tuple(i for i in range(n) if i != data_index)
        drives = {
            ANCILLA_0R: DriveOperator(ANCILLA_0R, ancillae, G0),
            ANCILLA_1R: DriveOperator(ANCILLA_1R, ancillae, G1),
        }
        if data_index is not None:
            drives[DATA_0R] = DriveOperator(DATA_0R, (data_index,), G0)
        return cls(n, drives, e_diag, g_diag, gammas, data_index)

    @classmethod
    def from_layout(cls, layout: Layout, c6: C6Table | None = None) -> "AtomArrayModel":
        blockade = pairwise_blockade(layout, c6)
        gammas = np.array([a.species.gamma for a in layout.atoms])
        return cls.from_parts(blockade, gammas, data_index=layout.data_index)

    @classmethod
    def uniform(
        cls, n_ancillae: int, eta_angular: float, gamma: float = 0.0
    ) -> "AtomArrayModel":
        """Ancilla-only array with uniform all-to-all blockade eta (rad/us)."""
        from .geometry import uniform_blockade

        blockade = uniform_blockade(n_ancillae, eta_angular / TWO_PI)
        gammas = np.full(n_ancillae, gamma)
        return cls.from_parts(blockade, gammas, data_index=None)

    # -- states --------------------------------------------------------

    @property
    def dim(self) -> int:
        return 4**self.n_atoms

    def initial_state(self, data_level: int = G0) -> np.ndarray:
        """All ancillae in |0>; the data atom (if any) in the given level."""
        psi = np.zeros((4,) * self.n_atoms, dtype=complex)
        levels = [G0] * self.n_atoms
        if self.data_index is not None:
            levels[self.data_index] = data_level
        psi[tuple(levels)] = 1.0
        return psi

    # -- operator application ------------------------------------------

    def apply_drive(self, psi: np.ndarray, target: str, omega_t: float,
                    phase_sign: int = 1, out: np.ndarray | None = None) -> np.ndarray:
        """Accumulate -i * Omega(t) * sum_i (|g_i><R_i| + h.c.) |psi>."""
        drive = self.drives[target]
        if out is None:
            out = np.zeros_like(psi)
        c = -1j * phase_sign * omega_t
        n = self.n_atoms
        for i in drive.atoms:
            gi = _axis_index(n, i, drive.ground_level)
            ri = _axis_index(n, i, RYD)
            out[gi] += c * psi[ri]
            out[ri] += c * psi[gi]
        return out

    def apply_blockade(self, psi: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        """Accumulate -i * E(config) * psi with the diagonal pair energies."""
        if out is None:
            out = np.zeros_like(psi)
        out += -1j * self.blockade_diag * psi
        return out

    def apply_decay_nonhermitian(self, psi: np.ndarray,
                                 out: np.ndarray | None = None) -> np.ndarray:
        """Accumulate -(gamma_i/2) * psi on every configuration with atom i in |R>."""
        if out is None:
            out = np.zeros_like(psi)
        out += -self.decay_diag * psi
        return out

    def _coupling_scatter(self, target: str) -> sp.csr_matrix:
        """Precomputed index-pair scatter for a unit-amplitude drive.

        Built once per target from base-4 stride arithmetic; applying it
        to a flat state equals apply_drive with Omega = 1.
        """
        key = ("coupling", target)
        if key not in self._cache:
            drive = self.drives[target]
            dim = self.dim
            all_idx = np.arange(dim)
            digits = (all_idx[:, None] // (4 ** np.arange(self.n_atoms - 1, -1, -1))) % 4
            rows, cols = [], []
            for i in drive.atoms:
                stride = 4 ** (self.n_atoms - 1 - i)
                g_idx = all_idx[digits[:, i] == drive.ground_level]
                r_idx = g_idx + (RYD - drive.ground_level) * stride
                rows += [g_idx, r_idx]
                cols += [r_idx, g_idx]
            vals = np.ones(sum(len(r) for r in rows))
            mat = sp.coo_matrix(
                (vals, (np.concatenate(rows), np.concatenate(cols))),
                shape=(dim, dim),
            )
            self._cache[key] = mat.tocsr()
        return self._cache[key]

    @property
    def _diag_flat(self) -> np.ndarray:
        if "diag" not in self._cache:
            self._cache["diag"] = (
                -1j * self.blockade_diag - self.decay_diag
            ).ravel()
        return self._cache["diag"]

    def derivative(self, psi: np.ndarray, target: str, omega_t: float,
                   phase_sign: int = 1) -> np.ndarray:
        """d|psi>/dt under drive + blockade + non-Hermitian decay."""
        flat = psi.reshape(-1)
        out = (-1j * phase_sign * omega_t) * (self._coupling_scatter(target) @ flat)
        out += self._diag_flat * flat
        return out.reshape(psi.shape)

    # -- diagnostics ----------------------------------------------------

    @property
    def max_abs_blockade(self) -> float:
        return float(np.abs(self.blockade_diag).max(initial=0.0))

    @property
    def max_gamma(self) -> float:
        return float(self.gammas.max(initial=0.0))

    def rydberg_population(self, psi: np.ndarray, atom: int) -> float:
        return float(np.sum(np.abs(psi[_axis_index(self.n_atoms, atom, RYD)]) ** 2))

    def level_marginals(self, psi: np.ndarray) -> np.ndarray:
        """(n_atoms, 4) array of per-atom level populations."""
        p = np.abs(psi) ** 2
        out = np.empty((self.n_atoms, 4))
        for i in range(self.n_atoms):
            axes = tuple(a for a in range(self.n_atoms) if a != i)
            out[i] = p.sum(axis=axes)
        return out
