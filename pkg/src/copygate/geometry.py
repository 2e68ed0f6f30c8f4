"""Atom placement and van-der-Waals blockade energies.

Distances are in micrometers, C6 coefficients in GHz um^6.  Pairwise
blockade energies are converted once, here, to ordinary-frequency MHz;
all downstream physics works in MHz and microseconds.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Species:
    """An atomic species with its Rydberg-state radiative lifetime (us)."""

    name: str
    rydberg_lifetime_t1: float

    def __post_init__(self):
        if self.rydberg_lifetime_t1 <= 0:
            raise ValueError("Rydberg lifetime must be positive")

    @property
    def gamma(self) -> float:
        """Decay rate 1/T1 in 1/us."""
        return 1.0 / self.rydberg_lifetime_t1


CESIUM = Species("Cs", 176.0)
RUBIDIUM = Species("Rb", 190.0)


@dataclass(frozen=True)
class AtomSpec:
    species: Species
    role: str  # "data" | "ancilla"
    position: tuple[float, float]

    def __post_init__(self):
        if self.role not in ("data", "ancilla"):
            raise ValueError(f"unknown role {self.role!r}")


@dataclass(frozen=True)
class Layout:
    """An ordered collection of atoms with a minimum-separation constraint."""

    atoms: tuple[AtomSpec, ...]
    min_separation: float = 2.0

    def __post_init__(self):
        n_data = sum(1 for a in self.atoms if a.role == "data")
        if n_data != 1:
            raise ValueError(f"layout must contain exactly one data atom, got {n_data}")
        d = self.distances()
        off = d[~np.eye(len(self.atoms), dtype=bool)]
        if off.size and off.min() < self.min_separation - 1e-12:
            raise ValueError(
                f"pairwise distance {off.min():.4f} um below minimum "
                f"separation {self.min_separation} um"
            )

    @property
    def n_atoms(self) -> int:
        return len(self.atoms)

    @property
    def n_ancillae(self) -> int:
        return sum(1 for a in self.atoms if a.role == "ancilla")

    @property
    def data_index(self) -> int:
        return next(i for i, a in enumerate(self.atoms) if a.role == "data")

    def distances(self) -> np.ndarray:
        pos = np.array([a.position for a in self.atoms])
        diff = pos[:, None, :] - pos[None, :, :]
        return np.sqrt((diff**2).sum(axis=-1))


@dataclass(frozen=True)
class C6Table:
    """Van-der-Waals C6 coefficients in GHz um^6."""

    c6_cs_cs: float = -2.9
    c6_cs_rb: float = -1.7

    def __post_init__(self):
        if self.c6_cs_cs == 0 or self.c6_cs_rb == 0:
            raise ValueError("C6 coefficients must be nonzero")

    def coefficient(self, a: Species, b: Species) -> float:
        pair = frozenset((a.name, b.name))
        if pair == frozenset(("Cs",)):
            return self.c6_cs_cs
        if pair == frozenset(("Cs", "Rb")):
            return self.c6_cs_rb
        raise KeyError(f"no C6 tabulated for pair {sorted(pair)}")


@dataclass(frozen=True)
class BlockadeMatrix:
    """Symmetric matrix of pairwise blockade energies in MHz, zero diagonal."""

    v_mhz: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.v_mhz, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError("blockade matrix must be square")
        if not np.allclose(v, v.T):
            raise ValueError("blockade matrix must be symmetric")
        if np.any(np.diag(v) != 0):
            raise ValueError("blockade matrix must have zero diagonal")
        object.__setattr__(self, "v_mhz", v)

    @property
    def n_atoms(self) -> int:
        return self.v_mhz.shape[0]

    @property
    def max_abs_mhz(self) -> float:
        return float(np.abs(self.v_mhz).max())


def ring_layout(
    n: int,
    radius: float,
    min_separation: float = 2.0,
    data_species: Species = RUBIDIUM,
    ancilla_species: Species = CESIUM,
) -> Layout:
    """Data atom at the origin, n ancillae on a regular n-gon of given radius."""
    if n < 1:
        raise ValueError("need at least one ancilla")
    if radius <= 0:
        raise ValueError("radius must be positive")
    atoms = [AtomSpec(data_species, "data", (0.0, 0.0))]
    for k in range(n):
        theta = 2.0 * np.pi * k / n
        atoms.append(
            AtomSpec(
                ancilla_species,
                "ancilla",
                (radius * float(np.cos(theta)), radius * float(np.sin(theta))),
            )
        )
    return Layout(tuple(atoms), min_separation=min_separation)


def pairwise_blockade(layout: Layout, c6: C6Table | None = None) -> BlockadeMatrix:
    """V_ij = C6 / r_ij^6 with species-appropriate C6, in MHz."""
    c6 = c6 or C6Table()
    n = layout.n_atoms
    r = layout.distances()
    v = np.zeros((n, n))
    for i, j in itertools.combinations(range(n), 2):
        coeff = c6.coefficient(layout.atoms[i].species, layout.atoms[j].species)
        v[i, j] = v[j, i] = 1e3 * coeff / r[i, j] ** 6  # GHz -> MHz
    return BlockadeMatrix(v)


def uniform_blockade(n_atoms: int, v_mhz: float) -> BlockadeMatrix:
    """Uniform all-to-all blockade, used for symmetric-subspace cross-checks."""
    v = np.full((n_atoms, n_atoms), float(v_mhz))
    np.fill_diagonal(v, 0.0)
    return BlockadeMatrix(v)
