"""Exact symmetric-subspace (three-mode bosonic) model of the ancillae.

Serves as an independent oracle for the full product-basis model: with a
uniform blockade energy the permutation symmetry makes the occupation-
number description exact.  No decay here; this is an algebra oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .schedule import ANCILLA_0R, ANCILLA_1R, PulseSegment, Schedule


@dataclass(frozen=True)
class BosonicParams:
    omega: float  # rad/us
    eta: float    # uniform blockade energy, rad/us

    def __post_init__(self):
        if self.eta < 0:
            raise ValueError("blockade energy must be nonnegative")


def sym_basis(n: int, n_r_max: int) -> tuple[tuple[int, int, int], ...]:
    """All (n0, n1, nR) with n0+n1+nR = n and nR <= n_r_max."""
    out = []
    for n_r in range(min(n, n_r_max) + 1):
        for n1 in range(n - n_r + 1):
            out.append((n - n1 - n_r, n1, n_r))
    return tuple(out)


@dataclass
class SymState:
    n: int
    n_r_max: int
    amps: np.ndarray  # complex, indexed like sym_basis(n, n_r_max)

    @classmethod
    def initial(cls, n: int, n_r_max: int | None = None) -> "SymState":
        """All ancillae in |0>, i.e. |n; 0; 0>."""
        n_r_max = default_r_cap(n) if n_r_max is None else n_r_max
        basis = sym_basis(n, n_r_max)
        amps = np.zeros(len(basis), dtype=complex)
        amps[basis.index((n, 0, 0))] = 1.0
        return cls(n, n_r_max, amps)

    @property
    def basis(self) -> tuple[tuple[int, int, int], ...]:
        return sym_basis(self.n, self.n_r_max)

    def populations(self) -> dict[tuple[int, int, int], float]:
        return {b: float(abs(a) ** 2) for b, a in zip(self.basis, self.amps)}

    def n1_distribution(self) -> np.ndarray:
        """Marginal probability of finding n1 ancillae in |1>."""
        p = np.zeros(self.n + 1)
        for (_, n1, _), a in zip(self.basis, self.amps):
            p[n1] += abs(a) ** 2
        return p

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))


def default_r_cap(n: int) -> int:
    # Double Rydberg occupancy models the leakage channel; triple is
    # negligible at the simulated parameters.
    return min(n, 3)


def build_hamiltonian(n: int, params: BosonicParams, which: str,
                      n_r_max: int) -> np.ndarray:
    """Omega (a_g^+ a_R + a_R^+ a_g) + (eta/2)(a_R^+)^2 a_R^2 on the capped ladder."""
    if which not in (ANCILLA_0R, ANCILLA_1R):
        raise ValueError(f"unknown pulse type {which!r}")
    basis = sym_basis(n, n_r_max)
    index = {b: i for i, b in enumerate(basis)}
    dim = len(basis)
    h = np.zeros((dim, dim), dtype=complex)
    for (n0, n1, n_r), i in index.items():
        h[i, i] = 0.5 * params.eta * n_r * (n_r - 1)
        # a_g^+ a_R: one atom leaves |R> for the target ground state
        if n_r >= 1:
            if which == ANCILLA_0R:
                dest = (n0 + 1, n1, n_r - 1)
                elem = params.omega * math.sqrt(n_r) * math.sqrt(n0 + 1)
            else:
                dest = (n0, n1 + 1, n_r - 1)
                elem = params.omega * math.sqrt(n_r) * math.sqrt(n1 + 1)
            j = index[dest]
            h[j, i] += elem
            h[i, j] += elem
    return h


def _evolve_segment(state: SymState, params: BosonicParams,
                    segment: PulseSegment) -> SymState:
    which = segment.target
    if segment.envelope == "square":
        h = build_hamiltonian(state.n, params, which, state.n_r_max)
        u = expm(-1j * h * segment.duration)
        return SymState(state.n, state.n_r_max, u @ state.amps)
    # Shaped envelope: RK4 with the time-dependent amplitude.
    h_drive = build_hamiltonian(state.n, BosonicParams(1.0, 0.0), which, state.n_r_max)
    h_block = build_hamiltonian(state.n, BosonicParams(0.0, params.eta), which,
                                state.n_r_max)
    scale = max(params.omega, params.eta, 1e-12)
    steps = max(1, int(np.ceil(segment.duration * 50.0 * scale)))
    dt = segment.duration / steps
    amps = state.amps.copy()

    def deriv(a, t):
        return -1j * (segment.omega_at(t) * (h_drive @ a) + h_block @ a)

    t = 0.0
    for _ in range(steps):
        k1 = deriv(amps, t)
        k2 = deriv(amps + 0.5 * dt * k1, t + 0.5 * dt)
        k3 = deriv(amps + 0.5 * dt * k2, t + 0.5 * dt)
        k4 = deriv(amps + dt * k3, t + dt)
        amps = amps + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += dt
    return SymState(state.n, state.n_r_max, amps)


def bosonic_step_H0(state: SymState, params: BosonicParams, dt: float) -> SymState:
    h = build_hamiltonian(state.n, params, ANCILLA_0R, state.n_r_max)
    return SymState(state.n, state.n_r_max, expm(-1j * h * dt) @ state.amps)


def bosonic_step_H1(state: SymState, params: BosonicParams, dt: float) -> SymState:
    h = build_hamiltonian(state.n, params, ANCILLA_1R, state.n_r_max)
    return SymState(state.n, state.n_r_max, expm(-1j * h * dt) @ state.amps)


def run_symmetric_protocol(
    n: int,
    omega: float,
    eta: float,
    sched: Schedule,
    blocked: bool = False,
    n_r_max: int | None = None,
) -> tuple[SymState, np.ndarray]:
    """Apply the ancilla pulses of a copy schedule in the bosonic picture.

    ``blocked`` models the data atom sitting in |R>: all ancilla drives
    are inert and the register stays in |n; 0; 0>.
    """
    params = BosonicParams(omega, eta)
    state = SymState.initial(n, n_r_max)
    if not blocked:
        for segment in sched.ancilla_segments():
            state = _evolve_segment(state, params, segment)
    return state, state.n1_distribution()


def full_to_symmetric_populations(psi: np.ndarray, n: int) -> dict[tuple[int, int, int], float]:
    """Project a product-basis ancilla state onto occupation-number populations.

    |<n0;n1;nR|psi>|^2 = |sum of class amplitudes|^2 * n0! n1! nR! / N!.
    """
    pops: dict[tuple[int, int, int], complex] = {}
    psi = np.asarray(psi).reshape((4,) * n)
    for idx in np.ndindex(*psi.shape):
        amp = psi[idx]
        if amp == 0:
            continue
        if any(level == 3 for level in idx):
            continue  # loss states are outside the three-mode picture
        key = (idx.count(0), idx.count(1), idx.count(2))
        pops[key] = pops.get(key, 0.0) + amp
    out = {}
    for (n0, n1, n_r), total in pops.items():
        mult = math.factorial(n) // (
            math.factorial(n0) * math.factorial(n1) * math.factorial(n_r)
        )
        out[(n0, n1, n_r)] = float(abs(total) ** 2) / mult
    return out


def compare_full_vs_symmetric(n: int, omega: float, eta: float,
                              envelope_mode: str = "square") -> float:
    """Max population discrepancy between the two models under uniform blockade.

    The full model runs the ancilla pulses with gamma = 0 and all pairwise
    blockade energies equal to eta; exact agreement is expected.
    """
    from .dynamics import integrate_segment
    from .hamiltonian import AtomArrayModel
    from .schedule import build_copy_schedule

    sched = build_copy_schedule(n, omega, envelope_mode)
    model = AtomArrayModel.uniform(n, eta)
    psi = model.initial_state()
    for segment in sched.ancilla_segments():
        psi = integrate_segment(model, psi, segment)
    full_pops = full_to_symmetric_populations(psi, n)

    state, _ = run_symmetric_protocol(n, omega, eta, sched, n_r_max=n)
    sym_pops = state.populations()

    keys = set(full_pops) | set(sym_pops)
    return max(abs(full_pops.get(k, 0.0) - sym_pops.get(k, 0.0)) for k in keys)
