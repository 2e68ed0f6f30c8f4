"""Copy-gate pulse sequence: U_d, alternating ancilla pulses, U_d^-1.

Frequency convention: drive amplitudes are angular rates in rad/us, so a
pi population transfer across a two-level transition driven with coupling
Omega (|g><R| + h.c.) takes t = pi/(2*Omega).  Configuration values quoted
in MHz are Omega/2pi and are converted with ``angular_from_mhz``.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

TWO_PI = 2.0 * np.pi

DATA_0R = "data_0R"
ANCILLA_0R = "ancilla_0R"
ANCILLA_1R = "ancilla_1R"

_TARGETS = (DATA_0R, ANCILLA_0R, ANCILLA_1R)


def angular_from_mhz(f_mhz: float) -> float:
    """Convert an ordinary frequency in MHz to an angular rate in rad/us."""
    return TWO_PI * f_mhz


def envelope_profile(t, total_time):
    """Smooth ramp profile, normalized to peak 1 at t = T/2.

    Vanishes with its first three derivatives at both endpoints, which
    suppresses non-adiabatic leakage to off-resonant states.
    """
    s = np.sin(np.pi * np.asarray(t) / total_time)
    return (1.0 - (1.0 - s) ** 4) ** 4


@functools.lru_cache(maxsize=1)
def _shaped_mean() -> float:
    # Mean of the normalized profile over one segment; the profile is
    # self-similar in t/T so this is a single universal constant.
    val, err = quad(lambda s: (1.0 - (1.0 - np.sin(np.pi * s)) ** 4) ** 4, 0.0, 1.0,
                    epsabs=1e-12, epsrel=1e-12, limit=200)
    if err > 1e-9:
        raise RuntimeError(f"envelope quadrature did not converge (err={err:.2e})")
    return val


def envelope_area_factor(mode: str = "shaped") -> float:
    """Duration stretch T_shaped/T_square preserving pulse area (~4/3)."""
    if mode == "square":
        return 1.0
    if mode == "shaped":
        return 1.0 / _shaped_mean()
    raise ValueError(f"unknown envelope mode {mode!r}")


@dataclass(frozen=True)
class PulseSegment:
    target: str
    amplitude: float  # peak Omega_0, rad/us
    duration: float   # us
    envelope: str = "square"
    phase_sign: int = 1

    def __post_init__(self):
        if self.target not in _TARGETS:
            raise ValueError(f"unknown target {self.target!r}")
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        if self.envelope not in ("square", "shaped"):
            raise ValueError(f"unknown envelope {self.envelope!r}")
        if self.phase_sign not in (1, -1):
            raise ValueError("phase_sign must be +1 or -1")

    def omega_at(self, t: float) -> float:
        """Instantaneous drive amplitude at time t within the segment."""
        if self.envelope == "square":
            return self.amplitude
        return self.amplitude * float(envelope_profile(t, self.duration))

    @property
    def area(self) -> float:
        """Time-integrated drive amplitude."""
        if self.envelope == "square":
            return self.amplitude * self.duration
        return self.amplitude * self.duration * _shaped_mean()


@dataclass(frozen=True)
class Schedule:
    segments: tuple[PulseSegment, ...]

    @property
    def total_time(self) -> float:
        return float(sum(s.duration for s in self.segments))

    @property
    def n_ancillae(self) -> int:
        return (len(self.segments) - 2) // 2

    def ancilla_segments(self) -> tuple[PulseSegment, ...]:
        return tuple(s for s in self.segments if s.target != DATA_0R)

    def to_records(self) -> list[dict]:
        """Serializable segment list for inspection and golden files."""
        return [
            {
                "target": s.target,
                "amplitude_rad_per_us": s.amplitude,
                "duration_us": s.duration,
                "envelope": s.envelope,
                "phase_sign": s.phase_sign,
            }
            for s in self.segments
        ]


def pi_area_durations(n: int, omega0: float) -> np.ndarray:
    """Durations t_1..t_2N of the alternating ancilla pulses (square case).

    Each pulse performs a single pi rotation between adjacent symmetric
    states; the bosonic enhancement of the k-th pulse pair is sqrt(N-k)
    for the H0 pulse and sqrt(k+1) for the H1 pulse.
    """
    if n < 1:
        raise ValueError("need at least one ancilla")
    if omega0 <= 0:
        raise ValueError("drive amplitude must be positive")
    out = np.empty(2 * n)
    for k in range(n):
        out[2 * k] = np.pi / (2.0 * omega0 * np.sqrt(n - k))
        out[2 * k + 1] = np.pi / (2.0 * omega0 * np.sqrt(k + 1))
    return out


def exact_gate_time(n: int, omega0: float) -> float:
    """Sum of all 2N+2 square-pulse durations."""
    harmonic_half = np.sum(1.0 / np.sqrt(np.arange(1, n + 1)))
    return float(np.pi / omega0 * (harmonic_half + 1.0))


def approx_gate_time(n: int, omega0: float) -> float:
    """Closed-form estimate T = (pi/2 Omega)(4 sqrt(N) - 1)."""
    return float(np.pi / (2.0 * omega0) * (4.0 * np.sqrt(n) - 1.0))


def build_copy_schedule(n: int, omega0: float, envelope_mode: str = "square") -> Schedule:
    """Full 2N+2 segment sequence: data pi pulse, N (H0, H1) pairs, inverse data pulse.

    For the shaped envelope every segment is stretched by the universal
    area factor so its time-integrated amplitude matches the square case.
    """
    stretch = envelope_area_factor(envelope_mode)
    t_data = np.pi / (2.0 * omega0) * stretch
    mid = pi_area_durations(n, omega0) * stretch
    segments = [PulseSegment(DATA_0R, omega0, t_data, envelope_mode, phase_sign=1)]
    for k in range(n):
        segments.append(PulseSegment(ANCILLA_0R, omega0, float(mid[2 * k]), envelope_mode))
        segments.append(PulseSegment(ANCILLA_1R, omega0, float(mid[2 * k + 1]), envelope_mode))
    segments.append(PulseSegment(DATA_0R, omega0, t_data, envelope_mode, phase_sign=-1))
    return Schedule(tuple(segments))
