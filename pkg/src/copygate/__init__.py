"""Simulator of the multi-atom Rydberg copy gate and collective readout."""

__version__ = "0.1.0"

from .dynamics import (
    ExcitationDistributions,
    TrajectoryOutcome,
    excitation_distributions,
    gate_infidelity,
    integrate_segment,
    run_trajectory,
)
from .geometry import (
    BlockadeMatrix,
    C6Table,
    Layout,
    Species,
    pairwise_blockade,
    ring_layout,
)
from .hamiltonian import AtomArrayModel
from .readout import (
    CountDistribution,
    ReadoutParams,
    aggregated_distributions,
    markov_sample,
    measurement_infidelity,
    mle_classify,
    mle_infidelity,
    p_atom_analytic,
    site_distributions,
)
from .schedule import (
    PulseSegment,
    Schedule,
    approx_gate_time,
    build_copy_schedule,
    envelope_area_factor,
    exact_gate_time,
    pi_area_durations,
)
from .symmetric import (
    BosonicParams,
    SymState,
    compare_full_vs_symmetric,
    run_symmetric_protocol,
)

__all__ = [
    "AtomArrayModel",
    "BlockadeMatrix",
    "BosonicParams",
    "C6Table",
    "CountDistribution",
    "ExcitationDistributions",
    "Layout",
    "PulseSegment",
    "ReadoutParams",
    "Schedule",
    "Species",
    "SymState",
    "TrajectoryOutcome",
    "aggregated_distributions",
    "approx_gate_time",
    "build_copy_schedule",
    "compare_full_vs_symmetric",
    "envelope_area_factor",
    "exact_gate_time",
    "excitation_distributions",
    "gate_infidelity",
    "integrate_segment",
    "markov_sample",
    "measurement_infidelity",
    "mle_classify",
    "mle_infidelity",
    "p_atom_analytic",
    "pairwise_blockade",
    "pi_area_durations",
    "ring_layout",
    "run_symmetric_protocol",
    "run_trajectory",
    "site_distributions",
]
