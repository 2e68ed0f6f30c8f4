import numpy as np
import pytest
from scipy.stats import kstwobign

from copygate.dynamics import (
    ExcitationDistributions,
    IntegrationError,
    _no_jump_evolution,
    excitation_distributions,
    gate_infidelity,
    gate_infidelity_stderr,
    integrate_segment,
    run_trajectory,
    trajectory_rng,
)
from copygate.geometry import pairwise_blockade, ring_layout, uniform_blockade
from copygate.hamiltonian import G0, G1, LOSS, RYD, AtomArrayModel
from copygate.schedule import (
    ANCILLA_0R,
    TWO_PI,
    PulseSegment,
    angular_from_mhz,
    build_copy_schedule,
)

OMEGA = angular_from_mhz(6.0)


# -- integration -------------------------------------------------------------


def test_zero_amplitude_segment_only_phases():
    model = AtomArrayModel.uniform(2, 10.0 * OMEGA)
    psi = np.zeros((4, 4), dtype=complex)
    psi[G0, G0] = np.sqrt(0.5)
    psi[RYD, RYD] = np.sqrt(0.5)
    seg = PulseSegment(ANCILLA_0R, 0.0, 0.05)
    out = integrate_segment(model, psi, seg, dt_max=1e-4)
    # populations unchanged; the doubly excited component picks up the
    # blockade phase e^{-i eta t}
    assert np.abs(out[G0, G0]) ** 2 == pytest.approx(0.5, abs=1e-10)
    phase = out[RYD, RYD] / psi[RYD, RYD]
    assert phase == pytest.approx(np.exp(-1j * 10.0 * OMEGA * 0.05), abs=1e-6)


def test_half_pi_area_pulse_full_transfer():
    model = AtomArrayModel.uniform(1, 0.0)
    seg = PulseSegment(ANCILLA_0R, OMEGA, np.pi / (2.0 * OMEGA))
    psi = integrate_segment(model, model.initial_state(), seg)
    assert abs(psi[RYD]) ** 2 == pytest.approx(1.0, abs=1e-8)


def test_rabi_rotation_matches_closed_form():
    model = AtomArrayModel.uniform(1, 0.0)
    theta = 0.37
    seg = PulseSegment(ANCILLA_0R, OMEGA, theta / OMEGA)
    psi = integrate_segment(model, model.initial_state(), seg)
    exact = np.zeros(4, dtype=complex)
    exact[G0], exact[RYD] = np.cos(theta), -1j * np.sin(theta)
    assert np.linalg.norm(psi - exact) < 1e-8


def test_rk4_error_fourth_order_in_step():
    model = AtomArrayModel.uniform(1, 0.0)
    seg = PulseSegment(ANCILLA_0R, 1.0, np.pi / 4.0)
    exact = np.zeros(4, dtype=complex)
    exact[G0], exact[RYD] = np.cos(np.pi / 4.0), -1j * np.sin(np.pi / 4.0)
    coarse = integrate_segment(model, model.initial_state(), seg, dt_max=0.01)
    fine = integrate_segment(model, model.initial_state(), seg, dt_max=0.005)
    ratio = np.linalg.norm(coarse - exact) / np.linalg.norm(fine - exact)
    assert 8.0 < ratio < 32.0


def test_integration_rejects_norm_growth():
    from copygate.dynamics import _run_steps

    model = AtomArrayModel.uniform(1, 0.0)
    seg = PulseSegment(ANCILLA_0R, 2.0, 10.0)
    flat = model.initial_state().reshape(-1).astype(complex)
    with pytest.raises(IntegrationError):
        # Omega dt = 4 sits outside the RK4 stability region on the
        # imaginary axis, so the norm grows and the monitor must trip
        _run_steps(model, flat, seg, 2.0, 0, 5)


# -- trajectories ------------------------------------------------------------


def strong_uniform_model(n, gamma=0.0):
    """Data atom + n ancillae with a uniform 100x blockade on every pair."""
    bl = uniform_blockade(n + 1, 100.0 * OMEGA / TWO_PI)
    return AtomArrayModel.from_parts(bl, np.full(n + 1, gamma), data_index=0)


def test_ideal_limit_copies_one():
    model = strong_uniform_model(2)
    sched = build_copy_schedule(2, OMEGA)
    hits = 0
    for j in range(20):
        out = run_trajectory(1, sched, model, trajectory_rng(5, 1, j))
        hits += out.n_one == 2
        assert out.jumps == ()
    assert hits == 20


def test_ideal_limit_blocks_zero():
    model = strong_uniform_model(2)
    sched = build_copy_schedule(2, OMEGA)
    for j in range(20):
        out = run_trajectory(0, sched, model, trajectory_rng(6, 0, j))
        assert out.n_one == 0


def test_lost_data_atom_unblocks_the_register():
    # a data atom that decays right after its excitation pulse no longer
    # blocks the ancillae; they get excited even for initial |0>. A minority
    # of trajectories never jump: gamma >> Omega suppresses the excitation
    # itself (Zeno regime), the data atom then stays in |0> with a small
    # Rydberg amplitude and the ancillae are driven almost unblocked.
    bl = pairwise_blockade(ring_layout(2, radius=2.0))
    gammas = np.array([200.0, 0.0, 0.0])  # data decays almost immediately
    model = AtomArrayModel.from_parts(bl, gammas, data_index=0)
    sched = build_copy_schedule(2, OMEGA)
    excited = 0
    lost = 0
    for j in range(60):
        out = run_trajectory(0, sched, model, trajectory_rng(7, 0, j))
        excited += out.n_one > 0
        lost += any(atom == 0 for atom, _ in out.jumps)
    assert lost >= 40
    assert excited > 30


def test_gamma_zero_trajectory_equals_direct_integration():
    model = AtomArrayModel.from_layout(ring_layout(2, radius=2.0))
    model = AtomArrayModel.from_parts(
        pairwise_blockade(ring_layout(2, radius=2.0)), np.zeros(3), data_index=0
    )
    sched = build_copy_schedule(2, OMEGA)
    final, min_norm2 = _no_jump_evolution(1, sched, model, None)
    psi = model.initial_state(G1)
    for seg in sched.segments:
        psi = integrate_segment(model, psi, seg)
    assert np.array_equal(final, psi)
    assert min_norm2 == pytest.approx(1.0, abs=1e-8)
    out = run_trajectory(1, sched, model, trajectory_rng(11, 1, 0))
    assert out.jumps == ()


def test_fast_ensemble_matches_per_trajectory_runs_exactly():
    # boosted decay so that jumps actually occur in a sizable fraction
    bl = pairwise_blockade(ring_layout(2, radius=2.0))
    model = AtomArrayModel.from_parts(bl, np.full(3, 0.5), data_index=0)
    sched = build_copy_schedule(2, OMEGA)
    seed, n_traj = 21, 300
    dists = excitation_distributions(sched, model, n_traj, seed)
    jumps_seen = 0
    for logical in (0, 1):
        counts = np.zeros(3)
        for j in range(n_traj):
            out = run_trajectory(logical, sched, model,
                                 trajectory_rng(seed, logical, j))
            counts[out.n_one] += 1
            jumps_seen += len(out.jumps)
        assert np.array_equal(counts / n_traj, dists.distribution(logical))
    assert jumps_seen > 10  # the equality above must cover the jump branch


def test_jump_times_are_exponential():
    # drives off, one atom pinned in |R>: loss times follow Exp(T1)
    t1 = 176.0
    window = 600.0
    model = AtomArrayModel.uniform(1, 0.0, gamma=1.0 / t1)
    sched_seg = PulseSegment(ANCILLA_0R, 0.0, window)
    from copygate.schedule import Schedule

    sched = Schedule((sched_seg,))
    pinned = np.zeros(4, dtype=complex)
    pinned[RYD] = 1.0
    times = []
    n_traj = 10_000
    for j in range(n_traj):
        out = run_trajectory(0, sched, model, trajectory_rng(31, 0, j),
                             dt_max=0.5, initial_state=pinned)
        if out.jumps:
            times.append(out.jumps[0][1])
        else:
            assert out.levels[0] == RYD
    times = np.asarray(times)
    # empirical CDF against the exponential truncated to the window
    times.sort()
    trunc = 1.0 - np.exp(-window / t1)
    cdf = (1.0 - np.exp(-times / t1)) / trunc
    ecdf_hi = np.arange(1, len(times) + 1) / len(times)
    ecdf_lo = np.arange(0, len(times)) / len(times)
    d_stat = max(np.abs(ecdf_hi - cdf).max(), np.abs(ecdf_lo - cdf).max())
    critical = kstwobign.ppf(0.99) / np.sqrt(len(times))
    assert d_stat < critical


def test_trajectory_streams_are_order_independent():
    model = strong_uniform_model(1, gamma=0.05)
    sched = build_copy_schedule(1, OMEGA)
    a = run_trajectory(1, sched, model, trajectory_rng(3, 1, 7))
    b = run_trajectory(1, sched, model, trajectory_rng(3, 1, 7))
    assert a == b


def test_excitation_distributions_basics():
    model = strong_uniform_model(2)
    sched = build_copy_schedule(2, OMEGA)
    one = excitation_distributions(sched, model, 1, seed=1)
    assert np.array_equal(one.p0, [1.0, 0.0, 0.0])
    assert np.array_equal(one.p1, [0.0, 0.0, 1.0])
    many = excitation_distributions(sched, model, 50, seed=1)
    assert many.p0.sum() == pytest.approx(1.0, abs=1e-12)
    assert many.p1.sum() == pytest.approx(1.0, abs=1e-12)
    assert many.p0[0] > 0.999 and many.p1[2] > 0.999
    assert np.all(many.stderr0 == np.sqrt(many.p0 * (1 - many.p0) / 50))


def test_excitation_distributions_deterministic():
    bl = pairwise_blockade(ring_layout(2, radius=2.0))
    model = AtomArrayModel.from_parts(bl, np.full(3, 0.1), data_index=0)
    sched = build_copy_schedule(2, OMEGA)
    a = excitation_distributions(sched, model, 100, seed=9)
    b = excitation_distributions(sched, model, 100, seed=9)
    assert np.array_equal(a.p0, b.p0) and np.array_equal(a.p1, b.p1)
    c = excitation_distributions(sched, model, 100, seed=10)
    assert not (np.array_equal(a.p0, c.p0) and np.array_equal(a.p1, c.p1))


# -- infidelity --------------------------------------------------------------


def dists_from(p0, p1):
    p0, p1 = np.asarray(p0, float), np.asarray(p1, float)
    z = np.zeros_like(p0)
    return ExcitationDistributions(p0, p1, z, z, 1)


def test_gate_infidelity_extremes():
    assert gate_infidelity(dists_from([0.3, 0.7], [0.3, 0.7])) == pytest.approx(0.5)
    assert gate_infidelity(dists_from([1.0, 0.0], [0.0, 1.0])) == pytest.approx(0.0)


def test_gate_infidelity_hand_value():
    assert gate_infidelity(dists_from([0.9, 0.1], [0.1, 0.9])) == pytest.approx(0.1)


def test_gate_infidelity_symmetries():
    p0 = np.array([0.6, 0.3, 0.1])
    p1 = np.array([0.1, 0.2, 0.7])
    base = gate_infidelity(dists_from(p0, p1))
    assert gate_infidelity(dists_from(p1, p0)) == pytest.approx(base)
    perm = [2, 0, 1]
    assert gate_infidelity(dists_from(p0[perm], p1[perm])) == pytest.approx(base)


def test_gate_infidelity_stderr_propagation():
    d = dists_from([0.9, 0.1], [0.1, 0.9])
    d = ExcitationDistributions(d.p0, d.p1,
                                np.array([0.01, 0.01]), np.array([0.02, 0.02]), 100)
    expect = np.sqrt(0.0625 * (2 * 0.01**2 + 2 * 0.02**2))
    assert gate_infidelity_stderr(d) == pytest.approx(expect)
