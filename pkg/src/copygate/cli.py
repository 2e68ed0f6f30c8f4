"""Configuration-driven experiment runner.

Subcommands reproduce the batch outputs of the study: gate-time tables,
gate-infidelity sweeps over the drive amplitude, measurement-infidelity
curves versus integration time, and minimal-integration-time tables.
All outputs are CSV files with a deterministic metadata header plus a
JSON sidecar; identical config and seed give byte-identical CSVs
regardless of worker count.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import hashlib
import json
import multiprocessing
import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .dynamics import (
    excitation_distributions,
    gate_infidelity,
    gate_infidelity_stderr,
)
from .geometry import C6Table, Species, ring_layout
from .hamiltonian import AtomArrayModel
from .readout import (
    ReadoutParams,
    aggregated_distributions,
    measurement_infidelity,
    mle_infidelity,
)
from .schedule import angular_from_mhz, build_copy_schedule

MISSING = "unreachable"


@dataclass(frozen=True)
class ExperimentConfig:
    n_values: tuple[int, ...] = (1, 2, 3, 4, 5)
    ring_radius: float = 2.0
    min_separation: float = 2.0
    c6_cs_cs: float = -2.9
    c6_cs_rb: float = -1.7
    t1_cs: float = 176.0
    t1_rb: float = 190.0
    rabi_sweep_mhz: tuple[float, ...] = tuple(float(f) for f in range(4, 16))
    envelope: str = "shaped"
    n_trajectories: int = 2000
    t_photon: float = 0.013
    t_bg: float = 0.19
    t_loss: float = 200.0
    markov_dt: float = 1e-3
    detection_fraction: float = 7.96e-3
    t_meas_grid: tuple[float, ...] = (0.5, 1.0, 2.0, 4.0, 6.0, 10.0, 15.0, 25.0)
    targets: tuple[float, ...] = (0.1, 0.01, 0.001)
    seed: int = 20260824
    out_dir: str = "results"
    mle_records: int = 20000

    def __post_init__(self):
        if not self.n_values or not self.rabi_sweep_mhz:
            raise ValueError("sweep lists must be non-empty")
        for name in ("ring_radius", "min_separation", "t1_cs", "t1_rb",
                     "t_photon", "t_bg", "t_loss", "markov_dt",
                     "detection_fraction"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        object.__setattr__(self, "n_values", tuple(int(n) for n in self.n_values))
        object.__setattr__(
            self, "rabi_sweep_mhz",
            tuple(sorted(float(f) for f in self.rabi_sweep_mhz)),
        )
        object.__setattr__(self, "t_meas_grid",
                           tuple(float(t) for t in self.t_meas_grid))
        object.__setattr__(self, "targets", tuple(float(t) for t in self.targets))

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentConfig":
        with open(path) as fh:
            data = json.load(fh)
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    # -- derived objects ---------------------------------------------

    def c6_table(self) -> C6Table:
        return C6Table(self.c6_cs_cs, self.c6_cs_rb)

    def model(self, n: int) -> AtomArrayModel:
        layout = ring_layout(
            n, self.ring_radius, self.min_separation,
            data_species=Species("Rb", self.t1_rb),
            ancilla_species=Species("Cs", self.t1_cs),
        )
        return AtomArrayModel.from_layout(layout, self.c6_table())

    def readout_params(self, t_meas: float) -> ReadoutParams:
        return ReadoutParams(
            t_meas=t_meas, t_photon=self.t_photon, t_bg=self.t_bg,
            t_loss=self.t_loss, dt=self.markov_dt,
            detection_fraction=self.detection_fraction,
        )


def derive_seed(root: int, *key: int) -> int:
    """Deterministic, order-independent sub-seed for a sweep cell."""
    ss = np.random.SeedSequence(root, spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])


# -- output ----------------------------------------------------------------


def _write_csv(path: Path, config: ExperimentConfig, header: list[str],
               rows: list[list], command: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(f"# config_hash: {config.config_hash()}\n")
        fh.write(f"# seed: {config.seed}\n")
        fh.write(f"# version: {__version__}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    sidecar = {
        "command": command,
        "config": config.to_dict(),
        "config_hash": config.config_hash(),
        "seed": config.seed,
        "version": __version__,
        "wall_clock_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    with open(path.with_suffix(".meta.json"), "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)


def _fmt(x: float) -> str:
    return repr(float(x))


# -- gate sweep -------------------------------------------------------------


def _sweep_cell(args: tuple) -> tuple:
    config, n, omega_idx = args
    f_mhz = config.rabi_sweep_mhz[omega_idx]
    omega = angular_from_mhz(f_mhz)
    sched = build_copy_schedule(n, omega, config.envelope)
    model = config.model(n)
    seed = derive_seed(config.seed, n, omega_idx)
    dists = excitation_distributions(sched, model, config.n_trajectories, seed)
    return (n, omega_idx, dists)


def run_gate_sweep(config: ExperimentConfig, workers: int = 1) -> dict:
    """Gate infidelity over (N, Omega); returns per-cell distributions."""
    cells = [
        (config, n, i)
        for n in config.n_values
        for i in range(len(config.rabi_sweep_mhz))
    ]
    if workers > 1:
        with multiprocessing.Pool(workers) as pool:
            results = pool.map(_sweep_cell, cells)
    else:
        results = [_sweep_cell(c) for c in cells]
    out: dict = {}
    for n, omega_idx, dists in results:
        out[(n, omega_idx)] = dists
    return out


def best_omega_index(config: ExperimentConfig, sweep: dict, n: int) -> int:
    """Argmin of IF_gate over the sweep grid; ties go to the lower drive."""
    values = [gate_infidelity(sweep[(n, i)])
              for i in range(len(config.rabi_sweep_mhz))]
    return int(np.argmin(values))


def cmd_gate_sweep(config: ExperimentConfig, out_dir: Path, workers: int) -> Path:
    sweep = run_gate_sweep(config, workers)
    rows = []
    for n in config.n_values:
        best = best_omega_index(config, sweep, n)
        for i, f_mhz in enumerate(config.rabi_sweep_mhz):
            d = sweep[(n, i)]
            rows.append([
                n, _fmt(f_mhz), _fmt(gate_infidelity(d)),
                _fmt(gate_infidelity_stderr(d)), d.n_trajectories,
                int(i == best),
            ])
    path = out_dir / "gate_sweep.csv"
    _write_csv(path, config, ["N", "omega_mhz", "if_gate", "stderr",
                              "trajectories", "is_argmin"], rows, "gate-sweep")
    return path


# -- gate time table ---------------------------------------------------------


def cmd_gate_time_table(config: ExperimentConfig, out_dir: Path,
                        n_max: int | None = None) -> Path:
    from .schedule import approx_gate_time, envelope_area_factor, exact_gate_time

    ns = range(1, (n_max or max(config.n_values)) + 1)
    stretch = envelope_area_factor("shaped")
    rows = []
    for n in ns:
        exact = exact_gate_time(n, np.pi)  # units of pi/Omega
        approx = approx_gate_time(n, np.pi)
        rows.append([n, _fmt(exact), _fmt(approx), _fmt(exact * stretch)])
    path = out_dir / "gate_time_table.csv"
    _write_csv(path, config,
               ["N", "exact_over_pi", "approx_over_pi", "shaped_over_pi"],
               rows, "gate-time-table")
    return path


# -- readout curves ----------------------------------------------------------


def run_readout_curve(
    config: ExperimentConfig, workers: int = 1, with_mle: bool = False
) -> list[dict]:
    """Measurement infidelity versus integration time for each N.

    Uses, for each N, the drive amplitude minimizing the gate infidelity
    over the configured sweep.  Also emits the N = 1 perfect-gate
    baseline (ideal copy, noisy single-ancilla detection).
    """
    sweep = run_gate_sweep(config, workers)
    points: list[dict] = []
    for n in config.n_values:
        best = best_omega_index(config, sweep, n)
        dists = sweep[(n, best)]
        floor = gate_infidelity(dists)
        for t in config.t_meas_grid:
            params = config.readout_params(t)
            q0, q1 = aggregated_distributions(dists, params, n)
            point = {
                "N": n, "scheme": "aggregated",
                "omega_mhz": config.rabi_sweep_mhz[best], "t_meas": t,
                "infidelity": measurement_infidelity(q0, q1),
                "stderr": gate_infidelity_stderr(dists),
                "gate_floor": floor,
            }
            points.append(point)
            if with_mle:
                value, stderr = mle_infidelity(
                    dists.p0, dists.p1, params, n, config.mle_records,
                    derive_seed(config.seed, n, best, int(t * 1000), 7),
                )
                points.append({
                    "N": n, "scheme": "mle",
                    "omega_mhz": config.rabi_sweep_mhz[best], "t_meas": t,
                    "infidelity": value, "stderr": stderr, "gate_floor": floor,
                })
    # perfect-gate single-ancilla baseline
    ideal = (np.array([1.0, 0.0]), np.array([0.0, 1.0]))
    for t in config.t_meas_grid:
        q0, q1 = aggregated_distributions(ideal, config.readout_params(t), 1)
        points.append({
            "N": 1, "scheme": "baseline_n1", "omega_mhz": float("nan"),
            "t_meas": t, "infidelity": measurement_infidelity(q0, q1),
            "stderr": 0.0, "gate_floor": 0.0,
        })
    return points


def cmd_readout_curve(config: ExperimentConfig, out_dir: Path, workers: int,
                      with_mle: bool = False) -> Path:
    points = run_readout_curve(config, workers, with_mle)
    rows = [
        [p["N"], p["scheme"], _fmt(p["omega_mhz"]), _fmt(p["t_meas"]),
         _fmt(p["infidelity"]), _fmt(p["stderr"]), _fmt(p["gate_floor"])]
        for p in points
    ]
    path = out_dir / "readout_curve.csv"
    _write_csv(path, config,
               ["N", "scheme", "omega_mhz", "t_meas", "infidelity", "stderr",
                "gate_floor"], rows, "readout-curve")
    return path


def cmd_min_time(config: ExperimentConfig, out_dir: Path, workers: int) -> Path:
    points = run_readout_curve(config, workers)
    rows = []
    for n in config.n_values:
        curve = sorted(
            (p for p in points if p["N"] == n and p["scheme"] == "aggregated"),
            key=lambda p: p["t_meas"],
        )
        for target in config.targets:
            hit = next((p for p in curve if p["infidelity"] <= target), None)
            rows.append([
                n, _fmt(target),
                _fmt(hit["t_meas"]) if hit is not None else MISSING,
            ])
    path = out_dir / "min_time.csv"
    _write_csv(path, config, ["N", "target_if", "min_t_meas"], rows, "min-time")
    return path


# -- validation suite --------------------------------------------------------


def run_validation(config: ExperimentConfig) -> list[tuple[str, bool, float]]:
    """Cross-check suite: each entry is (name, passed, measured discrepancy)."""
    import math

    from .dynamics import integrate_segment
    from .readout import (
        lower_incomplete_gamma_int,
        markov_sample,
        p_atom_analytic,
        total_variation,
    )
    from .schedule import PulseSegment, envelope_area_factor
    from .symmetric import compare_full_vs_symmetric

    checks: list[tuple[str, bool, float]] = []

    # RK4 versus the closed-form Rabi rotation, plus its order
    model = AtomArrayModel.uniform(1, 0.0)
    seg = PulseSegment("ancilla_0R", 1.0, np.pi / 4.0)
    psi = integrate_segment(model, model.initial_state(), seg)
    err = abs(abs(psi[2]) ** 2 - 0.5)
    checks.append(("rk4_rabi_halfway", err < 1e-8, err))
    coarse = integrate_segment(model, model.initial_state(), seg, dt_max=0.01)
    fine = integrate_segment(model, model.initial_state(), seg, dt_max=0.005)
    exact = np.zeros_like(psi)
    exact[0], exact[2] = np.cos(np.pi / 4), -1j * np.sin(np.pi / 4)
    ratio = np.linalg.norm(coarse - exact) / np.linalg.norm(fine - exact)
    checks.append(("rk4_order", 8.0 < ratio < 32.0, ratio))

    # symmetric-subspace oracle at uniform blockade
    disc = compare_full_vs_symmetric(2, 1.0, 100.0)
    checks.append(("symmetric_oracle_n2", disc < 1e-6, disc))

    # incomplete-gamma identities
    err = abs(lower_incomplete_gamma_int(1, 0.7) - (1.0 - math.exp(-0.7)))
    checks.append(("gamma_n0_identity", err < 1e-12, err))
    err = abs(lower_incomplete_gamma_int(6, 200.0) - 120.0) / 120.0
    checks.append(("gamma_saturation", err < 1e-9, err))

    # analytic single-atom pmf versus the Markov sampler
    params = config.readout_params(2.0)
    atom = p_atom_analytic(params)
    big_bg = replace(params, t_bg=1e9)  # background off
    samples = markov_sample(1, 1, big_bg, derive_seed(config.seed, 99), size=20000)
    hist = np.bincount(samples.ravel(), minlength=len(atom.pmf)) / 20000
    tvd = total_variation(atom.pmf, hist)
    checks.append(("markov_vs_analytic", tvd < 0.02, tvd))

    # envelope stretch factor close to 4/3
    dev = abs(envelope_area_factor("shaped") - 4.0 / 3.0) / (4.0 / 3.0)
    checks.append(("envelope_stretch_4_3", dev < 0.02, dev))
    return checks


def cmd_validate(config: ExperimentConfig) -> int:
    checks = run_validation(config)
    status = 0
    for name, ok, value in checks:
        print(f"{'PASS' if ok else 'FAIL'}  {name:24s}  {value:.3e}")
        if not ok:
            status = 1
    return status


# -- entry point -------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="copygate",
        description="Multi-atom copy-gate and collective readout simulator",
    )
    parser.add_argument("--config", type=Path, help="JSON experiment configuration")
    parser.add_argument("--seed", type=int, help="override the root seed")
    parser.add_argument("--out", type=Path, help="output directory")
    parser.add_argument("--trajectories", type=int, help="override trajectory count")
    parser.add_argument("--workers", type=int, default=1, help="worker processes")
    sub = parser.add_subparsers(dest="command", required=True)
    table = sub.add_parser("gate-time-table", help="gate-time formulas per N")
    table.add_argument("--n-max", type=int, default=None)
    sub.add_parser("gate-sweep", help="gate infidelity over the drive sweep")
    curve = sub.add_parser("readout-curve", help="measurement infidelity vs time")
    curve.add_argument("--mle", action="store_true",
                       help="add atom-resolved MLE rows")
    sub.add_parser("min-time", help="minimal integration time per target")
    sub.add_parser("validate", help="run the oracle cross-check suite")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    config = (ExperimentConfig.from_file(args.config) if args.config
              else ExperimentConfig())
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    if args.trajectories is not None:
        config = replace(config, n_trajectories=args.trajectories)
    out_dir = args.out or Path(config.out_dir)

    if args.command == "gate-time-table":
        path = cmd_gate_time_table(config, out_dir, args.n_max)
    elif args.command == "gate-sweep":
        path = cmd_gate_sweep(config, out_dir, args.workers)
    elif args.command == "readout-curve":
        path = cmd_readout_curve(config, out_dir, args.workers, args.mle)
    elif args.command == "min-time":
        path = cmd_min_time(config, out_dir, args.workers)
    elif args.command == "validate":
        return cmd_validate(config)
    else:  # pragma: no cover
        raise AssertionError(args.command)
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
