"""Scenario-driven command-line front end.

Commands
--------
classical-run   ensemble stochastic trajectories + moment-equation oracle
quantum-run     per-mode master-equation thermodynamics
cptp-scan       dissipator-matrix determinant over couplings and temperature
classical-limit stationary and relaxation comparison over an hbar sequence
check           built-in invariant suite

Shared flags: --config PATH, --out DIR, --seed U64, --threads N,
--format csv|json, --no-figures.

Exit codes: 0 success, 1 usage/config error, 2 numerical failure,
3 invariant-suite failure under ``check``.

Numeric tables are written with 17 significant digits and are
byte-identical for a fixed (config, seed) on one platform; the thread
count never changes results.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .classical_sde import ClassicalModeState, gaussian_mode_sampler, run_ensemble, run_trajectory
from .classical_thermo import (
    GaussianMomentState,
    entropy_record,
    gibbs_covariance,
    kl_divergence,
    mode_blocks,
    propagate_moments,
)
from .config import SCHEMA_VERSION, ScenarioConfig, load_config
from .errors import ConfigError, NumericalError
from .quantum_master import (
    FockDensityMatrix,
    build_L_matrix,
    build_mode_operators,
    cptp_for_all_temperatures,
    detailed_balance_gamma_pi,
    gibbs_density,
)
from .quantum_thermo import ModeDrive, classical_limit_check, relative_entropy_suite, run_thermo_protocol
from . import checks as checks_mod
from . import report


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def _jsonable(value):
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value)
    return value


@dataclass
class Table:
    columns: list
    rows: list = field(default_factory=list)

    def add(self, *values) -> None:
        if len(values) != len(self.columns):
            raise ValueError("row width mismatch")
        self.rows.append(tuple(values))


@dataclass
class ResultBundle:
    command: str
    manifest: dict
    tables: dict
    summary: dict
    flags: dict

    def write(self, outdir: Path, fmt: str = "csv") -> None:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        (outdir / "manifest.json").write_text(
            json.dumps(self.manifest, indent=2, sort_keys=True) + "\n"
        )
        for name, table in self.tables.items():
            if fmt == "csv":
                lines = [",".join(table.columns)]
                lines += [",".join(_fmt(v) for v in row) for row in table.rows]
                (outdir / f"{name}.csv").write_text("\n".join(lines) + "\n")
            else:
                payload = {
                    "columns": table.columns,
                    "rows": [[_jsonable(v) for v in row] for row in table.rows],
                }
                (outdir / f"{name}.json").write_text(
                    json.dumps(payload, indent=2, sort_keys=True) + "\n"
                )
        (outdir / "summary.json").write_text(
            json.dumps(
                {"scalars": {k: _jsonable(v) for k, v in self.summary.items()},
                 "flags": {k: bool(v) for k, v in self.flags.items()}},
                indent=2,
                sort_keys=True,
            )
            + "\n"
        )


def _manifest(command: str, cfg: ScenarioConfig, seed: int) -> dict:
    return {
        "command": command,
        "package_version": __version__,
        "schema_version": SCHEMA_VERSION,
        "seed": seed,
        "config": cfg.raw,
    }


def _initial_moments(cfg: ScenarioConfig, spec, ham) -> GaussianMomentState:
    if cfg.initial_kind != "gibbs_scaled":
        raise ConfigError("classical-run needs a Gaussian initial state "
                          "(initial.kind = 'gibbs_scaled')")
    blocks = mode_blocks(spec)
    covs = [cfg.initial_scale * c for c in gibbs_covariance(spec, ham, 0.0)]
    means = [np.full(b.dim, cfg.initial_mean) for b in blocks]
    return GaussianMomentState(blocks=blocks, means=means, covs=covs, time=0.0)


def cmd_classical_run(cfg: ScenarioConfig, seed: int, threads: int) -> ResultBundle:
    spec = cfg.lattice_spec()
    proto = cfg.protocol()
    ham = cfg.hamiltonian()
    sched = cfg.schedule(ham)
    mom0 = _initial_moments(cfg, spec, ham)
    sampler = gaussian_mode_sampler(spec, mom0.means, mom0.covs)

    # one resolved trajectory with per-step heat/work accounting
    init_rng = np.random.default_rng(np.random.SeedSequence((seed, 0x696e6974)))
    phi0, pi0 = sampler(init_rng, 1)
    traj = run_trajectory(
        ClassicalModeState(phi=phi0[0], pi=pi0[0]), ham, sched, proto,
        cfg.dt, cfg.steps, seed=seed, snapshot_stride=cfg.snapshot_stride,
    )
    trajectory = Table(["t", "energy", "heat", "work", "first_law_residual"])
    for i, t in enumerate(traj.times):
        trajectory.add(t, traj.energies[i], traj.heats[i], traj.works[i],
                       traj.first_law_residual[i])

    # ensemble moments against the exact moment dynamics
    ens = run_ensemble(sampler, ham, sched, proto, dt=cfg.dt, steps=cfg.steps,
                       n_traj=cfg.ensemble, seed=seed,
                       checkpoint_stride=cfg.snapshot_stride, threads=threads)
    moments = Table(["t", "block", "quantity", "ensemble", "oracle", "stderr", "zscore"])
    laws = Table(["t", "S_ST", "dS_dt", "heat_rate", "production_rate",
                  "S_KL", "dS_KL_dt", "kl_drive_term"])
    state = mom0
    max_z = 0.0
    min_production = np.inf
    check_steps = [s for s in range(cfg.steps + 1)
                   if s % cfg.snapshot_stride == 0 or s == cfg.steps]
    prev_step = 0
    for ci, s in enumerate(check_steps):
        if s > prev_step:
            state = propagate_moments(state, ham, sched, proto, cfg.dt, s - prev_step)
            prev_step = s
        t = s * cfg.dt
        rec = entropy_record(state, ham, sched, t, kB=spec.kB)
        s_kl, ds_kl, drive = kl_divergence(state, ham, sched, proto, t)
        laws.add(t, rec.S_ST, rec.dS_dt, rec.heat_rate, rec.production_rate,
                 s_kl, ds_kl, drive)
        min_production = min(min_production, rec.production_rate)
        for b, block in enumerate(state.blocks):
            mu_se = ens.mean_standard_error(ci, b)
            cov_se = ens.cov_standard_error(ci, b)
            for i in range(block.dim):
                se = max(mu_se[i], 1e-300)
                z = abs(ens.means[ci][b][i] - state.means[b][i]) / se
                max_z = max(max_z, z)
                moments.add(t, block.label, f"mean_{i}", ens.means[ci][b][i],
                            state.means[b][i], mu_se[i], z)
            for i in range(block.dim):
                for j in range(i, block.dim):
                    se = max(cov_se[i, j], 1e-300)
                    z = abs(ens.covs[ci][b][i, j] - state.covs[b][i, j]) / se
                    max_z = max(max_z, z)
                    moments.add(t, block.label, f"cov_{i}{j}", ens.covs[ci][b][i, j],
                                state.covs[b][i, j], cov_se[i, j], z)

    residual = float(traj.first_law_residual[-1])
    summary = {
        "first_law_residual": residual,
        "max_moment_zscore": float(max_z),
        "min_production_rate": float(min_production),
        "final_reality_defect": float(
            np.max(np.abs(traj.phis[-1] - traj.phis[-1][spec.conjugate_indices].conj()))
        ),
    }
    flags = {
        "second_law": min_production >= -1e-10,
        "moments_within_5_stderr": max_z < 5.0,
        "reality_constraint": summary["final_reality_defect"] < 1e-10,
    }
    return ResultBundle(
        command="classical-run",
        manifest=_manifest("classical-run", cfg, seed),
        tables={"trajectory": trajectory, "moments": moments, "laws": laws},
        summary=summary,
        flags=flags,
    )


def _classical_figures(bundle: ResultBundle, outdir: Path) -> None:
    traj = np.array([[float(v) for v in row] for row in bundle.tables["trajectory"].rows])
    report.classical_trajectory_figure(outdir, traj[:, 0], traj[:, 1], traj[:, 2],
                                       traj[:, 3], traj[:, 4])
    laws = np.array([[float(v) for v in row] for row in bundle.tables["laws"].rows])
    report.classical_laws_figure(outdir, laws[:, 0], laws[:, 1], laws[:, 3],
                                 laws[:, 4], laws[:, 5])
    mom = bundle.tables["moments"].rows
    times = sorted({float(r[0]) for r in mom})
    zmax = {t: 0.0 for t in times}
    for r in mom:
        zmax[float(r[0])] = max(zmax[float(r[0])], float(r[6]))
    report.classical_moments_figure(outdir, times, [zmax[t] for t in times])


def cmd_quantum_run(cfg: ScenarioConfig, seed: int, threads: int) -> ResultBundle:
    spec = cfg.lattice_spec()
    proto = cfg.protocol()
    ham = cfg.hamiltonian()
    blocks = mode_blocks(spec)
    gphi_fn = cfg.gamma_phi.as_function()

    b_schedule = lambda t: float(proto.b(np.array([0.0]), t)[0])  # noqa: E731
    db_schedule = lambda t: float(proto.db_dt(np.array([0.0]), t)[0])  # noqa: E731
    protocol_frozen = (cfg.tau == 0.0) or all(
        seg["kind"] == "constant" and seg.get("b") in (None, cfg.segments[0]["b"])
        for seg in cfg.segments
    )
    if cfg.uses_detailed_balance:
        kind = "gksl"
    else:
        kind = "general"
        if not protocol_frozen:
            raise ConfigError(
                "explicit gamma_Pi uses the sandwiched generator, which supports "
                "frozen mass schedules only; use gamma_Pi = 'detailed_balance' for ramps"
            )

    def run_block(block):
        kabs = np.array([block.kabs])
        omega0 = float(ham.omega_of_kabs(kabs, 0.0)[0])
        ops = build_mode_operators(cfg.fock_truncation, omega0, spec.hbar, spec.c)
        drive = ModeDrive(
            b=b_schedule,
            db_dt=db_schedule,
            gamma_phi=lambda t: float(gphi_fn(kabs, t)[0]),
        )
        gamma_pi = None
        if kind == "general":
            gamma_pi = float(cfg.gamma_pi.as_function()(kabs, 0.0)[0])
        if cfg.initial_kind == "fock_superposition":
            v = np.zeros(cfg.fock_truncation + 1, dtype=complex)
            v[list(cfg.initial_levels)] = 1.0 / np.sqrt(len(cfg.initial_levels))
            rho0 = FockDensityMatrix(rho=np.outer(v, v.conj()), omega=omega0)
        else:
            rho0 = gibbs_density(ops, spec.beta / cfg.initial_scale)
        traj = run_thermo_protocol(
            ops, block.lam, drive, spec.beta, rho0, cfg.dt, cfg.steps,
            snapshot_stride=cfg.snapshot_stride, kind=kind, gamma_pi=gamma_pi,
            kB=spec.kB,
        )
        return block, traj

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(run_block, blocks))
    else:
        results = [run_block(b) for b in blocks]

    qthermo = Table(["mode", "multiplicity", "t", "energy", "heat_rate", "work_rate",
                     "S_QT", "production_rate", "S_rel", "tilde_S_rel", "cptp",
                     "min_eigenvalue"])
    events = Table(["mode", "t", "event", "value"])
    per_mode_fig = []
    first_law_worst = 0.0
    min_production = np.inf
    identity_worst = 0.0
    any_positivity_event = False
    all_cptp = True
    for block, traj in results:
        mult = block.dim // 2
        for i, t in enumerate(traj.times):
            qthermo.add(block.label, mult, t, traj.energy[i], traj.heat_rate[i],
                        traj.work_rate[i], traj.S_QT[i], traj.production[i],
                        traj.S_rel[i], traj.tilde_S_rel[i], bool(traj.cptp[i]),
                        traj.min_eigenvalue[i])
            if traj.min_eigenvalue[i] < -1e-6:
                any_positivity_event = True
                events.add(block.label, t, "positivity_violation", traj.min_eigenvalue[i])
        all_cptp = all_cptp and bool(np.all(traj.cptp))
        dE = traj.energy - traj.energy[0]
        closure = np.abs(dE - traj.heat - traj.work)
        scale = max(np.max(np.abs(traj.energy)), 1e-300)
        first_law_worst = max(first_law_worst, float(np.max(closure) / scale))
        finite = traj.production[np.isfinite(traj.production)]
        if len(finite):
            min_production = min(min_production, float(np.min(finite)))
        if kind == "gksl" and len(traj.times) >= 5:
            _, _, resid = relative_entropy_suite(traj, spec.beta, kB=spec.kB)
            identity_worst = max(identity_worst, resid)
        per_mode_fig.append((block.label, traj.times, traj.energy, traj.S_QT,
                             traj.production, traj.S_rel))

    summary = {
        "first_law_relative_residual": first_law_worst,
        "min_production_rate": float(min_production),
        "relative_entropy_identity_residual": float(identity_worst),
        "positivity_events": len(events.rows),
    }
    flags = {
        "first_law": first_law_worst < 1e-6,
        "second_law": min_production >= -1e-10,
        "positivity": not any_positivity_event,
        "cptp": all_cptp,
    }
    bundle = ResultBundle(
        command="quantum-run",
        manifest=_manifest("quantum-run", cfg, seed),
        tables={"qthermo": qthermo, "events": events},
        summary=summary,
        flags=flags,
    )
    bundle._figure_payload = per_mode_fig  # consumed by the figure writer
    return bundle


def cmd_cptp_scan(cfg: ScenarioConfig, seed: int, threads: int) -> ResultBundle:
    spec = cfg.lattice_spec()
    p = cfg.scan_params()
    gphi, omega = p["gamma_phi"], p["omega"]
    gpi_dbc = detailed_balance_gamma_pi(gphi, omega, spec.c)
    ratios = np.linspace(p["ratio_min"], p["ratio_max"], p["ratio_points"])
    bho = np.geomspace(p["bho_min"], p["bho_max"], p["bho_points"])
    scan = Table(["gamma_phi", "gamma_pi", "ratio_to_dbc", "beta_hbar_omega",
                  "det_LH", "cptp"])
    min_det = np.empty((len(ratios), len(bho)))
    for i, r in enumerate(ratios):
        gpi = r * gpi_dbc
        for j, x in enumerate(bho):
            beta = float(x) / (spec.hbar * omega)
            d = build_L_matrix(gphi, gpi, omega, beta, spec.hbar, spec.c)
            scan.add(gphi, gpi, r, x, d.det_LH, d.cptp)
            min_det[i, j] = d.det_LH

    curve = Table(["omega", "gamma_phi", "gamma_pi_detailed_balance"])
    ham = cfg.hamiltonian()
    for kabs in sorted(set(np.round(spec.kabs, 12))):
        om_k = float(ham.omega_of_kabs(np.array([kabs]), 0.0)[0])
        curve.add(om_k, gphi, detailed_balance_gamma_pi(gphi, om_k, spec.c))

    on_line = cptp_for_all_temperatures(gphi, gpi_dbc, omega, spec.hbar, spec.c)
    off_line = (not cptp_for_all_temperatures(gphi, 1.01 * gpi_dbc, omega, spec.hbar, spec.c)
                and not cptp_for_all_temperatures(gphi, 0.99 * gpi_dbc, omega, spec.hbar, spec.c))
    gphi_zero = build_L_matrix(0.0, gpi_dbc, omega, 1.0 / (spec.hbar * omega),
                               spec.hbar, spec.c)
    summary = {
        "omega": omega,
        "gamma_pi_detailed_balance": gpi_dbc,
        "min_det_on_dbc": float(np.min(min_det[np.argmin(np.abs(ratios - 1.0))])),
        "det_at_gamma_phi_zero": gphi_zero.det_LH,
    }
    flags = {
        "dbc_is_cptp_for_all_temperatures": on_line,
        "off_dbc_fails_somewhere": off_line,
        "gamma_phi_zero_not_cptp": gphi_zero.det_LH < 0,
    }
    bundle = ResultBundle(
        command="cptp-scan",
        manifest=_manifest("cptp-scan", cfg, seed),
        tables={"scan": scan, "dbc_curve": curve},
        summary=summary,
        flags=flags,
    )
    bundle._figure_payload = (ratios, bho, min_det)
    return bundle


def cmd_classical_limit(cfg: ScenarioConfig, seed: int, threads: int) -> ResultBundle:
    spec = cfg.lattice_spec()
    p = cfg.classical_limit_params()
    rep = classical_limit_check(p["gamma_phi"], p["omega"], spec.c, spec.beta,
                                p["hbar_sequence"], kB=spec.kB,
                                hot_factor=p["hot_factor"])
    table = Table(["hbar", "beta_hbar_omega", "energy_ratio", "planck_factor",
                   "ratio_error", "relax_supnorm"])
    for row in rep.rows:
        table.add(row.hbar, row.beta_hbar_omega, row.energy_ratio, row.planck_factor,
                  row.ratio_error, row.relax_supnorm)
    summary = {
        "smallest_beta_hbar_omega": rep.rows[-1].beta_hbar_omega,
        "final_energy_ratio": rep.rows[-1].energy_ratio,
        "final_relax_supnorm": rep.rows[-1].relax_supnorm,
    }
    flags = {
        "ratio_matches_planck_factor": all(r.ratio_error < 1e-6 for r in rep.rows),
        "relaxation_converges_monotonically": rep.supnorms_monotone,
    }
    bundle = ResultBundle(
        command="classical-limit",
        manifest=_manifest("classical-limit", cfg, seed),
        tables={"classical_limit": table},
        summary=summary,
        flags=flags,
    )
    bundle._figure_payload = rep
    return bundle


def cmd_check(outdir: Path | None, fmt: str) -> int:
    results = checks_mod.run_all_checks()
    table = Table(["check", "passed", "detail"])
    for name, passed, detail in results:
        print(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")
        table.add(name, passed, detail)
    if outdir is not None:
        bundle = ResultBundle(
            command="check",
            manifest={"command": "check", "package_version": __version__},
            tables={"checks": table},
            summary={"passed": sum(1 for _, p, _ in results if p),
                     "total": len(results)},
            flags={"all_passed": all(p for _, p, _ in results)},
        )
        bundle.write(outdir, fmt)
    return 0 if all(p for _, p, _ in results) else 3


def _render_figures(bundle: ResultBundle, outdir: Path) -> None:
    if bundle.command == "classical-run":
        _classical_figures(bundle, outdir)
    elif bundle.command == "quantum-run":
        report.quantum_figure(outdir, bundle._figure_payload)
    elif bundle.command == "cptp-scan":
        ratios, bho, min_det = bundle._figure_payload
        report.cptp_scan_figure(outdir, ratios, bho, min_det)
    elif bundle.command == "classical-limit":
        rep = bundle._figure_payload
        report.classical_limit_figure(
            outdir,
            [r.hbar for r in rep.rows],
            [r.energy_ratio for r in rep.rows],
            [r.planck_factor for r in rep.rows],
            [r.relax_supnorm for r in rep.rows],
        )


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's default 2
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        sys.exit(1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fieldbath",
                     description="thermostatted scalar-field relaxation experiments")
    parser.add_argument("--version", action="version", version=f"fieldbath {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    runs = ["classical-run", "quantum-run", "cptp-scan", "classical-limit"]
    for name in runs:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="scenario JSON file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override run.seed")
        p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--no-figures", action="store_true")
    c = sub.add_parser("check")
    c.add_argument("--out", default=None, help="optional output directory")
    c.add_argument("--format", choices=("csv", "json"), default="csv")
    return parser


_COMMANDS = {
    "classical-run": cmd_classical_run,
    "quantum-run": cmd_quantum_run,
    "cptp-scan": cmd_cptp_scan,
    "classical-limit": cmd_classical_limit,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "check":
            return cmd_check(Path(args.out) if args.out else None, args.format)
        cfg = load_config(args.config)
        seed = cfg.seed if args.seed is None else args.seed
        if not 0 <= seed < 2**64:
            raise ConfigError(f"--seed must be a u64, got {seed}")
        if args.threads < 1:
            raise ConfigError(f"--threads must be >= 1, got {args.threads}")
        bundle = _COMMANDS[args.command](cfg, seed, args.threads)
        outdir = Path(args.out)
        bundle.write(outdir, args.format)
        if not args.no_figures:
            _render_figures(bundle, outdir)
        print(f"{args.command}: wrote {', '.join(sorted(bundle.tables))} to {outdir}")
        for k, v in sorted(bundle.flags.items()):
            print(f"  [{'ok' if v else 'FLAG'}] {k}")
        return 0
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
