"""Command-line driver: ``floquet-dmft {run,sweep,validate}``.

Exit codes
----------
0  converged (``run``, ``sweep``) or all checks passed (``validate``)
1  configuration error; the message names the offending field
2  not converged, or a numerical failure; results that exist are written
3  ``validate`` found a failing check
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from dataclasses import asdict
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .dmft import SolverConfig, solve
from .floquet import ConfigurationError, InversionError
from .io import build_config, load_config, write_csv, write_json
from .observables import SpectralResult

log = logging.getLogger("floquet_dmft")

EXIT_OK, EXIT_CONFIG, EXIT_NOT_CONVERGED, EXIT_VALIDATE = 0, 1, 2, 3


def _now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def write_run_outputs(result, out_dir: Path, emit_plots=False, started=None) -> dict:
    """Write CSV files, manifest and optional plots for one solution; returns the manifest."""
    out_dir.mkdir(parents=True, exist_ok=True)
    spec = SpectralResult.from_solution(result)
    omega = spec.omega
    n = result.config.idx.n_max
    files = [
        write_csv(out_dir / "spectra.csv", {
            "omega [D]": omega,
            "ldos_row0 [1/D]": spec.ldos_row0,
            "ldos_full [1/D]": spec.ldos_full,
            "occupied_spectrum [1/D]": spec.occupied,
        }),
        write_csv(out_dir / "distribution.csv", {
            "omega [D]": omega,
            "f [1]": spec.distribution,
            "valid [bool]": spec.valid,
        }),
        write_csv(out_dir / "self_energy.csv", {
            "omega [D]": omega,
            "re_sigma_r_00 [D]": result.sigma.retarded[:, n, n].real,
            "im_sigma_r_00 [D]": result.sigma.retarded[:, n, n].imag,
            "im_sigma_k_00 [D]": result.sigma.keldysh[:, n, n].imag,
            "scattering_rate [D]": spec.scattering_rate,
        }),
    ]
    if emit_plots:
        from . import plotting

        files.append(plotting.write_run_gnuplot(out_dir))
        files.extend(plotting.plot_run(spec, out_dir))
    grid = result.grid
    manifest = {
        "tool": "floquet-dmft",
        "version": __version__,
        "config": asdict(result.config),
        "grid": {"omega_min": grid.omega_min, "omega_max": grid.omega_max,
                 "n_points": grid.n_points, "step": grid.step},
        "started": started,
        "finished": _now(),
        "convergence": result.record.as_dict(),
        "sum_rule": spec.sum_rule.as_dict(),
        "occupation_per_spin": spec.occupation,
        "files": sorted(p.name for p in files) + ["manifest.json"],
    }
    write_json(out_dir / "manifest.json", manifest)
    return manifest


def cmd_run(args) -> int:
    base, _ = load_config(args.config) if args.config else ({}, {})
    cfg = build_config(base)
    started = _now()
    result = solve(cfg, threads=args.threads)
    manifest = write_run_outputs(result, Path(args.out), args.emit_plots, started)
    rec = result.record
    log.info("%s after %d iterations, residual %.3e, sum-rule validity residual %.3e",
             "converged" if rec.converged else "NOT converged", rec.iterations,
             rec.final_residual, manifest["sum_rule"]["validity_residual"])
    return EXIT_OK if rec.converged else EXIT_NOT_CONVERGED


def sweep_points(base: dict, lists: dict):
    """``[(T, [omega_l ascending])]``; at least two points overall."""
    t_values = lists.get("T", [base.get("T", SolverConfig.T)])
    om_values = sorted(lists.get("omega_l", [base.get("omega_l", SolverConfig.omega_l)]))
    if len(t_values) * len(om_values) < 2:
        raise ConfigurationError("omega_l/T: a sweep needs at least two points")
    return [(t, om_values) for t in t_values]


def cmd_sweep(args) -> int:
    base, lists = load_config(args.config, allow_lists=True)
    plan = sweep_points(base, lists)
    base.setdefault("seed_policy", "warm_start")
    # validate every point before spending compute on any of them
    configs = {(t, om): build_config({**base, "T": t, "omega_l": om}) for t, oms in plan for om in oms}
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    long_cols = {k: [] for k in ("T [D]", "omega_l [D]", "omega [D]", "ldos_row0 [1/D]", "f [1]")}
    summary = {k: [] for k in ("T [D]", "omega_l [D]", "converged [bool]", "iterations [1]",
                               "final_residual [1]", "sum_rule_residual [1]",
                               "truncation_residual [1]", "validity_residual [1]")}
    points, all_ok = [], True
    t_values = [t for t, _ in plan]
    om_axis = plan[0][1]
    heat_ldos = heat_f = omega = None
    for it, (t, oms) in enumerate(plan):
        seed = seed_layout = None
        for io, om in enumerate(oms):
            cfg = configs[(t, om)]
            point_dir = out / f"T{t:g}_omega_l{om:g}"
            started = _now()
            entry = {"T": t, "omega_l": om, "dir": point_dir.name}
            try:
                res = solve(cfg, seed=seed, seed_layout=seed_layout, threads=args.threads)
            except InversionError as exc:
                log.error("T=%g omega_l=%g failed: %s", t, om, exc)
                entry.update(status="failed", error=str(exc))
                points.append(entry)
                all_ok = False
                continue
            manifest = write_run_outputs(res, point_dir, False, started)
            seed, seed_layout = res.sigma, cfg.layout()
            rec = res.record
            all_ok &= rec.converged
            entry.update(status="converged" if rec.converged else "not_converged",
                         iterations=rec.iterations, final_residual=rec.final_residual)
            points.append(entry)
            spec = SpectralResult.from_solution(res)
            if omega is None:
                omega = spec.omega
                heat_ldos = np.full((len(plan), len(om_axis), omega.size), np.nan)
                heat_f = np.full_like(heat_ldos, np.nan)
            if spec.omega.size == omega.size:
                heat_ldos[it, io] = spec.ldos_row0
                heat_f[it, io] = spec.distribution
            n = spec.omega.size
            long_cols["T [D]"].append(np.full(n, t))
            long_cols["omega_l [D]"].append(np.full(n, om))
            long_cols["omega [D]"].append(spec.omega)
            long_cols["ldos_row0 [1/D]"].append(spec.ldos_row0)
            long_cols["f [1]"].append(spec.distribution)
            sr = manifest["sum_rule"]
            for key, val in zip(summary, (t, om, rec.converged, rec.iterations, rec.final_residual,
                                          sr["residual"], sr["truncation_residual"], sr["validity_residual"])):
                summary[key].append(val)
            log.info("T=%g omega_l=%g: %s in %d iterations", t, om, entry["status"], rec.iterations)
    files = []
    if long_cols["omega [D]"]:
        files.append(write_csv(out / "sweep_spectra.csv", {k: np.concatenate(v) for k, v in long_cols.items()}))
        files.append(write_csv(out / "sweep_summary.csv", summary))
    if args.emit_plots and omega is not None:
        from . import plotting

        files.append(plotting.write_sweep_gnuplot(out, t_values))
        files.extend(plotting.plot_sweep(t_values, om_axis, omega, heat_ldos, heat_f, out))
    write_json(out / "sweep_manifest.json", {
        "tool": "floquet-dmft",
        "version": __version__,
        "base_config": asdict(configs[(plan[0][0], plan[0][1][0])]),
        "T": t_values,
        "omega_l": om_axis,
        "points": points,
        "finished": _now(),
        "files": sorted(p.name for p in files) + ["sweep_manifest.json"],
    })
    return EXIT_OK if all_ok else EXIT_NOT_CONVERGED


def cmd_validate(args) -> int:
    from .validation import run_suite

    base, _ = load_config(args.config) if args.config else ({}, {})
    cfg = build_config(base)
    t0 = time.perf_counter()
    checks = run_suite(cfg)
    for c in checks:
        log.info("%-22s %s  value %.3e  tol %.1e", c.name, "PASS" if c.passed else "FAIL", c.value, c.tolerance)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    passed = all(c.passed for c in checks)
    write_json(out / "validation.json", {
        "tool": "floquet-dmft",
        "version": __version__,
        "config": asdict(cfg),
        "passed": passed,
        "elapsed_seconds": time.perf_counter() - t0,
        "checks": [c.as_dict() for c in checks],
    })
    return EXIT_OK if passed else EXIT_VALIDATE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="floquet-dmft",
        description="Steady-state Floquet-Keldysh DMFT (IPT) for the driven Hubbard model.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log every iteration")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required):
        p.add_argument("--config", required=config_required, help="key = value configuration file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--threads", type=int, default=1, help="worker threads for the lattice step")
        p.add_argument("--emit-plots", action="store_true",
                       help="also write a gnuplot script and matplotlib PNGs")

    common(sub.add_parser("run", help="solve one parameter point"), False)
    common(sub.add_parser("sweep", help="solve a grid of omega_l (and T) values"), True)
    common(sub.add_parser("validate", help="run the oracle suite"), False)
    return parser


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "validate": cmd_validate}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s", stream=sys.stderr)
    logging.getLogger("floquet_dmft.dmft").setLevel(logging.INFO if args.verbose else logging.WARNING)
    if args.threads < 1:
        log.error("--threads must be >= 1")
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](args)
    except ConfigurationError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except InversionError as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NOT_CONVERGED


if __name__ == "__main__":
    sys.exit(main())
