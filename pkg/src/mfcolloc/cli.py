"""Command-line driver: ``mfcolloc <command> [--config PATH] [--out DIR] ...``.

Exit status is 0 on success, 2 for configuration or input errors and 3
for numerical failures; failures also print one JSON line on stderr.
"""

import argparse
import csv
import json
import os
import sys
import warnings

import numpy as np

from . import config as cfgmod
from .errors import InputError, MfcError, NodeFailure, NumericalError
from .fem import energy, fmt, solve_gfe, write_trajectory_csv
from .forcing import RandomPoint
from .mc import McConfig, mc_moments, sample_point
from .multifid import (
    moment_errors,
    reference_full_run,
    run_multifid,
    summary_dict,
    write_moments_csv,
)
from .rom import assemble_rom, build_pod_basis, numerical_rank, relative_error, solve_rom, write_modes_csv
from .sparse_grid import LEVEL_CONVENTION, smolyak_plan, write_plan_csv
from .studies import VARIANTS, basis_comparison, fd_check, study_points, write_comparison_csv, write_fd_csv

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _floats(values):
    """Nested structure with numpy scalars/arrays converted for JSON."""
    if isinstance(values, dict):
        return {k: _floats(v) for k, v in values.items()}
    if isinstance(values, (list, tuple, np.ndarray)):
        return [_floats(v) for v in values]
    if isinstance(values, (np.floating, float)):
        return float(values)
    if isinstance(values, np.integer):
        return int(values)
    return values


def _write_json(path, data):
    with open(path, "w") as fh:
        json.dump(_floats(data), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _parse_point(text, d, name):
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise cfgmod.ConfigError(name, "expects comma-separated numbers") from None
    if len(vals) != d:
        raise cfgmod.ConfigError(name, f"expects {d} values, got {len(vals)}")
    return RandomPoint(vals)


def _source_point(args, cfg):
    d = cfg.problem.d
    if args.xi is not None:
        return _parse_point(args.xi, d, "--xi")
    if cfg.point.xi is not None:
        return RandomPoint(cfg.point.xi)
    if args.seed is not None:
        return sample_point(args.seed, 0, d)
    return RandomPoint(np.zeros(d))


def _settings(cfg):
    return cfg.multifid_settings()


def _plan(cfg):
    col = cfg.collocation
    return smolyak_plan(cfg.problem.d, col.q, col.L, max_nodes=col.max_nodes)


def _wants(cfg, fmt_name):
    return fmt_name in cfg.outputs.formats


def cmd_gfe(args, cfg, out):
    solver = cfg.solver()
    xi = _source_point(args, cfg)
    traj = solve_gfe(xi, solver)
    write_trajectory_csv(traj, os.path.join(out, "trajectory.csv"))
    e = energy(traj.states, solver.ops)
    _write_json(os.path.join(out, "gfe_summary.json"), {
        "xi": xi.coords, "steps": solver.steps, "intervals": solver.mesh.intervals,
        "energy_initial": e[0], "energy_final": e[-1],
    })


def cmd_rom(args, cfg, out):
    solver = cfg.solver()
    disc = cfg.discretization
    xi = _source_point(args, cfg)
    if args.zeta is not None:
        zeta = _parse_point(args.zeta, cfg.problem.d, "--zeta")
    elif cfg.point.zeta is not None:
        zeta = RandomPoint(cfg.point.zeta)
    else:
        zeta = xi
    traj = solve_gfe(xi, solver)
    basis = build_pod_basis(traj, disc.snapshots, disc.modes, include_initial=disc.include_initial)
    sol = solve_rom(zeta, assemble_rom(basis, solver), solver)
    exact = traj if zeta == xi else solve_gfe(zeta, solver)
    write_modes_csv(basis, solver.mesh, os.path.join(out, "modes.csv"))
    write_trajectory_csv(sol.as_trajectory(), os.path.join(out, "rom_trajectory.csv"))
    _write_json(os.path.join(out, "rom_summary.json"), {
        "xi": xi.coords, "zeta": zeta.coords, "modes": basis.n_modes,
        "numerical_rank": numerical_rank(basis.eig.values),
        "eigenvalues": basis.eigvals,
        "relative_error_final": relative_error(sol.final, exact.final, solver.ops),
        "relative_error_space_time": relative_error(sol.states[1:], exact.states[1:], solver.ops),
    })


def cmd_sens_check(args, cfg, out):
    solver = cfg.solver()
    disc, sens = cfg.discretization, cfg.sensitivity
    seed = sens.seed if args.seed is None else args.seed
    xi, direction = study_points(seed, cfg.problem.d)
    if args.xi is not None:
        xi = _parse_point(args.xi, cfg.problem.d, "--xi")
    report = fd_check(solver, xi, direction, disc.snapshots, disc.modes, h=sens.h, include_initial=disc.include_initial)
    rows = basis_comparison(solver, xi, direction, sens.thetas, disc.snapshots, include_initial=disc.include_initial)
    write_fd_csv(report, os.path.join(out, "sensitivity_fd.csv"))
    write_comparison_csv(rows, os.path.join(out, "figure1.csv"))
    _write_json(os.path.join(out, "sens_summary.json"), {
        "seed": seed, "xi": xi.coords, "direction": direction,
        "fd_worst_relative_error": report.worst, "orthogonality_defect": report.orthogonality,
        "variants": list(VARIANTS),
    })


def _reference(cfg, plan, solver, memo):
    return reference_full_run(plan, solver, memo=memo, settings=_settings(cfg))


def cmd_collocate(args, cfg, out):
    solver = cfg.solver()
    plan = _plan(cfg)
    ref = _reference(cfg, plan, solver, None)
    write_plan_csv(plan, os.path.join(out, "plan.csv"))
    write_moments_csv(ref.mean, ref.second_moment, solver.mesh, os.path.join(out, "collocation_moments.csv"))
    _write_json(os.path.join(out, "collocation_summary.json"), {
        "nodes": plan.size, "fe_calls": ref.fe_calls, "level_convention": LEVEL_CONVENTION,
        "q": plan.level, "d": plan.dim, "L": plan.bound,
    })


def _eta_list(args, cfg):
    return [args.eta] if args.eta is not None else list(cfg.collocation.eta)


def _eta_tag(eta):
    return fmt(eta).replace(".", "p")


def _sweep(args, cfg):
    solver = cfg.solver()
    plan = _plan(cfg)
    memo = {}
    ref = _reference(cfg, plan, solver, memo)
    results = []
    for eta in _eta_list(args, cfg):
        rep = run_multifid(plan, eta, solver, settings=_settings(cfg), memo=memo)
        results.append((rep, moment_errors(rep, ref, solver.ops)))
    return solver, plan, ref, results


def cmd_multifid(args, cfg, out):
    solver, plan, ref, results = _sweep(args, cfg)
    for rep, errs in results:
        tag = _eta_tag(rep.eta)
        if _wants(cfg, "csv"):
            write_moments_csv(rep.mean, rep.second_moment, solver.mesh, os.path.join(out, f"multifid_eta_{tag}.csv"))
        if _wants(cfg, "json"):
            _write_json(os.path.join(out, f"multifid_eta_{tag}.json"), summary_dict(rep, errs))


def cmd_table1(args, cfg, out):
    solver, plan, ref, results = _sweep(args, cfg)
    rows = []
    for rep, errs in results:
        rows.append({
            "eta": rep.eta, "fe_calls": rep.fe_calls, "rom_calls": rep.rom_calls,
            "mean_error": errs["mean"], "second_moment_error": errs["second_moment"],
            "variance_error": errs["variance"],
        })
    with open(os.path.join(out, "table1.csv"), "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["eta", "fe_calls", "rom_calls", "mean_error", "second_moment_error", "variance_error"])
        for r in rows:
            writer.writerow([fmt(r["eta"]), r["fe_calls"], r["rom_calls"], fmt(r["mean_error"]),
                             fmt(r["second_moment_error"]), fmt(r["variance_error"])])
    write_moments_csv(ref.mean, ref.second_moment, solver.mesh, os.path.join(out, "reference_moments.csv"))
    _write_json(os.path.join(out, "table1.json"), {
        "nodes": plan.size, "level_convention": LEVEL_CONVENTION, "rows": rows,
    })
    if not args.quiet:
        print(f"{'eta':>8} {'fe_calls':>9} {'E error':>12} {'E[u^2] error':>13}")
        for r in rows:
            print(f"{r['eta']:>8g} {r['fe_calls']:>9d} {r['mean_error']:>12.3e} {r['second_moment_error']:>13.3e}")


def cmd_mc(args, cfg, out):
    solver = cfg.solver()
    seed = cfg.mc.seed if args.seed is None else args.seed
    res = mc_moments(McConfig(cfg.mc.n, seed, solver))
    write_moments_csv(res.mean, res.second_moment, solver.mesh, os.path.join(out, "mc_moments.csv"), se_mean=res.se_mean)
    _write_json(os.path.join(out, "mc_summary.json"), {"samples": res.samples, "seed": seed})


COMMANDS = {
    "gfe": cmd_gfe,
    "rom": cmd_rom,
    "sens-check": cmd_sens_check,
    "collocate": cmd_collocate,
    "multifid": cmd_multifid,
    "mc": cmd_mc,
    "table1": cmd_table1,
}

DEFAULT_PRESET = {"sens-check": "figure1"}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON study configuration")
    common.add_argument("--preset", choices=sorted(cfgmod.PRESETS), help="start from a named configuration")
    common.add_argument("--out", help="output directory (overrides outputs.directory)")
    common.add_argument("--seed", type=int, help="random seed (MC samples, sampled source point)")
    common.add_argument("--eta", type=float, help="single neighbourhood radius instead of the configured list")
    common.add_argument("--xi", help="source point as comma-separated values")
    common.add_argument("--zeta", help="target point for the rom command")
    common.add_argument("--quiet", action="store_true")
    parser = argparse.ArgumentParser(prog="mfcolloc", description="Multi-fidelity stochastic collocation for forced Burgers")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def _error_line(kind, exc, **extra):
    payload = {"error": kind, "type": type(exc).__name__, "message": str(exc)}
    payload.update(extra)
    print(json.dumps(payload), file=sys.stderr)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        preset = args.preset or DEFAULT_PRESET.get(args.command)
        cfg = cfgmod.load(args.config, preset) if args.config else cfgmod.from_dict({}, preset)
        if args.out is not None:
            cfg = cfgmod.override(cfg, "outputs", directory=args.out)
        if args.eta is not None:
            cfg = cfgmod.override(cfg, "collocation", eta=[args.eta])
        if args.seed is not None and args.seed < 0:
            raise cfgmod.ConfigError("--seed", "must be non-negative")
        out = cfg.outputs.directory
        os.makedirs(out, exist_ok=True)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            COMMANDS[args.command](args, cfg, out)
    except cfgmod.ConfigError as exc:
        _error_line("config", exc, field=exc.field)
        return EXIT_CONFIG
    except InputError as exc:
        _error_line("input", exc)
        return EXIT_CONFIG
    except NodeFailure as exc:
        _error_line("numerical", exc, index=exc.index)
        return EXIT_NUMERIC
    except (NumericalError, MfcError) as exc:
        _error_line("numerical", exc)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
