"""Command-line entry point: ``epsstokes {solve,sweep,mms,asymptotics}``."""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .analysis import FIT_COLUMNS, SWEEP_COLUMNS, exact_errors, run_mms, run_sweep, solve_problem
from .asymptotics import Expansion, remainder_curve, remainder_fits
from .config import ConfigError, RunConfig, load_config, parse_eps_grid
from .dofs import mean_value
from .mesh import build_structured
from .systems import boundary_outflow, operators
from .vtk import write_fields, write_mesh

log = logging.getLogger("epsstokes")

SOLVE_COLUMNS = ("problem", "pressure_bc", "eps", "nx", "ny", "n_velocity_dofs", "n_pressure_dofs",
                 "residual_norm", "pressure_mean", "boundary_outflow",
                 "err_u_l2", "err_u_h1", "err_p_l2", "err_p_h1")
FIT_HEADER = ("column", "slope", "intercept", "window_lo", "window_hi")
ASYMPTOTICS_COLUMNS = ("eps", "rem_u_h1", "rem_p_h1", "k")
MMS_COLUMNS = ("n", "h") + SWEEP_COLUMNS


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return repr(v) if math.isfinite(v) else str(v)
    return str(v)


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            values = [row.get(c) for c in header] if isinstance(row, dict) else row
            w.writerow([_fmt(v) for v in values])


def write_fits(path: Path, fits: dict) -> None:
    rows = [[name, f.slope, f.intercept, f.window[0], f.window[1]] for name, f in fits.items()]
    write_csv(path, FIT_HEADER, rows)


def _report_degenerate(fits: dict) -> None:
    for name, f in fits.items():
        if f.degenerate:
            log.warning("fit window for %s is empty: all rows at the noise floor "
                        "(%d usable point%s)", name, f.n_points, "" if f.n_points == 1 else "s")


def _out_dir(config: RunConfig) -> Path:
    out = Path(config.output)
    out.mkdir(parents=True, exist_ok=True)
    return out


def run_solve(config: RunConfig):
    """Solve one problem; write ``solution.vtk``, ``mesh.vtk`` and ``summary.csv``."""
    if config.problem == "es" and config.eps is None:
        raise ConfigError("solve with problem es needs a single eps")
    mesh = build_structured(config.nx, config.ny, config.rect)
    data = config.problem_data()
    sol = solve_problem(mesh, data, config.problem)
    exact = config.exact_functions()
    eu = ep = None
    if exact:
        mean_zero = config.problem == "stokes" or data.partition.is_pure_neumann
        eu, ep = exact_errors(sol, exact["u"], exact.get("grad_u"), exact["p"],
                              exact.get("grad_p"), mean_zero)
    out = _out_dir(config)
    ops = operators(mesh, data.partition)
    row = {
        "problem": config.problem, "pressure_bc": config.pressure_bc,
        "eps": config.eps if config.problem == "es" else None,
        "nx": config.nx, "ny": config.ny,
        "n_velocity_dofs": ops.nu, "n_pressure_dofs": ops.np_,
        "residual_norm": sol.residual_norm, "pressure_mean": mean_value(sol.pressure),
        "boundary_outflow": boundary_outflow(ops, data.u_b)[0],
        "err_u_l2": eu.l2 if eu else None, "err_u_h1": eu.h1 if eu else None,
        "err_p_l2": ep.l2 if ep else None, "err_p_h1": ep.h1 if ep else None,
    }
    write_csv(out / "summary.csv", SOLVE_COLUMNS, [row])
    write_mesh(out / "mesh.vtk", mesh)
    write_fields(out / "solution.vtk", mesh, {"velocity": sol.velocity, "pressure": sol.pressure},
                 title=f"{config.problem} solution")
    return sol, (eu, ep)


def run_sweep_command(config: RunConfig, reference: str | None = None):
    """Eps sweep against a PP or Stokes reference; writes ``sweep.csv`` and ``sweep_fit.csv``."""
    if config.eps_grid is None:
        raise ConfigError("sweep needs eps_grid")
    reference = reference or config.reference
    mesh = build_structured(config.nx, config.ny, config.rect)
    result = run_sweep(mesh, config.problem_data(), config.eps_grid, reference)
    out = _out_dir(config)
    rows = [{**r, "reference": reference} for r in result.rows]
    write_csv(out / "sweep.csv", ("eps",) + SWEEP_COLUMNS + ("reference",), rows)
    write_fits(out / "sweep_fit.csv", result.fits)
    _report_degenerate(result.fits)
    return result


def run_mms_command(config: RunConfig):
    exact = config.exact_functions()
    if not exact:
        raise ConfigError("mms needs an exact solution")
    data = config.problem_data()
    result = run_mms(data, config.problem, exact["u"], exact["p"], config.mms_n, config.rect,
                     exact.get("grad_u"), exact.get("grad_p"))
    out = _out_dir(config)
    write_csv(out / "mms.csv", MMS_COLUMNS, result.rows)
    write_fits(out / "mms_fit.csv", result.fits)
    return result


def run_asymptotics_command(config: RunConfig):
    if config.eps_grid is None:
        raise ConfigError("asymptotics needs eps_grid")
    mesh = build_structured(config.nx, config.ny, config.rect)
    expansion = Expansion(mesh, config.problem_data(), config.k)
    rows = remainder_curve(mesh, expansion.data, config.k, config.eps_grid, expansion)
    fits = remainder_fits(rows, expansion.pp)
    out = _out_dir(config)
    write_csv(out / "asymptotics.csv", ASYMPTOTICS_COLUMNS, [r.__dict__ for r in rows])
    write_fits(out / "asymptotics_fit.csv", fits)
    _report_degenerate(fits)
    return rows, fits


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="epsstokes", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("solve", "sweep", "mms", "asymptotics"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, type=Path)
        p.add_argument("--out", help="output directory")
        p.add_argument("--mesh-n", type=int, help="override nx = ny")
        p.add_argument("--eps", type=float)
        p.add_argument("--eps-grid", help="start:stop:factor")
        p.add_argument("--pressure-bc", choices=("neumann", "mixed", "dirichlet"))
        p.add_argument("--reference", choices=("pp", "stokes"))
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        overrides = dict(output=args.out, eps=args.eps, pressure_bc=args.pressure_bc,
                         reference=args.reference)
        if args.mesh_n is not None:
            overrides.update(nx=args.mesh_n, ny=args.mesh_n)
        if args.eps_grid is not None:
            overrides["eps_grid"] = parse_eps_grid(args.eps_grid)
        config = load_config(args.config, **overrides)
    except (ConfigError, OSError) as exc:
        log.error("invalid configuration: %s", exc)
        return 2
    try:
        if args.command == "solve":
            _, (eu, ep) = run_solve(config)
            if eu is not None:
                log.info("errors: u L2 %.3e H1 %.3e, p L2 %.3e H1 %.3e", eu.l2, eu.h1, ep.l2, ep.h1)
        elif args.command == "sweep":
            result = run_sweep_command(config)
            for name in ("err_u_h1", "err_p_h1"):
                f = result.fits[name]
                log.info("%s slope %.4f over eps in [%g, %g]", name, f.slope, *f.window)
        elif args.command == "mms":
            result = run_mms_command(config)
            for name in FIT_COLUMNS:
                log.info("%s order %.3f", name, result.fits[name].slope)
        else:
            _, fits = run_asymptotics_command(config)
            for name, f in fits.items():
                log.info("%s slope %.4f over eps in [%g, %g]", name, f.slope, *f.window)
    except ConfigError as exc:
        log.error("invalid configuration: %s", exc)
        return 2
    except (ArithmeticError, RuntimeError, ValueError) as exc:
        log.error("%s failed: %s", args.command, exc)
        return 1
    log.info("results written to %s", config.output)
    return 0


if __name__ == "__main__":
    sys.exit(main())
