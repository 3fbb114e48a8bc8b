"""Command-line front end.

One executable, one subcommand per experiment; every run is driven by a
JSON config (see `config`) and writes its artifacts into --out.  Exit
codes: 0 on success, 2 for config problems, 3 for numerical failures;
both failure modes print a machine-readable JSON line to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import formats
from .config import RunConfig, load_run_config, build_initial
from .errors import ConfigError, VJumpError
from .hj import GridField, hopf_lax_field, lax_friedrichs_solve
from .hamiltonian import (solve_H_many, eigenpair, legendre,
                          sing_boundary_radius)
from .kinetic import kinetic_solve, convergence_report
from .pdmp import sample_paths, empirical_moment_check

PATH_CSV_CAP = 10_000


def _measure_entries(rc: RunConfig) -> dict:
    return {"command": rc.command,
            "measure": rc.measure.to_config(),
            "measure_fingerprint": rc.measure.fingerprint()}


def _grid_entry(grid) -> dict:
    return {"lo": list(grid.lo), "hi": list(grid.hi),
            "num": list(grid.num), "bc": grid.bc}


def cmd_hamiltonian(rc: RunConfig, outdir: Path, args) -> None:
    m = rc.measure
    P = rc.params["momenta"]
    d = m.dimension
    if d == 1:
        header = ["p", "H", "mu_minus_1", "regime", "grad"]
    else:
        header = (["abs_p"] + [f"p_{i + 1}" for i in range(d)]
                  + ["H", "mu_minus_1", "regime"]
                  + [f"grad_{i + 1}" for i in range(d)])
    rows = []
    if P.shape[0]:
        H, singular, grad, _ = solve_H_many(m, P)
        mu = np.array([m.support_mu(row).mu for row in P])
        for i in range(P.shape[0]):
            regime = "singular" if singular[i] else "regular"
            if d == 1:
                rows.append((P[i, 0], H[i], mu[i] - 1.0, regime, grad[i, 0]))
            else:
                rows.append((float(np.linalg.norm(P[i])), *P[i], H[i],
                             mu[i] - 1.0, regime, *grad[i]))
    formats.write_csv(outdir / "hamiltonian.csv", "hamiltonian", header, rows)


def cmd_sing_boundary(rc: RunConfig, outdir: Path, args) -> None:
    u = rc.params["direction"]
    radius = sing_boundary_radius(rc.measure, u)
    finite = np.isfinite(radius)
    payload = {"direction": [float(c) for c in u],
               "radius": float(radius) if finite else None,
               "finite": bool(finite)}
    payload.update(_measure_entries(rc))
    formats.write_json(outdir / "sing_boundary.json", "sing_boundary",
                       payload)


def cmd_eigen(rc: RunConfig, outdir: Path, args) -> None:
    records = []
    for row in rc.params["momenta"]:
        ep = eigenpair(rc.measure, row)
        records.append({
            "p": [float(c) for c in np.atleast_1d(ep.p)],
            "H": float(ep.H),
            "regime": ep.regime.value,
            "density_scale": float(ep.density_scale),
            "atom_weight": float(ep.atom_weight),
            "atom_location": (None if ep.atom_location is None
                              else [float(c) for c in ep.atom_location]),
        })
    payload = {"records": records}
    payload.update(_measure_entries(rc))
    formats.write_json(outdir / "eigen.json", "eigen", payload)


def cmd_legendre(rc: RunConfig, outdir: Path, args) -> None:
    records = []
    for row in rc.params["velocities"]:
        le = legendre(rc.measure, row)
        records.append({
            "v": [float(c) for c in np.atleast_1d(le.v)],
            "L": float(le.L),
            "argmax_p": [float(c) for c in np.atleast_1d(le.argmax_p)],
            "boundary": bool(le.boundary),
        })
    payload = {"records": records}
    payload.update(_measure_entries(rc))
    formats.write_json(outdir / "legendre.json", "legendre", payload)


def _field_artifacts(outdir: Path, stem: str, fld: GridField,
                     manifest: dict) -> None:
    formats.write_field_csv(outdir / f"{stem}.csv", fld)
    formats.write_field_binary(outdir / f"{stem}.bin", fld)
    manifest = dict(manifest)
    manifest["times"] = [float(t) for t in fld.times]
    formats.write_manifest(outdir / "manifest.txt", manifest)


def cmd_hj_solve(rc: RunConfig, outdir: Path, args) -> None:
    p = rc.params
    grid = p["grid"]
    phi0 = build_initial(p["initial"], grid)
    T = p["T"]
    tol = p.get("tolerances", {})
    out_times = p.get("output_times")
    if out_times is None:
        out_times = [0.0, 0.25 * T, 0.5 * T, 0.75 * T, T]
    manifest = _measure_entries(rc)
    manifest.update({"grid": _grid_entry(grid), "T": T,
                     "initial": p["initial"], "scheme": p["scheme"],
                     "tolerances": tol})
    if p["scheme"] == "hopf-lax":
        fld = hopf_lax_field(rc.measure, phi0, out_times, grid,
                             step=tol.get("rate_step"))
    else:
        fld = lax_friedrichs_solve(rc.measure, phi0, T, grid,
                                   cfl=p.get("cfl", 0.9), dt=p.get("dt"),
                                   output_times=out_times,
                                   table_step=tol.get("table_step", 1e-3))
        manifest["dt"] = fld.meta["dt"]
        manifest["cfl"] = p.get("cfl", 0.9)
    _field_artifacts(outdir, "field", fld, manifest)


def cmd_kinetic_solve(rc: RunConfig, outdir: Path, args) -> None:
    p = rc.params
    grid = p["grid"]
    phi0 = build_initial(p["initial"], grid)
    tol = p.get("tolerances", {})
    kf = kinetic_solve(rc.measure, phi0, p["eps"], p["T"], grid,
                       dt=p.get("dt"), cfl=p.get("cfl", 0.9),
                       output_times=p.get("output_times"),
                       vlip_tol=tol.get("vlip_tol", 0.05))
    fld = GridField(times=kf.times, axes=(kf.x,),
                    values=kf.values.min(axis=1), bc="periodic",
                    lip0=kf.lip0, meta={})
    manifest = _measure_entries(rc)
    manifest.update({
        "grid": _grid_entry(grid), "T": p["T"], "eps": p["eps"],
        "initial": p["initial"], "cfl": p.get("cfl", 0.9),
        "tolerances": tol,
        "v_spread": [kf.velocity_spread(k) for k in range(kf.times.size)],
        "bound_report": kf.bound_report,
    })
    _field_artifacts(outdir, "kinetic_field", fld, manifest)


def cmd_converge(rc: RunConfig, outdir: Path, args) -> None:
    p = rc.params
    grid = p["grid"]
    phi0 = build_initial(p["initial"], grid)
    tol = p.get("tolerances", {})
    rep = convergence_report(rc.measure, phi0, p["eps_list"], p["T"], grid,
                             dt=p.get("dt"),
                             vlip_tol=tol.get("vlip_tol", 0.05))
    formats.write_csv(outdir / "convergence.csv", "convergence",
                      ["eps", "sup_error", "v_spread"], rep.rows())
    manifest = _measure_entries(rc)
    manifest.update({"grid": _grid_entry(grid), "T": p["T"],
                     "eps_list": p["eps_list"], "dt": p.get("dt"),
                     "initial": p["initial"], "tolerances": tol,
                     "times": [float(t) for t in rep.times]})
    formats.write_manifest(outdir / "manifest.txt", manifest)


def cmd_simulate(rc: RunConfig, outdir: Path, args) -> None:
    p = rc.params
    seed = args.seed if args.seed is not None else p["seed"]
    threads = args.threads if args.threads is not None else p.get("threads")
    batch = sample_paths(rc.measure, p["count"], p["horizon"], seed,
                         threads=threads, keep_events=False)
    mc = empirical_moment_check(batch, rc.measure)
    # the worker degree is an execution knob, not part of the result, so
    # it stays out of the artifact to keep runs byte-identical
    payload = {
        "count": batch.count,
        "horizon": batch.horizon,
        "seed": seed,
        "dimension": batch.dimension,
        "mean_jumps": float(batch.jump_counts.mean()),
        "mean_gap": (float(batch.mean_gap)
                     if np.isfinite(batch.mean_gap) else None),
        "drift": [float(c) for c in mc.drift],
        "moment_check": mc.to_dict(),
    }
    payload.update(_measure_entries(rc))
    formats.write_json(outdir / "simulate.json", "simulate", payload)
    if p["paths_csv"] and batch.count <= PATH_CSV_CAP:
        d = batch.dimension
        header = (["path", "jumps", "x"] if d == 1 else
                  ["path", "jumps"] + [f"x_{i + 1}" for i in range(d)])
        rows = ((i, int(batch.jump_counts[i]), *batch.final_positions[i])
                for i in range(batch.count))
        formats.write_csv(outdir / "paths.csv", "paths", header, rows)


_DISPATCH = {
    "hamiltonian": cmd_hamiltonian,
    "sing-boundary": cmd_sing_boundary,
    "eigen": cmd_eigen,
    "legendre": cmd_legendre,
    "hj-solve": cmd_hj_solve,
    "kinetic-solve": cmd_kinetic_solve,
    "converge": cmd_converge,
    "simulate": cmd_simulate,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vjump",
        description="Velocity jump processes: Hamiltonians, Hamilton-Jacobi "
                    "limits, kinetic schemes and path sampling.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _DISPATCH:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=True,
                         help="path to the JSON run config")
        cmd.add_argument("--out", default=".",
                         help="output directory (created if missing)")
        cmd.add_argument("--seed", type=int, default=None,
                         help="override the config seed (simulate)")
        cmd.add_argument("--threads", type=int, default=None,
                         help="worker threads; outputs do not depend on it")
    return parser


def _emit_error(exc: Exception) -> None:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    path = getattr(exc, "path", None)
    if path is not None:
        payload["path"] = path
    sys.stderr.write(json.dumps(payload, sort_keys=True) + "\n")


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        rc = load_run_config(args.config, args.command)
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        _DISPATCH[args.command](rc, outdir, args)
    except ConfigError as exc:
        _emit_error(exc)
        return 2
    except VJumpError as exc:
        _emit_error(exc)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
