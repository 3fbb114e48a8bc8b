"""Run configuration: one JSON document per invocation, validated against
the owning subcommand with unknown fields rejected.

The measure description is delegated to `measure_from_config`; everything
else (grids, momentum lists, horizons, tolerance overrides) is checked
here so that a bad config fails before any computation starts, with the
offending field path in the message.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError
from .measure import VelocityMeasure, measure_from_config
from .hj import GridSpec

# fields each subcommand accepts on top of "measure"
_COMMAND_FIELDS = {
    "hamiltonian": {"momenta"},
    "sing-boundary": {"direction"},
    "eigen": {"momenta"},
    "legendre": {"velocities"},
    "hj-solve": {"scheme", "initial", "grid", "T", "dt", "cfl",
                 "output_times", "tolerances"},
    "kinetic-solve": {"initial", "grid", "T", "eps", "dt", "cfl",
                      "output_times", "tolerances"},
    "converge": {"initial", "grid", "T", "eps_list", "dt", "cfl",
                 "tolerances"},
    "simulate": {"count", "horizon", "seed", "threads", "paths_csv"},
}

_TOLERANCE_FIELDS = {"table_step", "vlip_tol", "rate_step"}
_PROFILE_KINDS = {"constant", "linear", "cones"}


@dataclass
class RunConfig:
    command: str
    measure: VelocityMeasure
    params: dict


def _fail(msg: str, path: str):
    raise ConfigError(msg, path)


def _finite_number(v, path: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        _fail("expected a number", path)
    v = float(v)
    if not math.isfinite(v):
        _fail("expected a finite number", path)
    return v


def _positive(v, path: str) -> float:
    v = _finite_number(v, path)
    if v <= 0.0:
        _fail("must be positive", path)
    return v


def _vector(v, dim: int, path: str) -> np.ndarray:
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        v = [v]
    if not isinstance(v, list) or len(v) != dim:
        _fail(f"expected a list of {dim} numbers", path)
    return np.array([_finite_number(c, f"{path}[{i}]")
                     for i, c in enumerate(v)])


def momentum_rows(spec, dim: int, path: str) -> np.ndarray:
    """Momentum (or velocity) batch: either explicit rows or a radial grid
    along a direction.  An empty grid is allowed and yields no rows."""
    if not isinstance(spec, dict):
        _fail("expected an object", path)
    keys = set(spec)
    if keys == {"rows"}:
        rows = spec["rows"]
        if not isinstance(rows, list):
            _fail("expected a list of rows", f"{path}.rows")
        out = np.empty((len(rows), dim))
        for i, row in enumerate(rows):
            out[i] = _vector(row, dim, f"{path}.rows[{i}]")
        return out
    if not keys <= {"start", "stop", "num", "direction"}:
        extra = sorted(keys - {"start", "stop", "num", "direction", "rows"})
        _fail(f"unknown field {extra[0]!r}", f"{path}.{extra[0]}")
    for need in ("start", "stop", "num"):
        if need not in spec:
            _fail(f"missing field {need!r}", path)
    start = _finite_number(spec["start"], f"{path}.start")
    stop = _finite_number(spec["stop"], f"{path}.stop")
    num = spec["num"]
    if isinstance(num, bool) or not isinstance(num, int) or num < 0:
        _fail("num must be a nonnegative integer", f"{path}.num")
    if num > 1 and stop < start:
        _fail("need start <= stop", f"{path}.stop")
    direction = spec.get("direction")
    if direction is None:
        u = np.zeros(dim)
        u[0] = 1.0
    else:
        u = _vector(direction, dim, f"{path}.direction")
        nu = float(np.linalg.norm(u))
        if nu == 0.0:
            _fail("direction must be nonzero", f"{path}.direction")
        u = u / nu
    s = np.linspace(start, stop, num) if num else np.empty(0)
    return s[:, None] * u[None, :]


def grid_spec(spec, path: str) -> GridSpec:
    if not isinstance(spec, dict):
        _fail("expected an object", path)
    extra = sorted(set(spec) - {"lo", "hi", "num", "bc"})
    if extra:
        _fail(f"unknown field {extra[0]!r}", f"{path}.{extra[0]}")
    for need in ("lo", "hi", "num"):
        if need not in spec:
            _fail(f"missing field {need!r}", path)
    try:
        return GridSpec(lo=spec["lo"], hi=spec["hi"], num=spec["num"],
                        bc=spec.get("bc", "periodic"))
    except (TypeError, ValueError) as exc:
        _fail(str(exc), path)


def _check_profile(spec, grid: GridSpec, path: str) -> None:
    if not isinstance(spec, dict):
        _fail("expected an object", path)
    kind = spec.get("kind")
    if kind not in _PROFILE_KINDS:
        _fail(f"unknown kind {kind!r}; expected one of "
              f"{sorted(_PROFILE_KINDS)}", f"{path}.kind")
    allowed = {"constant": {"kind", "value"},
               "linear": {"kind", "slope", "offset"},
               "cones": {"kind", "centers", "cap"}}[kind]
    extra = sorted(set(spec) - allowed)
    if extra:
        _fail(f"unknown field {extra[0]!r} for kind {kind!r}",
              f"{path}.{extra[0]}")
    dim = grid.dimension
    if kind == "constant":
        _finite_number(spec.get("value", 0.0), f"{path}.value")
    elif kind == "linear":
        if grid.bc == "periodic":
            _fail("a linear profile is not periodic; use an "
                  "extrapolating grid", f"{path}.kind")
        _vector(spec.get("slope", [0.0] * dim), dim, f"{path}.slope")
        _finite_number(spec.get("offset", 0.0), f"{path}.offset")
    else:
        centers = spec.get("centers")
        if not isinstance(centers, list) or not centers:
            _fail("centers must be a nonempty list of points",
                  f"{path}.centers")
        for i, c in enumerate(centers):
            _vector(c, dim, f"{path}.centers[{i}]")
        cap = spec.get("cap")
        if cap is not None:
            _positive(cap, f"{path}.cap")


def build_initial(spec: dict, grid: GridSpec):
    """Profile registry -> a vectorized phi0 defined on all of space (and
    periodic whenever the grid is)."""
    kind = spec["kind"]
    dim = grid.dimension
    if kind == "constant":
        value = float(spec.get("value", 0.0))

        def phi0(*coords):
            return np.full(np.broadcast(*coords).shape if len(coords) > 1
                           else np.shape(coords[0]), value, dtype=float)
        return phi0

    if kind == "linear":
        slope = np.array([float(v) for v in np.atleast_1d(
            spec.get("slope", [0.0] * dim))])
        offset = float(spec.get("offset", 0.0))

        def phi0(*coords):
            out = np.asarray(coords[0], dtype=float) * slope[0] + offset
            for s, c in zip(slope[1:], coords[1:]):
                out = out + s * np.asarray(c, dtype=float)
            return out
        return phi0

    centers = np.atleast_2d(np.asarray(spec["centers"], dtype=float))
    cap = spec.get("cap")
    widths = np.array(grid.hi) - np.array(grid.lo)
    wrap = grid.bc == "periodic"

    def phi0(*coords):
        best = None
        for c in centers:
            sq = 0.0
            for ax, x in enumerate(coords):
                d = np.abs(np.asarray(x, dtype=float) - c[ax])
                if wrap:
                    d = d % widths[ax]
                    d = np.minimum(d, widths[ax] - d)
                sq = sq + d * d
            dist = np.sqrt(sq)
            best = dist if best is None else np.minimum(best, dist)
        if cap is not None:
            best = np.minimum(best, float(cap))
        return best
    return phi0


def _tolerances(spec, path: str) -> dict:
    if not isinstance(spec, dict):
        _fail("expected an object", path)
    extra = sorted(set(spec) - _TOLERANCE_FIELDS)
    if extra:
        _fail(f"unknown field {extra[0]!r}", f"{path}.{extra[0]}")
    return {k: _positive(v, f"{path}.{k}") for k, v in spec.items()}


def _validate_command(cfg: dict, command: str, m: VelocityMeasure) -> dict:
    params = {k: v for k, v in cfg.items() if k != "measure"}
    dim = m.dimension

    if command in ("hamiltonian", "eigen"):
        if "momenta" not in params:
            _fail("missing field 'momenta'", "momenta")
        params["momenta"] = momentum_rows(params["momenta"], dim, "momenta")
    elif command == "sing-boundary":
        if "direction" not in params:
            _fail("missing field 'direction'", "direction")
        u = _vector(params["direction"], dim, "direction")
        if float(np.linalg.norm(u)) == 0.0:
            _fail("direction must be nonzero", "direction")
        params["direction"] = u
    elif command == "legendre":
        if "velocities" not in params:
            _fail("missing field 'velocities'", "velocities")
        params["velocities"] = momentum_rows(params["velocities"], dim,
                                             "velocities")
    elif command in ("hj-solve", "kinetic-solve", "converge"):
        for need in ("initial", "grid", "T"):
            if need not in params:
                _fail(f"missing field {need!r}", need)
        grid = grid_spec(params["grid"], "grid")
        if grid.dimension != dim:
            _fail(f"grid dimension {grid.dimension} does not match the "
                  f"measure ({dim})", "grid")
        params["grid"] = grid
        _check_profile(params["initial"], grid, "initial")
        params["T"] = _positive(params["T"], "T")
        if "dt" in params:
            params["dt"] = _positive(params["dt"], "dt")
        if "cfl" in params:
            cfl = _positive(params["cfl"], "cfl")
            if cfl > 1.0:
                _fail("cfl must lie in (0, 1]", "cfl")
            params["cfl"] = cfl
        if "output_times" in params:
            ts = params["output_times"]
            if not isinstance(ts, list) or not ts:
                _fail("expected a nonempty list of times", "output_times")
            params["output_times"] = [
                _finite_number(t, f"output_times[{i}]")
                for i, t in enumerate(ts)]
        if "tolerances" in params:
            params["tolerances"] = _tolerances(params["tolerances"],
                                               "tolerances")
        if command == "hj-solve":
            scheme = params.setdefault("scheme", "hopf-lax")
            if scheme not in ("hopf-lax", "lax-friedrichs"):
                _fail(f"unknown scheme {scheme!r}", "scheme")
        if command == "kinetic-solve":
            if "eps" not in params:
                _fail("missing field 'eps'", "eps")
            params["eps"] = _positive(params["eps"], "eps")
        if command == "converge":
            eps = params.get("eps_list")
            if not isinstance(eps, list) or len(eps) < 2:
                _fail("expected a list of at least two scales", "eps_list")
            vals = [_positive(e, f"eps_list[{i}]")
                    for i, e in enumerate(eps)]
            if any(b >= a for a, b in zip(vals, vals[1:])):
                _fail("scales must be strictly decreasing", "eps_list")
            params["eps_list"] = vals
    elif command == "simulate":
        for need in ("count", "horizon"):
            if need not in params:
                _fail(f"missing field {need!r}", need)
        count = params["count"]
        if isinstance(count, bool) or not isinstance(count, int) or count < 1:
            _fail("count must be a positive integer", "count")
        params["horizon"] = _positive(params["horizon"], "horizon")
        seed = params.get("seed", 0)
        if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
            _fail("seed must be a nonnegative integer", "seed")
        params["seed"] = seed
        threads = params.get("threads")
        if threads is not None and (isinstance(threads, bool)
                                    or not isinstance(threads, int)
                                    or threads < 1):
            _fail("threads must be a positive integer", "threads")
        keep = params.get("paths_csv", True)
        if not isinstance(keep, bool):
            _fail("paths_csv must be a boolean", "paths_csv")
        params["paths_csv"] = keep
    return params


def load_run_config(path: str, command: str) -> RunConfig:
    """Read and validate the config file for one subcommand."""
    if command not in _COMMAND_FIELDS:
        raise ValueError(f"unknown command {command!r}")
    if not os.path.exists(path):
        raise ConfigError("config file does not exist", str(path))
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}", str(path)) from None
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be an object", str(path))
    allowed = _COMMAND_FIELDS[command] | {"measure"}
    for key in cfg:
        if key not in allowed:
            raise ConfigError(
                f"unknown field {key!r} for command {command!r}", key)
    if "measure" not in cfg:
        raise ConfigError("missing field 'measure'", "measure")
    m = measure_from_config(cfg["measure"])
    params = _validate_command(cfg, command, m)
    return RunConfig(command=command, measure=m, params=params)
