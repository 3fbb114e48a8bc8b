"""Deterministic file emission: CSV tables, JSON records, the binary field
dump and run manifests.

Every artifact carries a schema stamp ("vjump.<name>/<version>") and is
byte-identical across runs of the same config and seed: floats are written
with their shortest round-trip representation, keys are sorted, and no
timestamps or environment data leak into the output.
"""

from __future__ import annotations

import json
import struct
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError
from .hj import GridField

SCHEMA_VERSION = 1
FIELD_MAGIC = b"VJGF"
_BC_CODES = {"periodic": 0, "extrapolate": 1}
_BC_NAMES = {v: k for k, v in _BC_CODES.items()}


def schema_tag(name: str) -> str:
    return f"vjump.{name}/{SCHEMA_VERSION}"


def format_value(v) -> str:
    """Canonical cell text: shortest round-trip repr for floats, plain str
    otherwise."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        x = float(v)
        if x != x:
            return "nan"
        if x == float("inf"):
            return "inf"
        if x == float("-inf"):
            return "-inf"
        return repr(x)
    return str(v)


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def write_csv(path, name: str, header: Sequence[str],
              rows: Iterable[Sequence]) -> None:
    lines = [f"# schema: {schema_tag(name)}", ",".join(header)]
    for row in rows:
        cells = [format_value(v) for v in row]
        for cell in cells:
            if "," in cell or "\n" in cell:
                raise ValueError(f"cell {cell!r} would break the CSV layout")
        lines.append(",".join(cells))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _parse_cell(text: str):
    if text == "true":
        return True
    if text == "false":
        return False
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def read_csv(path):
    """Parse a CSV artifact back into (schema, header, rows)."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith("# schema: "):
        raise ConfigError("missing schema stamp", str(path))
    schema = lines[0][len("# schema: "):]
    if len(lines) < 2:
        raise ConfigError("missing header line", str(path))
    header = lines[1].split(",")
    rows = [[_parse_cell(c) for c in line.split(",")] for line in lines[2:]]
    return schema, header, rows


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------

def jsonable(obj):
    """Recursively convert numpy containers to plain Python for JSON."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    return obj


def write_json(path, name: str, payload: dict) -> None:
    body = dict(jsonable(payload))
    body["schema"] = schema_tag(name)
    # allow_nan=False forces call sites to encode non-finite values
    # explicitly (e.g. an infinite radius becomes {"finite": false})
    text = json.dumps(body, sort_keys=True, indent=2, allow_nan=False)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text + "\n")


def read_json(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        body = json.load(fh)
    if "schema" not in body:
        raise ConfigError("missing schema stamp", str(path))
    return body


# ---------------------------------------------------------------------------
# binary field dump
# ---------------------------------------------------------------------------
# Layout, all little-endian:
#   4s    magic "VJGF"
#   u32   format version
#   u32   boundary code (0 periodic, 1 extrapolate)
#   u32   number of space axes (1 or 2)
#   u64   number of stored times
#   u64[] axis lengths
#   f64   initial Lipschitz constant
#   f64[] times, then each axis, then values in C order (t, x[, y])

def write_field_binary(path, f: GridField) -> None:
    naxes = len(f.axes)
    head = struct.pack("<4sIII", FIELD_MAGIC, SCHEMA_VERSION,
                       _BC_CODES[f.bc], naxes)
    head += struct.pack("<Q", f.times.size)
    head += struct.pack(f"<{naxes}Q", *(ax.size for ax in f.axes))
    head += struct.pack("<d", float(f.lip0))
    with open(path, "wb") as fh:
        fh.write(head)
        fh.write(np.ascontiguousarray(f.times, dtype="<f8").tobytes())
        for ax in f.axes:
            fh.write(np.ascontiguousarray(ax, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())


def read_field_binary(path) -> GridField:
    with open(path, "rb") as fh:
        raw = fh.read()
    magic, version, bc_code, naxes = struct.unpack_from("<4sIII", raw, 0)
    if magic != FIELD_MAGIC:
        raise ConfigError("not a field dump (bad magic)", str(path))
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported field dump version {version}",
                          str(path))
    if bc_code not in _BC_NAMES or naxes not in (1, 2):
        raise ConfigError("corrupt field dump header", str(path))
    off = struct.calcsize("<4sIII")
    (nt,) = struct.unpack_from("<Q", raw, off)
    off += 8
    lens = struct.unpack_from(f"<{naxes}Q", raw, off)
    off += 8 * naxes
    (lip0,) = struct.unpack_from("<d", raw, off)
    off += 8

    def take(count):
        nonlocal off
        arr = np.frombuffer(raw, dtype="<f8", count=count, offset=off)
        off += 8 * count
        return arr.astype(float)

    times = take(nt)
    axes = tuple(take(n) for n in lens)
    values = take(nt * int(np.prod(lens))).reshape((nt,) + tuple(lens))
    if off != len(raw):
        raise ConfigError("trailing bytes after field dump payload",
                          str(path))
    return GridField(times=times, axes=axes, values=values,
                     bc=_BC_NAMES[bc_code], lip0=lip0, meta={})


def write_field_csv(path, f: GridField) -> None:
    """(t, x[, y], value) rows, times outermost, C order within each time."""
    naxes = len(f.axes)
    header = ["t", "x", "value"] if naxes == 1 else ["t", "x", "y", "value"]
    meshes = np.meshgrid(*f.axes, indexing="ij")
    coords = [mesh.ravel() for mesh in meshes]

    def rows():
        for k, t in enumerate(f.times):
            flat = f.values[k].ravel()
            for i in range(flat.size):
                yield (t, *(c[i] for c in coords), flat[i])

    write_csv(path, "field", header, rows())


# ---------------------------------------------------------------------------
# run manifest
# ---------------------------------------------------------------------------

def write_manifest(path, entries: dict) -> None:
    """Plain-text key = value lines, sorted; values are compact JSON."""
    lines = [f"# schema: {schema_tag('manifest')}"]
    for key in sorted(entries):
        val = json.dumps(jsonable(entries[key]), sort_keys=True,
                         separators=(",", ":"), allow_nan=False)
        lines.append(f"{key} = {val}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_manifest(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith("# schema: "):
        raise ConfigError("missing schema stamp", str(path))
    out = {}
    for line in lines[1:]:
        if not line.strip():
            continue
        key, _, val = line.partition(" = ")
        out[key] = json.loads(val)
    return out
