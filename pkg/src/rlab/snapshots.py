"""Binary snapshot files, checkpoints, CSV emitters, and report files.

Snapshot format (version 1): the magic string "RLAB1", a little-endian
uint32 header length, a UTF-8 JSON header with the grid descriptor and an
optional payload (flow parameters / schedule for checkpoints), then per
field: uint16 name length, name bytes, uint8 contravariant rank, uint8
covariant rank, uint8 symmetry code, uint32 component count, and the
row-major component data as IEEE-754 doubles, little-endian.  Round trips
are bit exact.
"""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

from .mesh import Grid, MetricField, ScalarField, TensorField, build_grid

MAGIC = b"RLAB1"
SYMMETRY_CODES = {"none": 0, "sym2": 1, "riemann-like": 2}
SYMMETRY_NAMES = {v: k for k, v in SYMMETRY_CODES.items()}


def _field_record(name: str, arr: np.ndarray, con: int, cov: int, sym: str) -> bytes:
    name_b = name.encode("utf-8")
    data = np.ascontiguousarray(arr, dtype="<f8")
    head = struct.pack("<H", len(name_b)) + name_b
    head += struct.pack("<BBB", con, cov, SYMMETRY_CODES[sym])
    head += struct.pack("<I", data.size)
    return head + data.tobytes()


def write_snapshot(path, grid: Grid, fields: dict, extra: dict | None = None):
    """Write named fields; values may be ndarrays (treated as scalar layout
    inferred from shape), ScalarField, TensorField, or MetricField."""
    blob = bytearray()
    header = {"version": 1, "grid": grid.descriptor()}
    if extra:
        header["extra"] = extra
    records = []
    for name, fld in fields.items():
        if isinstance(fld, MetricField):
            records.append(_field_record(name, fld.values, 0, 2, "sym2"))
        elif isinstance(fld, TensorField):
            records.append(_field_record(name, fld.values, fld.con, fld.cov,
                                         fld.symmetry))
        elif isinstance(fld, ScalarField):
            records.append(_field_record(name, fld.values, 0, 0, "none"))
        else:
            arr = np.asarray(fld)
            rank = arr.ndim - grid.n
            records.append(_field_record(name, arr, 0, rank, "none"))
    hjson = json.dumps(header, sort_keys=True).encode("utf-8")
    blob += MAGIC
    blob += struct.pack("<I", len(hjson))
    blob += hjson
    for r in records:
        blob += r
    Path(path).write_bytes(bytes(blob))


def read_snapshot(path):
    """Returns (grid, {name: (array, con, cov, symmetry)}, extra)."""
    raw = Path(path).read_bytes()
    if raw[:5] != MAGIC:
        raise ValueError("not a snapshot file (bad magic)")
    off = 5
    (hlen,) = struct.unpack_from("<I", raw, off)
    off += 4
    header = json.loads(raw[off:off + hlen].decode("utf-8"))
    off += hlen
    gd = header["grid"]
    grid = build_grid(gd["kind"], gd["n"], gd["shape"], gd["extents"])
    fields = {}
    while off < len(raw):
        (nlen,) = struct.unpack_from("<H", raw, off)
        off += 2
        name = raw[off:off + nlen].decode("utf-8")
        off += nlen
        con, cov, sym = struct.unpack_from("<BBB", raw, off)
        off += 3
        (count,) = struct.unpack_from("<I", raw, off)
        off += 4
        arr = np.frombuffer(raw, dtype="<f8", count=count, offset=off).copy()
        off += 8 * count
        shape = (grid.n,) * (con + cov) + grid.shape
        fields[name] = (arr.reshape(shape), con, cov, SYMMETRY_NAMES[sym])
    return grid, fields, header.get("extra", {})


def write_checkpoint(path, state, params, schedule):
    extra = {
        "t": state.t,
        "step_count": state.step_count,
        "params": {"alpha1": params.alpha1, "alpha2": params.alpha2,
                   "beta1": params.beta1, "beta2": params.beta2,
                   "reduced": params.reduced},
        "schedule": {"t_end": schedule.t_end, "dt": schedule.dt,
                     "safety": schedule.safety, "cadence": schedule.cadence,
                     "method": schedule.method},
    }
    write_snapshot(path, state.grid, {"g": state.metric, "u": state.u}, extra)


def read_checkpoint(path):
    from .flow import FlowParams, FlowState, Schedule
    grid, fields, extra = read_snapshot(path)
    metric = MetricField(grid, fields["g"][0])
    state = FlowState(grid, metric, fields["u"][0], extra.get("t", 0.0),
                      extra.get("step_count", 0))
    p = extra["params"]
    params = FlowParams(p["alpha1"], p["alpha2"], p["beta1"], p["beta2"],
                        p["reduced"])
    s = extra["schedule"]
    schedule = Schedule(s["t_end"], s["dt"], s["safety"], s["cadence"], s["method"])
    return state, params, schedule


# --------------------------------------------------------------------------
# CSV / JSON emitters

def write_diagnostics_csv(path, trajectory):
    from .flow import DIAG_COLUMNS
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(DIAG_COLUMNS)
        for row in trajectory.diag_rows():
            w.writerow([repr(v) for v in row])


def write_energy_csv(path, trace):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("t", "E", "h_norm", "A_norm", "T_norm", "v_norm", "w_norm"))
        for row in trace.rows():
            w.writerow([repr(v) for v in row])


def write_entropy_csv(path, rows):
    """rows: iterable of (t, tau, mu, mu_upper, norm_defect, iters)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("t", "tau", "mu", "mu_upper", "norm_defect", "iters"))
        for row in rows:
            w.writerow([repr(v) for v in row])


def write_verdicts_csv(path, verdicts):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("pair", "weight", "left", "right", "margin", "verdict"))
        for v in verdicts:
            w.writerow([repr(x) if isinstance(x, float) else x for x in v.row()])


def write_reports_json(path, reports):
    Path(path).write_text(json.dumps([r.to_dict() for r in reports], indent=1))
