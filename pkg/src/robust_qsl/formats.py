"""Reading and writing result files.

Field names are fixed; see README for the layouts. Floats are written with
``repr`` so every file round-trips exactly.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import platform
import time
from pathlib import Path

import numpy as np

from . import __version__
from .algebra import RobustnessOrder
from .objective import GATE_NAMES, GateTarget
from .propagator import ControlPulse
from .qsl_sweep import QslRecord
from .units import PhysicalPulse
from .verifier import ErrorSurface, RegionSummary, UncertaintyGrid

PULSE_MAGIC = "# robust_qsl pulse v1"


class FormatError(ValueError):
    pass


def _r(x: float) -> str:
    return repr(float(x))


def _matrix_to_json(m) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m, dtype=complex)]


def _matrix_from_json(obj) -> np.ndarray:
    try:
        m = np.array([[complex(re, im) for re, im in row] for row in obj], dtype=complex)
    except (TypeError, ValueError) as exc:
        raise FormatError(f"bad matrix literal: {obj!r}") from exc
    return m


def _write_text(path: Path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)
    return path


# ---------------------------------------------------------------- pulse CSV

def pulse_to_csv(pulse: ControlPulse, order: RobustnessOrder | None = None,
                 gate: GateTarget | None = None) -> str:
    buf = io.StringIO()
    buf.write(PULSE_MAGIC + "\n")
    buf.write(f"# omega: {_r(pulse.omega)}\n")
    buf.write(f"# segment_duration: {_r(pulse.segment_duration)}\n")
    buf.write(f"# total_duration: {_r(pulse.total_duration)}\n")
    if order is not None:
        buf.write(f"# order: {order}\n")
    if gate is not None:
        buf.write(f"# gate: {gate.name}\n")
        if gate.name not in GATE_NAMES:
            buf.write(f"# gate_matrix: {json.dumps(_matrix_to_json(gate.matrix))}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["segment_index", "phi_rad"])
    for j, phi in enumerate(pulse.phases):
        w.writerow([j, _r(phi)])
    return buf.getvalue()


def write_pulse(path, pulse, order=None, gate=None) -> Path:
    return _write_text(path, pulse_to_csv(pulse, order, gate))


def read_pulse(path) -> tuple[ControlPulse, dict]:
    """Return the pulse and its header (``order`` / ``gate`` parsed when present)."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise FormatError(f"cannot read pulse file {path}: {exc}") from exc
    lines = text.splitlines()
    if not lines or lines[0].strip() != PULSE_MAGIC:
        raise FormatError(f"{path}: missing '{PULSE_MAGIC}' header")
    header: dict = {}
    body = []
    for lineno, line in enumerate(lines[1:], start=2):
        if line.startswith("#"):
            key, sep, value = line[1:].partition(":")
            if not sep:
                raise FormatError(f"{path}:{lineno}: header line needs 'key: value'")
            header[key.strip()] = value.strip()
        elif line.strip():
            body.append((lineno, line))
    if not body or body[0][1].strip() != "segment_index,phi_rad":
        raise FormatError(f"{path}: expected column header 'segment_index,phi_rad'")
    phases = []
    for lineno, line in body[1:]:
        parts = line.split(",")
        try:
            idx, phi = int(parts[0]), float(parts[1])
        except (IndexError, ValueError) as exc:
            raise FormatError(f"{path}:{lineno}: bad row {line!r}") from exc
        if idx != len(phases):
            raise FormatError(f"{path}:{lineno}: segment index {idx} out of sequence")
        phases.append(phi)
    try:
        omega = float(header["omega"])
        dt = float(header["segment_duration"])
    except (KeyError, ValueError) as exc:
        raise FormatError(f"{path}: header needs numeric 'omega' and 'segment_duration'") from exc
    meta: dict = {}
    if "order" in header:
        meta["order"] = RobustnessOrder.parse(header["order"])
    if "gate" in header:
        name = header["gate"]
        if "gate_matrix" in header:
            meta["gate"] = GateTarget(name, _matrix_from_json(json.loads(header["gate_matrix"])))
        else:
            meta["gate"] = GateTarget.named(name)
    return ControlPulse(phases, dt, omega), meta


# ----------------------------------------------------------------- records

def record_to_dict(rec: QslRecord) -> dict:
    return {
        "gate": rec.gate,
        "gate_matrix": _matrix_to_json(rec.target.matrix),
        "order": [rec.order.n1, rec.order.n2],
        "qsl": float(rec.qsl),
        "omega": float(rec.omega),
        "final_cost": float(rec.final_cost),
        "segment_duration": float(rec.pulse.segment_duration),
        "n_segments": rec.pulse.n_segments,
        "phases": [float(p) for p in rec.pulse.phases],
        "sweep_trace": [[float(t), float(c)] for t, c in rec.sweep_trace],
        "seeds": [int(s) for s in rec.seeds],
    }


def record_from_dict(d: dict) -> QslRecord:
    try:
        order = RobustnessOrder(*d["order"])
        pulse = ControlPulse(d["phases"], d["segment_duration"], d["omega"])
        return QslRecord(
            gate=d["gate"],
            order=order,
            qsl=float(d["qsl"]),
            pulse=pulse,
            final_cost=float(d["final_cost"]),
            sweep_trace=[(float(t), float(c)) for t, c in d["sweep_trace"]],
            seeds=[int(s) for s in d["seeds"]],
            omega=float(d["omega"]),
            gate_matrix=_matrix_from_json(d["gate_matrix"]),
        )
    except (KeyError, TypeError) as exc:
        raise FormatError(f"incomplete QSL record: {exc}") from exc


def write_record(path, rec: QslRecord) -> Path:
    return _write_text(path, json.dumps(record_to_dict(rec), indent=2) + "\n")


def read_record(path) -> QslRecord:
    try:
        return record_from_dict(json.loads(Path(path).read_text()))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc


def trace_to_csv(trace) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["T", "cost"])
    for t, c in trace:
        w.writerow([_r(t), _r(c)])
    return buf.getvalue()


def write_trace(path, trace) -> Path:
    return _write_text(path, trace_to_csv(trace))


def read_trace(path) -> list[tuple[float, float]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["T", "cost"]:
        raise FormatError(f"{path}: expected header 'T,cost'")
    return [(float(t), float(c)) for t, c in rows[1:]]


# --------------------------------------------------------------- surfaces

def surface_to_csv(surface: ErrorSurface) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["eps1", "eps2", "error"])
    g = surface.grid
    for i, e1 in enumerate(g.eps1_values):
        for j, e2 in enumerate(g.eps2_values):
            w.writerow([_r(e1), _r(e2), _r(surface.errors[i, j])])
    return buf.getvalue()


def read_surface_csv(path) -> ErrorSurface:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["eps1", "eps2", "error"]:
        raise FormatError(f"{path}: expected header 'eps1,eps2,error'")
    data = np.array([[float(v) for v in r] for r in rows[1:]])
    e1 = np.unique(data[:, 0])
    e2 = np.unique(data[:, 1])
    errors = data[:, 2].reshape(len(e1), len(e2))
    return ErrorSurface(UncertaintyGrid(e1, e2), errors)


def surface_to_dict(surface: ErrorSurface) -> dict:
    g = surface.grid
    return {
        "eps1_values": [float(v) for v in g.eps1_values],
        "eps2_values": [float(v) for v in g.eps2_values],
        "shape": list(g.shape),
        "errors": [[float(v) for v in row] for row in surface.errors],
    }


def surface_from_dict(d: dict) -> ErrorSurface:
    grid = UncertaintyGrid(d["eps1_values"], d["eps2_values"])
    return ErrorSurface(grid, np.array(d["errors"], dtype=float))


def physical_pulse_to_csv(phys: PhysicalPulse) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t_start_s", "duration_s", "ux_rad_s", "uy_rad_s"])
    for row in phys.rows():
        w.writerow([_r(v) for v in row])
    return buf.getvalue()


def read_physical_pulse(path) -> PhysicalPulse:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["t_start_s", "duration_s", "ux_rad_s", "uy_rad_s"]:
        raise FormatError(f"{path}: expected header 't_start_s,duration_s,ux_rad_s,uy_rad_s'")
    data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float).reshape(-1, 4)
    return PhysicalPulse(*data.T)


def region_to_dict(region: RegionSummary) -> dict:
    return region.as_dict()


# -------------------------------------------------------------- provenance

def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()


def write_json(path, obj) -> Path:
    return _write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def write_provenance(path, config: dict, seeds) -> Path:
    """Sidecar ``<path>.provenance.json``; the only file carrying a timestamp."""
    import numba
    import scipy

    meta = {
        "file": Path(path).name,
        "config_sha256": config_hash(config),
        "config": config,
        "seeds": [int(s) for s in seeds],
        "versions": {
            "robust_qsl": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "numba": numba.__version__,
            "python": platform.python_version(),
        },
        "created_unix": time.time(),
    }
    side = Path(str(path) + ".provenance.json")
    return _write_text(side, json.dumps(meta, indent=2, sort_keys=True, default=str) + "\n")
