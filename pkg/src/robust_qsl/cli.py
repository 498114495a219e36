"""Command-line front end.

Configuration precedence: built-in defaults < ``--config`` JSON file <
command-line flags. The default output directory is ``$ROBUST_QSL_OUTPUT_DIR``
or ``./robust_qsl_out``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path


from . import formats
from .algebra import RobustnessOrder, assemble_generator
from .objective import GateTarget, gate_target
from .optimizer import STEP_RULES, OptimizerConfig, multi_start
from .qsl_sweep import DEFAULT_CHAINS, SweepConfig, SweepExhausted, escalate, sweep
from .units import PhysicalScale, frequency_offset, rad_s_to_hz, rescale_pulse
from .verifier import (
    AXES,
    NoiseFloorError,
    UncertaintyGrid,
    axis_half_width,
    error_surface,
    level_set_region,
    scaling_slope,
)

log = logging.getLogger("robust_qsl")

OUTPUT_ENV = "ROBUST_QSL_OUTPUT_DIR"

# Published robust QSLs at omega_bar = pi, keyed by gate then (n1, n2).
PUBLISHED_QSL = {
    "X": {(0, 0): 1.00, (1, 0): 2.33, (2, 0): 4.28, (3, 0): 5.04, (4, 0): 6.72,
          (0, 1): 2.58, (0, 2): 4.21, (0, 3): 5.85, (1, 1): 4.44, (2, 2): 8.22},
    "Z": {(0, 0): 1.74, (1, 0): 3.48, (2, 0): 4.43, (3, 0): 5.99, (4, 0): 7.19,
          (0, 1): 3.46, (0, 2): 5.17, (0, 3): 6.91, (1, 1): 5.34, (2, 2): 8.78},
    "S": {(0, 0): 1.32, (1, 0): 2.97, (2, 0): 4.12, (3, 0): 5.53, (4, 0): 6.71,
          (0, 1): 3.04, (0, 2): 4.74, (0, 3): 6.48, (1, 1): 4.83, (2, 2): 8.11},
    "H": {(0, 0): 1.25, (1, 0): 2.69, (2, 0): 4.34, (3, 0): 5.47, (4, 0): 7.00,
          (0, 1): 2.73, (0, 2): 4.18, (0, 3): 5.81, (1, 1): 4.89, (2, 2): 8.83},
}
TABLE_COLUMNS = [(0, 0), (1, 0), (2, 0), (3, 0), (4, 0), (0, 1), (0, 2), (0, 3), (1, 1), (2, 2)]

_UNIT_FACTORS = {"rad/s": 1.0, "hz": 2 * math.pi, "khz": 2 * math.pi * 1e3,
                 "mhz": 2 * math.pi * 1e6, "ghz": 2 * math.pi * 1e9}


class UsageError(Exception):
    pass


def parse_frequency(text: str) -> float:
    """Parse a tagged frequency into rad/s.

    Accepted forms: ``6.2832e7rad/s``, ``10MHz``, ``2pi*10MHz``. Hz-family
    units denote cyclic frequency (multiplied by 2 pi); the optional leading
    ``2pi*`` is the usual way of writing that same angular frequency and
    does not add another factor.
    """
    s = text.strip().replace(" ", "")
    m = re.fullmatch(r"(2pi\*)?([0-9.eE+-]+)(rad/s|[kKmMgG]?[hH][zZ])", s)
    if not m:
        raise UsageError(
            f"frequency {text!r} needs an explicit unit: e.g. '6.2832e7rad/s', '10MHz' or '2pi*10MHz'"
        )
    try:
        value = float(m.group(2))
    except ValueError as exc:
        raise UsageError(f"bad number in {text!r}") from exc
    unit = m.group(3).lower() if m.group(3) != "rad/s" else "rad/s"
    if m.group(1) and unit == "rad/s":
        raise UsageError("'2pi*' prefix only makes sense with a Hz unit")
    if value <= 0:
        raise UsageError("frequency must be positive")
    return value * _UNIT_FACTORS[unit]


def _output_dir(args) -> Path:
    base = args.output_dir or args.file_config.get("output_dir") or os.environ.get(OUTPUT_ENV) or "robust_qsl_out"
    path = Path(base)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load_config(path) -> dict:
    if not path:
        return {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        line = text.splitlines()[exc.lineno - 1] if exc.lineno - 1 < len(text.splitlines()) else ""
        raise UsageError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}\n    {line}") from exc
    if not isinstance(cfg, dict):
        raise UsageError(f"{path}: top level must be an object")
    return cfg


_OPT_FLAGS = {
    "max_iterations": int, "gradient_tolerance": float, "step_rule": str,
    "initial_step": float, "restarts": int, "memory": int, "seed": int,
}
_SWEEP_FLAGS = {
    "t_start": float, "t_step": float, "t_max": float, "threshold": float,
    "segment_target": float, "coarse_factor": int, "warm_jitter": float, "omega": float,
}


def build_configs(args) -> tuple[SweepConfig, OptimizerConfig]:
    file_cfg = args.file_config
    opt_kw = {}
    for key, typ in _OPT_FLAGS.items():
        if key in file_cfg.get("optimizer", {}):
            opt_kw[key] = typ(file_cfg["optimizer"][key])
    if "seed" in file_cfg:
        opt_kw["seed"] = int(file_cfg["seed"])
    sweep_kw = {}
    for key, typ in _SWEEP_FLAGS.items():
        if key in file_cfg.get("sweep", {}):
            sweep_kw[key] = typ(file_cfg["sweep"][key])
    for key in _OPT_FLAGS:
        v = getattr(args, key, None)
        if v is not None:
            opt_kw[key] = v
    for key in _SWEEP_FLAGS:
        v = getattr(args, key, None)
        if v is not None:
            sweep_kw[key] = v
    try:
        opt = OptimizerConfig(**opt_kw)
        if "threshold" in sweep_kw:
            opt = opt.replace(cost_tolerance=sweep_kw["threshold"])
        return SweepConfig(optimizer=opt, **sweep_kw), opt
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid configuration: {exc}") from exc


def _config_dict(scfg: SweepConfig, extra: dict) -> dict:
    d = asdict(scfg)
    d.update(extra)
    return d


def _resolve_gate(args, fallback=None) -> GateTarget:
    spec = getattr(args, "gate", None) or args.file_config.get("gate")
    if spec is None:
        if fallback is not None:
            return fallback
        raise UsageError("a --gate is required")
    if isinstance(spec, str) and spec.strip().startswith("["):
        spec = formats._matrix_from_json(json.loads(spec))
    elif isinstance(spec, list):
        spec = formats._matrix_from_json(spec)
    try:
        return gate_target(spec)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _resolve_order(args) -> RobustnessOrder:
    text = getattr(args, "order", None) or args.file_config.get("order")
    if text is None:
        raise UsageError("an --order 'n1,n2' is required")
    try:
        return RobustnessOrder.parse(text)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc


def _stem(gate: GateTarget, order: RobustnessOrder) -> str:
    return f"{gate.name}_{order.n1}_{order.n2}"


def _write_record_files(out: Path, rec, cfg_dict) -> dict:
    target = rec.target
    stem = _stem(target, rec.order)
    paths = {
        "record": formats.write_record(out / f"{stem}.qsl.json", rec),
        "trace": formats.write_trace(out / f"{stem}.trace.csv", rec.sweep_trace),
        "pulse": formats.write_pulse(out / f"{stem}.pulse.csv", rec.pulse, rec.order, target),
    }
    for p in paths.values():
        formats.write_provenance(p, cfg_dict, rec.seeds)
    return paths


# ------------------------------------------------------------------ commands

def cmd_search(args) -> int:
    gate = _resolve_gate(args)
    order = _resolve_order(args)
    scfg, _ = build_configs(args)
    out = _output_dir(args)
    cfg_dict = _config_dict(scfg, {"gate": gate.name, "order": str(order), "escalate": args.escalate})
    try:
        if args.escalate:
            chains = args.chains.split(",") if args.chains else DEFAULT_CHAINS
            records = escalate(gate, order, scfg, chains=chains)
        else:
            records = [sweep(gate, order, scfg)]
    except SweepExhausted as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for rec in records:
        _write_record_files(out, rec, cfg_dict)
        print(f"QSL gate={rec.gate} order={rec.order} T={rec.qsl:.3f} cost={rec.final_cost:.3e}")
    return 0


def cmd_optimize(args) -> int:
    gate = _resolve_gate(args)
    order = _resolve_order(args)
    scfg, opt = build_configs(args)
    out = _output_dir(args)
    gen = assemble_generator(order, scfg.omega)
    res = multi_start(gen, gate, args.duration, opt, scfg.segment_target)
    stem = f"{_stem(gate, order)}_T{args.duration:g}"
    path = formats.write_pulse(out / f"{stem}.pulse.csv", res.pulse, order, gate)
    formats.write_provenance(path, _config_dict(scfg, {"gate": gate.name, "order": str(order),
                                                        "duration": args.duration}), [res.seed])
    print(f"cost={res.final_cost.total:.3e} gate_error={res.final_cost.gate_error:.3e} "
          f"converged={res.converged} iterations={res.iterations} seed={res.seed}")
    return 0


def _load_any_pulse(path):
    path = Path(path)
    if path.suffix == ".json":
        rec = formats.read_record(path)
        return rec.pulse, {"order": rec.order, "gate": rec.target}
    return formats.read_pulse(path)


def _scale_from_args(args, omega_bar) -> PhysicalScale | None:
    if getattr(args, "omega0", None):
        return PhysicalScale.from_scale(parse_frequency(args.omega0), omega_bar)
    if getattr(args, "omega", None):
        return PhysicalScale.from_drive_bound(parse_frequency(args.omega), omega_bar)
    return None


def cmd_verify(args) -> int:
    try:
        pulse, meta = _load_any_pulse(args.pulse)
    except (formats.FormatError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    gate = _resolve_gate(args, fallback=meta.get("gate"))
    out = _output_dir(args)
    grid = UncertaintyGrid.uniform(args.grid_points, half_width=args.half_width)
    surface = error_surface(pulse, gate, grid)
    region = level_set_region(surface, args.level)
    stem = Path(args.pulse).name.split(".")[0]
    cfg = {"pulse": str(args.pulse), "gate": gate.name, "grid_points": args.grid_points,
           "half_width": args.half_width, "level": args.level}
    files = [
        formats._write_text(out / f"{stem}.surface.csv", formats.surface_to_csv(surface)),
        formats.write_json(out / f"{stem}.surface.json",
                           {"gate": gate.name, **formats.surface_to_dict(surface)}),
    ]
    summary = {
        "gate": gate.name,
        "duration": pulse.total_duration,
        "error_at_origin": float(error_surface(pulse, gate, UncertaintyGrid([0.0], [0.0])).errors[0, 0]),
        "region": region.as_dict(),
        "frequency_half_width": axis_half_width(pulse, gate, "frequency", args.level, args.half_width),
        "amplitude_half_width": axis_half_width(pulse, gate, "amplitude", args.level, args.half_width),
    }
    axes = [args.slope_axis] if args.slope_axis else []
    slopes = {}
    for axis in axes:
        try:
            slopes[axis] = scaling_slope(pulse, gate, axis, tuple(args.slope_range))
        except NoiseFloorError as exc:
            slopes[axis] = None
            log.warning("slope along %s: %s", axis, exc)
    summary["slopes"] = slopes
    scale = _scale_from_args(args, pulse.omega)
    if scale is not None:
        drift = frequency_offset(summary["frequency_half_width"], scale)
        summary["physical"] = {
            "omega0_rad_s": scale.omega0,
            "drive_bound_rad_s": scale.omega_phys,
            "frequency_drift_rad_s": drift,
            "frequency_drift_hz": rad_s_to_hz(drift),
            "amplitude_tolerance_relative": summary["amplitude_half_width"],
        }
    files.append(formats.write_json(out / f"{stem}.verify.json", summary))
    for f in files:
        formats.write_provenance(f, cfg, [])
    print(f"error_at_origin={summary['error_at_origin']:.3e}")
    print(f"frequency_half_width={summary['frequency_half_width']:.4f} "
          f"amplitude_half_width={summary['amplitude_half_width']:.4f} "
          f"region_cells={region.cell_count}/{region.total_cells}")
    for axis, s in slopes.items():
        print(f"slope[{axis}]={'nan' if s is None else f'{s:.3f}'}")
    if "physical" in summary:
        p = summary["physical"]
        print(f"frequency_drift={p['frequency_drift_hz'] / 1e6:.4f}MHz ({p['frequency_drift_rad_s']:.6e} rad/s)")
    return 0


def cmd_rescale(args) -> int:
    if not (args.omega or args.omega0):
        print("error: rescale needs --omega (drive bound) or --omega0 (scale) with a unit", file=sys.stderr)
        return 2
    try:
        pulse, meta = _load_any_pulse(args.pulse)
    except (formats.FormatError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    scale = _scale_from_args(args, pulse.omega)
    phys = rescale_pulse(pulse, scale)
    out = _output_dir(args)
    stem = Path(args.pulse).name.split(".")[0]
    path = formats._write_text(out / f"{stem}.physical.csv", formats.physical_pulse_to_csv(phys))
    formats.write_provenance(path, {"pulse": str(args.pulse), "omega0_rad_s": scale.omega0,
                                    "drive_bound_rad_s": scale.omega_phys}, [])
    print(f"duration={phys.total_duration_s:.6e}s segments={pulse.n_segments} "
          f"drive_bound={scale.omega_phys:.6e}rad/s")
    return 0


def _table_job(payload):
    gate, max_order, scfg, chains = payload
    cache: dict = {}
    try:
        escalate(gate, max_order, scfg, chains=chains, cache=cache)
        status = None
    except SweepExhausted as exc:
        status = str(exc)
    return gate, cache, status


def cmd_table1(args) -> int:
    scfg, _ = build_configs(args)
    out = _output_dir(args)
    gates = [g.strip().upper() for g in args.gates.split(",")]
    max_order = RobustnessOrder.parse(args.max_order)
    columns = [c for c in TABLE_COLUMNS if c[0] <= max_order.n1 and c[1] <= max_order.n2]
    jobs = [(g, max_order, scfg, DEFAULT_CHAINS) for g in gates]
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(_table_job, jobs))
    else:
        results = [_table_job(j) for j in jobs]
    cfg_dict = _config_dict(scfg, {"gates": gates, "max_order": str(max_order)})
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["gate", "order", "reference", "computed", "deviation", "relative_deviation", "status"])
    seeds = []
    for gate, cache, status in results:
        for col in columns:
            order = RobustnessOrder(*col)
            ref = PUBLISHED_QSL[gate][col]
            rec = cache.get(order)
            if rec is None:
                w.writerow([gate, str(order), ref, "", "", "", status or "not reached"])
                continue
            seeds.extend(rec.seeds)
            _write_record_files(out, rec, cfg_dict)
            dev = rec.qsl - ref
            w.writerow([gate, str(order), ref, f"{rec.qsl:.3f}", f"{dev:+.3f}", f"{dev / ref:+.4f}", "ok"])
    path = formats._write_text(out / "table1.csv", buf.getvalue())
    formats.write_provenance(path, cfg_dict, seeds)
    print(buf.getvalue(), end="")
    return 0 if all(s is None for _, _, s in results) else 1


def cmd_export(args) -> int:
    try:
        rec = formats.read_record(args.record)
    except (formats.FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out = _output_dir(args)
    stem = _stem(rec.target, rec.order)
    if args.what == "pulse":
        path = formats.write_pulse(out / f"{stem}.pulse.csv", rec.pulse, rec.order, rec.target)
    elif args.what == "trace":
        path = formats.write_trace(out / f"{stem}.trace.csv", rec.sweep_trace)
    else:
        scale = _scale_from_args(args, rec.pulse.omega)
        if scale is None:
            print("error: physical export needs --omega or --omega0 with a unit", file=sys.stderr)
            return 2
        path = formats._write_text(out / f"{stem}.physical.csv",
                                   formats.physical_pulse_to_csv(rescale_pulse(rec.pulse, scale)))
    print(path)
    return 0


# ------------------------------------------------------------------- parser

def _add_common(p):
    p.add_argument("--config", help="JSON config file (flags override it)")
    p.add_argument("--output-dir", help=f"output directory (default ${OUTPUT_ENV} or ./robust_qsl_out)")
    p.add_argument("-v", "--verbose", action="count", default=0)


def _add_search_flags(p):
    p.add_argument("--gate", help="X, Z, S, H or a JSON matrix [[[re,im],[re,im]],[...]]")
    p.add_argument("--order", help="robustness order 'n1,n2'")
    g = p.add_argument_group("sweep")
    g.add_argument("--t-start", type=float)
    g.add_argument("--t-step", type=float)
    g.add_argument("--t-max", type=float)
    g.add_argument("--threshold", type=float)
    g.add_argument("--segment-target", type=float)
    g.add_argument("--coarse-factor", type=int, help="walk the grid in strides first, then refine")
    g.add_argument("--warm-jitter", type=float, help="std. dev. (rad) of the kick given to warm starts")
    g.add_argument("--omega-bar", dest="omega", type=float, help="dimensionless drive bound (default pi)")
    o = p.add_argument_group("optimizer")
    o.add_argument("--max-iterations", type=int)
    o.add_argument("--gradient-tolerance", type=float)
    o.add_argument("--step-rule", choices=STEP_RULES)
    o.add_argument("--initial-step", type=float)
    o.add_argument("--restarts", type=int)
    o.add_argument("--memory", type=int)
    o.add_argument("--seed", type=int)


def _add_scale_flags(p):
    p.add_argument("--omega", help="physical drive bound, e.g. '2pi*10MHz' or '6.2832e7rad/s'")
    p.add_argument("--omega0", help="physical scale frequency mapping to unit dimensionless frequency")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="robust-qsl", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("search", help="find the robust QSL by sweeping the duration")
    _add_common(p)
    _add_search_flags(p)
    p.add_argument("--escalate", action="store_true", help="walk the escalation chains up to --order")
    p.add_argument("--chains", help=f"comma list from {DEFAULT_CHAINS + ('rectangle',)}")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("optimize", help="optimize a pulse at one fixed duration")
    _add_common(p)
    _add_search_flags(p)
    p.add_argument("--duration", type=float, required=True)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("verify", help="error surface, level set and slopes for a pulse")
    _add_common(p)
    p.add_argument("pulse", help="pulse CSV or QSL record JSON")
    p.add_argument("--gate")
    p.add_argument("--grid-points", type=int, default=101)
    p.add_argument("--half-width", type=float, default=0.5)
    p.add_argument("--level", type=float, default=1e-6)
    p.add_argument("--slope-axis", choices=AXES)
    p.add_argument("--slope-range", type=float, nargs=2, default=(1e-3, 1e-2))
    _add_scale_flags(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("rescale", help="convert a pulse to physical units")
    _add_common(p)
    p.add_argument("pulse")
    _add_scale_flags(p)
    p.set_defaults(func=cmd_rescale)

    p = sub.add_parser("table1", help="QSL table for several gates against published values")
    _add_common(p)
    _add_search_flags(p)
    p.add_argument("--gates", default="X,Z,S,H")
    p.add_argument("--max-order", default="4,3")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_table1)

    p = sub.add_parser("export", help="re-export a stored QSL record")
    _add_common(p)
    p.add_argument("record")
    p.add_argument("what", choices=("pulse", "trace", "physical"))
    _add_scale_flags(p)
    p.set_defaults(func=cmd_export)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.file_config = _load_config(args.config)
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
