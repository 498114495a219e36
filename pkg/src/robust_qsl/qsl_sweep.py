"""Robust quantum-speed-limit search.

The pulse duration is stepped upward on the grid ``t_start + k * t_step``.
At every duration the previous optimum, stretched onto the new segment
grid, seeds the optimizer; optional fresh random starts guard against
traps. The first duration whose best cost reaches the threshold is the
QSL. Escalation chains reuse the QSL pulse of one order as the start of
the next.

With ``coarse_factor > 1`` the grid is first walked in strides of
``coarse_factor`` steps; after the first hit the search returns to the last
failing stride and walks the fine grid, so the reported QSL still lies on
the fine grid and is preceded by a failing fine-grid entry.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .algebra import RobustnessOrder, assemble_generator
from .objective import GateTarget, gate_target
from .optimizer import OptimizerConfig, multi_start, segment_count
from .propagator import ControlPulse

log = logging.getLogger(__name__)


class SweepExhausted(RuntimeError):
    """No duration up to ``t_max`` reached the threshold."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace or []


@dataclass(frozen=True)
class SweepConfig:
    t_start: float = 0.3
    t_step: float = 0.005
    t_max: float = 12.0
    threshold: float = 1e-10
    segment_target: float = 0.01
    omega: float = np.pi
    coarse_factor: int = 1
    warm_jitter: float = 0.05
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)

    def __post_init__(self):
        if not (self.t_start > 0 and self.t_step > 0 and self.segment_target > 0):
            raise ValueError("t_start, t_step and segment_target must be positive")
        if not self.t_start < self.t_max:
            raise ValueError("t_start must be below t_max")
        if not self.threshold > 0:
            raise ValueError("threshold must be positive")
        if not self.omega > 0:
            raise ValueError("omega must be positive")
        if self.coarse_factor < 1:
            raise ValueError("coarse_factor must be >= 1")
        if self.warm_jitter < 0:
            raise ValueError("warm_jitter must be non-negative")

    def replace(self, **changes) -> "SweepConfig":
        return replace(self, **changes)

    def grid_point(self, k: int) -> float:
        return round(self.t_start + k * self.t_step, 12)


@dataclass
class QslRecord:
    gate: str
    order: RobustnessOrder
    qsl: float
    pulse: ControlPulse
    final_cost: float
    sweep_trace: list[tuple[float, float]]
    seeds: list[int]
    omega: float = np.pi
    gate_matrix: np.ndarray | None = field(default=None, repr=False)

    @property
    def target(self) -> GateTarget:
        if self.gate_matrix is not None:
            return GateTarget(self.gate, self.gate_matrix)
        return GateTarget.named(self.gate)


def warm_start_resample(
    pulse: ControlPulse, new_total: float, delta_target: float = 0.01
) -> ControlPulse:
    """Stretch ``pulse`` to duration ``new_total`` on a fresh uniform grid.

    Phases are linearly interpolated (after unwrapping) in rescaled time
    ``t / T`` at segment midpoints, with constant extrapolation at the ends.
    """
    old_total = pulse.total_duration
    if new_total < old_total * (1 - 1e-12):
        raise ValueError(f"cannot shrink a pulse from {old_total} to {new_total}")
    n_new = segment_count(new_total, delta_target)
    old_mid = (np.arange(pulse.n_segments) + 0.5) / pulse.n_segments
    new_mid = (np.arange(n_new) + 0.5) / n_new
    if n_new == pulse.n_segments:
        phases = np.array(pulse.phases)
    else:
        phases = np.interp(new_mid, old_mid, np.unwrap(pulse.phases))
    return ControlPulse(phases, new_total / n_new, pulse.omega)


def sweep(
    gate,
    order: RobustnessOrder,
    cfg: SweepConfig | None = None,
    initial: ControlPulse | None = None,
    t_start: float | None = None,
    weights=None,
) -> QslRecord:
    """Find the smallest grid duration at which ``gate`` is reachable to
    ``order``-th order robustness.

    Parameters
    ----------
    gate : str, GateTarget or 2x2 array
    order : RobustnessOrder
    cfg : SweepConfig
    initial : ControlPulse, optional
        Warm start for the first duration (e.g. the QSL pulse of a lower
        order), perturbed by Gaussian noise of width ``cfg.warm_jitter``.
        Random phases from ``cfg.optimizer.seed`` otherwise.
    t_start : float, optional
        Overrides ``cfg.t_start``; the grid keeps the spacing ``t_step``.

    Raises
    ------
    SweepExhausted
        If ``cfg.t_max`` is passed without reaching the threshold.
    """
    cfg = cfg or SweepConfig()
    target = gate_target(gate)
    if not isinstance(order, RobustnessOrder):
        order = RobustnessOrder(*order)
    if t_start is not None:
        cfg = cfg.replace(t_start=t_start)
    opt = cfg.optimizer.replace(cost_tolerance=cfg.threshold)
    gen = assemble_generator(order, cfg.omega)

    if initial is None:
        rng = np.random.default_rng(opt.seed)
        n0 = segment_count(cfg.t_start, cfg.segment_target)
        initial = ControlPulse(rng.uniform(-np.pi, np.pi, n0), cfg.t_start / n0, cfg.omega)
    elif not np.isclose(initial.omega, cfg.omega, rtol=1e-12):
        raise ValueError("initial pulse omega differs from the sweep omega")
    elif cfg.warm_jitter > 0:
        # lower-order optima are often symmetric (e.g. constant phase) and
        # stationary for the higher-order cost too; a small kick breaks that
        rng = np.random.default_rng(opt.seed)
        kick = rng.normal(0.0, cfg.warm_jitter, initial.n_segments)
        initial = initial.with_phases(initial.phases + kick)

    trace: dict[float, float] = {}
    seeds: list[int] = []
    warm = initial
    stride = cfg.coarse_factor
    last_fail: tuple[int, ControlPulse] | None = None
    k = 0
    while True:
        t = cfg.grid_point(k)
        if t > cfg.t_max + 1e-12:
            raise SweepExhausted(
                f"t_max exhausted: no duration up to {cfg.t_max} reached {cfg.threshold:g} "
                f"for gate {target.name} order ({order})",
                sorted(trace.items()),
            )
        if warm.total_duration <= t * (1 + 1e-12):
            start = warm_start_resample(warm, t, cfg.segment_target)
        else:
            # warm start longer than the grid point (chains starting below it)
            n = segment_count(t, cfg.segment_target)
            start = ControlPulse(np.resize(warm.phases, n), t / n, cfg.omega)
        res = multi_start(gen, target, t, opt, cfg.segment_target, weights, initial=start)
        seeds.append(res.seed)
        trace[t] = res.final_cost.total
        log.debug("gate %s order %s T=%.4f cost=%.3e", target.name, order, t, res.final_cost.total)
        warm = res.pulse
        if res.final_cost.total <= cfg.threshold:
            if stride > 1 and last_fail is not None and last_fail[0] + 1 < k:
                # refine on the fine grid from the last failing stride
                stride = 1
                k, warm = last_fail[0] + 1, last_fail[1]
                continue
            return QslRecord(
                gate=target.name,
                order=order,
                qsl=t,
                pulse=res.pulse,
                final_cost=res.final_cost.total,
                sweep_trace=sorted(trace.items()),
                seeds=seeds,
                omega=cfg.omega,
                gate_matrix=np.array(target.matrix),
            )
        last_fail = (k, res.pulse)
        k += stride


DEFAULT_CHAINS = ("frequency", "amplitude", "diagonal")


def escalation_schedule(max_order: RobustnessOrder, chains=DEFAULT_CHAINS) -> list[list[RobustnessOrder]]:
    """Orders to visit, one list per chain, each starting at ``(0, 0)``.

    ``frequency`` walks ``(k, 0)`` up to ``n1``; ``amplitude`` walks
    ``(0, k)`` up to ``n2``; ``diagonal`` walks ``(k, k)`` up to
    ``min(n1, n2)``; ``rectangle`` covers every order in the box in
    lexicographic order (not a chain, each order is warm-started from the
    largest dominated order already solved).
    """
    out = []
    for name in chains:
        if name == "frequency":
            chain = [RobustnessOrder(k, 0) for k in range(max_order.n1 + 1)]
        elif name == "amplitude":
            chain = [RobustnessOrder(0, k) for k in range(max_order.n2 + 1)]
        elif name == "diagonal":
            chain = [RobustnessOrder(k, k) for k in range(min(max_order.n1, max_order.n2) + 1)]
        elif name == "rectangle":
            chain = sorted(max_order.__class__(a, b) for a, b in max_order.blocks())
        else:
            raise ValueError(f"unknown chain {name!r}")
        out.append(chain)
    return out


def escalate(
    gate,
    max_order: RobustnessOrder,
    cfg: SweepConfig | None = None,
    chains=DEFAULT_CHAINS,
    cache: dict | None = None,
) -> list[QslRecord]:
    """Sequentially sweep increasing orders, low to high.

    Each sweep starts at the QSL of its predecessor with the predecessor's
    pulse as warm start. Orders shared by several chains (``(0, 0)``) are
    computed once. Records are returned in visiting order without duplicates.
    """
    cfg = cfg or SweepConfig()
    if not isinstance(max_order, RobustnessOrder):
        max_order = RobustnessOrder(*max_order)
    done: dict[RobustnessOrder, QslRecord] = {} if cache is None else cache
    out: list[QslRecord] = []
    for chain in escalation_schedule(max_order, chains):
        for order in chain:
            if order in done:
                rec = done[order]
            else:
                prev = _best_predecessor(order, done)
                if prev is None:
                    rec = sweep(gate, order, cfg)
                else:
                    rec = sweep(gate, order, cfg, initial=prev.pulse, t_start=prev.qsl)
                done[order] = rec
            if all(r.order != order for r in out):
                out.append(rec)
    return out


def _best_predecessor(order, done):
    cands = [
        r for o, r in done.items()
        if o != order and o.n1 <= order.n1 and o.n2 <= order.n2
    ]
    if not cands:
        return None
    return max(cands, key=lambda r: (r.qsl, r.order.n1 + r.order.n2))
