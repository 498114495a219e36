"""Phase-only gradient descent for a fixed pulse duration.

Three step rules are available: ``fixed`` (plain GRAPE-style steepest
descent), ``backtracking`` (steepest descent with an Armijo line search) and
``quasi-newton`` (limited-memory BFGS directions with the same line search).
Only the phases are optimized, so every iterate saturates the power bound.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping

import numpy as np

from .algebra import AugmentedGenerator
from .objective import CostFunction, CostReport, gate_target
from .propagator import ControlPulse

log = logging.getLogger(__name__)

STEP_RULES = ("fixed", "backtracking", "quasi-newton")


class NumericalFault(FloatingPointError):
    """Non-finite cost or gradient during optimization."""


@dataclass(frozen=True)
class OptimizerConfig:
    max_iterations: int = 10000
    gradient_tolerance: float = 1e-9
    cost_tolerance: float = 1e-10
    step_rule: str = "quasi-newton"
    initial_step: float = 1.0
    seed: int = 0
    restarts: int = 8
    memory: int = 20

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        if self.gradient_tolerance < 0:
            raise ValueError("gradient_tolerance must be non-negative")
        if not self.cost_tolerance > 0:
            raise ValueError("cost_tolerance must be positive")
        if self.step_rule not in STEP_RULES:
            raise ValueError(f"step_rule must be one of {STEP_RULES}, got {self.step_rule!r}")
        if not self.initial_step > 0:
            raise ValueError("initial_step must be positive")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.memory < 1:
            raise ValueError("memory must be >= 1")

    def replace(self, **changes) -> "OptimizerConfig":
        return replace(self, **changes)


@dataclass
class OptimizationResult:
    pulse: ControlPulse
    final_cost: CostReport
    iterations: int
    converged: bool
    seed: int | None
    trace: list[float] = field(default_factory=list, repr=False)
    status: str = ""


@dataclass
class _Minimum:
    x: np.ndarray
    fun: float
    iterations: int
    trace: list[float]
    status: str


def _check_finite(value, grad):
    if not np.isfinite(value) or not np.all(np.isfinite(grad)):
        raise NumericalFault("non-finite cost or gradient")


def _lbfgs_direction(grad, pairs):
    q = grad.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * (s @ q)
        alphas.append(a)
        q -= a * y
    if pairs:
        s, y, _ = pairs[-1]
        q *= (s @ y) / (y @ y)
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * (y @ q)
        q += (a - b) * s
    return -q


def minimize_phases(
    fun: Callable[[np.ndarray], tuple[float, np.ndarray]],
    x0: np.ndarray,
    cfg: OptimizerConfig,
) -> _Minimum:
    """Minimize ``fun`` (returning value and gradient) from ``x0``.

    Stops when the value drops to ``cfg.cost_tolerance``, the gradient norm
    to ``cfg.gradient_tolerance``, the line search stalls, or after
    ``cfg.max_iterations`` iterations. The recorded trace is the accepted
    value sequence and never increases for the line-search rules.
    """
    x = np.array(x0, dtype=float)
    f, g = fun(x)
    _check_finite(f, g)
    trace = [f]
    pairs: deque = deque(maxlen=cfg.memory)
    status = "max_iterations"
    it = 0
    for it in range(1, cfg.max_iterations + 1):
        if f <= cfg.cost_tolerance:
            status = "cost_tolerance"
            it -= 1
            break
        gnorm = np.linalg.norm(g)
        if gnorm <= cfg.gradient_tolerance:
            status = "gradient_tolerance"
            it -= 1
            break

        if cfg.step_rule == "fixed":
            x = x - cfg.initial_step * g
            f, g = fun(x)
            _check_finite(f, g)
            trace.append(f)
            continue

        if cfg.step_rule == "quasi-newton" and pairs:
            d = _lbfgs_direction(g, pairs)
            t = 1.0
        else:
            d = -g
            # first steepest step moves the largest phase by about initial_step rad
            t = cfg.initial_step / max(np.abs(g).max(), 1e-300) if not pairs else 1.0
            t = min(t, cfg.initial_step / max(gnorm, 1e-300) * np.sqrt(len(x)))
        slope = g @ d
        if slope >= 0:
            pairs.clear()
            d = -g
            slope = -gnorm**2
            t = cfg.initial_step / max(np.abs(g).max(), 1e-300)

        while True:
            x_new = x + t * d
            f_new, g_new = fun(x_new)
            if np.isfinite(f_new) and f_new <= f + 1e-4 * t * slope:
                break
            t *= 0.5
            if t * np.abs(d).max() < 1e-15:
                x_new = None
                break
        if x_new is None:
            if pairs:
                # stale curvature; retry once from steepest descent
                pairs.clear()
                continue
            status = "line_search_stalled"
            break
        _check_finite(f_new, g_new)
        s = x_new - x
        y = g_new - g
        sy = s @ y
        if cfg.step_rule == "quasi-newton" and sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            pairs.append((s, y, 1.0 / sy))
        x, f, g = x_new, f_new, g_new
        trace.append(f)
    else:
        if f <= cfg.cost_tolerance:
            status = "cost_tolerance"
        elif np.linalg.norm(g) <= cfg.gradient_tolerance:
            status = "gradient_tolerance"
    return _Minimum(x, f, it, trace, status)


def random_phases(n_segments: int, rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(-np.pi, np.pi, n_segments)


def segment_count(total_duration: float, segment_target: float) -> int:
    """Fewest uniform segments with duration at most ``segment_target``."""
    if not total_duration > 0:
        raise ValueError("total_duration must be positive")
    return max(1, int(np.ceil(total_duration / segment_target - 1e-9)))


def optimize(
    gen: AugmentedGenerator,
    initial: ControlPulse,
    target,
    cfg: OptimizerConfig | None = None,
    weights: Mapping | None = None,
    cost_function: CostFunction | None = None,
    seed: int | None = None,
) -> OptimizationResult:
    """Minimize the robust cost over the phases of ``initial``.

    The duration and segmentation of ``initial`` are kept; ``seed`` is only
    recorded for provenance.
    """
    cfg = cfg or OptimizerConfig()
    target = gate_target(target)
    if not np.isclose(initial.omega, gen.omega, rtol=1e-12, atol=0.0):
        raise ValueError("initial pulse omega does not match the generator")
    fn = cost_function or CostFunction(gen, target, initial.segment_duration, weights)
    m = minimize_phases(fn, initial.phases, cfg)
    pulse = initial.with_phases(m.x)
    report = fn.report(m.x)
    return OptimizationResult(
        pulse=pulse,
        final_cost=report,
        iterations=m.iterations,
        converged=report.total <= cfg.cost_tolerance,
        seed=seed,
        trace=m.trace,
        status=m.status,
    )


def _better(a: OptimizationResult, b: OptimizationResult | None) -> bool:
    if b is None:
        return True
    ka = (a.final_cost.total, a.seed if a.seed is not None else -1)
    kb = (b.final_cost.total, b.seed if b.seed is not None else -1)
    return ka < kb


def multi_start(
    gen: AugmentedGenerator,
    target,
    total_duration: float,
    cfg: OptimizerConfig | None = None,
    segment_target: float = 0.01,
    weights: Mapping | None = None,
    initial: ControlPulse | None = None,
) -> OptimizationResult:
    """Best of ``cfg.restarts`` runs from random phases seeded ``seed, seed+1, ...``.

    If ``initial`` is given it replaces the first random start (warm start)
    and must have the requested duration.
    """
    cfg = cfg or OptimizerConfig()
    target = gate_target(target)
    if initial is not None:
        n_seg = initial.n_segments
        if not np.isclose(initial.total_duration, total_duration, rtol=1e-9):
            raise ValueError("warm-start pulse duration differs from total_duration")
    else:
        n_seg = segment_count(total_duration, segment_target)
    dt = total_duration / n_seg
    fn = CostFunction(gen, target, dt, weights)
    best = None
    faults = []
    for i in range(cfg.restarts):
        seed = cfg.seed + i
        if i == 0 and initial is not None:
            start = initial
        else:
            rng = np.random.default_rng(seed)
            start = ControlPulse(random_phases(n_seg, rng), dt, gen.omega)
        try:
            res = optimize(gen, start, target, cfg, cost_function=fn, seed=seed)
        except NumericalFault as exc:
            log.warning("restart with seed %d aborted: %s", seed, exc)
            faults.append(seed)
            continue
        if _better(res, best):
            best = res
    if best is None:
        raise NumericalFault(f"every restart hit a numerical fault (seeds {faults})")
    return best
