"""Robust-control cost: gate error of ``U_00`` plus the squared norms of the
expansion blocks that a robust pulse has to cancel."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from . import _kernels
from .algebra import AugmentedGenerator, RobustnessOrder
from .propagator import ControlPulse, StepKernel, build_step_kernel

_GATE_MATRICES = {
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    "S": np.array([[1, 0], [0, 1j]], dtype=complex),
    "H": np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2),
}
GATE_NAMES = tuple(_GATE_MATRICES)


@dataclass(frozen=True, eq=False)
class GateTarget:
    name: str
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.shape != (2, 2):
            raise ValueError(f"target must be 2x2, got shape {m.shape}")
        if np.linalg.norm(m.conj().T @ m - np.eye(2)) > 1e-12:
            raise ValueError("target matrix is not unitary")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def named(cls, name: str) -> "GateTarget":
        key = name.strip().upper()
        if key not in _GATE_MATRICES:
            raise ValueError(f"unknown gate {name!r}; choose from {', '.join(GATE_NAMES)}")
        return cls(key, _GATE_MATRICES[key])


def gate_target(spec) -> GateTarget:
    """Coerce a gate name, a ``GateTarget`` or a 2x2 matrix into a ``GateTarget``."""
    if isinstance(spec, GateTarget):
        return spec
    if isinstance(spec, str):
        return GateTarget.named(spec)
    return GateTarget("custom", np.asarray(spec, dtype=complex))


@dataclass(frozen=True)
class CostReport:
    total: float
    gate_error: float
    block_norms: Mapping[tuple[int, int], float] = field(default_factory=dict)


def gate_error(u: np.ndarray, target: GateTarget) -> float:
    """``1 - |tr(U_f^dagger U)|^2 / 4``; blind to global phase."""
    u = np.asarray(u)
    if u.shape != (2, 2):
        raise ValueError(f"expected a 2x2 matrix, got shape {u.shape}")
    overlap = np.trace(target.matrix.conj().T @ u)
    return float(1.0 - abs(overlap) ** 2 / 4.0)


def _weight_vector(order: RobustnessOrder, weights: Mapping | None) -> np.ndarray:
    w = np.ones(order.n_blocks)
    for key, value in (weights or {}).items():
        if value < 0:
            raise ValueError("block weights must be non-negative")
        w[order.block_index(*key)] = float(value)
    w[0] = 1.0
    return w


class CostFunction:
    """Compiled cost/gradient for pulses with a fixed segment grid.

    Holds the step kernel for one ``(generator, dt)`` pair, so it can be
    called repeatedly by the optimizer with new phase vectors.
    """

    def __init__(
        self,
        gen: AugmentedGenerator,
        target: GateTarget,
        segment_duration: float,
        weights: Mapping | None = None,
        kernel: StepKernel | None = None,
    ):
        self.gen = gen
        self.target = gate_target(target)
        self.kernel = kernel if kernel is not None else build_step_kernel(gen, segment_duration)
        order = gen.order
        self._pairs = _kernels.block_pairs(order)
        self._pb = _kernels.split_blocks(self.kernel.p, self._pairs)
        self._qb = _kernels.split_blocks(self.kernel.q, self._pairs)
        self._rb = _kernels.split_blocks(self.kernel.r, self._pairs)
        self._weights = _weight_vector(order, weights)
        self._tmat = np.ascontiguousarray(self.target.matrix)
        self.n_evaluations = 0

    @property
    def segment_duration(self) -> float:
        return self.kernel.dt

    def final_blocks(self, phases) -> np.ndarray:
        """First block column of the propagator, shape ``(n_blocks, 2, 2)``."""
        phases = np.ascontiguousarray(phases, dtype=float)
        return _kernels.final_state(
            self._pb, self._qb, self._rb, self._pairs, self.gen.order.n_blocks, phases
        )

    def value(self, phases) -> float:
        total, _, _, _ = _kernels.terminal_cost(self.final_blocks(phases), self._tmat, self._weights)
        self.n_evaluations += 1
        return float(total)

    def __call__(self, phases) -> tuple[float, np.ndarray]:
        phases = np.ascontiguousarray(phases, dtype=float)
        self.n_evaluations += 1
        total, grad = _kernels.cost_and_gradient(
            self._pb, self._qb, self._rb, self._pairs, self.gen.order.n_blocks,
            phases, self._tmat, self._weights,
        )
        return float(total), grad

    def report(self, phases) -> CostReport:
        order = self.gen.order
        blocks = self.final_blocks(phases)
        total, err, norms, _ = _kernels.terminal_cost(blocks, self._tmat, self._weights)
        block_norms = {
            kk: float(norms[order.block_index(*kk)]) for kk in order.blocks() if kk != (0, 0)
        }
        return CostReport(float(total), float(err), block_norms)


def _cost_function(gen, pulse, target, weights):
    if not np.isclose(pulse.omega, gen.omega, rtol=1e-12, atol=0.0):
        raise ValueError(f"pulse omega {pulse.omega} does not match generator omega {gen.omega}")
    return CostFunction(gen, target, pulse.segment_duration, weights)


def cost(
    gen: AugmentedGenerator,
    pulse: ControlPulse | None,
    target,
    weights: Mapping | None = None,
) -> CostReport:
    """Evaluate the robust cost of ``pulse``; ``None`` is the empty pulse."""
    target = gate_target(target)
    if pulse is None or pulse.n_segments == 0:
        norms = {kk: 0.0 for kk in gen.order.blocks() if kk != (0, 0)}
        err = gate_error(np.eye(2), target)
        return CostReport(err, err, norms)
    return _cost_function(gen, pulse, target, weights).report(pulse.phases)


def cost_gradient(
    gen: AugmentedGenerator,
    pulse: ControlPulse,
    target,
    weights: Mapping | None = None,
) -> np.ndarray:
    """Exact ``dJ/dphi_j`` for every segment."""
    _, grad = _cost_function(gen, pulse, gate_target(target), weights)(pulse.phases)
    return grad
