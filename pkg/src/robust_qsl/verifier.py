"""Robustness checks against the exact uncertain two-level dynamics.

Nothing here touches the augmented model: each segment of the uncertain
Hamiltonian ``e1 sz + (1 + e2) omega (cos phi sx + sin phi sy)`` is a
constant traceless 2x2 generator, whose exponential is
``cos(|h| dt) I - i sin(|h| dt) (h . sigma) / |h|`` in closed form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .objective import GateTarget, gate_target
from .propagator import ControlPulse

AXES = ("frequency", "amplitude", "diagonal")

_PAULI_FULL = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, 1j], [-1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)


class FitConditioningError(ValueError):
    pass


class NoiseFloorError(ValueError):
    pass


@dataclass(frozen=True)
class UncertaintyGrid:
    eps1_values: np.ndarray
    eps2_values: np.ndarray

    def __post_init__(self):
        for name in ("eps1_values", "eps2_values"):
            v = np.array(getattr(self, name), dtype=float).reshape(-1)
            if len(v) == 0:
                raise ValueError(f"{name} is empty")
            if len(v) > 1 and np.any(np.diff(v) <= 0):
                raise ValueError(f"{name} must be strictly increasing")
            v.setflags(write=False)
            object.__setattr__(self, name, v)

    @classmethod
    def uniform(cls, n1: int = 101, n2: int | None = None, half_width: float = 0.5):
        n2 = n1 if n2 is None else n2
        return cls(
            np.linspace(-half_width, half_width, n1),
            np.linspace(-half_width, half_width, n2),
        )

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.eps1_values), len(self.eps2_values)


@dataclass(frozen=True)
class ErrorSurface:
    grid: UncertaintyGrid
    errors: np.ndarray  # errors[i, j] at (eps1_values[i], eps2_values[j])

    def __post_init__(self):
        if self.errors.shape != self.grid.shape:
            raise ValueError("errors shape does not match the grid")


def _segment_unitaries(pulse: ControlPulse, eps1, eps2) -> np.ndarray:
    """Closed-form segment exponentials, broadcast over ``eps1``/``eps2``.

    Returns an array of shape ``(..., n_segments, 2, 2)``.
    """
    eps1 = np.asarray(eps1, dtype=float)[..., None]
    eps2 = np.asarray(eps2, dtype=float)[..., None]
    amp = (1.0 + eps2) * pulse.omega
    # half-scaled Paulis: generator = (b . sigma_full) / 2
    bx = 0.5 * amp * np.cos(pulse.phases)
    by = 0.5 * amp * np.sin(pulse.phases)
    bz = 0.5 * eps1 * np.ones_like(by)
    bx, by, bz = np.broadcast_arrays(bx, by, bz)
    norm = np.sqrt(bx * bx + by * by + bz * bz)
    theta = norm * pulse.segment_duration
    sinc = np.where(norm > 0, np.sin(theta) / np.where(norm > 0, norm, 1.0), pulse.segment_duration)
    cos = np.cos(theta)
    out = np.empty(bx.shape + (2, 2), dtype=complex)
    # -i (bx X + by Y' + bz Z), Y' = [[0, i], [-i, 0]]
    out[..., 0, 0] = cos - 1j * sinc * bz
    out[..., 1, 1] = cos + 1j * sinc * bz
    out[..., 0, 1] = -1j * sinc * bx + sinc * by
    out[..., 1, 0] = -1j * sinc * bx - sinc * by
    return out


def _ordered_product(us: np.ndarray) -> np.ndarray:
    """``U_n ... U_1`` along the segment axis (second to last batch axis)."""
    out = np.broadcast_to(np.eye(2, dtype=complex), us.shape[:-3] + (2, 2)).copy()
    for j in range(us.shape[-3]):
        out = us[..., j, :, :] @ out
    return out


def unitary_gate_error(target: GateTarget, us: np.ndarray) -> np.ndarray:
    """Gate error of (a stack of) unitaries without cancellation near zero.

    For unitary ``W = U_f^dagger U``, ``1 - |tr W|^2 / 4`` equals
    ``|W00 - W11|^2 / 4 + (|W01|^2 + |W10|^2) / 2``.
    """
    w = np.einsum("ki,...km->...im", target.matrix.conj(), us)
    d = w[..., 0, 0] - w[..., 1, 1]
    return np.abs(d) ** 2 / 4.0 + (np.abs(w[..., 0, 1]) ** 2 + np.abs(w[..., 1, 0]) ** 2) / 2.0


def simulate_exact(pulse: ControlPulse, eps1, eps2) -> np.ndarray:
    """Propagator ``U(T; eps1, eps2)`` of the uncertain qubit.

    ``eps1`` (frequency offset in units of the scale frequency) and ``eps2``
    (relative amplitude error) may be arrays of a common broadcast shape; the
    result then has that shape followed by ``(2, 2)``.
    """
    return _ordered_product(_segment_unitaries(pulse, eps1, eps2))


def error_surface(pulse: ControlPulse, target, grid: UncertaintyGrid | None = None) -> ErrorSurface:
    target = gate_target(target)
    grid = grid or UncertaintyGrid.uniform()
    e1, e2 = np.meshgrid(grid.eps1_values, grid.eps2_values, indexing="ij")
    return ErrorSurface(grid, unitary_gate_error(target, simulate_exact(pulse, e1, e2)))


def _axis_point(axis: str, eps):
    if axis == "frequency":
        return eps, np.zeros_like(eps)
    if axis == "amplitude":
        return np.zeros_like(eps), eps
    if axis == "diagonal":
        return eps, eps
    raise ValueError(f"axis must be one of {AXES}, got {axis!r}")


def chebyshev_nodes(n: int, half_width: float) -> np.ndarray:
    k = np.arange(n)
    return half_width * np.cos((2 * k + 1) * np.pi / (2 * n))[::-1]


def fit_expansion(
    pulse: ControlPulse,
    axis: str,
    max_order: int,
    half_width: float = 0.5,
    n_nodes: int | None = None,
    max_condition: float = 1e6,
    tail_tolerance: float = 1e-13,
    max_degree: int = 256,
) -> np.ndarray:
    """Taylor coefficients of ``U(T; eps)`` along ``axis``.

    Entries of ``U`` are sampled at Chebyshev nodes in ``[-half_width,
    half_width]``, fitted in the Chebyshev basis of ``eps / half_width``
    and converted to monomial coefficients in ``eps``. The degree starts at
    ``max_order + 12`` and grows in steps of 4 until the last three Chebyshev
    coefficients fall below ``tail_tolerance`` relative to the largest, so
    long pulses (whose entries oscillate faster in ``eps``) get a longer
    expansion instead of a narrower window. Returns an array of shape
    ``(max_order + 1, 2, 2)``.

    Raises
    ------
    FitConditioningError
        If there are too few nodes for the fit degree, the basis matrix is
        worse conditioned than ``max_condition``, or the tail does not
        decay by ``max_degree``.
    """
    if max_order < 0:
        raise ValueError("max_order must be non-negative")
    if not half_width > 0:
        raise ValueError("half_width must be positive")
    degree = max_order + 12
    while True:
        n = n_nodes or degree + 9
        if n <= degree:
            raise FitConditioningError(f"{n} nodes cannot determine a degree-{degree} fit")
        nodes = chebyshev_nodes(n, half_width)
        e1, e2 = _axis_point(axis, nodes)
        us = simulate_exact(pulse, e1, e2).reshape(n, 4)
        basis = np.polynomial.chebyshev.chebvander(nodes / half_width, degree)
        cond = np.linalg.cond(basis)
        if cond > max_condition:
            raise FitConditioningError(f"fit matrix condition number {cond:.2e} exceeds {max_condition:.0e}")
        cheb, *_ = np.linalg.lstsq(basis, us, rcond=None)
        tail = np.abs(cheb[-3:]).max()
        if tail <= tail_tolerance * np.abs(cheb).max() or n_nodes is not None:
            break
        if degree >= max_degree:
            raise FitConditioningError(f"Chebyshev tail {tail:.1e} has not decayed at degree {degree}")
        degree = min(degree + 4, max_degree)
    mono = np.stack([np.polynomial.chebyshev.cheb2poly(cheb[:, i]) for i in range(4)], axis=1)
    mono = mono[: max_order + 1] * (half_width ** -np.arange(max_order + 1))[:, None]
    return mono.reshape(max_order + 1, 2, 2)


def fit_error_coefficients(
    pulse: ControlPulse,
    target=None,
    axis: str = "frequency",
    max_order: int = 3,
    **kwargs,
) -> np.ndarray:
    """Frobenius norms of the fitted expansion coefficients along ``axis``.

    Along ``frequency`` (``amplitude``) the ``m``-th entry estimates
    ``||U_{m,0}(T)||_F`` (``||U_{0,m}(T)||_F``); along ``diagonal`` it is
    the norm of ``sum_{k1+k2=m} U_{k1,k2}(T)``. ``target`` is accepted for
    signature symmetry with the other diagnostics and is unused.
    """
    coef = fit_expansion(pulse, axis, max_order, **kwargs)
    return np.linalg.norm(coef, axis=(1, 2))


def scaling_slope(
    pulse: ControlPulse,
    target,
    axis: str,
    eps_range=(1e-3, 1e-2),
    n_points: int = 9,
    noise_floor: float = 1e-28,
) -> float:
    """Least-squares slope of ``log F`` against ``log eps`` along ``axis``.

    ``eps`` runs over positive values only; for a pulse that cancels the
    first ``n`` orders along the axis the slope is close to ``2 (n + 1)``.
    A pulse that only meets a loose threshold keeps a residual error that
    flattens the curve; polish it first (see ``optimize``).

    Raises
    ------
    NoiseFloorError
        If any sampled error is below ``noise_floor``.
    """
    lo, hi = eps_range
    if not (0 < lo < hi <= 0.1):
        raise ValueError("eps_range must satisfy 0 < lo < hi <= 0.1")
    target = gate_target(target)
    eps = np.geomspace(lo, hi, n_points)
    e1, e2 = _axis_point(axis, eps)
    err = unitary_gate_error(target, simulate_exact(pulse, e1, e2))
    if np.any(err < noise_floor):
        raise NoiseFloorError("gate error at numerical noise floor; slope undefined")
    slope, _ = np.polyfit(np.log(eps), np.log(err), 1)
    return float(slope)


@dataclass(frozen=True)
class RegionSummary:
    level: float
    eps1_half_width: float
    eps2_half_width: float
    cell_count: int
    total_cells: int

    def as_dict(self) -> dict:
        return {
            "level": self.level,
            "eps1_half_width": self.eps1_half_width,
            "eps2_half_width": self.eps2_half_width,
            "cell_count": self.cell_count,
            "total_cells": self.total_cells,
        }


def _symmetric_half_width(values: np.ndarray, ok: np.ndarray) -> float:
    """Largest ``w`` with every grid value in ``[-w, w]`` satisfying ``ok``."""
    order = np.argsort(np.abs(values), kind="stable")
    width = 0.0
    for idx in order:
        if not ok[idx]:
            return width if width > 0 or abs(values[idx]) > 0 else 0.0
        width = abs(values[idx])
    return width


def level_set_region(surface: ErrorSurface, level: float) -> RegionSummary:
    """Extent of the sublevel set ``F <= level``.

    Half-widths are measured along the axes through the grid nodes closest
    to zero; a node set not containing zero on an axis uses that nearest
    row/column. ``cell_count`` counts all grid nodes below the level.
    """
    if not level > 0:
        raise ValueError("level must be positive")
    g = surface.grid
    ok = surface.errors <= level
    i0 = int(np.argmin(np.abs(g.eps1_values)))
    j0 = int(np.argmin(np.abs(g.eps2_values)))
    w1 = _symmetric_half_width(g.eps1_values, ok[:, j0])
    w2 = _symmetric_half_width(g.eps2_values, ok[i0, :])
    if not ok[i0, j0]:
        w1 = w2 = 0.0
    return RegionSummary(float(level), float(w1), float(w2), int(ok.sum()), int(ok.size))


def axis_half_width(pulse: ControlPulse, target, axis: str, level: float = 1e-6,
                    eps_max: float = 0.5, n_points: int = 1001) -> float:
    """Symmetric tolerance along one axis on a dense 1-D grid."""
    if axis not in ("frequency", "amplitude"):
        raise ValueError("axis must be 'frequency' or 'amplitude'")
    target = gate_target(target)
    eps = np.linspace(-eps_max, eps_max, n_points)
    e1, e2 = _axis_point(axis, eps)
    err = unitary_gate_error(target, simulate_exact(pulse, e1, e2))
    return _symmetric_half_width(eps, err <= level)
