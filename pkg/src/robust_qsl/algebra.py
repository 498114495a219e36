"""Operator algebra for the Taylor-augmented single-qubit model.

The augmented state stacks the expansion blocks ``U_{k1,k2}`` of the
uncertain propagator with ``k1`` (frequency order) as the slow index and
``k2`` (amplitude order) as the fast one, so every generator below is a
literal Kronecker product ``(frequency) x (amplitude) x (qubit)``.

Pauli matrices carry a factor 1/2, so a constant drive of amplitude ``pi``
for unit time is a full pi rotation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np

SIGMA_X = 0.5 * np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = 0.5 * np.array([[0, 1j], [-1j, 0]], dtype=complex)
SIGMA_Z = 0.5 * np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)

for _m in (SIGMA_X, SIGMA_Y, SIGMA_Z, IDENTITY_2):
    _m.setflags(write=False)


class PauliSet(NamedTuple):
    sx: np.ndarray
    sy: np.ndarray
    sz: np.ndarray


def pauli_set() -> PauliSet:
    """Return the half-scaled Pauli matrices ``(sx, sy, sz)``.

    ``sy`` follows the sign convention ``0.5 * [[0, i], [-i, 0]]``.
    """
    return PauliSet(SIGMA_X.copy(), SIGMA_Y.copy(), SIGMA_Z.copy())


@dataclass(frozen=True, order=True)
class RobustnessOrder:
    """Truncation order ``(n1, n2)`` in frequency and amplitude offsets."""

    n1: int = 0
    n2: int = 0

    def __post_init__(self):
        for name in ("n1", "n2"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise TypeError(f"{name} must be an integer, got {value!r}")
            if value < 0:
                raise ValueError(f"{name} must be non-negative, got {value}")
            object.__setattr__(self, name, int(value))

    @classmethod
    def parse(cls, text: str) -> "RobustnessOrder":
        """Parse ``"n1,n2"``."""
        parts = [p.strip() for p in str(text).split(",")]
        if len(parts) != 2 or not all(p.lstrip("-").isdigit() for p in parts):
            raise ValueError(f"order must look like 'n1,n2', got {text!r}")
        return cls(int(parts[0]), int(parts[1]))

    @property
    def n_blocks(self) -> int:
        return (self.n1 + 1) * (self.n2 + 1)

    @property
    def dim(self) -> int:
        """Augmented Hilbert-space dimension ``2 (n1+1) (n2+1)``."""
        return 2 * self.n_blocks

    def blocks(self) -> Iterator[tuple[int, int]]:
        """Yield ``(k1, k2)`` in stacking order (``k2`` fastest)."""
        for k1 in range(self.n1 + 1):
            for k2 in range(self.n2 + 1):
                yield k1, k2

    def block_index(self, k1: int, k2: int) -> int:
        if not (0 <= k1 <= self.n1 and 0 <= k2 <= self.n2):
            raise IndexError(f"block ({k1}, {k2}) outside order {self}")
        return k1 * (self.n2 + 1) + k2

    def block_slice(self, k1: int, k2: int) -> slice:
        """Rows of the stacked state that hold ``U_{k1,k2}``."""
        i = self.block_index(k1, k2)
        return slice(2 * i, 2 * i + 2)

    def __str__(self) -> str:
        return f"{self.n1},{self.n2}"


def shift_matrix(n: int) -> np.ndarray:
    """``(n+1) x (n+1)`` matrix with ones on the first subdiagonal."""
    if n < 0:
        raise ValueError("n must be non-negative")
    return np.eye(n + 1, k=-1, dtype=complex)


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


@dataclass(frozen=True, eq=False)
class AugmentedGenerator:
    """Drift and control generators of the augmented model.

    The full generator for phase ``phi`` is
    ``h0 + omega * (cos(phi) * h1 + sin(phi) * h2)``.
    """

    order: RobustnessOrder
    omega: float
    h0: np.ndarray
    h1: np.ndarray
    h2: np.ndarray
    k1: np.ndarray
    k2: np.ndarray

    @property
    def dim(self) -> int:
        return self.order.dim

    def matrix(self, phi: float) -> np.ndarray:
        return self.h0 + self.omega * (np.cos(phi) * self.h1 + np.sin(phi) * self.h2)

    def squared_generator(self) -> np.ndarray:
        """``(k1^2 + omega^2 k2^2) / 4``, the phase-independent square of ``matrix(phi)``
        restricted to one qubit factor."""
        return 0.25 * (self.k1 @ self.k1 + self.omega**2 * (self.k2 @ self.k2))


def assemble_generator(order: RobustnessOrder, omega: float) -> AugmentedGenerator:
    """Build ``h0, h1, h2`` and the block factors ``k1, k2`` for ``order``."""
    if not np.isfinite(omega) or omega <= 0:
        raise ValueError(f"omega must be positive and finite, got {omega}")
    if not isinstance(order, RobustnessOrder):
        order = RobustnessOrder(*order)
    eye1 = np.eye(order.n1 + 1, dtype=complex)
    eye2 = np.eye(order.n2 + 1, dtype=complex)
    k1 = kron(shift_matrix(order.n1), eye2)
    k2 = kron(eye1, eye2 + shift_matrix(order.n2))
    mats = {
        "h0": kron(k1, SIGMA_Z),
        "h1": kron(k2, SIGMA_X),
        "h2": kron(k2, SIGMA_Y),
        "k1": k1,
        "k2": k2,
    }
    for m in mats.values():
        m.setflags(write=False)
    return AugmentedGenerator(order=order, omega=float(omega), **mats)
