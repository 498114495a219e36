"""Exact piecewise-constant propagation of the augmented system.

Because ``A(phi)^2 = (k1^2 + omega^2 k2^2) / 4 (x) I_2`` for every phase, the
step exponential collapses to

    V(phi) = C (x) I_2 - i dt [S k1 (x) sz + S k2 (x) omega (cos phi sx + sin phi sy)]

with ``C`` and ``S`` the even/odd parts of the exponential series in
``M = k1^2 + omega^2 k2^2``. ``C`` and ``S`` depend only on ``dt``, so one
kernel serves every segment of a uniform pulse and every iterate of the
optimizer. The step is affine in ``(cos phi, sin phi)``, which is what the
fast paths below exploit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial

import numpy as np
import scipy.linalg

from .algebra import IDENTITY_2, SIGMA_X, SIGMA_Y, SIGMA_Z, AugmentedGenerator, RobustnessOrder

_SERIES_CAP = 200


class SeriesDivergenceError(ArithmeticError):
    pass


@dataclass(frozen=True, eq=False)
class ControlPulse:
    """Full-power pulse ``u = omega (cos phi_j, sin phi_j)`` on uniform segments."""

    phases: np.ndarray
    segment_duration: float
    omega: float

    def __post_init__(self):
        phases = np.array(self.phases, dtype=float).reshape(-1)
        phases.setflags(write=False)
        object.__setattr__(self, "phases", phases)
        if not np.all(np.isfinite(phases)):
            raise ValueError("phases must be finite")
        if not (self.segment_duration > 0 and np.isfinite(self.segment_duration)):
            raise ValueError(f"segment_duration must be positive, got {self.segment_duration}")
        if not (self.omega > 0 and np.isfinite(self.omega)):
            raise ValueError(f"omega must be positive, got {self.omega}")
        object.__setattr__(self, "segment_duration", float(self.segment_duration))
        object.__setattr__(self, "omega", float(self.omega))

    @classmethod
    def uniform(cls, phases, total_duration: float, omega: float) -> "ControlPulse":
        phases = np.asarray(phases, dtype=float).reshape(-1)
        if len(phases) == 0:
            raise ValueError("a uniform pulse needs at least one segment")
        return cls(phases, total_duration / len(phases), omega)

    @property
    def n_segments(self) -> int:
        return len(self.phases)

    @property
    def total_duration(self) -> float:
        return self.n_segments * self.segment_duration

    @property
    def ux(self) -> np.ndarray:
        return self.omega * np.cos(self.phases)

    @property
    def uy(self) -> np.ndarray:
        return self.omega * np.sin(self.phases)

    def with_phases(self, phases) -> "ControlPulse":
        return ControlPulse(phases, self.segment_duration, self.omega)


@dataclass(frozen=True, eq=False)
class StepKernel:
    """Phase-independent pieces of one segment exponential.

    ``step(phi) = p + cos(phi) q + sin(phi) r``.
    """

    order: RobustnessOrder
    omega: float
    dt: float
    c_mat: np.ndarray
    s_mat: np.ndarray
    k1: np.ndarray
    k2: np.ndarray
    p: np.ndarray = field(repr=False)
    q: np.ndarray = field(repr=False)
    r: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.order.dim


def _even_odd_series(m: np.ndarray, x: float) -> tuple[np.ndarray, np.ndarray]:
    """Return ``sum x^k M^k / (2k)!`` and ``sum x^k M^k / (2k+1)!``."""
    n = m.shape[0]
    power = np.eye(n, dtype=complex)
    c = np.zeros((n, n), dtype=complex)
    s = np.zeros((n, n), dtype=complex)
    for k in range(_SERIES_CAP):
        c_term = power / factorial(2 * k)
        s_term = power / factorial(2 * k + 1)
        c += c_term
        s += s_term
        small = np.linalg.norm(c_term) <= 1e-16 * max(np.linalg.norm(c), 1.0)
        if small and np.linalg.norm(s_term) <= 1e-16 * max(np.linalg.norm(s), 1.0):
            return c, s
        power = x * (power @ m)
        if k > 2 and not np.all(np.isfinite(power)):
            break
    raise SeriesDivergenceError(f"C/S series did not converge in {_SERIES_CAP} terms")


def build_step_kernel(gen: AugmentedGenerator, dt: float) -> StepKernel:
    """Precompute ``C(dt)``, ``S(dt)`` and the affine step pieces for ``gen``."""
    if not (dt > 0 and np.isfinite(dt)):
        raise ValueError(f"dt must be positive, got {dt}")
    m = gen.k1 @ gen.k1 + gen.omega**2 * (gen.k2 @ gen.k2)
    # factor 1/4 from the half-scaled Paulis
    c_mat, s_mat = _even_odd_series(m, -dt * dt / 4.0)
    p = np.kron(c_mat, IDENTITY_2) - 1j * dt * np.kron(s_mat @ gen.k1, SIGMA_Z)
    sk2 = s_mat @ gen.k2
    q = -1j * dt * gen.omega * np.kron(sk2, SIGMA_X)
    r = -1j * dt * gen.omega * np.kron(sk2, SIGMA_Y)
    for a in (c_mat, s_mat, p, q, r):
        a.setflags(write=False)
    return StepKernel(gen.order, gen.omega, float(dt), c_mat, s_mat, gen.k1, gen.k2, p, q, r)


def step(kernel: StepKernel, phi: float) -> np.ndarray:
    """Exact segment propagator ``exp(-i A(phi) dt)``."""
    return kernel.p + np.cos(phi) * kernel.q + np.sin(phi) * kernel.r


def step_gradient(kernel: StepKernel, phi: float) -> np.ndarray:
    """Exact derivative of :func:`step` with respect to ``phi``."""
    return -np.sin(phi) * kernel.q + np.cos(phi) * kernel.r


def steps(kernel: StepKernel, phases) -> np.ndarray:
    """Stack of segment propagators, shape ``(n_segments, N, N)``."""
    phases = np.asarray(phases, dtype=float)
    return (
        kernel.p[None]
        + np.cos(phases)[:, None, None] * kernel.q[None]
        + np.sin(phases)[:, None, None] * kernel.r[None]
    )


def _check_compatible(gen: AugmentedGenerator, pulse: ControlPulse) -> None:
    if not np.isclose(pulse.omega, gen.omega, rtol=1e-12, atol=0.0):
        raise ValueError(f"pulse omega {pulse.omega} does not match generator omega {gen.omega}")


def propagate(
    gen: AugmentedGenerator,
    pulse: ControlPulse | None,
    kernel: StepKernel | None = None,
    return_partials: bool = False,
):
    """Ordered product ``V_n ... V_1`` of the augmented step propagators.

    Parameters
    ----------
    gen : AugmentedGenerator
    pulse : ControlPulse or None
        ``None`` stands for the empty pulse and yields the identity.
    kernel : StepKernel, optional
        Reused if given; must match ``pulse.segment_duration``.
    return_partials : bool
        Also return the forward partial products ``V_j ... V_1`` for
        ``j = 0 .. n`` (index 0 is the identity).

    Returns
    -------
    ndarray or (ndarray, ndarray)
    """
    eye = np.eye(gen.dim, dtype=complex)
    if pulse is None or pulse.n_segments == 0:
        return (eye, eye[None].copy()) if return_partials else eye
    _check_compatible(gen, pulse)
    if kernel is None:
        kernel = build_step_kernel(gen, pulse.segment_duration)
    elif kernel.order != gen.order or not np.isclose(kernel.dt, pulse.segment_duration, rtol=1e-12):
        raise ValueError("kernel does not match generator order or pulse segment duration")
    vs = steps(kernel, pulse.phases)
    if return_partials:
        partials = np.empty((pulse.n_segments + 1, gen.dim, gen.dim), dtype=complex)
        partials[0] = eye
        for j, v in enumerate(vs):
            partials[j + 1] = v @ partials[j]
        return partials[-1].copy(), partials
    out = eye
    for v in vs:
        out = v @ out
    return out


def reference_expm(a: np.ndarray) -> np.ndarray:
    """General dense matrix exponential (scaling and squaring, Pade core)."""
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    return scipy.linalg.expm(a.astype(complex))
