"""Map between dimensionless and physical pulses.

Dividing the uncertain Schroedinger equation by a scale frequency ``omega0``
(rad/s) gives dimensionless time ``t_bar = omega0 t``, controls
``u_bar = u / omega0`` and frequency offset ``eps1_bar = eps1 / omega0``.
The relative amplitude error ``eps2`` is unchanged. All physical quantities
here are angular (rad/s); Hz appears only in the explicit helpers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .propagator import ControlPulse

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class PhysicalScale:
    omega0: float
    omega_phys: float

    def __post_init__(self):
        for name in ("omega0", "omega_phys"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive, got {v}")

    @classmethod
    def from_drive_bound(cls, omega_phys: float, omega_bar: float = np.pi) -> "PhysicalScale":
        """Scale for which the physical drive bound maps to ``omega_bar``."""
        return cls(omega_phys / omega_bar, omega_phys)

    @classmethod
    def from_scale(cls, omega0: float, omega_bar: float = np.pi) -> "PhysicalScale":
        """Scale given ``omega0`` directly; the drive bound is ``omega_bar * omega0``."""
        return cls(omega0, omega_bar * omega0)

    @property
    def omega_bar(self) -> float:
        return self.omega_phys / self.omega0


def hz_to_rad_s(f_hz: float) -> float:
    return TWO_PI * f_hz


def rad_s_to_hz(w: float) -> float:
    return w / TWO_PI


def rescale_time(t_bar, scale: PhysicalScale):
    """Seconds corresponding to dimensionless time ``t_bar``."""
    return np.asarray(t_bar, dtype=float) / scale.omega0 if np.ndim(t_bar) else float(t_bar) / scale.omega0


def to_dimensionless_time(t_seconds, scale: PhysicalScale):
    return t_seconds * scale.omega0


def frequency_offset(eps1_bar: float, scale: PhysicalScale) -> float:
    """Physical frequency offset in rad/s for dimensionless ``eps1_bar``."""
    return eps1_bar * scale.omega0


@dataclass(frozen=True)
class PhysicalPulse:
    t_start_s: np.ndarray
    duration_s: np.ndarray
    ux_rad_s: np.ndarray
    uy_rad_s: np.ndarray

    @property
    def total_duration_s(self) -> float:
        return float(np.sum(self.duration_s))

    def rows(self):
        for row in zip(self.t_start_s, self.duration_s, self.ux_rad_s, self.uy_rad_s):
            yield tuple(float(v) for v in row)


def rescale_pulse(pulse: ControlPulse, scale: PhysicalScale) -> PhysicalPulse:
    """Segment start times and durations in seconds and controls in rad/s."""
    if not np.isclose(pulse.omega, scale.omega_bar, rtol=1e-12, atol=0.0):
        raise ValueError(
            f"pulse omega {pulse.omega} does not match the scale's dimensionless bound {scale.omega_bar}"
        )
    dt = pulse.segment_duration / scale.omega0
    n = pulse.n_segments
    return PhysicalPulse(
        t_start_s=np.arange(n) * dt,
        duration_s=np.full(n, dt),
        ux_rad_s=scale.omega_phys * np.cos(pulse.phases),
        uy_rad_s=scale.omega_phys * np.sin(pulse.phases),
    )


def pulse_from_physical(phys: PhysicalPulse, scale: PhysicalScale) -> ControlPulse:
    """Inverse of :func:`rescale_pulse`; requires uniform, full-power segments."""
    d = np.asarray(phys.duration_s, dtype=float)
    if len(d) == 0:
        raise ValueError("empty pulse")
    if not np.allclose(d, d[0], rtol=1e-9, atol=0.0):
        raise ValueError("segments must have uniform duration")
    amp = np.hypot(phys.ux_rad_s, phys.uy_rad_s)
    if not np.allclose(amp, scale.omega_phys, rtol=1e-9, atol=0.0):
        raise ValueError("controls do not saturate the drive bound of this scale")
    phases = np.arctan2(phys.uy_rad_s, phys.ux_rad_s)
    return ControlPulse(phases, d[0] * scale.omega0, scale.omega_bar)
