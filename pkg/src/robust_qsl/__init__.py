"""Robust quantum speed limits and time-optimal phase pulses for single-qubit gates."""

__version__ = "0.1.0"

from .algebra import (  # noqa: E402
    AugmentedGenerator,
    PauliSet,
    RobustnessOrder,
    assemble_generator,
    kron,
    pauli_set,
    shift_matrix,
)
from .objective import CostFunction, CostReport, GateTarget, cost, cost_gradient, gate_error  # noqa: E402
from .optimizer import (  # noqa: E402
    NumericalFault,
    OptimizationResult,
    OptimizerConfig,
    multi_start,
    optimize,
)
from .propagator import (  # noqa: E402
    ControlPulse,
    StepKernel,
    build_step_kernel,
    propagate,
    reference_expm,
    step,
    step_gradient,
)
from .qsl_sweep import QslRecord, SweepConfig, SweepExhausted, escalate, sweep, warm_start_resample  # noqa: E402
from .units import PhysicalScale, rescale_pulse, rescale_time  # noqa: E402
from .verifier import (  # noqa: E402
    ErrorSurface,
    UncertaintyGrid,
    axis_half_width,
    error_surface,
    fit_error_coefficients,
    level_set_region,
    scaling_slope,
    simulate_exact,
)

__all__ = [
    "AugmentedGenerator",
    "ControlPulse",
    "ErrorSurface",
    "NumericalFault",
    "assemble_generator",
    "axis_half_width",
    "build_step_kernel",
    "cost",
    "cost_gradient",
    "CostFunction",
    "CostReport",
    "error_surface",
    "escalate",
    "fit_error_coefficients",
    "gate_error",
    "GateTarget",
    "kron",
    "level_set_region",
    "multi_start",
    "OptimizationResult",
    "optimize",
    "OptimizerConfig",
    "pauli_set",
    "PauliSet",
    "PhysicalScale",
    "propagate",
    "QslRecord",
    "reference_expm",
    "rescale_pulse",
    "rescale_time",
    "RobustnessOrder",
    "scaling_slope",
    "shift_matrix",
    "simulate_exact",
    "step",
    "step_gradient",
    "StepKernel",
    "sweep",
    "SweepConfig",
    "SweepExhausted",
    "UncertaintyGrid",
    "warm_start_resample",
]
