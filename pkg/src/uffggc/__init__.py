"""Gravity-gradient compensation, uncertainty budgets and signal demodulation
for atom-interferometric tests of the universality of free fall in orbit."""

__version__ = "0.1.0"

from .orbitgrav import GradientTensor, OrbitModel, gradient_tensor, gradient_tensor_at_time
from .dynamics import (
    FrameModel,
    KinematicState,
    ModelViolationError,
    PhaseDecomposition,
    PropagationError,
    PulseSequence,
    mz_phase,
    phase_decomposition,
    propagate,
)
from .compensation import (
    CompensationShifts,
    ConvergenceError,
    LaserSettings,
    laser_to_shifts,
    shifts_sweep,
    shifts_to_laser,
    solve_shifts,
)
from .demod import NoiseModel, SignalModel, demodulate_continuous, demodulate_discrete, shot_noise_sigma, sigma_eta
from .budget import (
    K41,
    RB87,
    BudgetLedger,
    Mission,
    SpeciesParams,
    UncertaintyInputs,
    ggc_residual_budget,
    integration_curve,
    verification_shots,
)
