"""Exact and adiabatic geometric phases of finite-dimensional quantum systems."""

from .decomposition import (
    DeltaGammaBreakdown,
    ExpansionTrajectory,
    delta_gamma_general,
    expand_state,
    verify_reconstruction,
)
from .errors import (
    AdiabaticityLost,
    ConfigError,
    ContinuationBreakdown,
    DegenerateSpectrum,
    DomainError,
    GeoPhaseError,
    IntegrationAccuracyError,
    ModelError,
    NonHermitianError,
    NumericalError,
    OrthogonalEndpointsError,
    StiffnessError,
)
from .evolution import TimeGrid, Trajectory, closed_form_spin_state, evolve
from .hamiltonians import (
    AnalyticCallback,
    ModulatedDrive,
    RotatingField,
    SampledHamiltonian,
    adiabatic_constraint_ratios,
    eigenframe_trajectory,
    load_sampled_json,
)
from .phase import (
    PhaseReport,
    PhaseValue,
    berry_connection_integral,
    closed_form_adiabatic_phase,
    closed_form_exact_phase,
    delta_gamma_spin_estimate,
    geometric_phase_adiabatic,
    geometric_phase_exact,
    phase_report,
    spin_drift_rate,
)
from .quantum_core import Eigenframe, EigenframeTrajectory, eigensystem, gauge_continue, projector_deviation

__version__ = "0.1.0"

__all__ = [
    "AdiabaticityLost",
    "AnalyticCallback",
    "ConfigError",
    "ContinuationBreakdown",
    "DegenerateSpectrum",
    "DeltaGammaBreakdown",
    "DomainError",
    "Eigenframe",
    "EigenframeTrajectory",
    "ExpansionTrajectory",
    "GeoPhaseError",
    "IntegrationAccuracyError",
    "ModelError",
    "ModulatedDrive",
    "NonHermitianError",
    "NumericalError",
    "OrthogonalEndpointsError",
    "PhaseReport",
    "PhaseValue",
    "RotatingField",
    "SampledHamiltonian",
    "StiffnessError",
    "TimeGrid",
    "Trajectory",
    "adiabatic_constraint_ratios",
    "berry_connection_integral",
    "closed_form_adiabatic_phase",
    "closed_form_exact_phase",
    "closed_form_spin_state",
    "delta_gamma_general",
    "delta_gamma_spin_estimate",
    "eigenframe_trajectory",
    "eigensystem",
    "evolve",
    "expand_state",
    "gauge_continue",
    "geometric_phase_adiabatic",
    "geometric_phase_exact",
    "load_sampled_json",
    "phase_report",
    "projector_deviation",
    "spin_drift_rate",
    "verify_reconstruction",
]
