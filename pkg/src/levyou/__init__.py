"""Densities, characteristic functions and simulation of Ornstein-Uhlenbeck
processes driven by Levy noise."""

from .charfn import DecayReport, ExponentField, ExponentQuadConfig, decay_probe, ou_charfn, ou_exponent
from .density import (
    DensityGrid,
    GridSpec,
    derivative_grid,
    invert_density,
    marginal_grid,
    pushforward_density,
    strong_feller_probe,
    transition_apply,
)
from .levy import (
    CompoundPoisson,
    IsotropicStable,
    LevyTriplet,
    SumOf,
    gaussian_triplet,
    hypothesis_check,
    psi,
    stable_triplet,
    truncate_measure,
)
from .linalg import OUSystem, gramian, gramian_floor, kalman_matrix, kolmogorov_system, mat_exp, rank_condition
from .simulate import (
    EndpointSample,
    SimConfig,
    kolmogorov_example,
    mc_estimate,
    sample_compound_convolution,
    sample_path_endpoint,
    sample_stable_increment,
)

__all__ = [
    "CompoundPoisson",
    "DecayReport",
    "DensityGrid",
    "EndpointSample",
    "ExponentField",
    "ExponentQuadConfig",
    "GridSpec",
    "IsotropicStable",
    "LevyTriplet",
    "OUSystem",
    "SimConfig",
    "SumOf",
    "decay_probe",
    "derivative_grid",
    "gaussian_triplet",
    "gramian",
    "gramian_floor",
    "hypothesis_check",
    "invert_density",
    "kalman_matrix",
    "kolmogorov_example",
    "kolmogorov_system",
    "marginal_grid",
    "mat_exp",
    "mc_estimate",
    "ou_charfn",
    "ou_exponent",
    "psi",
    "pushforward_density",
    "rank_condition",
    "sample_compound_convolution",
    "sample_path_endpoint",
    "sample_stable_increment",
    "stable_triplet",
    "strong_feller_probe",
    "transition_apply",
    "truncate_measure",
]

__version__ = "0.1.0"
