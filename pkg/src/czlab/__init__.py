"""Calderon-Zygmund decomposition and truncated singular integrals on
finite atomic measures with polynomial growth."""
from ._accel import USE_NUMBA
from .geometry import Cube, dilate, sup_dist
from .measure import (AtomicMeasure, DensityVector, GrowthProfile, GrowthViolation, ball_mass,
                      cube_mass, l1_norm, verify_growth)
from .doubling import DerivedConstants, DoublingParams, annulus_kernel_integral, is_doubling
from .covering import besicovich_select, annulus_cover
from .czdecomp import (CZDecomposition, DecompositionError, InadmissibleLambda, decompose,
                       verify_decomposition)
from .operators import (Kernel, empirical_l2_norm, truncated_transform, verify_kernel_conditions,
                        weak_quasinorm, weak_sweep)
from .harness import ExperimentConfig, GeneratorSpec, gen_density, gen_measure, run_weak11_experiment

__version__ = "0.1.0"

__all__ = [
    "USE_NUMBA", "Cube", "dilate", "sup_dist", "AtomicMeasure", "DensityVector", "GrowthProfile",
    "GrowthViolation", "ball_mass", "cube_mass", "l1_norm", "verify_growth", "DerivedConstants",
    "DoublingParams", "annulus_kernel_integral", "is_doubling", "besicovich_select", "annulus_cover",
    "CZDecomposition", "DecompositionError", "InadmissibleLambda", "decompose",
    "verify_decomposition", "Kernel", "empirical_l2_norm", "truncated_transform",
    "verify_kernel_conditions", "weak_quasinorm", "weak_sweep", "ExperimentConfig",
    "GeneratorSpec", "gen_density", "gen_measure", "run_weak11_experiment",
]
