"""Koopman-generator surrogates and set-oriented multi-objective optimization
for controlled agent-based models."""

from .control_models import (
    AffineGeneratorFamily,
    AugmentedModel,
    affinity_defect,
    assemble_family,
    fit_affine_family,
    interpolate,
    learn_affine_family,
    learn_augmented,
)
from .dictionary import Dictionary, monomials
from .gedmd import (
    GeneratorMatrix,
    SamplePoint,
    SdeModel,
    build_matrices,
    estimate_generator,
    fit_generator,
    identify,
    identify_diffusion,
    identify_drift,
    sigma_pointwise,
    sparsify,
)
from .moo import BoxTree, ParetoArchive, dominates, nondominated_mask, pareto_front, sampling_algorithm
from .surrogate import (
    ObjectiveSpec,
    ReducedTrajectory,
    evaluate_objectives,
    objective_evaluator,
    propagate_observable,
    simulate_reduced,
    trajectory_rmse,
)

__all__ = [
    "AffineGeneratorFamily",
    "AugmentedModel",
    "BoxTree",
    "Dictionary",
    "GeneratorMatrix",
    "ObjectiveSpec",
    "ParetoArchive",
    "ReducedTrajectory",
    "SamplePoint",
    "SdeModel",
    "affinity_defect",
    "assemble_family",
    "build_matrices",
    "dominates",
    "estimate_generator",
    "evaluate_objectives",
    "fit_affine_family",
    "fit_generator",
    "identify",
    "identify_diffusion",
    "identify_drift",
    "interpolate",
    "learn_affine_family",
    "learn_augmented",
    "monomials",
    "nondominated_mask",
    "objective_evaluator",
    "pareto_front",
    "propagate_observable",
    "sampling_algorithm",
    "sigma_pointwise",
    "simulate_reduced",
    "sparsify",
    "trajectory_rmse",
]
