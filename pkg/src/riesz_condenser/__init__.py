"""Discrete weighted minimum energy problems on signed plate families.

The library builds finite node sets on plates (spheres, surfaces of
revolution, point clouds), assembles signed Riesz kernel interaction
matrices, minimizes the resulting quadratic energies under mass, cap and
gauge constraints, and verifies candidate minimizers against first-order
variational conditions. Companion tools cover capacities, sweeping of
measures onto targets, sphere inversion, and reproduction experiments
with closed-form references.
"""
import os as _os

# Honor a thread budget before any BLAS pool spins up.
if "RIESZ_THREADS" in _os.environ:
    for _var in (
        "OPENBLAS_NUM_THREADS",
        "MKL_NUM_THREADS",
        "OMP_NUM_THREADS",
        "NUMEXPR_NUM_THREADS",
    ):
        _os.environ.setdefault(_var, _os.environ["RIESZ_THREADS"])

from .config import (
    ConfigError,
    RunConfig,
    load_config,
    parse_config,
    problem_from_config,
)
from .experiments import (
    EXPERIMENTS,
    ExperimentResult,
    run_experiment,
    sphere_capacity_reference,
)
from .geometry import (
    Condenser,
    CondenserGeometryError,
    Plate,
    PlateSpec,
    PointCloudFile,
    RevolutionSurface,
    Sphere,
    build_condenser,
    load_point_cloud,
    nearest_neighbor_spacing,
    sample_revolution_surface,
    sample_sphere,
)
from .kelvin import invert_point, invert_points, kelvin_transform
from .kernels import (
    COINCIDENCE_TOL,
    DiagonalPolicy,
    KernelDomainError,
    RieszKernel,
    kernel_matrix,
)
from .measures import (
    DiscreteMeasure,
    DiscreteVectorMeasure,
    EnergyDegeneracyError,
    GridField,
    PotentialField,
    ProblemSpec,
    ResultantMeasure,
    SignedDiscreteMeasure,
    condenser_matrix,
    energy,
    field_values,
    gauss_energy,
    mutual_energy,
    potential,
    resultant,
    semimetric,
    vector_energy,
    weighted_potentials,
)
from .solver import (
    BalayageResult,
    CapacityResult,
    DegenerateProblemError,
    InfeasibleProblemError,
    ShortCircuitError,
    SolveOptions,
    SolveReport,
    balayage,
    capacity,
    project_capped_simplex,
    solve_constrained,
    solve_unconstrained,
)
from .verify import (
    ContinuityReport,
    DualityReport,
    KKTReport,
    UniquenessReport,
    continuity_check,
    duality_check,
    kkt_check,
    uniqueness_check,
)

__version__ = "0.1.0"

__all__ = [
    "BalayageResult",
    "CapacityResult",
    "COINCIDENCE_TOL",
    "Condenser",
    "CondenserGeometryError",
    "ConfigError",
    "ContinuityReport",
    "DegenerateProblemError",
    "DiagonalPolicy",
    "DiscreteMeasure",
    "DiscreteVectorMeasure",
    "DualityReport",
    "EnergyDegeneracyError",
    "EXPERIMENTS",
    "ExperimentResult",
    "GridField",
    "InfeasibleProblemError",
    "KernelDomainError",
    "KKTReport",
    "Plate",
    "PlateSpec",
    "PointCloudFile",
    "PotentialField",
    "ProblemSpec",
    "ResultantMeasure",
    "RevolutionSurface",
    "RunConfig",
    "RieszKernel",
    "ShortCircuitError",
    "SignedDiscreteMeasure",
    "SolveOptions",
    "SolveReport",
    "Sphere",
    "UniquenessReport",
    "balayage",
    "build_condenser",
    "capacity",
    "condenser_matrix",
    "continuity_check",
    "duality_check",
    "energy",
    "field_values",
    "gauss_energy",
    "invert_point",
    "invert_points",
    "kelvin_transform",
    "kernel_matrix",
    "kkt_check",
    "load_config",
    "load_point_cloud",
    "mutual_energy",
    "nearest_neighbor_spacing",
    "parse_config",
    "potential",
    "problem_from_config",
    "project_capped_simplex",
    "resultant",
    "run_experiment",
    "sample_revolution_surface",
    "sample_sphere",
    "semimetric",
    "solve_constrained",
    "solve_unconstrained",
    "sphere_capacity_reference",
    "uniqueness_check",
    "vector_energy",
    "weighted_potentials",
]
