"""Finite element model updating of 2-D frames.

Tunes per-element moduli of elasticity so predicted natural frequencies
match target frequencies, via particle swarm, simulated annealing, a
real-coded genetic algorithm, or a neural-surrogate pipeline, with COMAC
mode-shape cross-validation.
"""

from .beam_fe import (
    ElementSection,
    FrameElement,
    GeometryError,
    GlobalMatrices,
    Node,
    StructureModel,
    apply_parameters,
    assemble,
    default_h_structure,
    element_matrices,
    load_structure,
)
from .modal import (
    FrfSpec,
    ModalError,
    ModalSolution,
    average_comac,
    comac,
    frf_inertance,
    select_measured,
    solve_modes,
)
from .updating import (
    CostEvaluation,
    UpdatingProblem,
    clip_to_bounds,
    default_weights,
    evaluate_cost,
    frequency_error_table,
    load_targets,
    make_objective,
    relative_errors_pct,
    synthetic_targets,
)
from .optimizers import (
    GaConfig,
    ObjectiveError,
    OptimizerRun,
    PsoConfig,
    SaConfig,
    arithmetic_crossover,
    ga_minimize,
    metropolis_accept,
    nonuniform_mutate,
    normalized_geometric_select,
    pso_minimize,
    sa_minimize,
)
from .surrogate import (
    Mlp,
    SurrogateLoopConfig,
    SurrogateModel,
    SurrogateRun,
    TrainingSet,
    mlp_forward,
    mlp_gradient,
    mlp_train,
    sample_design,
    surrogate_minimize,
    surrogate_optimize,
)

__version__ = "0.1.0"
