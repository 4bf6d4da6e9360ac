"""Multi-layer factorized graph matching with path following."""

from .affinity import (
    DummyMapping,
    KernelConfig,
    LayerAffinities,
    MatchingProblem,
    build_layer_affinities,
    integrate_layers,
    normalize_layer,
    pad_with_dummies,
    synthetic_edge_affinity,
)
from .baseline import brute_force_qap, build_single_layer, fgm_single_layer, spectral_match
from .bench import BenchResult, run_experiment
from .factorization import (
    FactorizedProblem,
    assemble_dense_supra,
    build_factorized_problem,
    factorize,
    split_pairwise,
)
from .graph import Assignment, MultiLayerGraph, ValidationError, build_incidences
from .io import load_problem, save_problem, save_result
from .objective import (
    ObjectiveContext,
    f_cav,
    f_con,
    f_gm,
    f_gm_dense,
    f_theta,
    f_vex,
    grad_f_theta,
)
from .solver import SolveReport, SolverConfig, frank_wolfe_max, hungarian, layer_confidence, solve_mlfgm
from .synthetic import SyntheticParams, accuracy, generate_synthetic_pair

__version__ = "0.1.0"
