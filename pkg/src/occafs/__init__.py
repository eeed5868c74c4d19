"""
Supervised feature selection by orthogonal canonical correlation analysis
with (2,1)-norm regularization, solved as an eigenvector-dependent
eigenvalue problem by SCF iteration or its LOCG-accelerated variant.
"""
from .baselines import pebfs_rank, pebfs_solve, ttest_rank
from .datasets import (
    Dataset,
    inject_noise_features,
    load_csv,
    load_dataset,
    load_libsvm,
    make_planted_dataset,
    save_csv,
)
from .exceptions import (
    InvalidInputError,
    InvariantViolationError,
    NumericalError,
    OCCAError,
)
from .locg import locg_solve
from .model import ProblemData, assemble_problem, evaluate, kkt_residual, objective
from .pipeline import (
    ExperimentResult,
    FeatureRanking,
    one_nn_evaluate,
    rank_features,
    run_experiment,
    select_top_q,
)
from .scf import SolverConfig, SolverTrace, scf_solve

__version__ = "0.1.0"
