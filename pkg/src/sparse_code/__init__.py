"""Sparse coded distributed matrix multiplication: encode, decode, analyze, simulate."""
from .analysis import (DecodabilityReport, DegreeEvolution, decodability_check, degree_evolution,
                       estimate_recovery_threshold, perfect_matching_probability)
from .decoder import (DecodeStats, EchelonState, decode_polynomial, hybrid_decode, rank_insert,
                      rooting_combination)
from .degree import (DegreeDistribution, GeneratingEvaluation, mean_degree, moment, omega_eval,
                     robust_soliton, sample_support, wave_soliton)
from .encoder import (CodedTask, CoefficientMatrix, WeightSet, assign_uncoded, encode_polynomial,
                      encode_sparse, execute_task)
from .errors import *  # noqa: F401,F403
from .mmio import load_matrix_market, write_matrix_market
from .optimizer import OptimizerConfig, feasibility_report, optimize_distribution
from .sim import (ExperimentConfig, TrialResult, WorkerModel, aggregate, generate_random_sparse,
                  run_experiment, run_trial)
from .sparse import (BlockGrid, SparseMatrix, block_product, from_triplets, scaled_accumulate,
                     split_columns)

__version__ = "0.1.0"
