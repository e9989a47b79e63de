"""Query-based black-box optimization of discrete sequences through a
continuous latent space: random-direction gradient estimation, hinge-
constrained objectives over pluggable decode-and-score oracles, restartable
search, and landscape export."""

from .errors import (ConfigError, DomainError, EstimatorError, LatentOptError,
                     OracleError)
from .gradient import EstimatorConfig, estimate_gradient, sample_directions
from .landscape import (LandscapeGrid, evaluate_grid, principal_grid,
                        project_trajectory, random_grid)
from .metrics import (AlignmentParams, Fingerprint, alignment_similarity,
                      global_alignment_score, load_blosum62,
                      normalized_similarity, parse_substitution_matrix, tanimoto)
from .objective import (PROPERTY_CONSTRAINED, SIMILARITY_CONSTRAINED, Evaluation,
                        Objective, PropertyConstraint, ScoreTerm,
                        SimilarityConstraint, hinge)
from .oracle import OracleSuite, SubprocessOracle
from .seeding import derive_seed, rng_stream
from .solver import (AdamState, Candidate, LatentSequenceOptimizer, RunResult,
                     SolutionSet, adam_step, gd_step, run_single,
                     run_with_restarts, select_best, sweep)
from .testbed import (CodebookDecoder, LinearProblem, QuadraticProblem,
                      SmoothObjective, brute_force_best, frac_of_symbol,
                      make_codebook_suite, smooth_loss_and_grad, toy_fingerprint,
                      weighted_sum, window_count)

__version__ = "0.1.0"
