"""Low-rank matrix completion with sparsity-structured missing entries.

Solvers: a reweighted gradient-projection baseline, its structured variant
with alternating sparsity steps on the missing entries, and exact desk-scale
solvers (per-column quadratic programs, penalized nuclear-norm completion).
Plus generators, sampling utilities, and a reproducible experiment harness.
"""

from .exact import (ExactIrlsConfig, NnmConfig, remark_check,
                    solve_structured_irls_exact, solve_structured_nnm,
                    structured_irls_iteration)
from .generators import (GeneratorSpec, NoiseSpec, add_noise, density,
                         gen_low_rank_sparse, normalize_spectral)
from .harness import (CellResult, GridSpec, SolverOptions, emit_csv,
                      emit_heatmap, relative_error, run_grid,
                      run_remark_suite, run_solver)
from .kernels import HAVE_COMPILED, backend_name
from .linalg import (SvdFactors, as_matrix, frobenius_norm, read_dense,
                     read_triplets, singular_values, spectral_norm,
                     truncated_svd, write_dense, write_triplets)
from .sampling import (ObservationMask, degrees_of_freedom_ratio,
                       gather_missing, max_rank_heuristic, project,
                       scatter_missing, structured_sample)
from .seeding import derive_seed, make_rng
from .sirls import (LowRankConfig, SolveResult, estimate_rank, export_trace,
                    iterate_distance, lowrank_step, schatten_surrogate,
                    solve_sirls, weight_matrix)
from .structured import (StructuredConfig, nonneg_threshold, solve_structured_sirls,
                         sparsity_step, sparsity_weights)

__version__ = "0.1.0"
