"""Desk-scale laboratory for lossy-checkpointed iterative linear solvers."""

from .compressor import (
    CompressedBlock,
    CompressorConfig,
    QuantizerModel,
    bound_from_target_psnr,
    compress,
    decompress,
    error_identity_check,
    estimate_mse_general,
    estimate_psnr_from_bound,
    measured_psnr,
)
from .checkpoint import (
    CheckpointImage,
    CkptCost,
    RecCost,
    StorageTarget,
    checkpoint_lossy,
    checkpoint_traditional,
    recover,
)
from .perfmodel import (
    PerfModelParams,
    lossy_worthwhile,
    n_prime_bound,
    overhead_lossy,
    overhead_ratio_traditional,
    overhead_traditional,
    sweep_overhead_surface,
    young_interval,
    young_k,
)
from .simulate import FailureProcess, SimConfig, SimReport, TrialReport, measure_n_prime, run_ensemble, run_trial
from .solvers import SolveConfig, init, rebuild_from_solution, solve_to_convergence, step
from .sparse import (
    DiagonalPreconditioner,
    SparseMatrixCsr,
    generate_poisson1d,
    generate_poisson2d,
    jacobi_preconditioner,
    read_matrix_market,
    read_vector,
    spmv,
    write_vector,
)

__version__ = "0.1.0"
