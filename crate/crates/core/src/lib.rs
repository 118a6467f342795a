//! Sketched low cycle-rank approximation of third-order tensors.
//!
//! The pipeline rotates through the three factor groups of a cycle-rank
//! decomposition, replacing each exact regression with a sketched one
//! (CountSketch composed with a Gaussian transform), reduces the problem
//! to a poly(k, 1/eps)-sized core with CountSketch contractions, and
//! solves the reduced degree-6 objective with multi-start alternating
//! least squares. A classical CP-rank pipeline, brute-force oracles, and
//! an inside-outside demo over PCFGs ship alongside.

pub mod dense;
pub mod error;
pub mod factors;
pub mod pcfg;
pub mod pipeline;
pub mod regression;
pub mod rng;
pub mod sketch;
pub mod solver;
pub mod sparse;

pub use dense::{
    matrix_from_row_major, matrix_to_row_major, outer2, outer3, read_matrix_text, vec_tensor,
    write_matrix_text,
};
pub use dense::{DenseMatrix, DenseTensor};
pub use error::{CoreError, Result};
pub use factors::{
    cp_reconstruct, cp_residual_sq, cycle_reconstruct, pair_to_col, residual_sq, residual_sq_dense,
    train_reconstruct, tucker_reconstruct, CycleFactors, TrainFactors, TuckerFactors,
};
pub use pipeline::{
    approx_cp_rank, approx_cycle_rank, input_sparsity_reduce, ApproxReport, CoreProblem,
    CpFactors, PipelineConfig, RankForm,
};
pub use solver::{als_block_solve, objective_d, solve_core, CoreSolution, SolverOptions};
pub use sparse::{Entry, Mode, SparseMatrix, SparseTensor3};
