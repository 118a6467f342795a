//! The rotate-and-sketch pipeline.
//!
//! Per restart: draw composed sketches S_i over the n^2 flattening
//! columns, compute A_i S_i in nnz time, reduce every mode with fresh
//! CountSketches T_i (skipped when t_i >= n), hand the reduced core
//! (T_i A_i S_i, A(T1,T2,T3)) to the ALS solver, and lift the solution
//! back through U = A_1 S_1 X_1 (and cyclically). Restarts run in
//! parallel on split seed streams; the lowest residual wins, ties to the
//! lowest restart index.

pub mod zmat;

use crate::dense::{DenseMatrix, DenseTensor};
use crate::error::{CoreError, Result};
use crate::factors::{residual_sq, residual_sq_dense, CycleFactors};
use crate::regression::solve_ls;
use crate::rng::SeedSequence;
use crate::sketch::{
    contract_all_modes, sketch_columns, sketch_rows, ComposedOp, CountSketchOp, GaussianOp,
    SketchOp,
};
use crate::solver::{solve_core, CoreSolution, SolverOptions};
use crate::sparse::{Mode, SparseMatrix, SparseTensor3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Which reduced objective the core solver minimizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankForm {
    Cycle,
    Cp,
}

/// The reduced instance handed to the small solver: Y_i = T_i A_i S_i and
/// B = A(T1, T2, T3).
#[derive(Clone, Debug)]
pub struct CoreProblem {
    pub y1: DenseMatrix,
    pub y2: DenseMatrix,
    pub y3: DenseMatrix,
    pub b: DenseTensor,
    pub k: usize,
    pub form: RankForm,
}

impl CoreProblem {
    pub fn new(
        y1: DenseMatrix,
        y2: DenseMatrix,
        y3: DenseMatrix,
        b: DenseTensor,
        k: usize,
        form: RankForm,
    ) -> Result<Self> {
        let problem = CoreProblem { y1, y2, y3, b, k, form };
        problem.validate()?;
        Ok(problem)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(CoreError::InvalidArgument("core problem needs k >= 1".into()));
        }
        if self.b.order() != 3 {
            return Err(CoreError::DimensionMismatch("core tensor must be order 3".into()));
        }
        let shape = self.b.shape();
        for (idx, y) in [(0, &self.y1), (1, &self.y2), (2, &self.y3)] {
            if y.nrows() != shape[idx] {
                return Err(CoreError::DimensionMismatch(format!(
                    "Y{} has {} rows, core tensor extent is {}",
                    idx + 1,
                    y.nrows(),
                    shape[idx]
                )));
            }
        }
        Ok(())
    }

    /// Column count of each solver block: k^2 for cycle form, k for CP.
    pub fn block_cols(&self) -> usize {
        match self.form {
            RankForm::Cycle => self.k * self.k,
            RankForm::Cp => self.k,
        }
    }

    pub fn check_solution_shapes(
        &self,
        x1: &DenseMatrix,
        x2: &DenseMatrix,
        x3: &DenseMatrix,
    ) -> Result<()> {
        let cols = self.block_cols();
        for (idx, (x, y)) in [(1, (x1, &self.y1)), (2, (x2, &self.y2)), (3, (x3, &self.y3))] {
            if x.nrows() != y.ncols() || x.ncols() != cols {
                return Err(CoreError::DimensionMismatch(format!(
                    "X{} is {}x{}, expected {}x{}",
                    idx,
                    x.nrows(),
                    x.ncols(),
                    y.ncols(),
                    cols
                )));
            }
        }
        Ok(())
    }
}

/// All knobs of a pipeline run. Everything random flows from `seed`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub k: usize,
    pub eps: f64,
    /// Sketch-size constant: s_i = ceil(c_s * k^2 / eps) (cycle) or
    /// ceil(c_s * k / eps) (CP).
    pub c_s: f64,
    /// Reduction-size constant: t_i = ceil(c_t * k^4 / eps^2) (cycle) or
    /// ceil(c_t * k^2 / eps^2) (CP), capped at n where the stage becomes
    /// the identity.
    pub c_t: f64,
    pub restarts: usize,
    pub starts: usize,
    pub max_sweeps: usize,
    pub tol_rel: f64,
    pub init_scale: Option<f64>,
    pub seed: u64,
    /// A/B hook: draw plain Gaussian S_i instead of composed
    /// CountSketch+Gaussian (materializes m x n^2 operators; desk scale
    /// only).
    pub plain_gaussian: bool,
    /// Cross-validate the Gram-matrix residual against the dense path and
    /// record both in the report (materializes n^3; desk scale only).
    pub dense_check: bool,
}

impl PipelineConfig {
    pub fn new(k: usize, eps: f64, seed: u64) -> Self {
        PipelineConfig {
            k,
            eps,
            c_s: 10.0,
            c_t: 10.0,
            restarts: 1,
            starts: 10,
            max_sweeps: 200,
            tol_rel: 1e-10,
            init_scale: None,
            seed,
            plain_gaussian: false,
            dense_check: false,
        }
    }

    pub fn validate(&self, form: RankForm) -> Result<()> {
        if self.k == 0 {
            return Err(CoreError::InvalidArgument("k must be >= 1".into()));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(CoreError::InvalidArgument(format!(
                "eps = {} outside the valid range (0, 1)",
                self.eps
            )));
        }
        if self.restarts == 0 || self.starts == 0 || self.max_sweeps == 0 {
            return Err(CoreError::InvalidArgument(
                "restarts, starts and max_sweeps must be >= 1".into(),
            ));
        }
        if self.tol_rel <= 0.0 || self.tol_rel.is_nan() {
            return Err(CoreError::InvalidArgument("tol_rel must be > 0".into()));
        }
        if !(self.c_s > 0.0 && self.c_t > 0.0) {
            return Err(CoreError::InvalidArgument("c_s and c_t must be > 0".into()));
        }
        let s = self.sketch_dim(form);
        let rank_cols = match form {
            RankForm::Cycle => self.k * self.k,
            RankForm::Cp => self.k,
        };
        if s < rank_cols {
            return Err(CoreError::InvalidArgument(format!(
                "sketch size s = {} below rank dimension {}; raise c_s",
                s, rank_cols
            )));
        }
        if self.reduce_dim_raw(form) < s {
            return Err(CoreError::InvalidArgument(format!(
                "reduction size t = {} below sketch size s = {}; raise c_t",
                self.reduce_dim_raw(form),
                s
            )));
        }
        Ok(())
    }

    /// s_i before any capping.
    pub fn sketch_dim(&self, form: RankForm) -> usize {
        let d = match form {
            RankForm::Cycle => (self.k * self.k) as f64,
            RankForm::Cp => self.k as f64,
        };
        (self.c_s * d / self.eps).ceil() as usize
    }

    /// Intermediate CountSketch width of the composed S_i, capped at the
    /// n^2 source dimension.
    fn sketch_mid_dim(&self, form: RankForm, source: usize) -> usize {
        let d = match form {
            RankForm::Cycle => (self.k * self.k) as f64,
            RankForm::Cp => self.k as f64,
        };
        let raw = (self.c_s * (d * d + d / self.eps)).ceil() as usize;
        raw.max(self.sketch_dim(form)).min(source).max(1)
    }

    /// t_i before the cap at n.
    pub fn reduce_dim_raw(&self, form: RankForm) -> usize {
        let d = match form {
            RankForm::Cycle => (self.k * self.k) as f64,
            RankForm::Cp => self.k as f64,
        };
        (self.c_t * d * d / (self.eps * self.eps)).ceil() as usize
    }

    fn solver_options(&self, seed: u64) -> SolverOptions {
        SolverOptions {
            max_sweeps: self.max_sweeps,
            tol_rel: self.tol_rel,
            starts: self.starts,
            init_scale: self.init_scale,
            seed,
        }
    }
}

/// Output of [`input_sparsity_reduce`].
pub struct ReduceOutcome {
    pub v_hats: [DenseMatrix; 3],
    pub c: DenseTensor,
    pub ops: [CountSketchOp; 3],
    pub entry_visits: u64,
}

/// CountSketch reduction of the whole problem: V_hat_i = T_i V_i and
/// C = A(T1, T2, T3). Heights at or above n degenerate to the identity
/// (the reduction only helps below n), which doubles as the exactness
/// test hook. One accumulation per nonzero of A.
pub fn input_sparsity_reduce(
    a: &SparseTensor3,
    v1: &DenseMatrix,
    v2: &DenseMatrix,
    v3: &DenseMatrix,
    heights: [usize; 3],
    seeds: [u64; 3],
) -> Result<ReduceOutcome> {
    let n = a.n();
    for (idx, v) in [(0, v1), (1, v2), (2, v3)] {
        if v.nrows() != n {
            return Err(CoreError::DimensionMismatch(format!(
                "V{} has {} rows, tensor n is {}",
                idx + 1,
                v.nrows(),
                n
            )));
        }
    }
    let make_op = |height: usize, seed: u64| -> Result<CountSketchOp> {
        if height >= n {
            Ok(CountSketchOp::identity(n))
        } else {
            CountSketchOp::new(height, n, seed)
        }
    };
    let t1 = make_op(heights[0], seeds[0])?;
    let t2 = make_op(heights[1], seeds[1])?;
    let t3 = make_op(heights[2], seeds[2])?;
    let v_hats = [
        sketch_rows(&t1, v1)?,
        sketch_rows(&t2, v2)?,
        sketch_rows(&t3, v3)?,
    ];
    let (c, entry_visits) = contract_all_modes(a, &t1, &t2, &t3)?;
    Ok(ReduceOutcome { v_hats, c, ops: [t1, t2, t3], entry_visits })
}

/// Classical CP factors returned by the CP pipeline.
#[derive(Clone, Debug)]
pub struct CpFactors {
    pub n: usize,
    pub k: usize,
    pub u: DenseMatrix,
    pub v: DenseMatrix,
    pub w: DenseMatrix,
}

/// Per-restart record kept in the report.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RestartReport {
    pub restart: usize,
    pub residual_sq: f64,
    pub solver_objective: f64,
    pub solver_sweeps: usize,
    pub solver_start: usize,
    pub solver_converged: bool,
    pub nan_restarts: u32,
    pub entry_visits: u64,
    pub s_dim: usize,
    pub s_mid_dim: usize,
    pub t_dims: [usize; 3],
    pub reduced: bool,
    pub s_seeds: [u64; 3],
    pub t_seeds: [u64; 3],
    pub solver_seed: u64,
}

/// Wall-clock breakdown; excluded from serialized reports so that a rerun
/// from a manifest reproduces report bytes exactly. The CLI writes these
/// to a separate timings file.
#[derive(Clone, Debug, Default, Serialize)]
pub struct StageTimings {
    pub per_restart: Vec<RestartTiming>,
    pub total_ms: f64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct RestartTiming {
    pub sketch_ms: f64,
    pub reduce_ms: f64,
    pub solve_ms: f64,
    pub residual_ms: f64,
}

/// Cross-validation of the two residual paths.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DenseCheck {
    pub sparse_path: f64,
    pub dense_path: f64,
    pub rel_diff: f64,
}

/// Deterministic run summary (plus wall times, which stay out of the
/// serialized form).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ApproxReport {
    pub form: RankForm,
    pub n: usize,
    pub nnz: usize,
    pub residual_sq: f64,
    pub norm_a_sq: f64,
    /// residual_sq / |A|_F^2, or 0 for the zero tensor.
    pub relative_residual: f64,
    /// Known lower bound on OPT when an oracle supplied one; the pipeline
    /// itself never fills this.
    pub opt_lower_bound: Option<f64>,
    pub chosen_restart: usize,
    pub solver: String,
    pub entry_visits: u64,
    pub dense_check: Option<DenseCheck>,
    pub restarts: Vec<RestartReport>,
    pub config: PipelineConfig,
    #[serde(skip)]
    pub timings: StageTimings,
}

struct RestartRun {
    factors: [DenseMatrix; 3],
    residual_sq: f64,
    dense_check: Option<DenseCheck>,
    report: RestartReport,
    timing: RestartTiming,
}

fn run_restart(
    a: &SparseTensor3,
    flats: &[SparseMatrix; 3],
    cfg: &PipelineConfig,
    form: RankForm,
    restart: usize,
) -> Result<RestartRun> {
    let n = a.n();
    let mut seq = SeedSequence::new(cfg.seed, restart as u64);
    let s_seeds = [seq.next_seed(), seq.next_seed(), seq.next_seed()];
    let t_seeds = [seq.next_seed(), seq.next_seed(), seq.next_seed()];
    let solver_seed = seq.next_seed();

    let s_dim = cfg.sketch_dim(form);
    let s_mid = cfg.sketch_mid_dim(form, n * n);
    let t_raw = cfg.reduce_dim_raw(form);

    let sketch_start = Instant::now();
    let mut sketched = Vec::with_capacity(3);
    let mut entry_visits = 0u64;
    for (flat, &seed) in flats.iter().zip(&s_seeds) {
        let op = if cfg.plain_gaussian {
            SketchOp::Gaussian(GaussianOp::new(s_dim, n * n, seed)?)
        } else {
            SketchOp::Composed(ComposedOp::new(s_dim, s_mid, n * n, seed)?)
        };
        let (m, visits) = sketch_columns(flat, &op)?;
        entry_visits += visits;
        sketched.push(m);
    }
    let as3 = sketched.pop().expect("three sketches");
    let as2 = sketched.pop().expect("three sketches");
    let as1 = sketched.pop().expect("three sketches");
    let sketch_ms = sketch_start.elapsed().as_secs_f64() * 1e3;

    let reduce_start = Instant::now();
    let reduced = input_sparsity_reduce(a, &as1, &as2, &as3, [t_raw; 3], t_seeds)?;
    entry_visits += reduced.entry_visits;
    let t_dims = [
        reduced.ops[0].target_dim(),
        reduced.ops[1].target_dim(),
        reduced.ops[2].target_dim(),
    ];
    let was_reduced = t_raw < n;
    let [y1, y2, y3] = reduced.v_hats;
    let core = CoreProblem::new(y1, y2, y3, reduced.c, cfg.k, form)?;
    let reduce_ms = reduce_start.elapsed().as_secs_f64() * 1e3;

    let solve_start = Instant::now();
    let sol: CoreSolution = solve_core(&core, &cfg.solver_options(solver_seed))?;
    let solve_ms = solve_start.elapsed().as_secs_f64() * 1e3;

    let residual_start = Instant::now();
    let u = &as1 * &sol.x1;
    let v = &as2 * &sol.x2;
    let w = &as3 * &sol.x3;
    let (res, dense_check) = match form {
        RankForm::Cycle => {
            let f = CycleFactors::new(n, cfg.k, u.clone(), v.clone(), w.clone())?;
            // the Gram-path inner product walks A's nonzeros once
            entry_visits += a.nnz() as u64;
            let sparse_path = residual_sq(&f, a)?;
            let check = if cfg.dense_check {
                let dense_path = residual_sq_dense(&f, a)?;
                let rel_diff =
                    (sparse_path - dense_path).abs() / dense_path.abs().max(f64::MIN_POSITIVE);
                Some(DenseCheck { sparse_path, dense_path, rel_diff })
            } else {
                None
            };
            (sparse_path, check)
        }
        RankForm::Cp => {
            entry_visits += a.nnz() as u64;
            let sparse_path = crate::factors::cp_residual_sq(&u, &v, &w, a)?;
            let check = if cfg.dense_check {
                let rec = crate::factors::cp_reconstruct(&u, &v, &w)?;
                let dense_path = rec.sub(&a.to_dense())?.norm_sq();
                let rel_diff =
                    (sparse_path - dense_path).abs() / dense_path.abs().max(f64::MIN_POSITIVE);
                Some(DenseCheck { sparse_path, dense_path, rel_diff })
            } else {
                None
            };
            (sparse_path, check)
        }
    };
    let residual_ms = residual_start.elapsed().as_secs_f64() * 1e3;

    Ok(RestartRun {
        factors: [u, v, w],
        residual_sq: res,
        dense_check,
        report: RestartReport {
            restart,
            residual_sq: res,
            solver_objective: sol.objective,
            solver_sweeps: sol.sweeps_used,
            solver_start: sol.start_index,
            solver_converged: sol.converged,
            nan_restarts: sol.nan_restarts,
            entry_visits,
            s_dim,
            s_mid_dim: s_mid,
            t_dims,
            reduced: was_reduced,
            s_seeds,
            t_seeds,
            solver_seed,
        },
        timing: RestartTiming { sketch_ms, reduce_ms, solve_ms, residual_ms },
    })
}

fn run_pipeline(
    a: &SparseTensor3,
    cfg: &PipelineConfig,
    form: RankForm,
) -> Result<([DenseMatrix; 3], ApproxReport)> {
    cfg.validate(form)?;
    let total_start = Instant::now();
    let flats = [a.flatten(Mode::One), a.flatten(Mode::Two), a.flatten(Mode::Three)];

    let runs: Vec<RestartRun> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| run_restart(a, &flats, cfg, form, r))
        .collect::<Result<Vec<_>>>()?;

    let best = runs
        .iter()
        .enumerate()
        .min_by(|(ia, x), (ib, y)| {
            x.residual_sq.partial_cmp(&y.residual_sq).unwrap().then(ia.cmp(ib))
        })
        .map(|(i, _)| i)
        .expect("restarts >= 1");

    let norm_a_sq = a.norm_sq();
    let chosen = &runs[best];
    let report = ApproxReport {
        form,
        n: a.n(),
        nnz: a.nnz(),
        residual_sq: chosen.residual_sq,
        norm_a_sq,
        relative_residual: if norm_a_sq > 0.0 { chosen.residual_sq / norm_a_sq } else { 0.0 },
        opt_lower_bound: None,
        chosen_restart: best,
        solver: "als-multistart".to_string(),
        entry_visits: chosen.report.entry_visits,
        dense_check: chosen.dense_check.clone(),
        restarts: runs.iter().map(|r| r.report.clone()).collect(),
        config: cfg.clone(),
        timings: StageTimings {
            per_restart: runs.iter().map(|r| r.timing.clone()).collect(),
            total_ms: total_start.elapsed().as_secs_f64() * 1e3,
        },
    };
    let [u, v, w] = chosen.factors.clone();
    Ok(([u, v, w], report))
}

/// Sketched (1+eps)-style cycle-rank-k approximation of a sparse tensor.
pub fn approx_cycle_rank(
    a: &SparseTensor3,
    cfg: &PipelineConfig,
) -> Result<(CycleFactors, ApproxReport)> {
    let ([u, v, w], report) = run_pipeline(a, cfg, RankForm::Cycle)?;
    Ok((CycleFactors::new(a.n(), cfg.k, u, v, w)?, report))
}

/// Classical CP-rank-k pipeline sharing the same machinery.
pub fn approx_cp_rank(a: &SparseTensor3, cfg: &PipelineConfig) -> Result<(CpFactors, ApproxReport)> {
    let ([u, v, w], report) = run_pipeline(a, cfg, RankForm::Cp)?;
    Ok((CpFactors { n: a.n(), k: cfg.k, u, v, w }, report))
}

/// One exact rotate step (identity sketches): replaces the chosen mode's
/// factor with the exact minimizer of |X Z_m - A_m|_F. Densifies the
/// flattening; reference/validation use at desk scale.
pub fn rotate_exact_step(a: &SparseTensor3, f: &CycleFactors, mode: Mode) -> Result<CycleFactors> {
    if f.n != a.n() {
        return Err(CoreError::DimensionMismatch(format!(
            "factors n = {} vs tensor n = {}",
            f.n,
            a.n()
        )));
    }
    let k = f.k;
    let a_m = a.flatten(mode).to_dense();
    let z = match mode {
        Mode::One => zmat::build_z1(&f.v, &f.w, k)?,
        Mode::Two => zmat::build_z2(&f.u, &f.w, k)?,
        Mode::Three => zmat::build_z3(&f.u, &f.v, k)?,
    };
    // min_X |X Z - A_m| solved through the transposed system
    let sol = solve_ls(&z.transpose(), &a_m.transpose())?;
    let x = zmat::swap_pair_columns(&sol.x.transpose(), k)?;
    let mut out = f.clone();
    match mode {
        Mode::One => out.u = x,
        Mode::Two => out.v = x,
        Mode::Three => out.w = x,
    }
    Ok(out)
}
