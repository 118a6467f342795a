//! Multi-start alternating least squares over the reduced core objective.
//!
//! The objective is a degree-6 polynomial in (X1, X2, X3) but exactly
//! quadratic in each block, so each block update is a two-sided linear
//! least-squares problem Y X Z ~ B_m solved in closed form with
//! pseudoinverses (minimal-norm). The objective therefore never increases
//! across block updates; multi-start plus best-of handles the nonconvexity
//! across blocks.

use crate::dense::{DenseMatrix, DenseTensor};
use crate::error::{CoreError, Result};
use crate::pipeline::{CoreProblem, RankForm};
use crate::regression::{default_svd_tol, pseudoinverse};
use crate::rng::{stream_rng, STREAM_SOLVER};
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use rayon::prelude::*;

/// Relative objective floor: treat anything below this times |B|^2 as
/// fully converged (relative-decrease stopping never fires near zero).
const OBJECTIVE_FLOOR_REL: f64 = 1e-16;

/// How many times a start is re-initialized after producing a non-finite
/// objective before it is written off.
const MAX_NAN_REINITS: u32 = 3;

#[derive(Clone, Debug)]
pub struct SolverOptions {
    pub max_sweeps: usize,
    /// Stop a start when the relative objective decrease falls below this.
    pub tol_rel: f64,
    pub starts: usize,
    /// Scale of the i.i.d. normal initialization; `None` derives it from
    /// |B| and the mean singular values of the Y_i.
    pub init_scale: Option<f64>,
    pub seed: u64,
}

impl SolverOptions {
    pub fn new(seed: u64) -> Self {
        SolverOptions { max_sweeps: 200, tol_rel: 1e-10, starts: 10, init_scale: None, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_sweeps == 0 || self.starts == 0 {
            return Err(CoreError::InvalidArgument(
                "solver needs max_sweeps >= 1 and starts >= 1".into(),
            ));
        }
        if self.tol_rel <= 0.0 || self.tol_rel.is_nan() {
            return Err(CoreError::InvalidArgument("tol_rel must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct CoreSolution {
    pub x1: DenseMatrix,
    pub x2: DenseMatrix,
    pub x3: DenseMatrix,
    pub objective: f64,
    pub sweeps_used: usize,
    pub start_index: usize,
    /// Starts that hit a non-finite objective and were re-seeded.
    pub nan_restarts: u32,
    /// False when every start ran out of sweeps without meeting tol_rel.
    pub converged: bool,
}

/// Rectangular cycle reconstruction at core scale:
/// out[a][b][c] = sum over (i1,i2,i3) of
/// P1[a, i1+k*i2] P2[b, i2+k*i3] P3[c, i3+k*i1].
pub fn cycle_reconstruct_rect(
    p1: &DenseMatrix,
    p2: &DenseMatrix,
    p3: &DenseMatrix,
    k: usize,
) -> DenseTensor {
    let (t1, t2, t3) = (p1.nrows(), p2.nrows(), p3.nrows());
    let mut out = DenseTensor::zeros(&[t1, t2, t3]);
    for i1 in 0..k {
        for i2 in 0..k {
            for i3 in 0..k {
                let c1 = i1 + k * i2;
                let c2 = i2 + k * i3;
                let c3 = i3 + k * i1;
                for a in 0..t1 {
                    let v1 = p1[(a, c1)];
                    if v1 == 0.0 {
                        continue;
                    }
                    for b in 0..t2 {
                        let v12 = v1 * p2[(b, c2)];
                        if v12 == 0.0 {
                            continue;
                        }
                        for c in 0..t3 {
                            out.add_at3(a, b, c, v12 * p3[(c, c3)]);
                        }
                    }
                }
            }
        }
    }
    out
}

fn reconstruct_core(core: &CoreProblem, x1: &DenseMatrix, x2: &DenseMatrix, x3: &DenseMatrix) -> DenseTensor {
    let p1 = &core.y1 * x1;
    let p2 = &core.y2 * x2;
    let p3 = &core.y3 * x3;
    match core.form {
        RankForm::Cycle => cycle_reconstruct_rect(&p1, &p2, &p3, core.k),
        RankForm::Cp => crate::factors::cp_reconstruct(&p1, &p2, &p3)
            .expect("core problem validated column counts"),
    }
}

/// Exact evaluation of the core objective
/// |reconstruction(Y1 X1, Y2 X2, Y3 X3) - B|_F^2.
pub fn objective_d(
    core: &CoreProblem,
    x1: &DenseMatrix,
    x2: &DenseMatrix,
    x3: &DenseMatrix,
) -> Result<f64> {
    core.check_solution_shapes(x1, x2, x3)?;
    let rec = reconstruct_core(core, x1, x2, x3);
    Ok(rec.sub(&core.b)?.norm_sq())
}

/// Flatten a dense order-3 tensor along one mode; columns are laid out
/// exactly like the corresponding Z matrix columns.
fn flatten_dense3(t: &DenseTensor, mode: usize) -> DenseMatrix {
    let s = t.shape();
    let (t1, t2, t3) = (s[0], s[1], s[2]);
    match mode {
        1 => {
            let mut m = DenseMatrix::zeros(t1, t2 * t3);
            for a in 0..t1 {
                for b in 0..t2 {
                    for c in 0..t3 {
                        m[(a, b * t3 + c)] = t.get3(a, b, c);
                    }
                }
            }
            m
        }
        2 => {
            let mut m = DenseMatrix::zeros(t2, t1 * t3);
            for a in 0..t1 {
                for b in 0..t2 {
                    for c in 0..t3 {
                        m[(b, a * t3 + c)] = t.get3(a, b, c);
                    }
                }
            }
            m
        }
        3 => {
            let mut m = DenseMatrix::zeros(t3, t1 * t2);
            for a in 0..t1 {
                for b in 0..t2 {
                    for c in 0..t3 {
                        m[(c, a * t2 + b)] = t.get3(a, b, c);
                    }
                }
            }
            m
        }
        _ => unreachable!("mode must be 1, 2 or 3"),
    }
}

/// Cached per-problem state shared by every start: pseudoinverses of the
/// Y_i and the three flattenings of B.
struct BlockSolveCache {
    y_pinv: [DenseMatrix; 3],
    b_flat: [DenseMatrix; 3],
}

impl BlockSolveCache {
    fn new(core: &CoreProblem) -> Self {
        let pinv = |y: &DenseMatrix| pseudoinverse(y, default_svd_tol(y));
        BlockSolveCache {
            y_pinv: [pinv(&core.y1), pinv(&core.y2), pinv(&core.y3)],
            b_flat: [
                flatten_dense3(&core.b, 1),
                flatten_dense3(&core.b, 2),
                flatten_dense3(&core.b, 3),
            ],
        }
    }
}

fn block_solve_cached(
    block: usize,
    core: &CoreProblem,
    cache: &BlockSolveCache,
    other_a: &DenseMatrix,
    other_b: &DenseMatrix,
) -> Result<DenseMatrix> {
    use crate::pipeline::zmat::{build_z1, build_z2, build_z3, build_z_cp, swap_pair_columns};
    let k = core.k;
    // products of the two fixed blocks
    let z = match core.form {
        RankForm::Cycle => match block {
            1 => build_z1(&(&core.y2 * other_a), &(&core.y3 * other_b), k)?,
            2 => build_z2(&(&core.y1 * other_a), &(&core.y3 * other_b), k)?,
            3 => build_z3(&(&core.y1 * other_a), &(&core.y2 * other_b), k)?,
            _ => return Err(CoreError::InvalidArgument("block must be 1, 2 or 3".into())),
        },
        RankForm::Cp => match block {
            1 => build_z_cp(&(&core.y2 * other_a), &(&core.y3 * other_b), k)?,
            2 => build_z_cp(&(&core.y1 * other_a), &(&core.y3 * other_b), k)?,
            3 => build_z_cp(&(&core.y1 * other_a), &(&core.y2 * other_b), k)?,
            _ => return Err(CoreError::InvalidArgument("block must be 1, 2 or 3".into())),
        },
    };
    // minimal-norm minimizer of |Y X Z - B_m|_F is pinv(Y) B_m pinv(Z)
    let z_pinv = pseudoinverse(&z, default_svd_tol(&z));
    let x = &cache.y_pinv[block - 1] * &cache.b_flat[block - 1] * z_pinv;
    match core.form {
        // Z rows are in Z-row order; factor columns are in pair order
        RankForm::Cycle => swap_pair_columns(&x, k),
        RankForm::Cp => Ok(x),
    }
}

/// Exact minimizer of the core objective over one block with the other
/// two held fixed. `block` selects X1, X2 or X3; `others` are the two
/// fixed blocks in ascending index order.
pub fn als_block_solve(
    block: usize,
    others: (&DenseMatrix, &DenseMatrix),
    core: &CoreProblem,
) -> Result<DenseMatrix> {
    let cache = BlockSolveCache::new(core);
    block_solve_cached(block, core, &cache, others.0, others.1)
}

struct StartOutcome {
    x1: DenseMatrix,
    x2: DenseMatrix,
    x3: DenseMatrix,
    objective: f64,
    sweeps: usize,
    nan_restarts: u32,
    converged: bool,
}

fn run_start(
    core: &CoreProblem,
    cache: &BlockSolveCache,
    opts: &SolverOptions,
    start_seed: u64,
    scales: &[f64; 3],
    b_norm_sq: f64,
) -> Result<StartOutcome> {
    let cols = core.block_cols();
    let mut nan_restarts = 0u32;
    let mut reinit = 0u32;
    loop {
        let mut rng = stream_rng(start_seed.wrapping_add(reinit as u64), STREAM_SOLVER);
        let mut draw = |rows: usize, scale: f64| {
            DenseMatrix::from_fn(rows, cols, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
        };
        let mut x1 = draw(core.y1.ncols(), scales[0]);
        let mut x2 = draw(core.y2.ncols(), scales[1]);
        let mut x3 = draw(core.y3.ncols(), scales[2]);

        let mut prev = objective_d(core, &x1, &x2, &x3)?;
        let mut sweeps = 0;
        let mut converged = false;
        let mut poisoned = false;
        while sweeps < opts.max_sweeps {
            x1 = block_solve_cached(1, core, cache, &x2, &x3)?;
            x2 = block_solve_cached(2, core, cache, &x1, &x3)?;
            x3 = block_solve_cached(3, core, cache, &x1, &x2)?;
            sweeps += 1;
            let obj = objective_d(core, &x1, &x2, &x3)?;
            if !obj.is_finite() {
                poisoned = true;
                break;
            }
            if obj <= OBJECTIVE_FLOOR_REL * b_norm_sq
                || (prev.is_finite() && prev - obj <= opts.tol_rel * prev.abs())
            {
                prev = obj;
                converged = true;
                break;
            }
            prev = obj;
        }
        if poisoned {
            nan_restarts += 1;
            reinit += 1;
            if reinit > MAX_NAN_REINITS {
                return Ok(StartOutcome {
                    x1: DenseMatrix::zeros(core.y1.ncols(), cols),
                    x2: DenseMatrix::zeros(core.y2.ncols(), cols),
                    x3: DenseMatrix::zeros(core.y3.ncols(), cols),
                    objective: b_norm_sq,
                    sweeps: 0,
                    nan_restarts,
                    converged: false,
                });
            }
            continue;
        }
        return Ok(StartOutcome { x1, x2, x3, objective: prev, sweeps, nan_restarts, converged });
    }
}

/// Best-of-multi-start ALS minimization of the core objective.
/// Deterministic in `opts.seed`: start seeds are drawn up front and the
/// winner is the lowest objective with ties broken by start index.
pub fn solve_core(core: &CoreProblem, opts: &SolverOptions) -> Result<CoreSolution> {
    opts.validate()?;
    core.validate()?;
    let cols = core.block_cols();
    let b_norm_sq = core.b.norm_sq();
    if b_norm_sq == 0.0 {
        return Ok(CoreSolution {
            x1: DenseMatrix::zeros(core.y1.ncols(), cols),
            x2: DenseMatrix::zeros(core.y2.ncols(), cols),
            x3: DenseMatrix::zeros(core.y3.ncols(), cols),
            objective: 0.0,
            sweeps_used: 0,
            start_index: 0,
            nan_restarts: 0,
            converged: true,
        });
    }

    let scales = match opts.init_scale {
        Some(s) => [s; 3],
        None => {
            let b_scale = b_norm_sq.sqrt().powf(1.0 / 3.0);
            let mean_sv = |y: &DenseMatrix| {
                let svd = y.clone().svd(false, false);
                let vals = &svd.singular_values;
                vals.iter().sum::<f64>() / vals.len().max(1) as f64
            };
            let scale_for = |y: &DenseMatrix| {
                (b_scale / (core.k as f64 * mean_sv(y))).clamp(1e-3, 1e3)
            };
            [scale_for(&core.y1), scale_for(&core.y2), scale_for(&core.y3)]
        }
    };

    let cache = BlockSolveCache::new(core);
    let mut seed_rng = stream_rng(opts.seed, STREAM_SOLVER);
    let start_seeds: Vec<u64> = (0..opts.starts).map(|_| seed_rng.next_u64()).collect();

    let outcomes: Vec<StartOutcome> = start_seeds
        .par_iter()
        .map(|&s| run_start(core, &cache, opts, s, &scales, b_norm_sq))
        .collect::<Result<Vec<_>>>()?;

    let nan_restarts: u32 = outcomes.iter().map(|o| o.nan_restarts).sum();
    let best = outcomes
        .iter()
        .enumerate()
        .min_by(|(ia, a), (ib, b)| {
            a.objective.partial_cmp(&b.objective).unwrap().then(ia.cmp(ib))
        })
        .map(|(i, _)| i)
        .expect("starts >= 1");
    let chosen = &outcomes[best];
    Ok(CoreSolution {
        x1: chosen.x1.clone(),
        x2: chosen.x2.clone(),
        x3: chosen.x3.clone(),
        objective: chosen.objective,
        sweeps_used: chosen.sweeps,
        start_index: best,
        nan_restarts,
        converged: chosen.converged,
    })
}
