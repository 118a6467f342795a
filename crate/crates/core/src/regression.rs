//! Exact and sketched multiple-response least squares, plus the
//! tolerance-thresholded pseudoinverse they are built on.

use crate::dense::DenseMatrix;
use crate::error::{CoreError, Result};
use crate::sketch::SketchOp;

/// Default relative singular-value cutoff: machine epsilon times the
/// larger dimension (the sigma_max factor is applied inside).
pub fn default_svd_tol(m: &DenseMatrix) -> f64 {
    f64::EPSILON * m.nrows().max(m.ncols()) as f64
}

/// Moore-Penrose pseudoinverse by SVD. Singular values at or below
/// `tol * sigma_max` are treated as zero; the zero matrix maps to the
/// zero pseudoinverse.
pub fn pseudoinverse(m: &DenseMatrix, tol: f64) -> DenseMatrix {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("svd with u");
    let vt = svd.v_t.expect("svd with v_t");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cutoff = tol * smax;
    let r = svd.singular_values.len();
    let mut sinv = DenseMatrix::zeros(r, r);
    for i in 0..r {
        let s = svd.singular_values[i];
        if s > cutoff && s > 0.0 {
            sinv[(i, i)] = 1.0 / s;
        }
    }
    vt.transpose() * sinv * u.transpose()
}

/// Solution of a multiple-response least-squares problem.
#[derive(Clone, Debug)]
pub struct LsSolution {
    pub x: DenseMatrix,
    /// Unsketched residual |A X - B|_F^2.
    pub residual_sq: f64,
    /// Number of singular values kept by the solve.
    pub rank_used: usize,
}

/// Minimal-norm X minimizing |A X - B|_F.
pub fn solve_ls(a: &DenseMatrix, b: &DenseMatrix) -> Result<LsSolution> {
    if a.nrows() != b.nrows() {
        return Err(CoreError::DimensionMismatch(format!(
            "LS row counts {} vs {}",
            a.nrows(),
            b.nrows()
        )));
    }
    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref().expect("svd with u");
    let vt = svd.v_t.as_ref().expect("svd with v_t");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cutoff = default_svd_tol(a) * smax;
    let utb = u.transpose() * b;
    let mut scaled = DenseMatrix::zeros(vt.nrows(), b.ncols());
    let mut rank_used = 0;
    for i in 0..svd.singular_values.len() {
        let s = svd.singular_values[i];
        if s > cutoff && s > 0.0 {
            rank_used += 1;
            for c in 0..b.ncols() {
                scaled[(i, c)] = utb[(i, c)] / s;
            }
        }
    }
    let x = vt.transpose() * scaled;
    let residual_sq = (a * &x - b).norm_squared();
    Ok(LsSolution { x, residual_sq, rank_used })
}

/// Sketch-and-solve least squares: X minimizing |S B - S A X|_F, with the
/// residual reported on the unsketched system. Logs a warning when the
/// sketched design loses rank.
pub fn solve_sketched_ls(a: &DenseMatrix, b: &DenseMatrix, s: &SketchOp) -> Result<LsSolution> {
    if a.nrows() != b.nrows() {
        return Err(CoreError::DimensionMismatch(format!(
            "LS row counts {} vs {}",
            a.nrows(),
            b.nrows()
        )));
    }
    if s.source_dim() != a.nrows() {
        return Err(CoreError::DimensionMismatch(format!(
            "sketch source {} vs rows {}",
            s.source_dim(),
            a.nrows()
        )));
    }
    let sa = s.apply_left(a)?;
    let sb = s.apply_left(b)?;
    let sketched = solve_ls(&sa, &sb)?;
    if sketched.rank_used < a.ncols() {
        log::warn!(
            "sketched design rank {} below column count {}",
            sketched.rank_used,
            a.ncols()
        );
    }
    let residual_sq = (a * &sketched.x - b).norm_squared();
    Ok(LsSolution { x: sketched.x, residual_sq, rank_used: sketched.rank_used })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, STREAM_MISC};
    use crate::sketch::{ComposedOp, CountSketchOp};
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn random_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> DenseMatrix {
        DenseMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
    }

    #[test]
    fn pinv_identity() {
        let id = DenseMatrix::identity(4, 4);
        assert!((pseudoinverse(&id, 1e-12) - &id).norm() < 1e-12);
    }

    #[test]
    fn pinv_singular_diagonal() {
        let m = DenseMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0]);
        let p = pseudoinverse(&m, 1e-12);
        let want = DenseMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.0]);
        assert!((p - want).norm() < 1e-12);
    }

    #[test]
    fn pinv_zero_matrix_is_zero() {
        let m = DenseMatrix::zeros(3, 2);
        assert_eq!(pseudoinverse(&m, 1e-12).norm(), 0.0);
    }

    #[test]
    fn pinv_left_inverse_of_full_column_rank() {
        let mut rng = stream_rng(3, STREAM_MISC);
        let m = random_matrix(5, 3, &mut rng);
        let p = pseudoinverse(&m, 1e-12);
        assert!((p * &m - DenseMatrix::identity(3, 3)).norm() < 1e-9);
    }

    #[test]
    fn penrose_conditions_on_random_matrices() {
        let mut rng = stream_rng(5, STREAM_MISC);
        for &(r, c) in &[(10, 10), (50, 20), (20, 50), (50, 50)] {
            let m = random_matrix(r, c, &mut rng);
            let p = pseudoinverse(&m, default_svd_tol(&m));
            let scale = m.norm().max(1.0);
            assert!((&m * &p * &m - &m).norm() <= 1e-9 * scale);
            assert!((&p * &m * &p - &p).norm() <= 1e-9 * p.norm().max(1.0));
        }
        // rank-deficient case
        let half = random_matrix(12, 3, &mut rng);
        let m = &half * half.transpose(); // 12x12, rank 3
        let p = pseudoinverse(&m, default_svd_tol(&m));
        assert!((&m * &p * &m - &m).norm() <= 1e-8 * m.norm());
    }

    #[test]
    fn ls_orthonormal_design_reduces_to_projection() {
        let a = DenseMatrix::identity(6, 3);
        let mut rng = stream_rng(7, STREAM_MISC);
        let b = random_matrix(6, 2, &mut rng);
        let sol = solve_ls(&a, &b).unwrap();
        assert!((&sol.x - a.transpose() * &b).norm() < 1e-12);
    }

    #[test]
    fn ls_exact_when_b_in_column_span() {
        let mut rng = stream_rng(9, STREAM_MISC);
        let a = random_matrix(10, 4, &mut rng);
        let x0 = random_matrix(4, 3, &mut rng);
        let b = &a * &x0;
        let sol = solve_ls(&a, &b).unwrap();
        assert!(sol.residual_sq < 1e-18 * b.norm_squared().max(1.0));
    }

    #[test]
    fn ls_matches_pseudoinverse_route() {
        let mut rng = stream_rng(11, STREAM_MISC);
        let a = random_matrix(20, 3, &mut rng);
        let b = random_matrix(20, 2, &mut rng);
        let sol = solve_ls(&a, &b).unwrap();
        let via_pinv = pseudoinverse(&a, default_svd_tol(&a)) * &b;
        assert!((sol.x - via_pinv).norm() < 1e-9);
    }

    #[test]
    fn ls_rejects_row_mismatch() {
        let a = DenseMatrix::zeros(4, 2);
        let b = DenseMatrix::zeros(5, 1);
        assert!(solve_ls(&a, &b).is_err());
    }

    #[test]
    fn sketched_with_identity_matches_exact() {
        let mut rng = stream_rng(13, STREAM_MISC);
        let a = random_matrix(15, 3, &mut rng);
        let b = random_matrix(15, 2, &mut rng);
        let exact = solve_ls(&a, &b).unwrap();
        let s = SketchOp::CountSketch(CountSketchOp::identity(15));
        let sk = solve_sketched_ls(&a, &b, &s).unwrap();
        assert!((exact.x - sk.x).norm() < 1e-10);
        assert!((exact.residual_sq - sk.residual_sq).abs() < 1e-10);
    }

    #[test]
    fn sketched_recovers_representable_rhs_exactly() {
        let mut rng = stream_rng(17, STREAM_MISC);
        let a = random_matrix(60, 4, &mut rng);
        let x0 = random_matrix(4, 2, &mut rng);
        let b = &a * &x0;
        let s = SketchOp::Composed(ComposedOp::new(20, 40, 60, 23).unwrap());
        let sol = solve_sketched_ls(&a, &b, &s).unwrap();
        assert!(sol.residual_sq < 1e-16 * b.norm_squared());
    }

    #[test]
    fn sketched_residual_never_beats_exact_optimum() {
        let mut rng = stream_rng(19, STREAM_MISC);
        for seed in 0..20 {
            let a = random_matrix(80, 5, &mut rng);
            let b = random_matrix(80, 3, &mut rng);
            let exact = solve_ls(&a, &b).unwrap();
            let s = SketchOp::Composed(ComposedOp::for_regression(80, 5, 0.5, seed).unwrap());
            let sk = solve_sketched_ls(&a, &b, &s).unwrap();
            assert!(sk.residual_sq >= exact.residual_sq - 1e-9 * exact.residual_sq.max(1.0));
        }
    }

    #[test]
    fn sketched_regression_guarantee_statistical() {
        // smaller sibling of the acceptance criterion: n=200, k=5, d=3
        let mut rng = stream_rng(29, STREAM_MISC);
        let a = random_matrix(200, 5, &mut rng);
        let b = random_matrix(200, 3, &mut rng);
        let exact = solve_ls(&a, &b).unwrap();
        let mut ok = 0;
        for seed in 0..20 {
            let s = SketchOp::Composed(ComposedOp::for_regression(200, 5, 0.5, seed).unwrap());
            let sk = solve_sketched_ls(&a, &b, &s).unwrap();
            if sk.residual_sq <= 1.5 * exact.residual_sq {
                ok += 1;
            }
        }
        assert!(ok >= 17, "only {}/20 seeds within 1.5x", ok);
    }
}
