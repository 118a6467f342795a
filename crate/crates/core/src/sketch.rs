//! Oblivious sketching operators and their input-sparsity application.
//!
//! Three operator families: CountSketch (one signed nonzero per source
//! column, applicable in nnz time), dense Gaussian transforms, and the
//! composed transform Gaussian * CountSketch used by the pipeline.
//! Operators are immutable after construction and regenerate bit-identically
//! from their JSON descriptor (type, dims, seed, sigma).
//!
//! Scale conventions: CountSketch sigma = 1, Gaussian sigma = 1/sqrt(m).
//!
//! Application functions return the number of sparse-entry visits they
//! performed (one multiply-accumulate per stored nonzero), which is what
//! the input-sparsity accounting tests assert on.

use crate::dense::{DenseMatrix, DenseTensor};
use crate::error::{CoreError, Result};
use crate::rng::{
    stream_rng, STREAM_COMPOSED_CS, STREAM_COMPOSED_GAUSS, STREAM_COUNTSKETCH, STREAM_GAUSSIAN,
    STREAM_MISC,
};
use crate::sparse::{SparseMatrix, SparseTensor3};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// CountSketch: bucket map h and sign vector d stored explicitly so the
/// induced m x n matrix has exactly one nonzero per source column.
#[derive(Clone, Debug, PartialEq)]
pub struct CountSketchOp {
    m: usize,
    n: usize,
    h: Vec<usize>,
    d: Vec<f64>,
    sigma: f64,
    seed: Option<u64>,
}

impl CountSketchOp {
    pub fn new(m: usize, n: usize, seed: u64) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(CoreError::InvalidArgument(format!(
                "CountSketch dimensions {}x{} must be positive",
                m, n
            )));
        }
        let mut rng = stream_rng(seed, STREAM_COUNTSKETCH);
        let mut h = Vec::with_capacity(n);
        let mut d = Vec::with_capacity(n);
        for _ in 0..n {
            h.push(rng.random_range(0..m));
            d.push(if rng.random::<bool>() { 1.0 } else { -1.0 });
        }
        Ok(CountSketchOp { m, n, h, d, sigma: 1.0, seed: Some(seed) })
    }

    /// The n x n identity expressed as a CountSketch (h(i) = i, +1 signs).
    pub fn identity(n: usize) -> Self {
        CountSketchOp { m: n, n, h: (0..n).collect(), d: vec![1.0; n], sigma: 1.0, seed: None }
    }

    pub fn is_identity(&self) -> bool {
        self.seed.is_none()
    }

    pub fn target_dim(&self) -> usize {
        self.m
    }

    pub fn source_dim(&self) -> usize {
        self.n
    }

    pub fn bucket(&self, i: usize) -> usize {
        self.h[i]
    }

    pub fn sign(&self, i: usize) -> f64 {
        self.d[i]
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Left application T*M in one pass over M's entries.
    pub fn apply_left(&self, mat: &DenseMatrix) -> Result<DenseMatrix> {
        if mat.nrows() != self.n {
            return Err(CoreError::DimensionMismatch(format!(
                "CountSketch source {} vs matrix rows {}",
                self.n,
                mat.nrows()
            )));
        }
        let mut out = DenseMatrix::zeros(self.m, mat.ncols());
        for r in 0..mat.nrows() {
            let target = self.h[r];
            let s = self.sigma * self.d[r];
            for c in 0..mat.ncols() {
                out[(target, c)] += s * mat[(r, c)];
            }
        }
        Ok(out)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.m, self.n);
        for i in 0..self.n {
            out[(self.h[i], i)] = self.sigma * self.d[i];
        }
        out
    }
}

/// Dense Gaussian transform sigma * G with G i.i.d. standard normal,
/// filled row-major from the seed's Gaussian stream.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianOp {
    m: usize,
    n: usize,
    seed: u64,
    sigma: f64,
    matrix: DenseMatrix,
}

impl GaussianOp {
    pub fn new(m: usize, n: usize, seed: u64) -> Result<Self> {
        let sigma = if m > 0 { 1.0 / (m as f64).sqrt() } else { 1.0 };
        Self::with_sigma(m, n, seed, sigma)
    }

    pub fn with_sigma(m: usize, n: usize, seed: u64, sigma: f64) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(CoreError::InvalidArgument(format!(
                "Gaussian dimensions {}x{} must be positive",
                m, n
            )));
        }
        let mut rng = stream_rng(seed, STREAM_GAUSSIAN);
        let mut matrix = DenseMatrix::zeros(m, n);
        for r in 0..m {
            for c in 0..n {
                matrix[(r, c)] = sigma * rng.sample::<f64, _>(StandardNormal);
            }
        }
        Ok(GaussianOp { m, n, seed, sigma, matrix })
    }

    pub fn target_dim(&self) -> usize {
        self.m
    }

    pub fn source_dim(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    pub fn apply_left(&self, mat: &DenseMatrix) -> Result<DenseMatrix> {
        if mat.nrows() != self.n {
            return Err(CoreError::DimensionMismatch(format!(
                "Gaussian source {} vs matrix rows {}",
                self.n,
                mat.nrows()
            )));
        }
        Ok(&self.matrix * mat)
    }
}

/// Composed transform S' = S * Pi (Gaussian after CountSketch). The
/// CountSketch stage keeps the application at nnz cost; the Gaussian
/// stage works on the already-reduced t-dimensional intermediate.
#[derive(Clone, Debug, PartialEq)]
pub struct ComposedOp {
    pub gaussian: GaussianOp,
    pub countsketch: CountSketchOp,
    seed: u64,
}

impl ComposedOp {
    /// `m` output rows, `t` intermediate CountSketch buckets, `n` source.
    pub fn new(m: usize, t: usize, n: usize, seed: u64) -> Result<Self> {
        if m == 0 || t == 0 || n == 0 {
            return Err(CoreError::InvalidArgument(format!(
                "composed dimensions {}x{}x{} must be positive",
                m, t, n
            )));
        }
        // dedicated streams so a plain CountSketch or Gaussian with the
        // same seed stays distinct
        let mut h = Vec::with_capacity(n);
        let mut d = Vec::with_capacity(n);
        let mut rng = stream_rng(seed, STREAM_COMPOSED_CS);
        for _ in 0..n {
            h.push(rng.random_range(0..t));
            d.push(if rng.random::<bool>() { 1.0 } else { -1.0 });
        }
        let cs = CountSketchOp { m: t, n, h, d, sigma: 1.0, seed: Some(seed) };

        let sigma = 1.0 / (m as f64).sqrt();
        let mut matrix = DenseMatrix::zeros(m, t);
        let mut grng = stream_rng(seed, STREAM_COMPOSED_GAUSS);
        for r in 0..m {
            for c in 0..t {
                matrix[(r, c)] = sigma * grng.sample::<f64, _>(StandardNormal);
            }
        }
        let gaussian = GaussianOp { m, n: t, seed, sigma, matrix };
        Ok(ComposedOp { gaussian, countsketch: cs, seed })
    }

    /// Dimensions sized for the sketched-regression guarantee on a
    /// d-column design: the Gaussian stage at O(d/eps) rows and the
    /// CountSketch stage at O(d^2 + d/eps) buckets, both capped at n.
    pub fn for_regression(n: usize, d: usize, eps: f64, seed: u64) -> Result<Self> {
        const C_GAUSS: f64 = 12.0;
        const C_CS: f64 = 10.0;
        let m = ((C_GAUSS * d as f64 / eps).ceil() as usize).clamp(1, n);
        let t = ((C_CS * (d as f64 * d as f64 + d as f64 / eps)).ceil() as usize).clamp(m, n);
        ComposedOp::new(m, t, n, seed)
    }

    /// Dimensions sized for the strict spectral subspace-embedding check,
    /// which needs a noticeably larger Gaussian stage than regression.
    pub fn for_subspace(n: usize, d: usize, eps: f64, seed: u64) -> Result<Self> {
        const C_GAUSS: f64 = 60.0;
        const C_CS: f64 = 24.0;
        let m = ((C_GAUSS * d as f64 / eps).ceil() as usize).clamp(1, n);
        let t = ((C_CS * (d as f64 * d as f64 + d as f64 / eps)).ceil() as usize).clamp(m, n);
        ComposedOp::new(m, t, n, seed)
    }

    pub fn target_dim(&self) -> usize {
        self.gaussian.m
    }

    pub fn source_dim(&self) -> usize {
        self.countsketch.n
    }

    pub fn apply_left(&self, mat: &DenseMatrix) -> Result<DenseMatrix> {
        self.gaussian.apply_left(&self.countsketch.apply_left(mat)?)
    }
}

/// Any of the three operator families. The explicit identity used as a
/// test hook and for skipped reduction stages is a CountSketch.
#[derive(Clone, Debug, PartialEq)]
pub enum SketchOp {
    CountSketch(CountSketchOp),
    Gaussian(GaussianOp),
    Composed(ComposedOp),
}

impl SketchOp {
    pub fn target_dim(&self) -> usize {
        match self {
            SketchOp::CountSketch(op) => op.target_dim(),
            SketchOp::Gaussian(op) => op.target_dim(),
            SketchOp::Composed(op) => op.target_dim(),
        }
    }

    pub fn source_dim(&self) -> usize {
        match self {
            SketchOp::CountSketch(op) => op.source_dim(),
            SketchOp::Gaussian(op) => op.source_dim(),
            SketchOp::Composed(op) => op.source_dim(),
        }
    }

    /// S*M for a dense M.
    pub fn apply_left(&self, mat: &DenseMatrix) -> Result<DenseMatrix> {
        match self {
            SketchOp::CountSketch(op) => op.apply_left(mat),
            SketchOp::Gaussian(op) => op.apply_left(mat),
            SketchOp::Composed(op) => op.apply_left(mat),
        }
    }

    /// Materialized operator matrix; test/oracle use only.
    pub fn to_dense(&self) -> DenseMatrix {
        match self {
            SketchOp::CountSketch(op) => op.to_dense(),
            SketchOp::Gaussian(op) => op.matrix().clone(),
            SketchOp::Composed(op) => op.gaussian.matrix() * op.countsketch.to_dense(),
        }
    }

    pub fn descriptor(&self) -> SketchDescriptor {
        match self {
            SketchOp::CountSketch(op) => match op.seed {
                Some(seed) => {
                    SketchDescriptor::CountSketch { m: op.m, n: op.n, seed, sigma: op.sigma }
                }
                None => SketchDescriptor::Identity { n: op.n },
            },
            SketchOp::Gaussian(op) => {
                SketchDescriptor::Gaussian { m: op.m, n: op.n, seed: op.seed, sigma: op.sigma }
            }
            SketchOp::Composed(op) => SketchDescriptor::Composed {
                m: op.gaussian.m,
                t: op.countsketch.m,
                n: op.countsketch.n,
                seed: op.seed,
            },
        }
    }
}

/// JSON-serializable description sufficient to regenerate an operator
/// bit-identically.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SketchDescriptor {
    Identity { n: usize },
    CountSketch { m: usize, n: usize, seed: u64, sigma: f64 },
    Gaussian { m: usize, n: usize, seed: u64, sigma: f64 },
    Composed { m: usize, t: usize, n: usize, seed: u64 },
}

impl SketchDescriptor {
    pub fn build(&self) -> Result<SketchOp> {
        match *self {
            SketchDescriptor::Identity { n } => {
                Ok(SketchOp::CountSketch(CountSketchOp::identity(n)))
            }
            SketchDescriptor::CountSketch { m, n, seed, sigma } => {
                let mut op = CountSketchOp::new(m, n, seed)?;
                op.sigma = sigma;
                Ok(SketchOp::CountSketch(op))
            }
            SketchDescriptor::Gaussian { m, n, seed, sigma } => {
                Ok(SketchOp::Gaussian(GaussianOp::with_sigma(m, n, seed, sigma)?))
            }
            SketchDescriptor::Composed { m, t, n, seed } => {
                Ok(SketchOp::Composed(ComposedOp::new(m, t, n, seed)?))
            }
        }
    }
}

/// A_flat * S^T for a sparse flattening, the pipeline's `A_i S_i` step.
/// One visit per stored nonzero; the composed operator's Gaussian stage
/// then runs on the t-dimensional intermediate.
pub fn sketch_columns(aflat: &SparseMatrix, s: &SketchOp) -> Result<(DenseMatrix, u64)> {
    if s.source_dim() != aflat.cols {
        return Err(CoreError::DimensionMismatch(format!(
            "sketch source {} vs flattening columns {}",
            s.source_dim(),
            aflat.cols
        )));
    }
    match s {
        SketchOp::CountSketch(cs) => {
            let mut out = DenseMatrix::zeros(aflat.rows, cs.target_dim());
            for &(r, c, v) in &aflat.entries {
                out[(r, cs.bucket(c))] += cs.sigma() * cs.sign(c) * v;
            }
            Ok((out, aflat.nnz() as u64))
        }
        SketchOp::Gaussian(g) => {
            // one visit per entry; each visit scatters into all m outputs
            let mut out = DenseMatrix::zeros(aflat.rows, g.target_dim());
            for &(r, c, v) in &aflat.entries {
                for q in 0..g.target_dim() {
                    out[(r, q)] += v * g.matrix()[(q, c)];
                }
            }
            Ok((out, aflat.nnz() as u64))
        }
        SketchOp::Composed(comp) => {
            let cs = &comp.countsketch;
            let mut mid = DenseMatrix::zeros(aflat.rows, cs.target_dim());
            for &(r, c, v) in &aflat.entries {
                mid[(r, cs.bucket(c))] += cs.sigma() * cs.sign(c) * v;
            }
            Ok((mid * comp.gaussian.matrix().transpose(), aflat.nnz() as u64))
        }
    }
}

/// T*M for a CountSketch T, the pipeline's `T_i (A_i S_i)` step.
pub fn sketch_rows(t: &CountSketchOp, mat: &DenseMatrix) -> Result<DenseMatrix> {
    t.apply_left(mat)
}

/// A(T1, T2, T3): CountSketch contraction of every mode, one accumulation
/// per stored nonzero of the tensor.
pub fn contract_all_modes(
    a: &SparseTensor3,
    t1: &CountSketchOp,
    t2: &CountSketchOp,
    t3: &CountSketchOp,
) -> Result<(DenseTensor, u64)> {
    for (name, t) in [("T1", t1), ("T2", t2), ("T3", t3)] {
        if t.source_dim() != a.n() {
            return Err(CoreError::DimensionMismatch(format!(
                "{} source {} vs tensor n {}",
                name,
                t.source_dim(),
                a.n()
            )));
        }
    }
    let mut out = DenseTensor::zeros(&[t1.target_dim(), t2.target_dim(), t3.target_dim()]);
    let scale = t1.sigma() * t2.sigma() * t3.sigma();
    for e in a.entries() {
        let sign = t1.sign(e.i) * t2.sign(e.j) * t3.sign(e.l);
        out.add_at3(t1.bucket(e.i), t2.bucket(e.j), t3.bucket(e.l), scale * sign * e.value);
    }
    Ok((out, a.nnz() as u64))
}

/// Monte-Carlo subspace-embedding failure rate: the fraction of random
/// unit x with | |SAx|^2 - |Ax|^2 | > eps * |Ax|^2.
pub fn se_failure_rate(
    s: &SketchOp,
    a: &DenseMatrix,
    eps: f64,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    if trials == 0 {
        return Err(CoreError::InvalidArgument("trials must be >= 1".into()));
    }
    if a.iter().all(|&v| v == 0.0) {
        return Err(CoreError::InvalidArgument("SE check needs a nonzero matrix".into()));
    }
    let sa = s.apply_left(a)?;
    let mut rng = stream_rng(seed, STREAM_MISC);
    let mut failures = 0usize;
    for _ in 0..trials {
        let mut x = DenseMatrix::zeros(a.ncols(), 1);
        for i in 0..a.ncols() {
            x[(i, 0)] = rng.sample(StandardNormal);
        }
        let nx = x.norm();
        if nx == 0.0 {
            continue;
        }
        x /= nx;
        let ax = (a * &x).norm_squared();
        let sax = (&sa * &x).norm_squared();
        if (sax - ax).abs() > eps * ax {
            failures += 1;
        }
    }
    Ok(failures as f64 / trials as f64)
}

/// Exact spectral form of the SE check: the largest deviation of a squared
/// singular value of S*Q from 1, where Q is an orthonormal basis of
/// col(A). The operator is an eps-embedding of col(A) iff this is <= eps.
pub fn se_spectral_deviation(s: &SketchOp, a: &DenseMatrix) -> Result<f64> {
    let basis = orthonormal_basis(a)?;
    let sq = s.apply_left(&basis)?;
    let svd = sq.svd(false, false);
    let mut worst: f64 = 0.0;
    for sv in svd.singular_values.iter() {
        worst = worst.max((sv * sv - 1.0).abs());
    }
    Ok(worst)
}

fn orthonormal_basis(a: &DenseMatrix) -> Result<DenseMatrix> {
    let svd = a.clone().svd(true, false);
    let u = svd.u.expect("svd with u requested");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return Err(CoreError::InvalidArgument("matrix has rank 0".into()));
    }
    let tol = f64::EPSILON * a.nrows().max(a.ncols()) as f64 * smax;
    let cols: Vec<usize> =
        (0..svd.singular_values.len()).filter(|&i| svd.singular_values[i] > tol).collect();
    Ok(u.select_columns(&cols))
}

/// Frobenius approximate-matrix-product error of S on (A, B).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FampError {
    /// |A^T B - A^T S^T S B|_F / (|A|_F |B|_F); 0 when degenerate.
    pub error: f64,
    /// true when |A|_F * |B|_F = 0 and the 0/0 convention applied
    pub degenerate: bool,
}

pub fn famp_error(s: &SketchOp, a: &DenseMatrix, b: &DenseMatrix) -> Result<FampError> {
    if a.nrows() != b.nrows() {
        return Err(CoreError::DimensionMismatch(format!(
            "FAMP row counts {} vs {}",
            a.nrows(),
            b.nrows()
        )));
    }
    let denom = a.norm() * b.norm();
    if denom == 0.0 {
        return Ok(FampError { error: 0.0, degenerate: true });
    }
    let sa = s.apply_left(a)?;
    let sb = s.apply_left(b)?;
    let exact = a.transpose() * b;
    let sketched = sa.transpose() * sb;
    Ok(FampError { error: (exact - sketched).norm() / denom, degenerate: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::Entry;

    fn random_sparse(n: usize, nnz: usize, seed: u64) -> SparseTensor3 {
        let mut rng = stream_rng(seed, STREAM_MISC);
        let entries = (0..nnz)
            .map(|_| Entry {
                i: rng.random_range(0..n),
                j: rng.random_range(0..n),
                l: rng.random_range(0..n),
                value: rng.sample(StandardNormal),
            })
            .collect();
        SparseTensor3::new(n, entries).unwrap()
    }

    #[test]
    fn single_bucket_sums_signed_entries() {
        let op = CountSketchOp::new(1, 6, 3).unwrap();
        let m = DenseMatrix::from_row_slice(6, 1, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let out = op.apply_left(&m).unwrap();
        let expect: f64 = (0..6).map(|i| op.sign(i) * (i as f64 + 1.0)).sum();
        assert!((out[(0, 0)] - expect).abs() < 1e-12);
    }

    #[test]
    fn same_seed_same_operator() {
        let a = CountSketchOp::new(7, 40, 99).unwrap();
        let b = CountSketchOp::new(7, 40, 99).unwrap();
        assert_eq!(a, b);
        let g1 = GaussianOp::new(5, 9, 4).unwrap();
        let g2 = GaussianOp::new(5, 9, 4).unwrap();
        assert_eq!(g1, g2);
    }

    #[test]
    fn bucket_histogram_is_uniform_chi_squared() {
        // chi^2 over 10^4 operator draws, df = 3, alpha = 0.01 -> 11.345
        let (m, n) = (4, 100);
        let mut counts = [0u64; 4];
        for seed in 0..10_000u64 {
            let op = CountSketchOp::new(m, n, seed).unwrap();
            for i in 0..n {
                counts[op.bucket(i)] += 1;
            }
        }
        let total: u64 = counts.iter().sum();
        let expected = total as f64 / m as f64;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        assert!(chi2 < 11.345, "chi2 = {} counts = {:?}", chi2, counts);
    }

    #[test]
    fn countsketch_matrix_has_one_nonzero_per_column() {
        let op = CountSketchOp::new(5, 30, 7).unwrap();
        let dense = op.to_dense();
        for c in 0..30 {
            let nonzeros = (0..5).filter(|&r| dense[(r, c)] != 0.0).count();
            assert_eq!(nonzeros, 1);
            assert!((0..5).all(|r| dense[(r, c)].abs() == 1.0 || dense[(r, c)] == 0.0));
        }
    }

    #[test]
    fn identity_sketch_columns_is_noop() {
        let a = random_sparse(4, 12, 5);
        let flat = a.flatten(crate::sparse::Mode::One);
        let s = SketchOp::CountSketch(CountSketchOp::identity(16));
        let (out, visits) = sketch_columns(&flat, &s).unwrap();
        assert_eq!(visits, flat.nnz() as u64);
        let dense = flat.to_dense();
        assert!((out - dense).norm() < 1e-12);
    }

    #[test]
    fn sketch_columns_matches_dense_product_for_all_ops() {
        let a = random_sparse(6, 30, 8);
        let flat = a.flatten(crate::sparse::Mode::Two);
        let ops = [
            SketchOp::CountSketch(CountSketchOp::new(9, 36, 17).unwrap()),
            SketchOp::Gaussian(GaussianOp::new(9, 36, 17).unwrap()),
            SketchOp::Composed(ComposedOp::new(7, 15, 36, 17).unwrap()),
        ];
        for s in &ops {
            let (got, visits) = sketch_columns(&flat, s).unwrap();
            assert_eq!(visits, flat.nnz() as u64);
            let want = flat.to_dense() * s.to_dense().transpose();
            let denom = want.norm().max(1.0);
            assert!((got - want).norm() <= 1e-10 * denom);
        }
    }

    #[test]
    fn sketch_columns_zero_tensor_gives_zero() {
        let a = SparseTensor3::zero(4);
        let flat = a.flatten(crate::sparse::Mode::One);
        let s = SketchOp::Composed(ComposedOp::new(3, 5, 16, 2).unwrap());
        let (out, visits) = sketch_columns(&flat, &s).unwrap();
        assert_eq!(visits, 0);
        assert_eq!(out.norm(), 0.0);
    }

    #[test]
    fn sketch_rows_identity_and_oracle() {
        let mut rng = stream_rng(10, STREAM_MISC);
        let m = DenseMatrix::from_fn(8, 3, |_, _| rng.sample(StandardNormal));
        let id = CountSketchOp::identity(8);
        assert!((sketch_rows(&id, &m).unwrap() - &m).norm() < 1e-15);

        let t = CountSketchOp::new(4, 8, 77).unwrap();
        let got = sketch_rows(&t, &m).unwrap();
        let want = t.to_dense() * &m;
        assert!((got - want).norm() < 1e-10);

        let z = DenseMatrix::zeros(8, 3);
        assert_eq!(sketch_rows(&t, &z).unwrap().norm(), 0.0);
    }

    #[test]
    fn contract_identity_densifies() {
        let a = random_sparse(5, 20, 13);
        let id = CountSketchOp::identity(5);
        let (b, visits) = contract_all_modes(&a, &id, &id, &id).unwrap();
        assert_eq!(visits, a.nnz() as u64);
        let dense = a.to_dense();
        for (x, y) in b.data().iter().zip(dense.data()) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn contract_single_entry_lands_in_hashed_cell() {
        let a = SparseTensor3::new(6, vec![Entry { i: 2, j: 4, l: 1, value: 3.0 }]).unwrap();
        let t1 = CountSketchOp::new(3, 6, 1).unwrap();
        let t2 = CountSketchOp::new(4, 6, 2).unwrap();
        let t3 = CountSketchOp::new(2, 6, 3).unwrap();
        let (b, _) = contract_all_modes(&a, &t1, &t2, &t3).unwrap();
        let want = t1.sign(2) * t2.sign(4) * t3.sign(1) * 3.0;
        assert_eq!(b.get3(t1.bucket(2), t2.bucket(4), t3.bucket(1)), want);
        assert_eq!(b.norm_sq(), 9.0);
    }

    #[test]
    fn contract_matches_mode_by_mode_dense_oracle() {
        let a = random_sparse(6, 25, 19);
        let t1 = CountSketchOp::new(3, 6, 41).unwrap();
        let t2 = CountSketchOp::new(5, 6, 42).unwrap();
        let t3 = CountSketchOp::new(4, 6, 43).unwrap();
        let (got, _) = contract_all_modes(&a, &t1, &t2, &t3).unwrap();

        // oracle: contract one mode at a time against dense operator matrices
        let dense = a.to_dense();
        let (m1, m2, m3) = (t1.to_dense(), t2.to_dense(), t3.to_dense());
        let mut want = DenseTensor::zeros(&[3, 5, 4]);
        for a_ in 0..3 {
            for b_ in 0..5 {
                for c_ in 0..4 {
                    let mut acc = 0.0;
                    for i in 0..6 {
                        for j in 0..6 {
                            for l in 0..6 {
                                acc += m1[(a_, i)] * m2[(b_, j)] * m3[(c_, l)] * dense.get3(i, j, l);
                            }
                        }
                    }
                    want.set3(a_, b_, c_, acc);
                }
            }
        }
        for (x, y) in got.data().iter().zip(want.data()) {
            assert!((x - y).abs() <= 1e-10 * y.abs().max(1.0));
        }
    }

    #[test]
    fn se_identity_never_fails() {
        let mut rng = stream_rng(23, STREAM_MISC);
        let a = DenseMatrix::from_fn(12, 3, |_, _| rng.sample(StandardNormal));
        let s = SketchOp::CountSketch(CountSketchOp::identity(12));
        assert_eq!(se_failure_rate(&s, &a, 1e-9, 200, 0).unwrap(), 0.0);
        assert!(se_spectral_deviation(&s, &a).unwrap() < 1e-12);
    }

    #[test]
    fn se_loose_eps_never_fails_in_practice() {
        let mut rng = stream_rng(29, STREAM_MISC);
        let a = DenseMatrix::from_fn(100, 4, |_, _| rng.sample(StandardNormal));
        for seed in 0..10 {
            let s = SketchOp::Composed(ComposedOp::new(40, 80, 100, seed).unwrap());
            assert_eq!(se_failure_rate(&s, &a, 2.0, 100, seed).unwrap(), 0.0);
        }
    }

    #[test]
    fn se_rejects_rank_zero() {
        let a = DenseMatrix::zeros(10, 2);
        let s = SketchOp::CountSketch(CountSketchOp::identity(10));
        assert!(se_failure_rate(&s, &a, 0.5, 10, 0).is_err());
    }

    #[test]
    fn famp_identity_is_exact_and_zero_is_degenerate() {
        let mut rng = stream_rng(31, STREAM_MISC);
        let a = DenseMatrix::from_fn(10, 2, |_, _| rng.sample(StandardNormal));
        let b = DenseMatrix::from_fn(10, 3, |_, _| rng.sample(StandardNormal));
        let s = SketchOp::CountSketch(CountSketchOp::identity(10));
        let r = famp_error(&s, &a, &b).unwrap();
        assert!(!r.degenerate && r.error < 1e-12);

        let z = DenseMatrix::zeros(10, 3);
        let r = famp_error(&s, &a, &z).unwrap();
        assert!(r.degenerate && r.error == 0.0);
    }

    #[test]
    fn famp_gaussian_concentrates_on_unit_column() {
        // |x|=1, m=400: error = | |Sx|^2 - 1 | has std ~ sqrt(2/m) = 0.07,
        // so < 0.15 should hold for clearly more than 95% of seeds
        let mut a = DenseMatrix::zeros(50, 1);
        a[(7, 0)] = 1.0;
        let mut ok = 0;
        for seed in 0..1000 {
            let s = SketchOp::Gaussian(GaussianOp::new(400, 50, seed).unwrap());
            if famp_error(&s, &a, &a).unwrap().error < 0.15 {
                ok += 1;
            }
        }
        assert!(ok >= 950, "only {}/1000 seeds concentrated", ok);
    }

    #[test]
    fn descriptor_round_trip_regenerates_identical_operator() {
        let ops = [
            SketchOp::CountSketch(CountSketchOp::new(6, 20, 5).unwrap()),
            SketchOp::CountSketch(CountSketchOp::identity(9)),
            SketchOp::Gaussian(GaussianOp::new(4, 11, 6).unwrap()),
            SketchOp::Composed(ComposedOp::new(3, 7, 13, 8).unwrap()),
        ];
        for op in &ops {
            let json = serde_json::to_string(&op.descriptor()).unwrap();
            let back: SketchDescriptor = serde_json::from_str(&json).unwrap();
            assert_eq!(&back.build().unwrap(), op);
        }
    }

    #[test]
    fn composed_draws_differ_from_plain_countsketch_same_seed() {
        let plain = CountSketchOp::new(7, 30, 5).unwrap();
        let composed = ComposedOp::new(4, 7, 30, 5).unwrap();
        assert_ne!(plain.h, composed.countsketch.h);
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(CountSketchOp::new(0, 5, 1).is_err());
        assert!(GaussianOp::new(3, 0, 1).is_err());
    }
}
