//! Rank-structured factor triples and their reconstructions.
//!
//! All column pairings are 0-based: the pair (a, b) with 0 <= a, b < k
//! lives in column `a + k*b` (see [`pair_to_col`]).

use crate::dense::{DenseMatrix, DenseTensor};
use crate::error::{CoreError, Result};
use crate::sparse::SparseTensor3;

/// Column index of the factor pair (a, b) in an n x k^2 factor matrix.
pub fn pair_to_col(a: usize, b: usize, k: usize) -> usize {
    debug_assert!(a < k && b < k);
    a + k * b
}

/// Factors (U, V, W) of a cycle-rank-k tensor: three n x k^2 matrices
/// whose columns pair up cyclically, (a,b) -> (b,c) -> (c,a).
#[derive(Clone, Debug, PartialEq)]
pub struct CycleFactors {
    pub n: usize,
    pub k: usize,
    pub u: DenseMatrix,
    pub v: DenseMatrix,
    pub w: DenseMatrix,
}

impl CycleFactors {
    pub fn new(n: usize, k: usize, u: DenseMatrix, v: DenseMatrix, w: DenseMatrix) -> Result<Self> {
        for (name, m) in [("U", &u), ("V", &v), ("W", &w)] {
            if m.nrows() != n || m.ncols() != k * k {
                return Err(CoreError::DimensionMismatch(format!(
                    "{} is {}x{}, expected {}x{}",
                    name,
                    m.nrows(),
                    m.ncols(),
                    n,
                    k * k
                )));
            }
        }
        Ok(CycleFactors { n, k, u, v, w })
    }

    pub fn zero(n: usize, k: usize) -> Self {
        CycleFactors {
            n,
            k,
            u: DenseMatrix::zeros(n, k * k),
            v: DenseMatrix::zeros(n, k * k),
            w: DenseMatrix::zeros(n, k * k),
        }
    }
}

/// Dense reconstruction of cycle factors:
/// out[i][j][l] = sum over (a,b,c) of U[i,a+kb] V[j,b+kc] W[l,c+ka].
pub fn cycle_reconstruct(f: &CycleFactors) -> DenseTensor {
    let (n, k) = (f.n, f.k);
    let mut t = DenseTensor::zeros(&[n, n, n]);
    for a in 0..k {
        for b in 0..k {
            for c in 0..k {
                let cu = pair_to_col(a, b, k);
                let cv = pair_to_col(b, c, k);
                let cw = pair_to_col(c, a, k);
                for i in 0..n {
                    let ui = f.u[(i, cu)];
                    if ui == 0.0 {
                        continue;
                    }
                    for j in 0..n {
                        let uv = ui * f.v[(j, cv)];
                        if uv == 0.0 {
                            continue;
                        }
                        for l in 0..n {
                            t.add_at3(i, j, l, uv * f.w[(l, cw)]);
                        }
                    }
                }
            }
        }
    }
    t
}

/// Classical CP reconstruction: sum over columns i of the rank-one tensor
/// U_i x V_i x W_i.
pub fn cp_reconstruct(u: &DenseMatrix, v: &DenseMatrix, w: &DenseMatrix) -> Result<DenseTensor> {
    if u.ncols() != v.ncols() || v.ncols() != w.ncols() {
        return Err(CoreError::DimensionMismatch(format!(
            "column counts {} / {} / {}",
            u.ncols(),
            v.ncols(),
            w.ncols()
        )));
    }
    let mut t = DenseTensor::zeros(&[u.nrows(), v.nrows(), w.nrows()]);
    for r in 0..u.ncols() {
        for i in 0..u.nrows() {
            let ui = u[(i, r)];
            if ui == 0.0 {
                continue;
            }
            for j in 0..v.nrows() {
                let uv = ui * v[(j, r)];
                for l in 0..w.nrows() {
                    t.add_at3(i, j, l, uv * w[(l, r)]);
                }
            }
        }
    }
    Ok(t)
}

/// Tucker factors: k x k x k core and three n x k mode matrices.
#[derive(Clone, Debug)]
pub struct TuckerFactors {
    pub core: DenseTensor,
    pub a: DenseMatrix,
    pub b: DenseMatrix,
    pub c: DenseMatrix,
}

impl TuckerFactors {
    pub fn new(core: DenseTensor, a: DenseMatrix, b: DenseMatrix, c: DenseMatrix) -> Result<Self> {
        if core.order() != 3 {
            return Err(CoreError::DimensionMismatch("Tucker core must be order 3".into()));
        }
        let shape = core.shape();
        if a.ncols() != shape[0] || b.ncols() != shape[1] || c.ncols() != shape[2] {
            return Err(CoreError::DimensionMismatch(format!(
                "core {:?} vs mode columns {}/{}/{}",
                shape,
                a.ncols(),
                b.ncols(),
                c.ncols()
            )));
        }
        Ok(TuckerFactors { core, a, b, c })
    }
}

/// out[i][j][l] = sum over (i',j',l') of D[i',j',l'] A[i,i'] B[j,j'] C[l,l'].
pub fn tucker_reconstruct(f: &TuckerFactors) -> DenseTensor {
    let (ka, kb, kc) = (f.core.shape()[0], f.core.shape()[1], f.core.shape()[2]);
    let mut t = DenseTensor::zeros(&[f.a.nrows(), f.b.nrows(), f.c.nrows()]);
    for ip in 0..ka {
        for jp in 0..kb {
            for lp in 0..kc {
                let d = f.core.get3(ip, jp, lp);
                if d == 0.0 {
                    continue;
                }
                for i in 0..f.a.nrows() {
                    let da = d * f.a[(i, ip)];
                    for j in 0..f.b.nrows() {
                        let dab = da * f.b[(j, jp)];
                        for l in 0..f.c.nrows() {
                            t.add_at3(i, j, l, dab * f.c[(l, lp)]);
                        }
                    }
                }
            }
        }
    }
    t
}

/// Train factors: boundary cores have extent 1 on the outer slots.
#[derive(Clone, Debug)]
pub struct TrainFactors {
    /// 1 x n x k
    pub a: DenseTensor,
    /// k x n x k
    pub b: DenseTensor,
    /// k x n x 1
    pub c: DenseTensor,
}

impl TrainFactors {
    pub fn new(a: DenseTensor, b: DenseTensor, c: DenseTensor) -> Result<Self> {
        let (sa, sb, sc) = (a.shape(), b.shape(), c.shape());
        if sa.len() != 3 || sb.len() != 3 || sc.len() != 3 {
            return Err(CoreError::DimensionMismatch("train cores must be order 3".into()));
        }
        if sa[0] != 1 || sc[2] != 1 {
            return Err(CoreError::DimensionMismatch(
                "train boundary slots must have extent 1".into(),
            ));
        }
        if sa[2] != sb[0] || sb[2] != sc[0] || sa[1] != sb[1] || sb[1] != sc[1] {
            return Err(CoreError::DimensionMismatch(format!(
                "train core shapes {:?} / {:?} / {:?}",
                sa, sb, sc
            )));
        }
        Ok(TrainFactors { a, b, c })
    }
}

/// out[i][j][l] = sum over (i2, i3) of A[0,i,i2] B[i2,j,i3] C[i3,l,0].
pub fn train_reconstruct(f: &TrainFactors) -> DenseTensor {
    let n = f.a.shape()[1];
    let r1 = f.a.shape()[2];
    let r2 = f.b.shape()[2];
    let mut t = DenseTensor::zeros(&[n, n, n]);
    for i in 0..n {
        for j in 0..n {
            for l in 0..n {
                let mut acc = 0.0;
                for i2 in 0..r1 {
                    let ai = f.a.get3(0, i, i2);
                    if ai == 0.0 {
                        continue;
                    }
                    for i3 in 0..r2 {
                        acc += ai * f.b.get3(i2, j, i3) * f.c.get3(i3, l, 0);
                    }
                }
                t.set3(i, j, l, acc);
            }
        }
    }
    t
}

/// Squared Frobenius distance between a cycle reconstruction and a sparse
/// tensor, without materializing the n^3 reconstruction.
///
/// Expansion: |B - A|^2 = <B,B> - 2<B,A> + |A|^2 where B is the
/// reconstruction. <B,A> touches each nonzero of A exactly once; <B,B>
/// contracts the three k^2 x k^2 Gram matrices over the paired cycle
/// indices, looping (a,b,c) outer and (a',b',c') inner.
pub fn residual_sq(f: &CycleFactors, a: &SparseTensor3) -> Result<f64> {
    if f.n != a.n() {
        return Err(CoreError::DimensionMismatch(format!(
            "factors n = {} vs tensor n = {}",
            f.n,
            a.n()
        )));
    }
    let bb = cycle_norm_sq(f);
    let ba = cycle_inner_sparse(f, a);
    Ok((bb - 2.0 * ba + a.norm_sq()).max(0.0))
}

/// <B,B> for B = cycle_reconstruct(f), via Gram matrices.
pub fn cycle_norm_sq(f: &CycleFactors) -> f64 {
    let k = f.k;
    let gu = f.u.transpose() * &f.u;
    let gv = f.v.transpose() * &f.v;
    let gw = f.w.transpose() * &f.w;
    let mut acc = 0.0;
    for a in 0..k {
        for b in 0..k {
            for c in 0..k {
                let (cu, cv, cw) = (pair_to_col(a, b, k), pair_to_col(b, c, k), pair_to_col(c, a, k));
                for ap in 0..k {
                    for bp in 0..k {
                        for cp in 0..k {
                            acc += gu[(cu, pair_to_col(ap, bp, k))]
                                * gv[(cv, pair_to_col(bp, cp, k))]
                                * gw[(cw, pair_to_col(cp, ap, k))];
                        }
                    }
                }
            }
        }
    }
    acc
}

/// <B,A> where B = cycle_reconstruct(f); one visit per nonzero of A.
pub fn cycle_inner_sparse(f: &CycleFactors, a: &SparseTensor3) -> f64 {
    let k = f.k;
    let mut acc = 0.0;
    for e in a.entries() {
        let mut b = 0.0;
        for ia in 0..k {
            for ib in 0..k {
                let uv = f.u[(e.i, pair_to_col(ia, ib, k))];
                if uv == 0.0 {
                    continue;
                }
                for ic in 0..k {
                    b += uv
                        * f.v[(e.j, pair_to_col(ib, ic, k))]
                        * f.w[(e.l, pair_to_col(ic, ia, k))];
                }
            }
        }
        acc += b * e.value;
    }
    acc
}

/// Reference residual that materializes the dense reconstruction;
/// used to cross-validate the Gram path on small instances.
pub fn residual_sq_dense(f: &CycleFactors, a: &SparseTensor3) -> Result<f64> {
    if f.n != a.n() {
        return Err(CoreError::DimensionMismatch(format!(
            "factors n = {} vs tensor n = {}",
            f.n,
            a.n()
        )));
    }
    let b = cycle_reconstruct(f);
    Ok(b.sub(&a.to_dense())?.norm_sq())
}

/// Squared residual of a classical CP triple (n x k matrices) against a
/// sparse tensor, by the same Gram expansion.
pub fn cp_residual_sq(
    u: &DenseMatrix,
    v: &DenseMatrix,
    w: &DenseMatrix,
    a: &SparseTensor3,
) -> Result<f64> {
    let n = a.n();
    if u.nrows() != n || v.nrows() != n || w.nrows() != n {
        return Err(CoreError::DimensionMismatch("CP factor rows vs tensor n".into()));
    }
    if u.ncols() != v.ncols() || v.ncols() != w.ncols() {
        return Err(CoreError::DimensionMismatch("CP factor column counts".into()));
    }
    let k = u.ncols();
    let gu = u.transpose() * u;
    let gv = v.transpose() * v;
    let gw = w.transpose() * w;
    let mut bb = 0.0;
    for r in 0..k {
        for rp in 0..k {
            bb += gu[(r, rp)] * gv[(r, rp)] * gw[(r, rp)];
        }
    }
    let mut ba = 0.0;
    for e in a.entries() {
        let mut t = 0.0;
        for r in 0..k {
            t += u[(e.i, r)] * v[(e.j, r)] * w[(e.l, r)];
        }
        ba += t * e.value;
    }
    Ok((bb - 2.0 * ba + a.norm_sq()).max(0.0))
}
