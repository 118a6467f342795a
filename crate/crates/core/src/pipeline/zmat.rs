//! The Z coefficient matrices of the rotate-and-sketch argument.
//!
//! Each mode-m regression `min_X |X Z_m - A_m|_F` encodes the cycle
//! objective with the other two factor groups held fixed. The row order
//! of every Z matrix follows the displayed block layout: the row for the
//! label pair (first, second) sits at position `first*k + second`, with
//! the second label varying fastest. Factor matrices store the pair
//! (a, b) at column `a + k*b`, so Z-row order and factor-column order
//! differ by the involution [`swap_pair_columns`]; all three builders and
//! both solvers go through these two functions and nothing else does
//! pair-index arithmetic.

use crate::dense::DenseMatrix;
use crate::error::{CoreError, Result};
use crate::factors::pair_to_col;

/// Row position of the label pair (first, second) in a Z matrix.
pub fn z_row_index(first: usize, second: usize, k: usize) -> usize {
    debug_assert!(first < k && second < k);
    first * k + second
}

/// Permutes k^2 columns between factor order `a + k*b` and Z-row order
/// `a*k + b`. The permutation is its own inverse.
pub fn swap_pair_columns(m: &DenseMatrix, k: usize) -> Result<DenseMatrix> {
    if m.ncols() != k * k {
        return Err(CoreError::DimensionMismatch(format!(
            "expected {} columns, got {}",
            k * k,
            m.ncols()
        )));
    }
    let mut out = DenseMatrix::zeros(m.nrows(), k * k);
    for a in 0..k {
        for b in 0..k {
            out.set_column(z_row_index(a, b, k), &m.column(pair_to_col(a, b, k)));
        }
    }
    Ok(out)
}

fn check_factor(name: &str, m: &DenseMatrix, k: usize) -> Result<()> {
    if m.ncols() != k * k {
        return Err(CoreError::DimensionMismatch(format!(
            "{} has {} columns, expected k^2 = {}",
            name,
            m.ncols(),
            k * k
        )));
    }
    Ok(())
}

/// Z_1 for the mode-1 regression: row (i, j) is
/// vec(sum over l of V[., j + k*l] (x) W[., l + k*i]).
/// V and W may have different row counts (the reduced solver passes the
/// t_i-row products Y_i X_i here).
pub fn build_z1(v: &DenseMatrix, w: &DenseMatrix, k: usize) -> Result<DenseMatrix> {
    check_factor("V", v, k)?;
    check_factor("W", w, k)?;
    let (nv, nw) = (v.nrows(), w.nrows());
    let mut z = DenseMatrix::zeros(k * k, nv * nw);
    for i in 0..k {
        for j in 0..k {
            let row = z_row_index(i, j, k);
            for l in 0..k {
                let vc = pair_to_col(j, l, k);
                let wc = pair_to_col(l, i, k);
                for p in 0..nv {
                    let vv = v[(p, vc)];
                    if vv == 0.0 {
                        continue;
                    }
                    for q in 0..nw {
                        z[(row, p * nw + q)] += vv * w[(q, wc)];
                    }
                }
            }
        }
    }
    Ok(z)
}

/// Z_2 for the mode-2 regression: row (j, l) is
/// vec(sum over i of U[., i + k*j] (x) W[., l + k*i]).
pub fn build_z2(u: &DenseMatrix, w: &DenseMatrix, k: usize) -> Result<DenseMatrix> {
    check_factor("U", u, k)?;
    check_factor("W", w, k)?;
    let (nu, nw) = (u.nrows(), w.nrows());
    let mut z = DenseMatrix::zeros(k * k, nu * nw);
    for j in 0..k {
        for l in 0..k {
            let row = z_row_index(j, l, k);
            for i in 0..k {
                let uc = pair_to_col(i, j, k);
                let wc = pair_to_col(l, i, k);
                for p in 0..nu {
                    let uv = u[(p, uc)];
                    if uv == 0.0 {
                        continue;
                    }
                    for q in 0..nw {
                        z[(row, p * nw + q)] += uv * w[(q, wc)];
                    }
                }
            }
        }
    }
    Ok(z)
}

/// Z_3 for the mode-3 regression: row (l, i) is
/// vec(sum over j of U[., i + k*j] (x) V[., j + k*l]).
pub fn build_z3(u: &DenseMatrix, v: &DenseMatrix, k: usize) -> Result<DenseMatrix> {
    check_factor("U", u, k)?;
    check_factor("V", v, k)?;
    let (nu, nv) = (u.nrows(), v.nrows());
    let mut z = DenseMatrix::zeros(k * k, nu * nv);
    for l in 0..k {
        for i in 0..k {
            let row = z_row_index(l, i, k);
            for j in 0..k {
                let uc = pair_to_col(i, j, k);
                let vc = pair_to_col(j, l, k);
                for p in 0..nu {
                    let uv = u[(p, uc)];
                    if uv == 0.0 {
                        continue;
                    }
                    for q in 0..nv {
                        z[(row, p * nv + q)] += uv * v[(q, vc)];
                    }
                }
            }
        }
    }
    Ok(z)
}

/// CP analogue of the Z matrices: row i is vec(P_i (x) Q_i), one row per
/// classical rank component.
pub fn build_z_cp(p: &DenseMatrix, q: &DenseMatrix, k: usize) -> Result<DenseMatrix> {
    if p.ncols() != k || q.ncols() != k {
        return Err(CoreError::DimensionMismatch(format!(
            "CP factors have {}/{} columns, expected k = {}",
            p.ncols(),
            q.ncols(),
            k
        )));
    }
    let (np, nq) = (p.nrows(), q.nrows());
    let mut z = DenseMatrix::zeros(k, np * nq);
    for r in 0..k {
        for a in 0..np {
            let pv = p[(a, r)];
            if pv == 0.0 {
                continue;
            }
            for b in 0..nq {
                z[(r, a * nq + b)] = pv * q[(b, r)];
            }
        }
    }
    Ok(z)
}
