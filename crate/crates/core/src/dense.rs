//! Dense tensors of arbitrary order and the vectorization/outer-product
//! primitives everything else is defined against.
//!
//! Storage is row-major: the last index varies fastest, which is exactly
//! the ordering `vec_tensor` produces.

use crate::error::{CoreError, Result};
use nalgebra::DMatrix;

/// Dense matrix used throughout the library (column-major internally,
/// imported/exported row-major at the boundaries).
pub type DenseMatrix = DMatrix<f64>;

/// Builds a matrix from row-major data.
pub fn matrix_from_row_major(rows: usize, cols: usize, data: &[f64]) -> Result<DenseMatrix> {
    if data.len() != rows * cols {
        return Err(CoreError::DimensionMismatch(format!(
            "row-major data length {} != {}x{}",
            data.len(),
            rows,
            cols
        )));
    }
    Ok(DenseMatrix::from_row_slice(rows, cols, data))
}

/// Row-major copy of a matrix's entries.
pub fn matrix_to_row_major(m: &DenseMatrix) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            out.push(m[(r, c)]);
        }
    }
    out
}

/// Matrix text format: a `rows cols` header line, then one line per row
/// with whitespace-separated values (shortest round-trip decimals).
pub fn write_matrix_text<W: std::io::Write>(m: &DenseMatrix, w: &mut W) -> Result<()> {
    writeln!(w, "{} {}", m.nrows(), m.ncols()).map_err(CoreError::Io)?;
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            if c > 0 {
                write!(w, " ").map_err(CoreError::Io)?;
            }
            write!(w, "{}", m[(r, c)]).map_err(CoreError::Io)?;
        }
        writeln!(w).map_err(CoreError::Io)?;
    }
    Ok(())
}

pub fn read_matrix_text<R: std::io::Read>(r: R) -> Result<DenseMatrix> {
    use std::io::BufRead;
    let reader = std::io::BufReader::new(r);
    let mut rows = 0usize;
    let mut cols = 0usize;
    let mut data: Vec<f64> = Vec::new();
    let mut saw_header = false;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(CoreError::Io)?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let mut parts = text.split_whitespace();
        if !saw_header {
            let parse = |tok: Option<&str>, name: &str| -> Result<usize> {
                tok.and_then(|t| t.parse().ok()).ok_or_else(|| CoreError::Parse {
                    line: lineno + 1,
                    msg: format!("bad {} in matrix header", name),
                })
            };
            rows = parse(parts.next(), "rows")?;
            cols = parse(parts.next(), "cols")?;
            saw_header = true;
            continue;
        }
        for tok in parts {
            let v: f64 = tok.parse().map_err(|_| CoreError::Parse {
                line: lineno + 1,
                msg: format!("bad matrix value `{}`", tok),
            })?;
            data.push(v);
        }
    }
    if !saw_header {
        return Err(CoreError::Parse { line: 1, msg: "missing matrix header".into() });
    }
    matrix_from_row_major(rows, cols, &data)
}

/// Dense tensor with dynamic order.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        DenseTensor { shape: shape.to_vec(), data: vec![0.0; len] }
    }

    pub fn from_data(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if data.len() != len {
            return Err(CoreError::DimensionMismatch(format!(
                "data length {} != shape product {}",
                data.len(),
                len
            )));
        }
        Ok(DenseTensor { shape: shape.to_vec(), data })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn order(&self) -> usize {
        self.shape.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Linear offset of a multi-index (last index fastest).
    pub fn offset(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.shape.len());
        let mut t = 0;
        for (d, &i) in index.iter().enumerate() {
            debug_assert!(i < self.shape[d]);
            t = t * self.shape[d] + i;
        }
        t
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.data[self.offset(index)]
    }

    pub fn set(&mut self, index: &[usize], value: f64) {
        let t = self.offset(index);
        self.data[t] = value;
    }

    pub fn add_at(&mut self, index: &[usize], value: f64) {
        let t = self.offset(index);
        self.data[t] += value;
    }

    /// Order-3 accessor; panics on other orders.
    pub fn get3(&self, i: usize, j: usize, l: usize) -> f64 {
        assert_eq!(self.order(), 3, "get3 on order-{} tensor", self.order());
        self.data[(i * self.shape[1] + j) * self.shape[2] + l]
    }

    pub fn set3(&mut self, i: usize, j: usize, l: usize, value: f64) {
        assert_eq!(self.order(), 3);
        self.data[(i * self.shape[1] + j) * self.shape[2] + l] = value;
    }

    pub fn add_at3(&mut self, i: usize, j: usize, l: usize, value: f64) {
        assert_eq!(self.order(), 3);
        self.data[(i * self.shape[1] + j) * self.shape[2] + l] += value;
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn sub(&self, other: &DenseTensor) -> Result<DenseTensor> {
        if self.shape != other.shape {
            return Err(CoreError::DimensionMismatch(format!(
                "tensor shapes {:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(DenseTensor { shape: self.shape.clone(), data })
    }
}

/// Row-vector form of a dense tensor: entry t holds the value at the
/// multi-index whose mixed-radix expansion (last index fastest) equals t.
pub fn vec_tensor(t: &DenseTensor) -> Vec<f64> {
    let len: usize = t.shape().iter().product();
    let mut out = Vec::with_capacity(len);
    let mut index = vec![0usize; t.order()];
    for _ in 0..len {
        out.push(t.get(&index));
        // increment mixed-radix counter, last position fastest
        for d in (0..index.len()).rev() {
            index[d] += 1;
            if index[d] < t.shape()[d] {
                break;
            }
            index[d] = 0;
        }
    }
    out
}

/// Outer product of two vectors as an order-2 tensor.
pub fn outer2(a: &[f64], b: &[f64]) -> DenseTensor {
    let mut t = DenseTensor::zeros(&[a.len(), b.len()]);
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            t.set(&[i, j], ai * bj);
        }
    }
    t
}

/// Outer product of three vectors: entry (i, j, l) is `a_i * b_j * c_l`.
pub fn outer3(a: &[f64], b: &[f64], c: &[f64]) -> Result<DenseTensor> {
    if a.len() != b.len() || b.len() != c.len() {
        return Err(CoreError::DimensionMismatch(format!(
            "outer3 lengths {} / {} / {}",
            a.len(),
            b.len(),
            c.len()
        )));
    }
    Ok(outer3_rect(a, b, c))
}

/// Outer product of three vectors of possibly different lengths.
pub fn outer3_rect(a: &[f64], b: &[f64], c: &[f64]) -> DenseTensor {
    let mut t = DenseTensor::zeros(&[a.len(), b.len(), c.len()]);
    let mut off = 0;
    for &ai in a {
        for &bj in b {
            for &cl in c {
                t.data[off] = ai * bj * cl;
                off += 1;
            }
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vec_of_outer2_matches_worked_example() {
        let u = [5.0, 4.0];
        let v = [3.0, 2.0, 1.0];
        let t = outer2(&u, &v);
        assert_eq!(vec_tensor(&t), vec![15.0, 10.0, 5.0, 12.0, 8.0, 4.0]);
    }

    #[test]
    fn vec_identity_on_scalar_tensor() {
        let t = DenseTensor::from_data(&[1, 1, 1], vec![3.5]).unwrap();
        assert_eq!(vec_tensor(&t), vec![3.5]);
    }

    #[test]
    fn vec_enumerates_matrix_rows_first() {
        let t = DenseTensor::from_data(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(vec_tensor(&t), vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(t.get(&[1, 0]), 3.0);
    }

    #[test]
    fn outer3_basis_vectors() {
        let e1 = [1.0, 0.0];
        let t = outer3(&e1, &e1, &e1).unwrap();
        assert_eq!(t.get3(0, 0, 0), 1.0);
        assert_eq!(t.norm_sq(), 1.0);
    }

    #[test]
    fn outer3_entry_formula() {
        let t = outer3(&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0]).unwrap();
        // triple-loop oracle
        for i in 0..2 {
            for j in 0..2 {
                for l in 0..2 {
                    let want = [1.0, 2.0][i] * [3.0, 4.0][j] * [5.0, 6.0][l];
                    assert_eq!(t.get3(i, j, l), want);
                }
            }
        }
        assert_eq!(t.get3(1, 0, 1), 36.0);
    }

    #[test]
    fn outer3_annihilates_on_zero_vector() {
        let t = outer3(&[1.0, 2.0], &[3.0, 4.0], &[0.0, 0.0]).unwrap();
        assert_eq!(t.norm_sq(), 0.0);
    }

    #[test]
    fn outer3_rejects_length_mismatch() {
        assert!(outer3(&[1.0], &[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn row_major_matrix_round_trip() {
        let m = matrix_from_row_major(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(m[(1, 0)], 4.0);
        assert_eq!(matrix_to_row_major(&m), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn matrix_text_round_trip_preserves_bits() {
        let m = matrix_from_row_major(2, 2, &[1.5, -2.25e-17, 0.1, 3.0]).unwrap();
        let mut buf = Vec::new();
        write_matrix_text(&m, &mut buf).unwrap();
        let back = read_matrix_text(&buf[..]).unwrap();
        for (a, b) in m.iter().zip(back.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
