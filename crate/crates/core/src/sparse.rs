//! Sparse third-order tensors in coordinate form, their mode flattenings,
//! and the on-disk tensor formats.
//!
//! Text format: a header line `n nnz` followed by nnz lines `i j l value`
//! (0-based indices). Binary format: little-endian `u64 n`, `u64 nnz`,
//! then nnz records of three `u64` indices and one `f64` value.

use crate::dense::DenseTensor;
use crate::error::{CoreError, Result};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

/// One nonzero entry of a [`SparseTensor3`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Entry {
    pub i: usize,
    pub j: usize,
    pub l: usize,
    pub value: f64,
}

/// An n x n x n tensor stored as canonical COO: entries sorted by
/// (i, j, l), duplicates summed, exact zeros dropped.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseTensor3 {
    n: usize,
    entries: Vec<Entry>,
}

impl SparseTensor3 {
    /// Canonicalizes the entry list: validates indices, sums duplicate
    /// coordinates, removes zeros.
    pub fn new(n: usize, mut entries: Vec<Entry>) -> Result<Self> {
        for e in &entries {
            if e.i >= n || e.j >= n || e.l >= n {
                return Err(CoreError::IndexOutOfRange { i: e.i, j: e.j, l: e.l, n });
            }
            if !e.value.is_finite() {
                return Err(CoreError::NonFiniteEntry { i: e.i, j: e.j, l: e.l });
            }
        }
        entries.sort_by_key(|e| (e.i, e.j, e.l));
        let mut canonical: Vec<Entry> = Vec::with_capacity(entries.len());
        for e in entries {
            match canonical.last_mut() {
                Some(last) if (last.i, last.j, last.l) == (e.i, e.j, e.l) => {
                    last.value += e.value;
                }
                _ => canonical.push(e),
            }
        }
        canonical.retain(|e| e.value != 0.0);
        Ok(SparseTensor3 { n, entries: canonical })
    }

    pub fn zero(n: usize) -> Self {
        SparseTensor3 { n, entries: Vec::new() }
    }

    pub fn from_dense(t: &DenseTensor) -> Result<Self> {
        if t.order() != 3 || t.shape()[0] != t.shape()[1] || t.shape()[1] != t.shape()[2] {
            return Err(CoreError::DimensionMismatch(format!(
                "expected cubic order-3 shape, got {:?}",
                t.shape()
            )));
        }
        let n = t.shape()[0];
        let mut entries = Vec::new();
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    let v = t.get3(i, j, l);
                    if v != 0.0 {
                        entries.push(Entry { i, j, l, value: v });
                    }
                }
            }
        }
        SparseTensor3::new(n, entries)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn norm_sq(&self) -> f64 {
        self.entries.iter().map(|e| e.value * e.value).sum()
    }

    pub fn to_dense(&self) -> DenseTensor {
        let mut t = DenseTensor::zeros(&[self.n, self.n, self.n]);
        for e in &self.entries {
            t.set3(e.i, e.j, e.l, e.value);
        }
        t
    }

    /// Mode-m flattening as a sparse n x n^2 matrix. Row r of mode 1 is
    /// vec of the slice A[r, ., .]; modes 2 and 3 fix the second and third
    /// index. Same nnz as the tensor, Frobenius norm preserved.
    pub fn flatten(&self, mode: Mode) -> SparseMatrix {
        let n = self.n;
        let entries = self
            .entries
            .iter()
            .map(|e| {
                let (row, col) = match mode {
                    Mode::One => (e.i, e.j * n + e.l),
                    Mode::Two => (e.j, e.i * n + e.l),
                    Mode::Three => (e.l, e.i * n + e.j),
                };
                (row, col, e.value)
            })
            .collect();
        SparseMatrix { rows: n, cols: n * n, entries }
    }

    pub fn write_text<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "{} {}", self.n, self.entries.len())?;
        for e in &self.entries {
            writeln!(w, "{} {} {} {}", e.i, e.j, e.l, e.value)?;
        }
        Ok(())
    }

    pub fn read_text<R: Read>(r: R) -> Result<Self> {
        let reader = BufReader::new(r);
        let mut lines = reader.lines().enumerate();
        let (n, nnz) = loop {
            let (lineno, line) = lines
                .next()
                .ok_or_else(|| CoreError::Parse { line: 1, msg: "missing header".into() })?;
            let line = line?;
            let text = line.trim();
            if text.is_empty() || text.starts_with('#') {
                continue;
            }
            let mut parts = text.split_whitespace();
            let n = parse_field::<usize>(&mut parts, lineno + 1, "n")?;
            let nnz = parse_field::<usize>(&mut parts, lineno + 1, "nnz")?;
            break (n, nnz);
        };
        let mut entries = Vec::with_capacity(nnz);
        for (lineno, line) in lines {
            let line = line?;
            let text = line.trim();
            if text.is_empty() || text.starts_with('#') {
                continue;
            }
            let mut parts = text.split_whitespace();
            let i = parse_field::<usize>(&mut parts, lineno + 1, "i")?;
            let j = parse_field::<usize>(&mut parts, lineno + 1, "j")?;
            let l = parse_field::<usize>(&mut parts, lineno + 1, "l")?;
            let value = parse_field::<f64>(&mut parts, lineno + 1, "value")?;
            entries.push(Entry { i, j, l, value });
        }
        if entries.len() != nnz {
            return Err(CoreError::Parse {
                line: 1,
                msg: format!("header promises {} entries, file has {}", nnz, entries.len()),
            });
        }
        SparseTensor3::new(n, entries)
    }

    pub fn write_binary<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(&(self.n as u64).to_le_bytes())?;
        w.write_all(&(self.entries.len() as u64).to_le_bytes())?;
        for e in &self.entries {
            w.write_all(&(e.i as u64).to_le_bytes())?;
            w.write_all(&(e.j as u64).to_le_bytes())?;
            w.write_all(&(e.l as u64).to_le_bytes())?;
            w.write_all(&e.value.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let n = read_u64(&mut r)? as usize;
        let nnz = read_u64(&mut r)? as usize;
        let mut entries = Vec::with_capacity(nnz);
        for _ in 0..nnz {
            let i = read_u64(&mut r)? as usize;
            let j = read_u64(&mut r)? as usize;
            let l = read_u64(&mut r)? as usize;
            let mut buf = [0u8; 8];
            r.read_exact(&mut buf)?;
            entries.push(Entry { i, j, l, value: f64::from_le_bytes(buf) });
        }
        SparseTensor3::new(n, entries)
    }

    /// Reads a tensor file; `.bin` means binary, anything else text.
    pub fn read_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        if path.extension().is_some_and(|e| e == "bin") {
            Self::read_binary(BufReader::new(file))
        } else {
            Self::read_text(file)
        }
    }

    pub fn write_path(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = BufWriter::new(file);
        if path.extension().is_some_and(|e| e == "bin") {
            self.write_binary(&mut w)
        } else {
            self.write_text(&mut w)
        }
    }
}

fn parse_field<'a, T: std::str::FromStr>(
    parts: &mut impl Iterator<Item = &'a str>,
    line: usize,
    name: &str,
) -> Result<T> {
    let tok = parts
        .next()
        .ok_or_else(|| CoreError::Parse { line, msg: format!("missing field `{}`", name) })?;
    tok.parse()
        .map_err(|_| CoreError::Parse { line, msg: format!("bad {} value `{}`", name, tok) })
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

/// Mode selector for flattenings.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    One,
    Two,
    Three,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::One, Mode::Two, Mode::Three];

    pub fn index(self) -> usize {
        match self {
            Mode::One => 0,
            Mode::Two => 1,
            Mode::Three => 2,
        }
    }
}

/// Sparse COO matrix, the materialized form of a flattening.
#[derive(Clone, Debug)]
pub struct SparseMatrix {
    pub rows: usize,
    pub cols: usize,
    /// (row, col, value) triples; no ordering guarantee is needed by the
    /// sketch kernels, which accumulate entry by entry.
    pub entries: Vec<(usize, usize, f64)>,
}

impl SparseMatrix {
    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn norm_sq(&self) -> f64 {
        self.entries.iter().map(|(_, _, v)| v * v).sum()
    }

    pub fn to_dense(&self) -> crate::dense::DenseMatrix {
        let mut m = crate::dense::DenseMatrix::zeros(self.rows, self.cols);
        for &(r, c, v) in &self.entries {
            m[(r, c)] += v;
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::{outer3, vec_tensor};

    fn entry(i: usize, j: usize, l: usize, value: f64) -> Entry {
        Entry { i, j, l, value }
    }

    #[test]
    fn canonicalization_sums_duplicates_and_drops_zeros() {
        let t = SparseTensor3::new(
            3,
            vec![entry(1, 2, 0, 2.0), entry(1, 2, 0, 3.0), entry(0, 0, 0, 1.0), entry(2, 2, 2, 0.0)],
        )
        .unwrap();
        assert_eq!(t.nnz(), 2);
        assert_eq!(t.entries()[1], entry(1, 2, 0, 5.0));
    }

    #[test]
    fn rejects_out_of_range_indices() {
        assert!(SparseTensor3::new(2, vec![entry(0, 2, 0, 1.0)]).is_err());
    }

    #[test]
    fn flatten_of_zero_tensor_is_zero() {
        let t = SparseTensor3::zero(4);
        for mode in Mode::ALL {
            assert_eq!(t.flatten(mode).nnz(), 0);
        }
    }

    #[test]
    fn flatten_mode1_of_rank_one_is_outer_row_structure() {
        let a = [1.0, -2.0, 0.5];
        let b = [3.0, 0.0, 1.0];
        let c = [2.0, 1.0, -1.0];
        let t = SparseTensor3::from_dense(&outer3(&a, &b, &c).unwrap()).unwrap();
        let flat = t.flatten(Mode::One).to_dense();
        let bc = vec_tensor(&crate::dense::outer2(&b, &c));
        for (r, &ar) in a.iter().enumerate() {
            for (col, &bcv) in bc.iter().enumerate() {
                assert!((flat[(r, col)] - ar * bcv).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn flatten_preserves_frobenius_norm_all_modes() {
        let t = SparseTensor3::new(
            5,
            vec![entry(0, 1, 2, 1.5), entry(4, 4, 4, -2.0), entry(2, 0, 3, 0.25)],
        )
        .unwrap();
        for mode in Mode::ALL {
            assert!((t.flatten(mode).norm_sq() - t.norm_sq()).abs() < 1e-12);
        }
    }

    #[test]
    fn text_round_trip() {
        let t = SparseTensor3::new(3, vec![entry(0, 1, 2, 0.5), entry(2, 2, 2, -1e-3)]).unwrap();
        let mut buf = Vec::new();
        t.write_text(&mut buf).unwrap();
        let back = SparseTensor3::read_text(&buf[..]).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn binary_round_trip() {
        let t = SparseTensor3::new(3, vec![entry(1, 0, 2, 1.25), entry(0, 0, 0, 3.5)]).unwrap();
        let mut buf = Vec::new();
        t.write_binary(&mut buf).unwrap();
        let back = SparseTensor3::read_binary(&buf[..]).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn text_parse_reports_line_numbers() {
        let input = "2 2\n0 0 0 1.0\n0 1 x 2.0\n";
        match SparseTensor3::read_text(input.as_bytes()) {
            Err(CoreError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {:?}", other),
        }
    }
}
