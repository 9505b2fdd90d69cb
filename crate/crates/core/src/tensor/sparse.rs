use std::io::{BufRead, Write};
use std::path::Path;

use rayon::prelude::*;

use super::Matrix;
use crate::error::{Error, Result};

const PAR_ROWS: usize = 256;

/// Immutable compressed-sparse-row matrix.
///
/// Column indices are strictly increasing within each row and every stored
/// value is finite.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a matrix from `(row, col, value)` triplets. Duplicate
    /// coordinates are summed.
    ///
    /// # Panics
    ///
    /// Panics on out-of-range coordinates or non-finite values.
    pub fn from_triplets(rows: usize, cols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        for &(r, c, v) in &triplets {
            assert!(r < rows && c < cols, "triplet ({r}, {c}) outside {rows}x{cols}");
            assert!(v.is_finite(), "non-finite sparse value at ({r}, {c})");
        }
        triplets.sort_by_key(|t| (t.0, t.1));

        let mut row_offsets = vec![0usize; rows + 1];
        let mut col_indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            row_offsets[r + 1] += 1;
            col_indices.push(c);
            values.push(v);
            last = Some((r, c));
        }
        for i in 0..rows {
            row_offsets[i + 1] += row_offsets[i];
        }
        Self { rows, cols, row_offsets, col_indices, values }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, n, (0..n).map(|i| (i, i, 1.0)).collect())
    }

    pub fn from_dense(m: &Matrix) -> Self {
        let mut t = Vec::new();
        for r in 0..m.rows() {
            for c in 0..m.cols() {
                let v = m.get(r, c);
                if v != 0.0 {
                    t.push((r, c, v));
                }
            }
        }
        Self::from_triplets(m.rows(), m.cols(), t)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values stored in row `r`.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let span = self.row_offsets[r]..self.row_offsets[r + 1];
        (&self.col_indices[span.clone()], &self.values[span])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        cols.binary_search(&c).map_or(0.0, |i| vals[i])
    }

    /// Iterates stored entries in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |r| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).map(move |(&c, &v)| (r, c, v))
        })
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|r| self.row(r).1.iter().sum()).collect()
    }

    pub fn transpose(&self) -> SparseMatrix {
        SparseMatrix::from_triplets(self.cols, self.rows, self.iter().map(|(r, c, v)| (c, r, v)).collect())
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols && self.iter().all(|(r, c, v)| self.get(c, r) == v)
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.rows, self.cols);
        for (r, c, v) in self.iter() {
            m.set(r, c, v);
        }
        m
    }

    /// `self · dense`.
    pub fn matmul_dense(&self, dense: &Matrix) -> Matrix {
        assert_eq!(self.cols, dense.rows(), "spmm shape mismatch: {}x{} x {:?}", self.rows, self.cols, dense.shape());
        let n = dense.cols();
        let mut out = Matrix::zeros(self.rows, n);
        if n == 0 {
            return out;
        }
        let kernel = |(r, out_row): (usize, &mut [f64])| {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                for (o, &x) in out_row.iter_mut().zip(dense.row(c)) {
                    *o += v * x;
                }
            }
        };
        if self.rows >= PAR_ROWS {
            out.as_mut_slice().par_chunks_mut(n).enumerate().for_each(kernel);
        } else {
            out.as_mut_slice().chunks_mut(n).enumerate().for_each(kernel);
        }
        out
    }

    /// `selfᵀ · dense`, without materializing the transpose.
    pub fn transpose_matmul_dense(&self, dense: &Matrix) -> Matrix {
        assert_eq!(
            self.rows,
            dense.rows(),
            "spmm-transpose shape mismatch: {}x{}ᵀ x {:?}",
            self.rows,
            self.cols,
            dense.shape()
        );
        let n = dense.cols();
        let mut out = Matrix::zeros(self.cols, n);
        for r in 0..self.rows {
            let (cols, vals) = self.row(r);
            let src = dense.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                for (o, &x) in out.row_mut(c).iter_mut().zip(src) {
                    *o += v * x;
                }
            }
        }
        out
    }

    /// Writes the `rows cols nnz` header followed by one `row col value`
    /// triple per line. Values use the shortest round-trip decimal form.
    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{} {} {}", self.rows, self.cols, self.nnz())?;
        for (r, c, v) in self.iter() {
            writeln!(w, "{r} {c} {v:?}")?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_text(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_text(std::io::BufReader::new(file), path)
    }

    pub fn read_text<R: BufRead>(reader: R, path: &Path) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let (rows, cols, nnz) = match lines.next() {
            Some((_, line)) => {
                let line = line.map_err(|e| Error::io(path, e))?;
                let f = parse_fields::<usize>(&line, 3, path, 1)?;
                (f[0], f[1], f[2])
            }
            None => return Err(Error::parse(path, 1, "missing `rows cols nnz` header")),
        };
        let mut triplets = Vec::with_capacity(nnz);
        for (i, line) in lines {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let bad = || Error::parse(path, i + 1, format!("expected `row col value`, got {line:?}"));
            let r: usize = it.next().and_then(|t| t.parse().ok()).ok_or_else(bad)?;
            let c: usize = it.next().and_then(|t| t.parse().ok()).ok_or_else(bad)?;
            let v: f64 = it.next().and_then(|t| t.parse().ok()).ok_or_else(bad)?;
            if it.next().is_some() || r >= rows || c >= cols || !v.is_finite() {
                return Err(bad());
            }
            triplets.push((r, c, v));
        }
        if triplets.len() != nnz {
            return Err(Error::parse(path, 1, format!("header declares {nnz} entries, found {}", triplets.len())));
        }
        Ok(Self::from_triplets(rows, cols, triplets))
    }
}

fn parse_fields<T: std::str::FromStr>(line: &str, n: usize, path: &Path, lineno: usize) -> Result<Vec<T>> {
    let fields: Vec<T> = line
        .split_whitespace()
        .map(|t| t.parse::<T>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::parse(path, lineno, format!("expected {n} integers, got {line:?}")))?;
    if fields.len() != n {
        return Err(Error::parse(path, lineno, format!("expected {n} fields, got {}", fields.len())));
    }
    Ok(fields)
}
