//! Row-compressed complex sparse matrices.

use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};

const PARALLEL_ROWS: usize = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symmetry {
    Hermitian,
    AntiHermitian,
    General,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex64>,
    symmetry: Symmetry,
}

impl SparseOperator {
    /// Builds from `(row, col, value)` triplets. Duplicates are summed and exact zeros
    /// dropped. A `Hermitian` or `AntiHermitian` flag is checked against every entry.
    pub fn from_triplets(
        dim: usize,
        mut triplets: Vec<(usize, usize, Complex64)>,
        symmetry: Symmetry,
    ) -> Result<Self> {
        if let Some(&(r, c, _)) = triplets.iter().find(|t| t.0 >= dim || t.1 >= dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: r.max(c) + 1,
            });
        }
        triplets.sort_unstable_by_key(|t| (t.0, t.1));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<Complex64> = Vec::with_capacity(triplets.len());
        let mut rows = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            if rows.last() == Some(&r) && cols.last() == Some(&c) {
                *vals.last_mut().unwrap() += v;
            } else {
                rows.push(r);
                cols.push(c);
                vals.push(v);
            }
        }
        let keep: Vec<bool> = vals.iter().map(|v| *v != Complex64::new(0.0, 0.0)).collect();
        let (mut cols_out, mut vals_out) = (Vec::with_capacity(cols.len()), Vec::with_capacity(vals.len()));
        for i in 0..rows.len() {
            if keep[i] {
                row_ptr[rows[i] + 1] += 1;
                cols_out.push(cols[i]);
                vals_out.push(vals[i]);
            }
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        let op = Self {
            dim,
            row_ptr,
            cols: cols_out,
            vals: vals_out,
            symmetry,
        };
        op.check_symmetry()?;
        Ok(op)
    }

    pub fn diagonal(values: Vec<Complex64>) -> Self {
        let dim = values.len();
        let symmetry = if values.iter().all(|v| v.im == 0.0) {
            Symmetry::Hermitian
        } else {
            Symmetry::General
        };
        let triplets = values.into_iter().enumerate().map(|(i, v)| (i, i, v)).collect();
        Self::from_triplets(dim, triplets, symmetry).expect("diagonal operator is well formed")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    pub fn is_real(&self) -> bool {
        self.vals.iter().all(|v| v.im == 0.0)
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()].iter().copied().zip(self.vals[span].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.dim).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[span.clone()].binary_search(&c) {
            Ok(k) => self.vals[span.start + k],
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    /// Largest `|A_ij - s·conj(A_ji)|` with `s = +1` (Hermitian) or `-1` (anti-Hermitian).
    pub fn symmetry_defect(&self, sign: f64) -> (f64, usize, usize) {
        let mut worst = (0.0, 0, 0);
        for (r, c, v) in self.triplets() {
            let d = (v - sign * self.get(c, r).conj()).norm();
            if d > worst.0 {
                worst = (d, r, c);
            }
        }
        worst
    }

    fn check_symmetry(&self) -> Result<()> {
        let sign = match self.symmetry {
            Symmetry::General => return Ok(()),
            Symmetry::Hermitian => 1.0,
            Symmetry::AntiHermitian => -1.0,
        };
        let scale = self.vals.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let (defect, row, col) = self.symmetry_defect(sign);
        if defect > 1e-14 * scale {
            return Err(Error::NotHermitian {
                row,
                col,
                mismatch: defect,
            });
        }
        Ok(())
    }

    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); self.dim];
        self.apply_into(x, &mut y);
        y
    }

    /// `y = A x`. Rows are independent, so the parallel path is bitwise identical to
    /// the serial one.
    pub fn apply_into(&self, x: &[Complex64], y: &mut [Complex64]) {
        assert_eq!(x.len(), self.dim, "operand length");
        assert_eq!(y.len(), self.dim, "output length");
        let row = |r: usize| {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            acc
        };
        if self.dim >= PARALLEL_ROWS {
            y.par_iter_mut().enumerate().for_each(|(r, out)| *out = row(r));
        } else {
            y.iter_mut().enumerate().for_each(|(r, out)| *out = row(r));
        }
    }

    pub fn adjoint(&self) -> Self {
        let triplets = self.triplets().map(|(r, c, v)| (c, r, v.conj())).collect();
        Self::from_triplets(self.dim, triplets, self.symmetry).expect("adjoint preserves structure")
    }

    pub fn scaled(&self, factor: Complex64, symmetry: Symmetry) -> Result<Self> {
        let triplets = self.triplets().map(|(r, c, v)| (r, c, v * factor)).collect();
        Self::from_triplets(self.dim, triplets, symmetry)
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if other.dim != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        let mut triplets = Vec::new();
        for r in 0..self.dim {
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    triplets.push((r, c, a * b));
                }
            }
        }
        Self::from_triplets(self.dim, triplets, Symmetry::General)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if other.dim != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        let triplets = self
            .triplets()
            .chain(other.triplets().map(|(r, c, v)| (r, c, -v)))
            .collect();
        Self::from_triplets(self.dim, triplets, Symmetry::General)
    }

    /// `AB - BA`, with entries that cancel exactly removed.
    pub fn commutator(&self, other: &Self) -> Result<Self> {
        self.matmul(other)?.sub(&other.matmul(self)?)
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (r, c, v) in self.triplets() {
            m[(r, c)] = v;
        }
        m
    }

    /// Matrix Market `coordinate complex general`, 1-based indices.
    pub fn write_matrix_market<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate complex general")?;
        writeln!(w, "% symmetry flag: {:?}", self.symmetry)?;
        writeln!(w, "{} {} {}", self.dim, self.dim, self.nnz())?;
        for (r, c, v) in self.triplets() {
            writeln!(w, "{} {} {:.16e} {:.16e}", r + 1, c + 1, v.re, v.im)?;
        }
        Ok(())
    }
}
