use serde::{Deserialize, Serialize};

use super::C64;
use crate::{Error, Result};

/// Scalar field of a matrix or a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    Real,
    Complex,
}

impl std::fmt::Display for Field {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Field::Real => "real",
            Field::Complex => "complex",
        })
    }
}

/// Row-major dense matrix of complex entries.
///
/// A matrix tagged [`Field::Real`] keeps every imaginary part at exactly zero;
/// mutating constructors enforce this by dropping imaginary parts.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<C64>,
    field: Field,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize, field: Field) -> Self {
        Self { rows, cols, entries: vec![C64::new(0.0, 0.0); rows * cols], field }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n, Field::Real);
        for i in 0..n {
            m.entries[i * n + i] = C64::new(1.0, 0.0);
        }
        m
    }

    /// Builds a matrix from row-major entries. The field tag is inferred:
    /// real iff every imaginary part is zero.
    pub fn from_entries(rows: usize, cols: usize, entries: Vec<C64>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::dims(rows * cols, entries.len()));
        }
        let field = if entries.iter().all(|z| z.im == 0.0) { Field::Real } else { Field::Complex };
        Ok(Self { rows, cols, entries, field })
    }

    pub fn from_real(rows: usize, cols: usize, entries: &[f64]) -> Result<Self> {
        Self::from_entries(rows, cols, entries.iter().map(|&v| C64::new(v, 0.0)).collect())
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                entries.push(f(i, j));
            }
        }
        Self::from_entries(rows, cols, entries).expect("shape is consistent by construction")
    }

    /// Builds a matrix whose column `j` is `cols_data[j]`.
    pub fn from_columns(rows: usize, cols_data: &[Vec<C64>]) -> Result<Self> {
        if let Some(bad) = cols_data.iter().find(|c| c.len() != rows) {
            return Err(Error::dims(rows, bad.len()));
        }
        Ok(Self::from_fn(rows, cols_data.len(), |i, j| cols_data[j][i]))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<C64> {
        self.entries
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.entries[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: C64) {
        let value = match self.field {
            Field::Real => C64::new(value.re, 0.0),
            Field::Complex => value,
        };
        self.entries[i * self.cols + j] = value;
    }

    /// Promotes a real-tagged matrix to complex so that `set` keeps imaginary parts.
    pub fn into_complex(mut self) -> Self {
        self.field = Field::Complex;
        self
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows, self.field);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.entries[j * self.rows + i] = self.get(i, j);
            }
        }
        t
    }

    pub fn conj_transpose(&self) -> Self {
        let mut t = self.transpose();
        t.entries.iter_mut().for_each(|z| *z = z.conj());
        t
    }

    pub fn real_part(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|z| C64::new(z.re, 0.0)).collect(),
            field: Field::Real,
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::from_entries(self.rows, self.cols, self.entries.iter().map(|z| z * s).collect()).expect("same shape")
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        let entries = self.entries.iter().zip(&other.entries).map(|(a, b)| a + b).collect();
        Self::from_entries(self.rows, self.cols, entries)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        let entries = self.entries.iter().zip(&other.entries).map(|(a, b)| a - b).collect();
        Self::from_entries(self.rows, self.cols, entries)
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::dims(format!("{} rows", self.cols), format!("{} rows", other.rows)));
        }
        let (n, k, m) = (self.rows, self.cols, other.cols);
        let mut out = vec![C64::new(0.0, 0.0); n * m];
        for i in 0..n {
            let out_row = &mut out[i * m..(i + 1) * m];
            for l in 0..k {
                let a = self.entries[i * k + l];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                let b_row = &other.entries[l * m..(l + 1) * m];
                for (o, b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Self::from_entries(n, m, out)
    }

    /// Upper-left `rows x cols` block.
    pub fn top_left(&self, rows: usize, cols: usize) -> Result<Self> {
        if rows > self.rows || cols > self.cols {
            return Err(Error::dims(format!("<= {}x{}", self.rows, self.cols), format!("{rows}x{cols}")));
        }
        Ok(Self::from_fn(rows, cols, |i, j| self.get(i, j)))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(super::max_abs_diff(&self.entries, &other.entries))
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::dims(format!("{}x{}", self.rows, self.cols), format!("{}x{}", other.rows, other.cols)));
        }
        Ok(())
    }
}

/// `y = A x`, accumulated row by row in ascending column order.
pub fn dense_matvec(a: &DenseMatrix, x: &[C64]) -> Result<Vec<C64>> {
    let mut y = vec![C64::new(0.0, 0.0); a.rows()];
    dense_matvec_into(a, x, &mut y)?;
    Ok(y)
}

/// Allocation-free variant of [`dense_matvec`].
pub fn dense_matvec_into(a: &DenseMatrix, x: &[C64], y: &mut [C64]) -> Result<()> {
    if a.cols() != x.len() {
        return Err(Error::dims(a.cols(), x.len()));
    }
    if a.rows() != y.len() {
        return Err(Error::dims(a.rows(), y.len()));
    }
    for (i, yi) in y.iter_mut().enumerate() {
        let mut acc = C64::new(0.0, 0.0);
        for (aij, xj) in a.row(i).iter().zip(x) {
            acc += aij * xj;
        }
        *yi = acc;
    }
    Ok(())
}

/// Per-entry RMSE `sqrt(sum |A_ij - B_ij|^2 / N^2)` between two `N x N` matrices.
pub fn frobenius_rmse(a: &DenseMatrix, b: &DenseMatrix) -> Result<f64> {
    a.check_same_shape(b)?;
    if !a.is_square() {
        return Err(Error::dims("square matrices", format!("{}x{}", a.rows(), a.cols())));
    }
    let n2 = (a.rows() * a.cols()) as f64;
    let sq: f64 = a.entries().iter().zip(b.entries()).map(|(x, y)| (x - y).norm_sqr()).sum();
    Ok((sq / n2).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn identity_matvec() {
        let x = vec![c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0)];
        assert_eq!(dense_matvec(&DenseMatrix::identity(3), &x).unwrap(), x);
    }

    #[test]
    fn swap_matvec() {
        let swap = DenseMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap();
        let x = vec![c(0.3, -1.0), c(7.0, 2.0)];
        assert_eq!(dense_matvec(&swap, &x).unwrap(), vec![x[1], x[0]]);
    }

    #[test]
    fn unitary_dft2_on_e0() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let f2 = DenseMatrix::from_real(2, 2, &[s, s, s, -s]).unwrap();
        let y = dense_matvec(&f2, &[c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert!((y[0] - c(s, 0.0)).norm() < 1e-15);
        assert!((y[1] - c(s, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn matvec_dimension_mismatch() {
        let err = dense_matvec(&DenseMatrix::identity(3), &[c(1.0, 0.0)]).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn rmse_examples() {
        let i2 = DenseMatrix::identity(2);
        assert_eq!(frobenius_rmse(&i2, &i2).unwrap(), 0.0);
        let z = DenseMatrix::zeros(2, 2, Field::Real);
        assert!((frobenius_rmse(&i2, &z).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        let a = DenseMatrix::from_real(1, 1, &[1.0]).unwrap();
        let b = DenseMatrix::from_entries(1, 1, vec![c(1.0, 0.003)]).unwrap();
        assert!((frobenius_rmse(&a, &b).unwrap() - 0.003).abs() < 1e-15);
    }

    #[test]
    fn rmse_shape_mismatch() {
        let a = DenseMatrix::identity(2);
        let b = DenseMatrix::identity(3);
        assert!(frobenius_rmse(&a, &b).is_err());
    }

    #[test]
    fn real_tag_drops_imaginary_parts() {
        let mut m = DenseMatrix::identity(2);
        assert_eq!(m.field(), Field::Real);
        m.set(0, 1, c(2.0, 5.0));
        assert_eq!(m.get(0, 1), c(2.0, 0.0));
        let mut m = m.into_complex();
        m.set(0, 1, c(2.0, 5.0));
        assert_eq!(m.get(0, 1), c(2.0, 5.0));
    }
}
