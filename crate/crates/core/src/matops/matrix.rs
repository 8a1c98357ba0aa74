use std::fmt;
use std::ops::{Index, IndexMut};

use super::MatError;

/// Dense row-major matrix of finite `f64` entries with positive dimensions.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diag(entries: &[f64]) -> Self {
        let mut m = Matrix::zeros(entries.len(), entries.len());
        for (i, &v) in entries.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        assert!(!rows.is_empty(), "matrix dimensions must be positive");
        let cols = rows[0].len();
        assert!(cols > 0, "matrix dimensions must be positive");
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        let m = Matrix {
            rows: rows.len(),
            cols,
            data,
        };
        m.assert_finite();
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Matrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m.assert_finite();
        m
    }

    /// 1xn row matrix.
    pub fn row_vector(v: &[f64]) -> Self {
        Matrix::from_rows(&[v.to_vec()])
    }

    fn assert_finite(&self) {
        debug_assert!(
            self.data.iter().all(|x| x.is_finite()),
            "matrix entries must be finite"
        );
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(
            self.cols, other.rows,
            "matmul dimension mismatch: {}x{} * {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn mat_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "mat_vec dimension mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, x)| a * x).sum())
            .collect()
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> Matrix {
        self.map(|x| c * x)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    fn zip_with(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
        assert_eq!(
            (self.rows, self.cols),
            (other.rows, other.cols),
            "elementwise dimension mismatch"
        );
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// Entrywise absolute value |M|.
    pub fn abs(&self) -> Matrix {
        self.map(f64::abs)
    }

    /// [self other] side by side.
    pub fn hstack(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.rows, other.rows, "hstack row mismatch");
        let mut out = Matrix::zeros(self.rows, self.cols + other.cols);
        for i in 0..self.rows {
            out.data[i * out.cols..i * out.cols + self.cols].copy_from_slice(self.row(i));
            out.data[i * out.cols + self.cols..(i + 1) * out.cols].copy_from_slice(other.row(i));
        }
        out
    }

    /// Largest |entry|.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, x| acc.max(x.abs()))
    }

    /// Row-sum norm ‖M‖_∞.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn is_nonneg(&self) -> bool {
        self.data.iter().all(|&x| x >= 0.0)
    }

    /// Square matrix power by iterated multiplication.
    pub fn pow(&self, k: usize) -> Matrix {
        assert!(self.is_square(), "pow needs a square matrix");
        let mut out = Matrix::identity(self.rows);
        for _ in 0..k {
            out = out.matmul(self);
        }
        out
    }

    /// Symmetrize exactly: (M + Mᵀ)/2 written into both triangles.
    pub fn symmetrized(&self) -> Matrix {
        assert!(self.is_square(), "symmetrized needs a square matrix");
        let mut s = self.clone();
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let v = 0.5 * (self[(i, j)] + self[(j, i)]);
                s[(i, j)] = v;
                s[(j, i)] = v;
            }
        }
        s
    }

    /// Gram matrix MᵀM, built exactly symmetric.
    pub fn gram(&self) -> Matrix {
        let mut g = Matrix::zeros(self.cols, self.cols);
        for i in 0..self.cols {
            for j in i..self.cols {
                let mut acc = 0.0;
                for k in 0..self.rows {
                    acc += self[(k, i)] * self[(k, j)];
                }
                g[(i, j)] = acc;
                g[(j, i)] = acc;
            }
        }
        g
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

/// The M⊕ / M⊖ / |M| decomposition behind interval propagation:
/// `plus` is the entrywise positive part, `minus` the entrywise negative
/// part, and `abs` their sum.
#[derive(Debug, Clone)]
pub struct MatrixSplit {
    pub plus: Matrix,
    pub minus: Matrix,
    pub abs: Matrix,
}

/// Split M into (M⊕, M⊖, |M|) with M⊕ − M⊖ = M exactly.
///
/// # Example
///
/// ```
/// use gpobs_core::matops::{split, Matrix};
///
/// let s = split(&Matrix::from_rows(&[vec![1.0, -2.0]]));
/// assert_eq!(s.plus.row(0), &[1.0, 0.0]);
/// assert_eq!(s.minus.row(0), &[0.0, 2.0]);
/// assert_eq!(s.abs.row(0), &[1.0, 2.0]);
/// ```
pub fn split(m: &Matrix) -> MatrixSplit {
    let plus = m.map(|x| x.max(0.0));
    let minus = plus.sub(m);
    let abs = plus.add(&minus);
    MatrixSplit { plus, minus, abs }
}

impl MatrixSplit {
    /// Tight image of the box [lo, hi] under the original matrix:
    /// returns (M⊕lo − M⊖hi, M⊕hi − M⊖lo).
    pub fn interval_image(&self, lo: &[f64], hi: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let out_lo = super::vecops::sub(&self.plus.mat_vec(lo), &self.minus.mat_vec(hi));
        let out_hi = super::vecops::sub(&self.plus.mat_vec(hi), &self.minus.mat_vec(lo));
        (out_lo, out_hi)
    }
}

/// Propagate the interval [lo, hi] through A: the result brackets Ax for
/// every lo ≤ x ≤ hi.
pub fn interval_mat_vec(
    a: &Matrix,
    lo: &[f64],
    hi: &[f64],
) -> Result<(Vec<f64>, Vec<f64>), MatError> {
    if lo.len() != hi.len() || a.cols() != lo.len() {
        return Err(MatError::Dimension(format!(
            "interval_mat_vec: A is {}x{}, interval has lengths {} and {}",
            a.rows(),
            a.cols(),
            lo.len(),
            hi.len()
        )));
    }
    for (i, (&l, &h)) in lo.iter().zip(hi).enumerate() {
        if l > h {
            return Err(MatError::IntervalCrossing {
                index: i,
                lo: l,
                hi: h,
            });
        }
    }
    Ok(split(a).interval_image(lo, hi))
}
