//! Small dense linear-algebra layer.
//!
//! Everything here works on row-major `f64` storage and is deterministic: the
//! same inputs produce bit-identical outputs. Vectors are plain slices.

use crate::error::{Error, Result};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::Dimension(format!(
                    "row {i} has {} entries, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
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
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Position and value of the first NaN or infinite entry, if any.
    pub fn first_non_finite(&self) -> Option<(usize, usize, f64)> {
        self.data
            .iter()
            .position(|v| !v.is_finite())
            .map(|k| (k / self.cols, k % self.cols, self.data[k]))
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Rows gathered at `indices`, in order. This is `C·A` for the sampling
    /// matrix `C` of `indices`.
    pub fn gather_rows(&self, indices: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            check_index(i, self.rows)?;
            data.extend_from_slice(self.row(i));
        }
        Self::new(indices.len(), self.cols, data)
    }

    /// `AᵀA`, the normal matrix.
    pub fn normal_matrix(&self) -> Self {
        let k = self.cols;
        let mut out = Self::zeros(k, k);
        for i in 0..self.rows {
            let r = self.row(i);
            for a in 0..k {
                let ra = r[a];
                if ra == 0.0 {
                    continue;
                }
                let out_row = &mut out.data[a * k..(a + 1) * k];
                for b in a..k {
                    out_row[b] += ra * r[b];
                }
            }
        }
        for a in 0..k {
            for b in 0..a {
                out.data[a * k + b] = out.data[b * k + a];
            }
        }
        out
    }

    /// Largest absolute entry of `self - other`.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[inline]
fn check_index(index: usize, len: usize) -> Result<()> {
    if index < len {
        Ok(())
    } else {
        Err(Error::Index { index, len })
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn matvec(a: &Matrix, x: &[f64]) -> Result<Vec<f64>> {
    if a.cols != x.len() {
        return Err(Error::Dimension(format!(
            "{}x{} matrix times vector of length {}",
            a.rows,
            a.cols,
            x.len()
        )));
    }
    Ok((0..a.rows).map(|i| dot(a.row(i), x)).collect())
}

/// `aᵀ·x`.
pub fn matvec_transpose(a: &Matrix, x: &[f64]) -> Result<Vec<f64>> {
    if a.rows != x.len() {
        return Err(Error::Dimension(format!(
            "transpose of {}x{} matrix times vector of length {}",
            a.rows,
            a.cols,
            x.len()
        )));
    }
    let mut out = vec![0.0; a.cols];
    for (i, &xi) in x.iter().enumerate() {
        for (o, &v) in out.iter_mut().zip(a.row(i)) {
            *o += v * xi;
        }
    }
    Ok(out)
}

/// Inner product of rows `i` and `j` of `a`.
pub fn gram_row(a: &Matrix, i: usize, j: usize) -> Result<f64> {
    check_index(i, a.rows)?;
    check_index(j, a.rows)?;
    Ok(dot(a.row(i), a.row(j)))
}

fn check_square(a: &Matrix) -> Result<()> {
    if a.is_square() {
        Ok(())
    } else {
        Err(Error::Dimension(format!(
            "expected a square matrix, got {}x{}",
            a.rows, a.cols
        )))
    }
}

/// Lower Cholesky factor `L` with `A = L·Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    // row-major lower triangle; the strict upper part is zero
    l: Vec<f64>,
}

impl Cholesky {
    /// Factors a symmetric positive-definite matrix. Only the lower triangle
    /// of `a` is read.
    pub fn factor(a: &Matrix) -> Result<Self> {
        check_square(a)?;
        let n = a.rows;
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let (done, rest) = l.split_at_mut(j * n);
            let row_j = &mut rest[..n];
            let mut d = a.get(j, j);
            for k in 0..j {
                let ljk = {
                    let row_k = &done[k * n..k * n + k];
                    (a.get(j, k) - dot(&row_j[..k], row_k)) / done[k * n + k]
                };
                row_j[k] = ljk;
                d -= ljk * ljk;
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { pivot: j, value: d });
            }
            row_j[j] = d.sqrt();
        }
        Ok(Self { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.l[i * self.n + j]
    }

    /// Solves `L·y = b` in place.
    fn forward(&self, b: &mut [f64]) {
        for i in 0..self.n {
            let s = dot(&self.l[i * self.n..i * self.n + i], &b[..i]);
            b[i] = (b[i] - s) / self.at(i, i);
        }
    }

    /// Solves `Lᵀ·x = y` in place.
    fn backward(&self, y: &mut [f64]) {
        for i in (0..self.n).rev() {
            let mut s = y[i];
            for k in i + 1..self.n {
                s -= self.at(k, i) * y[k];
            }
            y[i] = s / self.at(i, i);
        }
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::Dimension(format!(
                "right-hand side of length {} for a {n}x{n} system",
                b.len(),
                n = self.n
            )));
        }
        let mut x = b.to_vec();
        self.forward(&mut x);
        self.backward(&mut x);
        Ok(x)
    }

    /// `Tr(A⁻¹) = ‖L⁻¹‖_F²`, accumulated one column of `L⁻¹` at a time.
    pub fn trace_inverse(&self) -> f64 {
        let n = self.n;
        let mut col = vec![0.0; n];
        let mut total = 0.0;
        for j in 0..n {
            // column j of L⁻¹ is zero above the diagonal
            col[j] = 1.0 / self.at(j, j);
            let mut acc = col[j] * col[j];
            for i in j + 1..n {
                let mut s = 0.0;
                for k in j..i {
                    s += self.at(i, k) * col[k];
                }
                col[i] = -s / self.at(i, i);
                acc += col[i] * col[i];
            }
            total += acc;
        }
        total
    }
}

/// Solves `a·x = b` for symmetric positive-definite `a`.
pub fn chol_solve(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    Cholesky::factor(a)?.solve(b)
}

/// `Tr(a⁻¹)` for symmetric positive-definite `a`, without forming the inverse.
pub fn trace_inverse(a: &Matrix) -> Result<f64> {
    Ok(Cholesky::factor(a)?.trace_inverse())
}

/// Smallest Schur complement accepted when bordering a matrix whose new
/// diagonal entry is `q_ii`.
#[inline]
pub fn schur_threshold(q_ii: f64) -> f64 {
    1e-12 * q_ii.max(1.0)
}

/// Inverse of the bordered matrix `[[Q, p], [pᵀ, q_ii]]` given `Q⁻¹`.
///
/// With `u = Q⁻¹p` and `h = q_ii − pᵀu` the result is
/// `[[Q⁻¹ + uuᵀ/h, −u/h], [−uᵀ/h, 1/h]]`.
pub fn block_inverse_update(q_inv: &Matrix, p: &[f64], q_ii: f64) -> Result<Matrix> {
    check_square(q_inv)?;
    let t = q_inv.rows;
    let u = matvec(q_inv, p)?;
    let h = q_ii - dot(p, &u);
    let threshold = schur_threshold(q_ii);
    if !(h > threshold) {
        return Err(Error::DegenerateSchur {
            index: None,
            h,
            threshold,
        });
    }
    let h_inv = 1.0 / h;
    let side = t + 1;
    let mut out = Matrix::zeros(side, side);
    for i in 0..t {
        let ui = u[i] * h_inv;
        for j in 0..t {
            out.data[i * side + j] = q_inv.get(i, j) + ui * u[j];
        }
        out.data[i * side + t] = -ui;
        out.data[t * side + i] = -ui;
    }
    out.data[t * side + t] = h_inv;
    Ok(out)
}

/// Least-squares solution `(aᵀa)⁻¹aᵀy` for full-column-rank `a`.
pub fn pseudo_inverse_apply(a: &Matrix, y: &[f64]) -> Result<Vec<f64>> {
    if a.rows < a.cols {
        return Err(Error::Dimension(format!(
            "least squares needs rows >= cols, got {}x{}",
            a.rows, a.cols
        )));
    }
    let rhs = matvec_transpose(a, y)?;
    chol_solve(&a.normal_matrix(), &rhs)
}
