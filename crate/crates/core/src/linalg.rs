//! Minimal dense row-major matrix used throughout the model code.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Panics if `data.len() != rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length mismatch");
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
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
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `self · otherᵀ` where both operands store one vector per row.
    pub fn matmul_transposed(&self, other: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(self.rows, other.rows);
        add_matmul_nt(&mut out, self, other);
        out
    }
}

// The three products below work on blocks of four rows so that each loaded
// row of the shared operand is used four times.

/// `out += a · bᵀ`.
pub fn add_matmul_nt(out: &mut Matrix, a: &Matrix, b: &Matrix) {
    assert_eq!(a.cols, b.cols, "inner dimensions differ");
    assert_eq!(out.shape(), (a.rows, b.rows), "output shape");
    let cols = out.cols;
    let mut r = 0;
    while r + 4 <= a.rows {
        let x = [a.row(r), a.row(r + 1), a.row(r + 2), a.row(r + 3)];
        for j in 0..b.rows {
            let s = dot4(b.row(j), x);
            for (t, v) in s.into_iter().enumerate() {
                out.data[(r + t) * cols + j] += v;
            }
        }
        r += 4;
    }
    for r in r..a.rows {
        for j in 0..b.rows {
            out.data[r * cols + j] += dot(a.row(r), b.row(j));
        }
    }
}

/// `out += aᵀ · b`.
pub fn add_matmul_tn(out: &mut Matrix, a: &Matrix, b: &Matrix) {
    assert_eq!(a.rows, b.rows, "inner dimensions differ");
    assert_eq!(out.shape(), (a.cols, b.cols), "output shape");
    let mut r = 0;
    while r + 4 <= a.rows {
        let src = [b.row(r), b.row(r + 1), b.row(r + 2), b.row(r + 3)];
        for p in 0..a.cols {
            let c = [a.get(r, p), a.get(r + 1, p), a.get(r + 2, p), a.get(r + 3, p)];
            axpy4(out.row_mut(p), c, src);
        }
        r += 4;
    }
    for r in r..a.rows {
        for p in 0..a.cols {
            let c = a.get(r, p);
            axpy(out.row_mut(p), c, b.row(r));
        }
    }
}

/// `out += a · b`.
pub fn add_matmul_nn(out: &mut Matrix, a: &Matrix, b: &Matrix) {
    assert_eq!(a.cols, b.rows, "inner dimensions differ");
    assert_eq!(out.shape(), (a.rows, b.cols), "output shape");
    for r in 0..a.rows {
        let coef = a.row(r);
        let dst = &mut out.data[r * b.cols..(r + 1) * b.cols];
        let mut k = 0;
        while k + 4 <= a.cols {
            let c = [coef[k], coef[k + 1], coef[k + 2], coef[k + 3]];
            axpy4(dst, c, [b.row(k), b.row(k + 1), b.row(k + 2), b.row(k + 3)]);
            k += 4;
        }
        for (k, &c) in coef.iter().enumerate().skip(k) {
            axpy(dst, c, b.row(k));
        }
    }
}

#[inline]
fn dot4(w: &[f64], x: [&[f64]; 4]) -> [f64; 4] {
    let n = w.len();
    let (x0, x1, x2, x3) = (&x[0][..n], &x[1][..n], &x[2][..n], &x[3][..n]);
    let mut acc = [[0.0f64; 2]; 4];
    let mut i = 0;
    while i + 2 <= n {
        for l in 0..2 {
            let wv = w[i + l];
            acc[0][l] += wv * x0[i + l];
            acc[1][l] += wv * x1[i + l];
            acc[2][l] += wv * x2[i + l];
            acc[3][l] += wv * x3[i + l];
        }
        i += 2;
    }
    let mut out = [
        acc[0][0] + acc[0][1],
        acc[1][0] + acc[1][1],
        acc[2][0] + acc[2][1],
        acc[3][0] + acc[3][1],
    ];
    if i < n {
        let wv = w[i];
        out[0] += wv * x0[i];
        out[1] += wv * x1[i];
        out[2] += wv * x2[i];
        out[3] += wv * x3[i];
    }
    out
}

/// `dst += Σ_t c[t] · src[t]`
#[inline]
fn axpy4(dst: &mut [f64], c: [f64; 4], src: [&[f64]; 4]) {
    let n = dst.len();
    let (s0, s1, s2, s3) = (&src[0][..n], &src[1][..n], &src[2][..n], &src[3][..n]);
    for i in 0..n {
        dst[i] += c[0] * s0[i] + c[1] * s1[i] + c[2] * s2[i] + c[3] * s3[i];
    }
}

/// Inner product with four independent accumulators so the loop vectorises.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for i in 0..4 {
            acc[i] += x[i] * y[i];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `dst += alpha * src`
#[inline]
pub fn axpy(dst: &mut [f64], alpha: f64, src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += alpha * s;
    }
}

/// In-place numerically stable log-softmax of one row.
pub fn log_softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = row.iter().map(|v| (v - max).exp()).sum();
    let lse = max + sum.ln();
    for v in row.iter_mut() {
        *v -= lse;
    }
}

/// In-place softmax of one row.
pub fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `(softplus(x), sigmoid(x))` from a single exponential.
#[inline]
pub fn softplus_with_slope(x: f64) -> (f64, f64) {
    let e = (-x.abs()).exp();
    let slope = if x >= 0.0 { 1.0 / (1.0 + e) } else { e / (1.0 + e) };
    (x.max(0.0) + e.ln_1p(), slope)
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
