//! Dense row-major matrices and the kernels the training loop needs.
//!
//! Training multiplies a short activation block (n rows) against m x m
//! weights. For small n the kernels stream each weight row once with the
//! activation block held in cache; from 16 rows on they go through a packed
//! GEMM. Summation order depends only on the shapes, so results are
//! bit-reproducible.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    /// Wraps a row-major buffer. Panics if the length does not match.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(
            data.len(),
            rows * cols,
            "buffer of length {} cannot hold a {rows}x{cols} matrix",
            data.len()
        );
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Matrix {
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
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact(0) panics; an empty-column matrix has no data anyway
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    pub fn scale(&mut self, c: f64) {
        self.data.iter_mut().for_each(|x| *x *= c);
    }

    pub fn scaled(&self, c: f64) -> Matrix {
        let mut out = self.clone();
        out.scale(c);
        out
    }

    /// `self += c * other`
    pub fn add_scaled(&mut self, c: f64, other: &Matrix) {
        assert_eq!(self.shape(), other.shape());
        axpy(&mut self.data, c, &other.data);
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm2(&self.data)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// Dot product over 16 independent accumulator lanes, so the vectorized
/// loop is not bound by the latency of a single add chain.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    const L: usize = 16;
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; L];
    let ca = a.chunks_exact(L);
    let cb = b.chunks_exact(L);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..L {
            acc[l] += x[l] * y[l];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    let mut width = L;
    while width > 1 {
        width /= 2;
        for l in 0..width {
            acc[l] += acc[l + width];
        }
    }
    acc[0] + tail
}

/// `y += c * x`
#[inline]
pub fn axpy(y: &mut [f64], c: f64, x: &[f64]) {
    debug_assert_eq!(y.len(), x.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += c * xi;
    }
}

#[inline]
pub fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// Row counts from which the packed GEMM beats the streaming kernels.
const GEMM_MIN_ROWS: usize = 16;

/// Strided read-only view used to hand operands to the packed GEMM.
#[derive(Clone, Copy)]
struct View<'a> {
    data: &'a [f64],
    rows: usize,
    cols: usize,
    rs: isize,
    cs: isize,
}

impl<'a> View<'a> {
    fn of(m: &'a Matrix) -> Self {
        View {
            data: &m.data,
            rows: m.rows,
            cols: m.cols,
            rs: m.cols as isize,
            cs: 1,
        }
    }

    /// the first `k` columns
    fn prefix(self, k: usize) -> Self {
        assert!(k <= self.cols);
        View { cols: k, ..self }
    }

    fn t(self) -> Self {
        View {
            rows: self.cols,
            cols: self.rows,
            rs: self.cs,
            cs: self.rs,
            ..self
        }
    }
}

/// `c = alpha * a * b + beta * c`
fn gemm(alpha: f64, a: View, b: View, beta: f64, c: &mut Matrix) {
    assert_eq!(a.cols, b.rows, "inner dimension mismatch");
    assert_eq!(c.shape(), (a.rows, b.cols));
    for v in [&a, &b] {
        if v.rows > 0 && v.cols > 0 {
            let last = (v.rows - 1) as isize * v.rs + (v.cols - 1) as isize * v.cs;
            assert!((last as usize) < v.data.len(), "view out of bounds");
        }
    }
    if c.data.is_empty() {
        return;
    }
    if a.cols == 0 {
        c.scale(beta);
        return;
    }
    // SAFETY: the asserts above keep every strided access inside the borrowed
    // slices, and `c` is a distinct, exclusively borrowed buffer.
    unsafe {
        matrixmultiply::dgemm(
            a.rows,
            a.cols,
            b.cols,
            alpha,
            a.data.as_ptr(),
            a.rs,
            a.cs,
            b.data.as_ptr(),
            b.rs,
            b.cs,
            beta,
            c.data.as_mut_ptr(),
            c.cols as isize,
            1,
        );
    }
}

/// `out[i][j] = sum_k a[i][k] * b[j][k]` over the first `a.cols()` columns of `b`.
///
/// `b` may be wider than `a`; its trailing columns are ignored. This is how the
/// bias column of a weight matrix is skipped when back-propagating.
pub fn mul_abt(a: &Matrix, b: &Matrix, out: &mut Matrix) {
    let k = a.cols();
    assert!(b.cols() >= k, "inner dimension mismatch");
    assert_eq!(out.shape(), (a.rows(), b.rows()));
    if a.rows() >= GEMM_MIN_ROWS {
        return gemm(1.0, View::of(a), View::of(b).prefix(k).t(), 0.0, out);
    }
    let n = a.rows();
    let ocols = out.cols();
    for j in 0..b.rows() {
        let brow = &b.row(j)[..k];
        for i in 0..n {
            out.data[i * ocols + j] = dot(a.row(i), brow);
        }
    }
}

/// `out = a * b[:, ..width]` where `a` is n x r and `b` is r x (>= width).
pub fn mul_ab_prefix(a: &Matrix, b: &Matrix, width: usize, out: &mut Matrix) {
    assert_eq!(a.cols(), b.rows(), "inner dimension mismatch");
    assert!(b.cols() >= width);
    assert_eq!(out.shape(), (a.rows(), width));
    if a.rows() >= GEMM_MIN_ROWS {
        return gemm(1.0, View::of(a), View::of(b).prefix(width), 0.0, out);
    }
    out.data.iter_mut().for_each(|x| *x = 0.0);
    let n = a.rows();
    let r = b.rows();
    // four rows of `b` per sweep over the output
    let mut j = 0;
    while j + 4 <= r {
        let (b0, b1, b2, b3) = (
            &b.row(j)[..width],
            &b.row(j + 1)[..width],
            &b.row(j + 2)[..width],
            &b.row(j + 3)[..width],
        );
        for i in 0..n {
            let c = &a.data[i * a.cols + j..i * a.cols + j + 4];
            let o = &mut out.data[i * width..(i + 1) * width];
            for k in 0..width {
                o[k] += c[0] * b0[k] + c[1] * b1[k] + c[2] * b2[k] + c[3] * b3[k];
            }
        }
        j += 4;
    }
    for j in j..r {
        let brow = &b.row(j)[..width];
        for i in 0..n {
            axpy(&mut out.data[i * width..(i + 1) * width], a.data[i * a.cols + j], brow);
        }
    }
}

/// `c += alpha * a^T b` with `a` n x r, `b` n x k and `c` r x k.
///
/// For few rows this is a rank-n update applied row by row, so `c` is read and
/// written once.
pub fn add_atb(c: &mut Matrix, alpha: f64, a: &Matrix, b: &Matrix) {
    assert_eq!(a.rows(), b.rows());
    assert_eq!(c.shape(), (a.cols(), b.cols()));
    if a.rows() >= GEMM_MIN_ROWS {
        return gemm(alpha, View::of(a).t(), View::of(b), 1.0, c);
    }
    let n = a.rows();
    let cc = c.cols;
    for j in 0..c.rows {
        let crow = &mut c.data[j * cc..(j + 1) * cc];
        let coef = |i: usize| alpha * a.data[i * a.cols + j];
        let mut i = 0;
        while i + 4 <= n {
            let s = [coef(i), coef(i + 1), coef(i + 2), coef(i + 3)];
            let (b0, b1, b2, b3) = (b.row(i), b.row(i + 1), b.row(i + 2), b.row(i + 3));
            for k in 0..cc {
                crow[k] += s[0] * b0[k] + s[1] * b1[k] + s[2] * b2[k] + s[3] * b3[k];
            }
            i += 4;
        }
        for i in i..n {
            axpy(crow, coef(i), b.row(i));
        }
    }
}

/// `a * b` for small dense operands.
pub fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    assert_eq!(a.cols(), b.rows(), "inner dimension mismatch");
    let mut out = Matrix::zeros(a.rows(), b.cols());
    mul_ab_prefix(a, b, b.cols(), &mut out);
    out
}

/// Gram matrix `a a^T` through a packed GEMM; used for large cosine matrices.
pub fn gram(a: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(a.rows(), a.rows());
    gemm(1.0, View::of(a), View::of(a).t(), 0.0, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &Matrix, b: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut s = 0.0;
                for k in 0..a.cols() {
                    s += a.get(i, k) * b.get(k, j);
                }
                out.set(i, j, s);
            }
        }
        out
    }

    fn sample(rows: usize, cols: usize, salt: f64) -> Matrix {
        let data = (0..rows * cols)
            .map(|i| ((i as f64 + salt) * 0.7361).sin())
            .collect();
        Matrix::from_vec(rows, cols, data)
    }

    fn close(a: &Matrix, b: &Matrix) -> bool {
        a.shape() == b.shape()
            && a.as_slice()
                .iter()
                .zip(b.as_slice())
                .all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn dot_handles_remainders() {
        let a: Vec<f64> = (0..7).map(f64::from).collect();
        assert_eq!(dot(&a, &a), 91.0);
        assert_eq!(dot(&[], &[]), 0.0);
    }

    #[test]
    fn kernels_agree_with_naive_products() {
        let a = sample(3, 5, 0.0);
        let b = sample(4, 6, 1.0);
        let mut out = Matrix::zeros(3, 4);
        mul_abt(&a, &b, &mut out);
        let bt = Matrix::from_rows(
            &(0..4)
                .map(|j| b.row(j)[..5].to_vec())
                .collect::<Vec<_>>(),
        )
        .transpose();
        assert!(close(&out, &naive(&a, &bt)));

        let c = sample(5, 7, 2.0);
        let mut out = Matrix::zeros(3, 6);
        mul_ab_prefix(&a, &c, 6, &mut out);
        let c6 = Matrix::from_rows(&(0..5).map(|j| c.row(j)[..6].to_vec()).collect::<Vec<_>>());
        assert!(close(&out, &naive(&a, &c6)));

        let mut acc = sample(5, 6, 3.0);
        let expected = {
            let mut e = acc.clone();
            e.add_scaled(-0.5, &naive(&a.transpose(), &sample(3, 6, 4.0)));
            e
        };
        add_atb(&mut acc, -0.5, &a, &sample(3, 6, 4.0));
        assert!(close(&acc, &expected));
    }

    #[test]
    fn packed_path_agrees_with_naive() {
        let a = sample(20, 7, 0.0);
        let b = sample(9, 8, 1.0);
        let mut out = Matrix::zeros(20, 9);
        mul_abt(&a, &b, &mut out);
        let b7 = Matrix::from_rows(&(0..9).map(|j| b.row(j)[..7].to_vec()).collect::<Vec<_>>());
        assert!(close(&out, &naive(&a, &b7.transpose())));

        let c = sample(7, 5, 2.0);
        let mut out = Matrix::zeros(20, 4);
        mul_ab_prefix(&a, &c, 4, &mut out);
        let c4 = Matrix::from_rows(&(0..7).map(|j| c.row(j)[..4].to_vec()).collect::<Vec<_>>());
        assert!(close(&out, &naive(&a, &c4)));

        let mut acc = sample(7, 6, 3.0);
        let rhs = sample(20, 6, 4.0);
        let mut expected = acc.clone();
        expected.add_scaled(2.0, &naive(&a.transpose(), &rhs));
        add_atb(&mut acc, 2.0, &a, &rhs);
        assert!(close(&acc, &expected));
    }

    #[test]
    fn gram_matches_naive() {
        let a = sample(9, 13, 0.5);
        assert!(close(&gram(&a), &naive(&a, &a.transpose())));
    }
}
