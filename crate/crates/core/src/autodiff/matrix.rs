//! Dense row-major matrices and the numeric kernels shared by the tape and
//! by inference code.
//!
//! Every kernel computes each output row from the matching input rows only,
//! so a row's value does not depend on which batch it was evaluated in.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(rows * cols, data.len(), "matrix data length mismatch");
        Matrix { rows, cols, data }
    }

    pub fn scalar(value: f64) -> Self {
        Matrix::from_vec(1, 1, vec![value])
    }

    pub fn column(values: Vec<f64>) -> Self {
        let rows = values.len();
        Matrix::from_vec(rows, 1, values)
    }

    pub fn row_vector(values: Vec<f64>) -> Self {
        let cols = values.len();
        Matrix::from_vec(1, cols, values)
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.as_ref().len(), cols, "ragged rows");
            data.extend_from_slice(r.as_ref());
        }
        Matrix::from_vec(rows.len(), cols, data)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    /// Rows selected by index, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix::from_vec(idx.len(), self.cols, data)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix::from_vec(self.rows, self.cols, self.data.iter().map(|&x| f(x)).collect())
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// Strided general matrix product `c = alpha * op(a) * op(b) + beta * c`.
///
/// `a` is `m x k` and `b` is `k x n` after the optional transposes.
#[allow(clippy::too_many_arguments)]
fn gemm(m: usize, k: usize, n: usize, a: &[f64], a_t: bool, b: &[f64], b_t: bool, beta: f64, c: &mut [f64]) {
    if m == 0 || n == 0 {
        return;
    }
    // a stored as (m x k) or, when transposed, as (k x m)
    let (rsa, csa) = if a_t { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_t { (1, k as isize) } else { (n as isize, 1) };
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    // SAFETY: the slice lengths are checked above and the strides describe
    // in-bounds row-major (or transposed row-major) layouts.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

pub fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    assert_eq!(a.cols, b.rows, "matmul inner dimension");
    let mut out = Matrix::zeros(a.rows, b.cols);
    gemm(
        a.rows,
        a.cols,
        b.cols,
        &a.data,
        false,
        &b.data,
        false,
        0.0,
        &mut out.data,
    );
    out
}

/// `acc += a^T * b`, with `a: m x k`, `b: m x n`, `acc: k x n`.
pub fn matmul_tn_acc(a: &Matrix, b: &Matrix, acc: &mut [f64]) {
    assert_eq!(a.rows, b.rows);
    gemm(a.cols, a.rows, b.cols, &a.data, true, &b.data, false, 1.0, acc);
}

/// `acc += a * b^T`, with `a: m x n`, `b: k x n`, `acc: m x k`.
pub fn matmul_nt_acc(a: &Matrix, b: &Matrix, acc: &mut [f64]) {
    assert_eq!(a.cols, b.cols);
    gemm(a.rows, a.cols, b.rows, &a.data, false, &b.data, true, 1.0, acc);
}

/// Broadcast `b` over `a`. `b` must have the same shape as `a`, or be a
/// single row, a single column, or a scalar.
pub fn broadcast_zip(a: &Matrix, b: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
    let (m, n) = a.shape();
    let mut out = Vec::with_capacity(m * n);
    match b.shape() {
        (r, c) if r == m && c == n => {
            out.extend(a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)));
        }
        (1, c) if c == n => {
            for i in 0..m {
                out.extend(a.row(i).iter().zip(&b.data).map(|(&x, &y)| f(x, y)));
            }
        }
        (r, 1) if r == m => {
            for i in 0..m {
                let y = b.data[i];
                out.extend(a.row(i).iter().map(|&x| f(x, y)));
            }
        }
        (1, 1) => {
            let y = b.data[0];
            out.extend(a.data.iter().map(|&x| f(x, y)));
        }
        s => panic!("cannot broadcast {s:?} onto {:?}", a.shape()),
    }
    Matrix::from_vec(m, n, out)
}

/// Sum `g` (shaped like the broadcast result) back down to `shape`.
pub fn reduce_to(g: &Matrix, shape: (usize, usize)) -> Matrix {
    let (m, n) = g.shape();
    match shape {
        (r, c) if r == m && c == n => g.clone(),
        (1, c) if c == n => {
            let mut out = vec![0.0; n];
            for i in 0..m {
                for (o, &x) in out.iter_mut().zip(g.row(i)) {
                    *o += x;
                }
            }
            Matrix::from_vec(1, n, out)
        }
        (r, 1) if r == m => Matrix::column((0..m).map(|i| g.row(i).iter().sum()).collect()),
        (1, 1) => Matrix::scalar(g.data.iter().sum()),
        s => panic!("cannot reduce {:?} to {s:?}", g.shape()),
    }
}

/// Row-wise log-softmax, max-shifted.
pub fn log_softmax_rows(x: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(x.rows, x.cols);
    for i in 0..x.rows {
        let row = x.row(i);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
        for (o, &v) in out.row_mut(i).iter_mut().zip(row) {
            *o = v - lse;
        }
    }
    out
}
