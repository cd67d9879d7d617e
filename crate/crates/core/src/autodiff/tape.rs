//! Reverse-mode differentiation over matrix-valued nodes.
//!
//! A [`Tape`] records every operation eagerly: node values are computed when
//! the node is created, so the same builder code doubles as the inference
//! path. Parameters enter through [`Tape::register`], which returns a
//! [`ParamSet`] handle; [`Tape::backward`] produces one flat gradient per
//! registered set, aligned with its [`ParamVector`].

use super::matrix::{self, Matrix};
use super::mlp::ParamVector;
use crate::error::{GslError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamSet(usize);

#[derive(Debug, Clone)]
enum Op {
    Const,
    Leaf { set: usize, offset: usize },
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Min(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Relu(Var),
    Tanh(Var),
    Sigmoid(Var),
    Exp(Var),
    Log(Var),
    Square(Var),
    Clamp(Var, f64, f64),
    LogSoftmax(Var),
    Pick(Var, Vec<usize>),
    SumCols(Var),
    Sum(Var),
    ConcatCols(Var, Var),
}

#[derive(Debug)]
struct Node {
    value: Matrix,
    op: Op,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    sets: Vec<usize>,
}

/// Gradients for every registered parameter set.
#[derive(Debug, Clone)]
pub struct Gradients {
    per_set: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn get(&self, set: ParamSet) -> &[f64] {
        &self.per_set[set.0]
    }

    pub fn take(&mut self, set: ParamSet) -> Vec<f64> {
        std::mem::take(&mut self.per_set[set.0])
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    /// Value of a 1x1 node.
    pub fn scalar(&self, v: Var) -> f64 {
        let m = self.value(v);
        debug_assert_eq!(m.shape(), (1, 1));
        m.data[0]
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.value(v).shape()
    }

    pub fn register(&mut self, params: &ParamVector) -> ParamSet {
        self.sets.push(params.len());
        ParamSet(self.sets.len() - 1)
    }

    /// Leaf node for the block of `params` at `offset` with the given shape.
    pub fn param_block(&mut self, set: ParamSet, params: &ParamVector, offset: usize, rows: usize, cols: usize) -> Var {
        let data = params.values[offset..offset + rows * cols].to_vec();
        self.push(Matrix::from_vec(rows, cols, data), Op::Leaf { set: set.0, offset })
    }

    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Const)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = matrix::matmul(self.value(a), self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    /// Elementwise sum; `b` may broadcast as a row, column, or scalar.
    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = matrix::broadcast_zip(self.value(a), self.value(b), |x, y| x + y);
        self.push(v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = matrix::broadcast_zip(self.value(a), self.value(b), |x, y| x - y);
        self.push(v, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = matrix::broadcast_zip(self.value(a), self.value(b), |x, y| x * y);
        self.push(v, Op::Mul(a, b))
    }

    /// Elementwise minimum of two equally shaped nodes. Ties send the
    /// gradient to `a`.
    pub fn min(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "min shape");
        let v = matrix::broadcast_zip(self.value(a), self.value(b), f64::min);
        self.push(v, Op::Min(a, b))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a).map(|x| x * c);
        self.push(v, Op::Scale(a, c))
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.scale(a, -1.0)
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a).map(|x| x + c);
        self.push(v, Op::AddScalar(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| x.max(0.0));
        self.push(v, Op::Relu(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).map(f64::tanh);
        self.push(v, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| 1.0 / (1.0 + (-x).exp()));
        self.push(v, Op::Sigmoid(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let v = self.value(a).map(f64::exp);
        self.push(v, Op::Exp(a))
    }

    pub fn log(&mut self, a: Var) -> Var {
        let v = self.value(a).map(f64::ln);
        self.push(v, Op::Log(a))
    }

    pub fn square(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| x * x);
        self.push(v, Op::Square(a))
    }

    /// Clamp into `[lo, hi]`; the gradient is zero wherever the clamp is active.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        let v = self.value(a).map(|x| x.clamp(lo, hi));
        self.push(v, Op::Clamp(a, lo, hi))
    }

    pub fn log_softmax(&mut self, a: Var) -> Var {
        let v = matrix::log_softmax_rows(self.value(a));
        self.push(v, Op::LogSoftmax(a))
    }

    /// One column per row: `out[i] = a[i, idx[i]]`, shaped `rows x 1`.
    pub fn pick(&mut self, a: Var, idx: Vec<usize>) -> Var {
        let src = self.value(a);
        assert_eq!(src.rows, idx.len(), "pick index count");
        let vals = idx
            .iter()
            .enumerate()
            .map(|(i, &j)| {
                assert!(j < src.cols, "pick index {j} out of range {}", src.cols);
                src.get(i, j)
            })
            .collect();
        self.push(Matrix::column(vals), Op::Pick(a, idx))
    }

    /// Row sums, shaped `rows x 1`.
    pub fn sum_cols(&mut self, a: Var) -> Var {
        let src = self.value(a);
        let vals = (0..src.rows).map(|i| src.row(i).iter().sum()).collect();
        self.push(Matrix::column(vals), Op::SumCols(a))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data.iter().sum();
        self.push(Matrix::scalar(s), Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let n = self.value(a).len().max(1) as f64;
        let s = self.sum(a);
        self.scale(s, 1.0 / n)
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(va.rows, vb.rows, "concat rows");
        let mut data = Vec::with_capacity(va.len() + vb.len());
        for i in 0..va.rows {
            data.extend_from_slice(va.row(i));
            data.extend_from_slice(vb.row(i));
        }
        let v = Matrix::from_vec(va.rows, va.cols + vb.cols, data);
        self.push(v, Op::ConcatCols(a, b))
    }

    /// Gradient of the scalar `loss` with respect to one parameter set.
    pub fn grad(&self, loss: Var, set: ParamSet) -> Result<Vec<f64>> {
        let mut g = self.backward(loss)?;
        Ok(g.take(set))
    }

    /// Reverse sweep from a 1x1 `loss` node. Parameters the loss does not
    /// reach receive exact zeros.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.shape(loss) != (1, 1) {
            return Err(GslError::contract(format!(
                "gradient requested for non-scalar node of shape {:?}",
                self.shape(loss)
            )));
        }
        let mut per_set: Vec<Vec<f64>> = self.sets.iter().map(|&n| vec![0.0; n]).collect();
        let mut grads: Vec<Option<Matrix>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Matrix::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Const => {}
                Op::Leaf { set, offset } => {
                    let dst = &mut per_set[*set][*offset..*offset + g.len()];
                    for (d, &x) in dst.iter_mut().zip(&g.data) {
                        *d += x;
                    }
                }
                Op::MatMul(a, b) => {
                    let (va, vb) = (self.value(*a), self.value(*b));
                    let ga = accumulate_with(&mut grads, *a, va.shape());
                    matrix::matmul_nt_acc(&g, vb, &mut ga.data);
                    let gb = accumulate_with(&mut grads, *b, vb.shape());
                    matrix::matmul_tn_acc(va, &g, &mut gb.data);
                }
                Op::Add(a, b) => {
                    let sb = self.shape(*b);
                    add_grad(&mut grads, *a, &g);
                    add_grad(&mut grads, *b, &matrix::reduce_to(&g, sb));
                }
                Op::Sub(a, b) => {
                    let sb = self.shape(*b);
                    add_grad(&mut grads, *a, &g);
                    let neg = matrix::reduce_to(&g, sb).map(|x| -x);
                    add_grad(&mut grads, *b, &neg);
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (self.value(*a), self.value(*b));
                    let ga = matrix::broadcast_zip(&g, vb, |x, y| x * y);
                    let gb_full = zip(&g, va, |x, y| x * y);
                    add_grad(&mut grads, *a, &ga);
                    add_grad(&mut grads, *b, &matrix::reduce_to(&gb_full, vb.shape()));
                }
                Op::Min(a, b) => {
                    let (va, vb) = (self.value(*a), self.value(*b));
                    let mut ga = Matrix::zeros(g.rows, g.cols);
                    let mut gb = Matrix::zeros(g.rows, g.cols);
                    for i in 0..g.len() {
                        if va.data[i] <= vb.data[i] {
                            ga.data[i] = g.data[i];
                        } else {
                            gb.data[i] = g.data[i];
                        }
                    }
                    add_grad(&mut grads, *a, &ga);
                    add_grad(&mut grads, *b, &gb);
                }
                Op::Scale(a, c) => add_grad(&mut grads, *a, &g.map(|x| x * c)),
                Op::AddScalar(a) => add_grad(&mut grads, *a, &g),
                Op::Relu(a) => {
                    let va = self.value(*a);
                    let d = zip(&g, va, |gi, x| if x > 0.0 { gi } else { 0.0 });
                    add_grad(&mut grads, *a, &d);
                }
                Op::Tanh(a) => {
                    let d = zip(&g, &node.value, |gi, t| gi * (1.0 - t * t));
                    add_grad(&mut grads, *a, &d);
                }
                Op::Sigmoid(a) => {
                    let d = zip(&g, &node.value, |gi, s| gi * s * (1.0 - s));
                    add_grad(&mut grads, *a, &d);
                }
                Op::Exp(a) => {
                    let d = zip(&g, &node.value, |gi, e| gi * e);
                    add_grad(&mut grads, *a, &d);
                }
                Op::Log(a) => {
                    let d = zip(&g, self.value(*a), |gi, x| gi / x);
                    add_grad(&mut grads, *a, &d);
                }
                Op::Square(a) => {
                    let d = zip(&g, self.value(*a), |gi, x| 2.0 * gi * x);
                    add_grad(&mut grads, *a, &d);
                }
                Op::Clamp(a, lo, hi) => {
                    let d = zip(&g, self.value(*a), |gi, x| if x < *lo || x > *hi { 0.0 } else { gi });
                    add_grad(&mut grads, *a, &d);
                }
                Op::LogSoftmax(a) => {
                    // d/dx_j = g_j - softmax_j * sum_k g_k
                    let y = &node.value;
                    let mut d = Matrix::zeros(g.rows, g.cols);
                    for i in 0..g.rows {
                        let gs: f64 = g.row(i).iter().sum();
                        for ((o, &gi), &yi) in d.row_mut(i).iter_mut().zip(g.row(i)).zip(y.row(i)) {
                            *o = gi - yi.exp() * gs;
                        }
                    }
                    add_grad(&mut grads, *a, &d);
                }
                Op::Pick(a, idx) => {
                    let (r, c) = self.shape(*a);
                    let mut d = Matrix::zeros(r, c);
                    for (i, &j) in idx.iter().enumerate() {
                        d.data[i * c + j] = g.data[i];
                    }
                    add_grad(&mut grads, *a, &d);
                }
                Op::SumCols(a) => {
                    let (r, c) = self.shape(*a);
                    let mut d = Matrix::zeros(r, c);
                    for i in 0..r {
                        d.row_mut(i).fill(g.data[i]);
                    }
                    add_grad(&mut grads, *a, &d);
                }
                Op::Sum(a) => {
                    let (r, c) = self.shape(*a);
                    add_grad(&mut grads, *a, &Matrix::from_vec(r, c, vec![g.data[0]; r * c]));
                }
                Op::ConcatCols(a, b) => {
                    let ca = self.shape(*a).1;
                    let cb = self.shape(*b).1;
                    let mut ga = Matrix::zeros(g.rows, ca);
                    let mut gb = Matrix::zeros(g.rows, cb);
                    for i in 0..g.rows {
                        let row = g.row(i);
                        ga.row_mut(i).copy_from_slice(&row[..ca]);
                        gb.row_mut(i).copy_from_slice(&row[ca..]);
                    }
                    add_grad(&mut grads, *a, &ga);
                    add_grad(&mut grads, *b, &gb);
                }
            }
        }
        Ok(Gradients { per_set })
    }
}

fn accumulate_with(grads: &mut [Option<Matrix>], v: Var, shape: (usize, usize)) -> &mut Matrix {
    grads[v.0].get_or_insert_with(|| Matrix::zeros(shape.0, shape.1))
}

fn add_grad(grads: &mut [Option<Matrix>], v: Var, g: &Matrix) {
    match &mut grads[v.0] {
        Some(acc) => {
            for (a, &x) in acc.data.iter_mut().zip(&g.data) {
                *a += x;
            }
        }
        slot @ None => *slot = Some(g.clone()),
    }
}

fn zip(a: &Matrix, b: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
    Matrix::from_vec(
        a.rows,
        a.cols,
        a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::mlp::ParamVector;

    fn pv(values: Vec<f64>) -> ParamVector {
        let n = values.len();
        ParamVector::new(values, vec![("p".into(), 1, n)]).unwrap()
    }

    #[test]
    fn sum_of_params_has_unit_gradient() {
        let p = pv(vec![0.3, -1.0, 2.5, 4.0]);
        let mut t = Tape::new();
        let set = t.register(&p);
        let x = t.param_block(set, &p, 0, 1, 4);
        let loss = t.sum(x);
        assert_eq!(t.grad(loss, set).unwrap(), vec![1.0; 4]);
    }

    #[test]
    fn unreached_block_gets_exact_zeros() {
        let p = pv(vec![1.0, 2.0, 3.0, 4.0]);
        let mut t = Tape::new();
        let set = t.register(&p);
        let first = t.param_block(set, &p, 0, 1, 2);
        let _second = t.param_block(set, &p, 2, 1, 2);
        let sq = t.square(first);
        let loss = t.sum(sq);
        assert_eq!(t.grad(loss, set).unwrap(), vec![2.0, 4.0, 0.0, 0.0]);
    }

    #[test]
    fn non_scalar_loss_is_rejected() {
        let p = pv(vec![1.0, 2.0]);
        let mut t = Tape::new();
        let set = t.register(&p);
        let x = t.param_block(set, &p, 0, 1, 2);
        assert!(matches!(t.grad(x, set), Err(GslError::Contract(_))));
    }

    #[test]
    fn broadcast_gradients_reduce() {
        // loss = sum(X * r) with r a broadcast row -> dr = column sums of X
        let p = pv(vec![0.5, -2.0]);
        let mut t = Tape::new();
        let set = t.register(&p);
        let r = t.param_block(set, &p, 0, 1, 2);
        let x = t.constant(Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]));
        let prod = t.mul(x, r);
        let loss = t.sum(prod);
        assert_eq!(t.grad(loss, set).unwrap(), vec![9.0, 12.0]);
    }
}
