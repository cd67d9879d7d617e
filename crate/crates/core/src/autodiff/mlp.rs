//! Flat parameter vectors and multilayer perceptrons with policy heads.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::tape::{ParamSet, Tape, Var};
use crate::error::{GslError, Result};

/// One named block of a [`ParamVector`], stored row-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

impl ManifestEntry {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub values: Vec<f64>,
    pub manifest: Vec<ManifestEntry>,
}

impl ParamVector {
    pub fn new(values: Vec<f64>, manifest: Vec<(String, usize, usize)>) -> Result<Self> {
        let manifest: Vec<ManifestEntry> = manifest
            .into_iter()
            .map(|(name, rows, cols)| ManifestEntry { name, rows, cols })
            .collect();
        let total: usize = manifest.iter().map(ManifestEntry::len).sum();
        if total != values.len() {
            return Err(GslError::config(format!(
                "parameter count {} does not match manifest extent {total}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(GslError::NonFinite(format!("parameter {i}")));
        }
        Ok(ParamVector { values, manifest })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Offset of each manifest block, in manifest order.
    pub fn offsets(&self) -> Vec<usize> {
        self.manifest
            .iter()
            .scan(0, |acc, e| {
                let o = *acc;
                *acc += e.len();
                Some(o)
            })
            .collect()
    }

    pub fn same_layout(&self, other: &ParamVector) -> bool {
        self.manifest == other.manifest
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum HeadKind {
    Categorical { actions: usize },
    Gaussian { dim: usize, min_std: f64, max_std: f64 },
    Scalar,
}

impl HeadKind {
    pub fn output_dim(&self) -> usize {
        match self {
            HeadKind::Categorical { actions } => *actions,
            HeadKind::Gaussian { dim, .. } => *dim,
            HeadKind::Scalar => 1,
        }
    }

    pub fn is_policy(&self) -> bool {
        !matches!(self, HeadKind::Scalar)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub head: HeadKind,
}

/// Head outputs for a batch of inputs, as tape nodes.
#[derive(Debug, Clone, Copy)]
pub enum HeadVars {
    Logits(Var),
    /// `mean` is `batch x dim`; `log_std` is a `1 x dim` row, already clamped.
    Gaussian {
        mean: Var,
        log_std: Var,
    },
    Scalar(Var),
}

/// Head output for a single input.
#[derive(Debug, Clone, PartialEq)]
pub enum HeadOutput {
    Logits(Vec<f64>),
    Gaussian { mean: Vec<f64>, std: Vec<f64> },
    Scalar(f64),
}

impl MlpSpec {
    pub fn new(input_dim: usize, hidden: Vec<usize>, head: HeadKind) -> Self {
        MlpSpec {
            input_dim,
            hidden,
            activation: Activation::Relu,
            head,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(GslError::config("mlp input dimension must be positive"));
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return Err(GslError::config("hidden layer sizes must be positive"));
        }
        match &self.head {
            HeadKind::Categorical { actions } if *actions == 0 => {
                Err(GslError::config("categorical head needs at least one action"))
            }
            HeadKind::Gaussian { dim, min_std, max_std } => {
                if *dim == 0 {
                    Err(GslError::config("gaussian head needs a positive dimension"))
                } else if !(*min_std > 0.0 && min_std <= max_std) {
                    Err(GslError::config(format!(
                        "gaussian head needs 0 < min_std <= max_std, got ({min_std}, {max_std})"
                    )))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    pub fn manifest(&self) -> Vec<(String, usize, usize)> {
        let mut out = Vec::new();
        let mut fan_in = self.input_dim;
        for (i, &h) in self.hidden.iter().enumerate() {
            out.push((format!("l{i}.w"), fan_in, h));
            out.push((format!("l{i}.b"), 1, h));
            fan_in = h;
        }
        let out_dim = self.head.output_dim();
        out.push(("out.w".into(), fan_in, out_dim));
        out.push(("out.b".into(), 1, out_dim));
        if let HeadKind::Gaussian { dim, .. } = self.head {
            out.push(("log_std".into(), 1, dim));
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.manifest().iter().map(|(_, r, c)| r * c).sum()
    }

    /// Orthogonal initialization: gain 1 for hidden layers, 0.01 for a
    /// policy output layer and 1 for a scalar output layer. Biases start
    /// at zero and a gaussian log-std starts at `ln(1)` clamped into range.
    pub fn init<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamVector {
        let out_gain = if self.head.is_policy() { 0.01 } else { 1.0 };
        self.init_with_gains(rng, 1.0, out_gain)
    }

    pub fn init_with_gains<R: Rng + ?Sized>(&self, rng: &mut R, hidden_gain: f64, out_gain: f64) -> ParamVector {
        let manifest = self.manifest();
        let mut values = Vec::with_capacity(self.param_count());
        for (name, rows, cols) in &manifest {
            if name.ends_with(".w") {
                let gain = if name == "out.w" { out_gain } else { hidden_gain };
                values.extend(orthogonal(rng, *rows, *cols).into_iter().map(|x| x * gain));
            } else if name == "log_std" {
                let HeadKind::Gaussian { min_std, max_std, .. } = self.head else {
                    unreachable!()
                };
                values.extend(std::iter::repeat(1.0f64.clamp(min_std, max_std).ln()).take(*cols));
            } else {
                values.extend(std::iter::repeat(0.0).take(rows * cols));
            }
        }
        ParamVector::new(values, manifest).expect("initializer matches manifest")
    }

    /// Project a gaussian head's raw log-std back into the clamp range, so
    /// the clamp in the forward pass never blocks its gradient for long.
    pub fn project(&self, params: &mut ParamVector) {
        if let HeadKind::Gaussian { dim, min_std, max_std } = self.head {
            let n = params.values.len();
            for v in &mut params.values[n - dim..] {
                *v = v.clamp(min_std.ln(), max_std.ln());
            }
        }
    }

    fn check_params(&self, params: &ParamVector) -> Result<()> {
        let expected = self.manifest();
        let ok = expected.len() == params.manifest.len()
            && expected
                .iter()
                .zip(&params.manifest)
                .all(|((n, r, c), e)| *n == e.name && *r == e.rows && *c == e.cols);
        if ok {
            Ok(())
        } else {
            Err(GslError::config("parameters do not match the network's manifest"))
        }
    }

    /// Record the forward pass of a batch (`batch x input_dim`) on `tape`.
    pub fn forward_tape(&self, tape: &mut Tape, set: ParamSet, params: &ParamVector, input: Var) -> Result<HeadVars> {
        self.check_params(params)?;
        let (_, cols) = tape.shape(input);
        if cols != self.input_dim {
            return Err(GslError::config(format!(
                "input has {cols} features, network expects {}",
                self.input_dim
            )));
        }
        let offsets = params.offsets();
        let m = &params.manifest;
        let block = |tape: &mut Tape, i: usize| tape.param_block(set, params, offsets[i], m[i].rows, m[i].cols);
        let mut h = input;
        let mut idx = 0;
        for _ in &self.hidden {
            let w = block(tape, idx);
            let b = block(tape, idx + 1);
            let z = tape.matmul(h, w);
            let z = tape.add(z, b);
            h = match self.activation {
                Activation::Relu => tape.relu(z),
                Activation::Tanh => tape.tanh(z),
            };
            idx += 2;
        }
        let w = block(tape, idx);
        let b = block(tape, idx + 1);
        let z = tape.matmul(h, w);
        let out = tape.add(z, b);
        Ok(match &self.head {
            HeadKind::Categorical { .. } => HeadVars::Logits(out),
            HeadKind::Scalar => HeadVars::Scalar(out),
            HeadKind::Gaussian { min_std, max_std, .. } => {
                let raw = block(tape, idx + 2);
                let log_std = tape.clamp(raw, min_std.ln(), max_std.ln());
                HeadVars::Gaussian { mean: out, log_std }
            }
        })
    }

    /// Forward pass without keeping the tape. Returns `batch x out` head
    /// values; for gaussian heads the second matrix is the `1 x dim` std row.
    pub fn forward_batch(&self, params: &ParamVector, input: Matrix) -> Result<(Matrix, Option<Matrix>)> {
        let mut tape = Tape::new();
        let set = tape.register(params);
        let x = tape.constant(input);
        match self.forward_tape(&mut tape, set, params, x)? {
            HeadVars::Logits(v) | HeadVars::Scalar(v) => Ok((tape.value(v).clone(), None)),
            HeadVars::Gaussian { mean, log_std } => {
                let std = tape.value(log_std).map(f64::exp);
                Ok((tape.value(mean).clone(), Some(std)))
            }
        }
    }
}

/// Evaluate the network on one input vector.
pub fn mlp_forward(spec: &MlpSpec, params: &ParamVector, input: &[f64]) -> Result<HeadOutput> {
    if input.len() != spec.input_dim {
        return Err(GslError::config(format!(
            "input has {} features, network expects {}",
            input.len(),
            spec.input_dim
        )));
    }
    let (out, std) = spec.forward_batch(params, Matrix::row_vector(input.to_vec()))?;
    Ok(match &spec.head {
        HeadKind::Categorical { .. } => HeadOutput::Logits(out.data),
        HeadKind::Scalar => HeadOutput::Scalar(out.data[0]),
        HeadKind::Gaussian { .. } => HeadOutput::Gaussian {
            mean: out.data,
            std: std.expect("gaussian head has std").data,
        },
    })
}

/// Random `rows x cols` matrix with orthonormal rows or columns (whichever
/// is shorter), via modified Gram-Schmidt on gaussian draws.
fn orthogonal<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Vec<f64> {
    let (n_vec, dim) = if rows >= cols { (cols, rows) } else { (rows, cols) };
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n_vec);
    while basis.len() < n_vec {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        for b in &basis {
            let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            for (x, y) in v.iter_mut().zip(b) {
                *x -= dot * y;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
    let mut out = vec![0.0; rows * cols];
    for (k, b) in basis.iter().enumerate() {
        for (j, &x) in b.iter().enumerate() {
            // columns are the basis vectors when rows >= cols
            if rows >= cols {
                out[j * cols + k] = x;
            } else {
                out[k * cols + j] = x;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_network_passes_input_through() {
        let spec = MlpSpec::new(3, vec![], HeadKind::Categorical { actions: 3 });
        let mut values = vec![0.0; 12];
        for i in 0..3 {
            values[i * 3 + i] = 1.0;
        }
        let params = ParamVector::new(values, spec.manifest()).unwrap();
        let out = mlp_forward(&spec, &params, &[0.5, -2.0, 7.25]).unwrap();
        assert_eq!(out, HeadOutput::Logits(vec![0.5, -2.0, 7.25]));
    }

    #[test]
    fn zero_weights_give_zero_scalar() {
        let spec = MlpSpec::new(4, vec![8, 8], HeadKind::Scalar);
        let params = ParamVector::new(vec![0.0; spec.param_count()], spec.manifest()).unwrap();
        for x in [[1.0, 2.0, 3.0, 4.0], [-9.0, 0.1, 0.0, 1e6]] {
            assert_eq!(mlp_forward(&spec, &params, &x).unwrap(), HeadOutput::Scalar(0.0));
        }
    }

    #[test]
    fn dimension_mismatch_is_config_error() {
        let spec = MlpSpec::new(4, vec![8], HeadKind::Scalar);
        let params = spec.init(&mut ChaCha8Rng::seed_from_u64(0));
        assert!(matches!(
            mlp_forward(&spec, &params, &[1.0, 2.0]),
            Err(GslError::Config(_))
        ));
        let other = MlpSpec::new(4, vec![7], HeadKind::Scalar);
        assert!(mlp_forward(&other, &params, &[0.0; 4]).is_err());
    }

    #[test]
    fn gaussian_std_is_clamped() {
        let spec = MlpSpec::new(
            2,
            vec![4],
            HeadKind::Gaussian {
                dim: 2,
                min_std: 0.1,
                max_std: 0.5,
            },
        );
        let mut params = spec.init(&mut ChaCha8Rng::seed_from_u64(1));
        let n = params.len();
        params.values[n - 2] = 5.0;
        params.values[n - 1] = -50.0;
        let HeadOutput::Gaussian { std, .. } = mlp_forward(&spec, &params, &[0.1, 0.2]).unwrap() else {
            panic!("expected gaussian head");
        };
        assert!((std[0] - 0.5).abs() < 1e-12);
        assert!((std[1] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_init_has_orthonormal_columns() {
        let w = orthogonal(&mut ChaCha8Rng::seed_from_u64(3), 16, 5);
        for a in 0..5 {
            for b in 0..5 {
                let dot: f64 = (0..16).map(|r| w[r * 5 + a] * w[r * 5 + b]).sum();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(MlpSpec::new(0, vec![4], HeadKind::Scalar).validate().is_err());
        assert!(MlpSpec::new(2, vec![0], HeadKind::Scalar).validate().is_err());
        let bad = HeadKind::Gaussian {
            dim: 1,
            min_std: 0.5,
            max_std: 0.1,
        };
        assert!(MlpSpec::new(2, vec![4], bad).validate().is_err());
    }
}
