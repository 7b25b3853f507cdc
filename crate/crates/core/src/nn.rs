//! Dense feed-forward layers with hand-written backpropagation, plus Adam.
//!
//! Batches are matrices whose columns are samples.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::MatrixDoc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, m: &mut DMatrix<f64>) {
        match self {
            Activation::Relu => m.apply(|v| {
                if *v < 0.0 {
                    *v = 0.0
                }
            }),
            Activation::Tanh => m.apply(|v| *v = v.tanh()),
            Activation::Identity => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `out x in`
    pub weight: DMatrix<f64>,
    pub bias: DVector<f64>,
    pub activation: Activation,
}

impl Dense {
    /// Glorot-uniform weights, zero bias.
    pub fn glorot<R: Rng>(inputs: usize, outputs: usize, activation: Activation, rng: &mut R) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        Self {
            weight: DMatrix::from_fn(outputs, inputs, |_, _| rng.gen_range(-limit..limit)),
            bias: DVector::zeros(outputs),
            activation,
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weight.nrows()
    }

    fn forward(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut z = &self.weight * x;
        for mut col in z.column_iter_mut() {
            col += &self.bias;
        }
        self.activation.apply(&mut z);
        z
    }
}

/// A chain of dense layers.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    pub layers: Vec<Dense>,
}

/// Gradients with the same layout as a [`DenseNet`].
#[derive(Debug, Clone, PartialEq)]
pub struct NetGrad {
    pub weight: Vec<DMatrix<f64>>,
    pub bias: Vec<DVector<f64>>,
}

/// Layer outputs kept for the backward pass; `outputs[0]` is the input.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub outputs: Vec<DMatrix<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &DMatrix<f64> {
        self.outputs.last().expect("cache holds the input at least")
    }
}

impl DenseNet {
    /// `sizes = [in, h1, ..., out]`; ReLU on hidden layers, identity on the output.
    pub fn new<R: Rng>(sizes: &[usize], rng: &mut R) -> Self {
        Self::with_output(sizes, Activation::Identity, rng)
    }

    /// As [`DenseNet::new`] with a chosen output activation.
    pub fn with_output<R: Rng>(sizes: &[usize], output: Activation, rng: &mut R) -> Self {
        let n = sizes.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let act = if i + 1 == n { output } else { Activation::Relu };
                Dense::glorot(sizes[i], sizes[i + 1], act, rng)
            })
            .collect();
        Self { layers }
    }

    pub fn validate(&self) -> Result<()> {
        for pair in self.layers.windows(2) {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(Error::Dimension {
                    context: "DenseNet layer chain",
                    expected: pair[0].outputs(),
                    actual: pair[1].inputs(),
                });
            }
        }
        for l in &self.layers {
            if l.bias.len() != l.outputs() {
                return Err(Error::Dimension { context: "DenseNet bias", expected: l.outputs(), actual: l.bias.len() });
            }
            if !l.weight.iter().chain(l.bias.iter()).all(|v| v.is_finite()) {
                return Err(Error::Format("non-finite network weight".into()));
            }
        }
        Ok(())
    }

    pub fn inputs(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn outputs(&self) -> usize {
        self.layers.last().map_or(0, Dense::outputs)
    }

    pub fn forward(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut h = x.clone();
        for l in &self.layers {
            h = l.forward(&h);
        }
        h
    }

    pub fn forward_cached(&self, x: &DMatrix<f64>) -> ForwardCache {
        let mut outputs = Vec::with_capacity(self.layers.len() + 1);
        outputs.push(x.clone());
        for l in &self.layers {
            let next = l.forward(outputs.last().unwrap());
            outputs.push(next);
        }
        ForwardCache { outputs }
    }

    /// Accumulate parameter gradients into `grad` and return `dL/dinput`.
    pub fn backward(&self, cache: &ForwardCache, grad_out: DMatrix<f64>, grad: &mut NetGrad) -> DMatrix<f64> {
        let mut delta = grad_out;
        for (i, l) in self.layers.iter().enumerate().rev() {
            match l.activation {
                // ReLU output is zero exactly where the pre-activation was clipped.
                Activation::Relu => delta.zip_apply(&cache.outputs[i + 1], |d, y| {
                    if y <= 0.0 {
                        *d = 0.0
                    }
                }),
                Activation::Tanh => delta.zip_apply(&cache.outputs[i + 1], |d, y| *d *= 1.0 - y * y),
                Activation::Identity => {}
            }
            grad.weight[i] += &delta * cache.outputs[i].transpose();
            grad.bias[i] += delta.column_sum();
            delta = l.weight.transpose() * &delta;
        }
        delta
    }

    pub fn zero_grad(&self) -> NetGrad {
        NetGrad {
            weight: self.layers.iter().map(|l| DMatrix::zeros(l.outputs(), l.inputs())).collect(),
            bias: self.layers.iter().map(|l| DVector::zeros(l.outputs())).collect(),
        }
    }

    /// Sum of squared weights (biases excluded).
    pub fn weight_norm_sq(&self) -> f64 {
        self.layers.iter().map(|l| l.weight.norm_squared()).sum()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    /// Mutable views of every parameter buffer, weights then bias per layer.
    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(2 * self.layers.len());
        for l in &mut self.layers {
            out.push(l.weight.as_mut_slice());
            out.push(l.bias.as_mut_slice());
        }
        out
    }

    pub fn to_doc(&self) -> Vec<LayerDoc> {
        self.layers
            .iter()
            .map(|l| LayerDoc {
                weight: MatrixDoc::from(&l.weight),
                bias: l.bias.iter().copied().collect(),
                activation: l.activation,
            })
            .collect()
    }

    pub fn from_doc(doc: &[LayerDoc]) -> Result<Self> {
        let layers = doc
            .iter()
            .map(|d| {
                Ok(Dense {
                    weight: d.weight.to_matrix()?,
                    bias: DVector::from_vec(d.bias.clone()),
                    activation: d.activation,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let net = Self { layers };
        net.validate()?;
        Ok(net)
    }
}

impl NetGrad {
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(2 * self.weight.len());
        for (w, b) in self.weight.iter().zip(&self.bias) {
            out.push(w.as_slice());
            out.push(b.as_slice());
        }
        out
    }

    pub fn all_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerDoc {
    pub weight: MatrixDoc,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

/// Adam over an ordered list of flat parameter buffers.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        // Keras defaults for the moment decay rates and epsilon.
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-7, t: 0, m: Vec::new(), v: Vec::new() }
    }

    pub fn steps_taken(&self) -> i32 {
        self.t
    }

    pub fn step(&mut self, params: Vec<&mut [f64]>, grads: Vec<&[f64]>) {
        assert_eq!(params.len(), grads.len(), "parameter/gradient buffer count");
        if self.m.is_empty() {
            self.m = grads.iter().map(|g| vec![0.0; g.len()]).collect();
            self.v = grads.iter().map(|g| vec![0.0; g.len()]).collect();
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2 = 1.0 - self.beta2.powi(self.t);
        for (k, (p, g)) in params.into_iter().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn half_sq_loss(net: &DenseNet, x: &DMatrix<f64>, target: &DMatrix<f64>) -> f64 {
        (net.forward(x) - target).norm_squared() * 0.5
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = DenseNet::new(&[3, 4, 2], &mut rng);
        let mut net = net;
        for l in &mut net.layers {
            l.bias = DVector::from_fn(l.outputs(), |_, _| rng.gen_range(-0.5..0.5));
        }
        let x = DMatrix::from_fn(3, 5, |_, _| rng.gen_range(-1.0..1.0));
        let target = DMatrix::from_fn(2, 5, |_, _| rng.gen_range(-1.0..1.0));
        let cache = net.forward_cached(&x);
        let mut grad = net.zero_grad();
        let grad_in = net.backward(&cache, cache.output() - &target, &mut grad);

        let h = 1e-6;
        for li in 0..net.layers.len() {
            for idx in 0..net.layers[li].weight.len() {
                let mut plus = net.clone();
                plus.layers[li].weight.as_mut_slice()[idx] += h;
                let mut minus = net.clone();
                minus.layers[li].weight.as_mut_slice()[idx] -= h;
                let fd = (half_sq_loss(&plus, &x, &target) - half_sq_loss(&minus, &x, &target)) / (2.0 * h);
                let an = grad.weight[li].as_slice()[idx];
                assert!((fd - an).abs() < 1e-6 * (1.0 + fd.abs()), "layer {li} w{idx}: {fd} vs {an}");
            }
        }
        for idx in 0..x.len() {
            let mut xp = x.clone();
            xp.as_mut_slice()[idx] += h;
            let mut xm = x.clone();
            xm.as_mut_slice()[idx] -= h;
            let fd = (half_sq_loss(&net, &xp, &target) - half_sq_loss(&net, &xm, &target)) / (2.0 * h);
            assert!((fd - grad_in.as_slice()[idx]).abs() < 1e-6 * (1.0 + fd.abs()));
        }
    }

    #[test]
    fn tanh_layer_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let net = DenseNet { layers: vec![Dense::glorot(3, 2, Activation::Tanh, &mut rng)] };
        let x = DMatrix::from_fn(3, 4, |_, _| rng.gen_range(-1.0..1.0));
        let target = DMatrix::from_fn(2, 4, |_, _| rng.gen_range(-1.0..1.0));
        let cache = net.forward_cached(&x);
        let mut grad = net.zero_grad();
        net.backward(&cache, cache.output() - &target, &mut grad);
        let h = 1e-6;
        for idx in 0..6 {
            let mut plus = net.clone();
            plus.layers[0].weight.as_mut_slice()[idx] += h;
            let mut minus = net.clone();
            minus.layers[0].weight.as_mut_slice()[idx] -= h;
            let fd = (half_sq_loss(&plus, &x, &target) - half_sq_loss(&minus, &x, &target)) / (2.0 * h);
            assert!((fd - grad.weight[0].as_slice()[idx]).abs() < 1e-7);
        }
    }

    #[test]
    fn adam_zero_gradient_leaves_params() {
        let mut p = vec![1.0, -2.0, 3.0];
        let before = p.clone();
        let g = vec![0.0; 3];
        let mut opt = Adam::new(1e-3);
        opt.step(vec![&mut p], vec![&g]);
        assert_eq!(p, before);
    }

    #[test]
    fn adam_first_step_is_lr_sized() {
        let mut p = vec![0.0, 0.0];
        let g = vec![4.0, -0.01];
        let mut opt = Adam::new(1e-3);
        opt.step(vec![&mut p], vec![&g]);
        assert!((p[0] + 1e-3).abs() < 1e-9);
        assert!((p[1] - 1e-3).abs() < 1e-6);
    }

    #[test]
    fn layer_chain_validation() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut net = DenseNet::new(&[2, 3, 1], &mut rng);
        assert!(net.validate().is_ok());
        net.layers[1].weight = DMatrix::zeros(1, 4);
        assert!(net.validate().is_err());
    }

    #[test]
    fn doc_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let net = DenseNet::new(&[4, 6, 3], &mut rng);
        assert_eq!(DenseNet::from_doc(&net.to_doc()).unwrap(), net);
    }
}
