use log::debug;
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::MatrixDoc;
use crate::neural_mass::SimTrace;
use crate::nn::{Activation, Adam, DenseNet, LayerDoc, NetGrad};

/// `clamp(0.2 x + 0.5, 0, 1)`.
pub fn hard_sigmoid(x: f64) -> f64 {
    (0.2 * x + 0.5).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GruConfig {
    /// Past control inputs fed to the initial-state network (M).
    pub past_inputs: usize,
    /// Past observations fed to the initial-state network (N).
    pub past_outputs: usize,
    /// Unrolled prediction length.
    pub horizon: usize,
    pub batch_size: usize,
    pub init_hidden: usize,
    pub output_hidden: usize,
    pub units: usize,
    pub channels: usize,
    pub sample_rate: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Spacing between consecutive training sequence starts.
    pub stride: usize,
    pub seed: u64,
}

impl Default for GruConfig {
    fn default() -> Self {
        Self {
            past_inputs: 24,
            past_outputs: 25,
            horizon: 175,
            batch_size: 30,
            init_hidden: 60,
            output_hidden: 60,
            units: 60,
            channels: 1,
            sample_rate: 50.0,
            learning_rate: 1e-3,
            epochs: 40,
            stride: 5,
            seed: 0,
        }
    }
}

impl GruConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("past_inputs", self.past_inputs),
            ("past_outputs", self.past_outputs),
            ("horizon", self.horizon),
            ("batch_size", self.batch_size),
            ("init_hidden", self.init_hidden),
            ("output_hidden", self.output_hidden),
            ("units", self.units),
            ("channels", self.channels),
            ("epochs", self.epochs),
            ("stride", self.stride),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("gru.{name} must be positive")));
            }
        }
        if !(self.sample_rate > 0.0) || !(self.learning_rate > 0.0) {
            return Err(Error::Config("gru sample rate and learning rate must be positive".into()));
        }
        Ok(())
    }

    /// Earliest index that has a full input/output history.
    pub fn lookback(&self) -> usize {
        self.past_inputs.max(self.past_outputs)
    }

    fn history_dim(&self) -> usize {
        self.past_inputs + self.past_outputs * self.channels
    }
}

/// Gate weights of a single GRU layer with one control input channel.
#[derive(Debug, Clone, PartialEq)]
pub struct GruCell {
    pub wi_z: DMatrix<f64>,
    pub wi_r: DMatrix<f64>,
    pub wi_h: DMatrix<f64>,
    pub wx_z: DMatrix<f64>,
    pub wx_r: DMatrix<f64>,
    pub wx_h: DMatrix<f64>,
    pub b_z: DVector<f64>,
    pub b_r: DVector<f64>,
    pub b_h: DVector<f64>,
}

/// Per-step activations kept for back-propagation.
#[derive(Debug, Clone)]
pub struct CellCache {
    x: DMatrix<f64>,
    v: DMatrix<f64>,
    z: DMatrix<f64>,
    r: DMatrix<f64>,
    h: DMatrix<f64>,
}

fn add_bias(m: &mut DMatrix<f64>, b: &DVector<f64>) {
    for mut col in m.column_iter_mut() {
        col += b;
    }
}

fn uniform<R: Rng>(rows: usize, cols: usize, limit: f64, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-limit..limit))
}

impl GruCell {
    pub fn zeros(units: usize, inputs: usize) -> Self {
        let wi = DMatrix::zeros(units, inputs);
        let wx = DMatrix::zeros(units, units);
        let b = DVector::zeros(units);
        Self {
            wi_z: wi.clone(),
            wi_r: wi.clone(),
            wi_h: wi,
            wx_z: wx.clone(),
            wx_r: wx.clone(),
            wx_h: wx,
            b_z: b.clone(),
            b_r: b.clone(),
            b_h: b,
        }
    }

    /// Glorot-uniform input and recurrent weights, zero biases.
    pub fn glorot<R: Rng>(units: usize, inputs: usize, rng: &mut R) -> Self {
        let li = (6.0 / (units + inputs) as f64).sqrt();
        let lx = (6.0 / (2 * units) as f64).sqrt();
        let mut cell = Self::zeros(units, inputs);
        cell.wi_z = uniform(units, inputs, li, rng);
        cell.wi_r = uniform(units, inputs, li, rng);
        cell.wi_h = uniform(units, inputs, li, rng);
        cell.wx_z = uniform(units, units, lx, rng);
        cell.wx_r = uniform(units, units, lx, rng);
        cell.wx_h = uniform(units, units, lx, rng);
        cell
    }

    pub fn units(&self) -> usize {
        self.wx_z.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.wi_z.ncols()
    }

    fn matrices(&self) -> [&DMatrix<f64>; 6] {
        [&self.wi_z, &self.wi_r, &self.wi_h, &self.wx_z, &self.wx_r, &self.wx_h]
    }

    pub fn validate(&self) -> Result<()> {
        let (u, m) = (self.units(), self.inputs());
        for (i, w) in self.matrices().into_iter().enumerate() {
            let want = if i < 3 { (u, m) } else { (u, u) };
            if w.shape() != want {
                return Err(Error::Dimension { context: "gru gate weight", expected: want.0 * want.1, actual: w.len() });
            }
        }
        for b in [&self.b_z, &self.b_r, &self.b_h] {
            if b.len() != u {
                return Err(Error::Dimension { context: "gru gate bias", expected: u, actual: b.len() });
            }
        }
        let finite = self.matrices().iter().all(|w| w.iter().all(|v| v.is_finite()))
            && [&self.b_z, &self.b_r, &self.b_h].iter().all(|b| b.iter().all(|v| v.is_finite()));
        if !finite {
            return Err(Error::Format("non-finite gru weight".into()));
        }
        Ok(())
    }

    /// Batched step: columns of `x` (units) and `v` (inputs) are independent sequences.
    pub fn forward(&self, x: &DMatrix<f64>, v: &DMatrix<f64>) -> (DMatrix<f64>, CellCache) {
        let mut z = &self.wi_z * v + &self.wx_z * x;
        add_bias(&mut z, &self.b_z);
        z.apply(|a| *a = hard_sigmoid(*a));
        let mut r = &self.wi_r * v + &self.wx_r * x;
        add_bias(&mut r, &self.b_r);
        r.apply(|a| *a = hard_sigmoid(*a));
        let mut h = &self.wi_h * v + &self.wx_h * r.component_mul(x);
        add_bias(&mut h, &self.b_h);
        h.apply(|a| *a = a.tanh());
        let next = z.component_mul(x) + z.map(|zi| 1.0 - zi).component_mul(&h);
        (next, CellCache { x: x.clone(), v: v.clone(), z, r, h })
    }

    /// Back-propagate `d_next = dL/dx_{k+1}`; accumulates into `grad` and
    /// returns `dL/dx_k`.
    pub fn backward(&self, cache: &CellCache, d_next: &DMatrix<f64>, grad: &mut GruCell) -> DMatrix<f64> {
        let CellCache { x, v, z, r, h } = cache;
        let dz = d_next.component_mul(&(x - h));
        let dh = d_next.component_mul(&z.map(|zi| 1.0 - zi));
        let mut dx = d_next.component_mul(z);

        let dah = dh.zip_map(h, |d, hi| d * (1.0 - hi * hi));
        let rx = r.component_mul(x);
        grad.wi_h += &dah * v.transpose();
        grad.wx_h += &dah * rx.transpose();
        grad.b_h += dah.column_sum();
        let drx = self.wx_h.transpose() * &dah;
        let dr = drx.component_mul(x);
        dx += drx.component_mul(r);

        // hard_sigmoid has slope 0.2 strictly inside the clamp and 0 on it.
        let gate_slope = |d: f64, g: f64| if g > 0.0 && g < 1.0 { 0.2 * d } else { 0.0 };
        let daz = dz.zip_map(z, gate_slope);
        let dar = dr.zip_map(r, gate_slope);
        grad.wi_z += &daz * v.transpose();
        grad.wx_z += &daz * x.transpose();
        grad.b_z += daz.column_sum();
        grad.wi_r += &dar * v.transpose();
        grad.wx_r += &dar * x.transpose();
        grad.b_r += dar.column_sum();
        dx += self.wx_z.transpose() * &daz + self.wx_r.transpose() * &dar;
        dx
    }

    pub fn param_slices(&self) -> Vec<&[f64]> {
        vec![
            self.wi_z.as_slice(),
            self.wi_r.as_slice(),
            self.wi_h.as_slice(),
            self.wx_z.as_slice(),
            self.wx_r.as_slice(),
            self.wx_h.as_slice(),
            self.b_z.as_slice(),
            self.b_r.as_slice(),
            self.b_h.as_slice(),
        ]
    }

    /// Mutable views in the order of [`GruCell::param_slices`].
    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.wi_z.as_mut_slice(),
            self.wi_r.as_mut_slice(),
            self.wi_h.as_mut_slice(),
            self.wx_z.as_mut_slice(),
            self.wx_r.as_mut_slice(),
            self.wx_h.as_mut_slice(),
            self.b_z.as_mut_slice(),
            self.b_r.as_mut_slice(),
            self.b_h.as_mut_slice(),
        ]
    }
}

/// Single-sequence form of [`GruCell::forward`].
pub fn gru_cell(x: &DVector<f64>, v: &DVector<f64>, cell: &GruCell) -> Result<DVector<f64>> {
    if x.len() != cell.units() {
        return Err(Error::Dimension { context: "gru hidden state", expected: cell.units(), actual: x.len() });
    }
    if v.len() != cell.inputs() {
        return Err(Error::Dimension { context: "gru input", expected: cell.inputs(), actual: v.len() });
    }
    let xm = DMatrix::from_column_slice(x.len(), 1, x.as_slice());
    let vm = DMatrix::from_column_slice(v.len(), 1, v.as_slice());
    Ok(cell.forward(&xm, &vm).0.column(0).into_owned())
}

/// Initial-state network, GRU cell and output network.
#[derive(Debug, Clone, PartialEq)]
pub struct GruModel {
    pub config: GruConfig,
    pub init: DenseNet,
    pub cell: GruCell,
    pub output: DenseNet,
}

/// A batch of training or prediction sequences, one column per sequence.
#[derive(Debug, Clone)]
pub struct SequenceBatch {
    /// `(M + N n) x B` history vectors.
    pub history: DMatrix<f64>,
    /// `horizon` matrices of `1 x B` inputs.
    pub inputs: Vec<DMatrix<f64>>,
    /// `n x (horizon B)`, step-major blocks of `B` columns.
    pub targets: DMatrix<f64>,
}

/// History vector for a sequence whose first predicted sample is `start`:
/// `u[start-M..start]` followed by time-major `y[start-N..start]`.
pub fn history_vector(trace: &SimTrace, start: usize, config: &GruConfig) -> DVector<f64> {
    let (m, n, c) = (config.past_inputs, config.past_outputs, trace.n_channels());
    let mut out = DVector::zeros(m + n * c);
    if let Some(u) = &trace.input {
        for i in 0..m {
            out[i] = u[start - m + i];
        }
    }
    for i in 0..n {
        for ch in 0..c {
            out[m + i * c + ch] = trace.channels[ch][start - n + i];
        }
    }
    out
}

/// Input driving the step that produces sample `index` (held from the previous sample).
fn input_at(trace: &SimTrace, index: usize) -> f64 {
    trace.input.as_ref().map_or(0.0, |u| u[index - 1])
}

pub fn build_batch(trace: &SimTrace, starts: &[usize], config: &GruConfig) -> SequenceBatch {
    let b = starts.len();
    let t = config.horizon;
    let c = trace.n_channels();
    let mut history = DMatrix::zeros(config.history_dim(), b);
    for (j, &s) in starts.iter().enumerate() {
        history.set_column(j, &history_vector(trace, s, config));
    }
    let inputs = (0..t).map(|k| DMatrix::from_fn(1, b, |_, j| input_at(trace, starts[j] + k))).collect();
    let targets = DMatrix::from_fn(c, t * b, |ch, col| trace.channels[ch][starts[col % b] + col / b]);
    SequenceBatch { history, inputs, targets }
}

/// Parameter gradients mirroring [`GruModel`].
#[derive(Debug, Clone)]
pub struct GruGrad {
    pub init: NetGrad,
    pub cell: GruCell,
    pub output: NetGrad,
}

impl GruModel {
    pub fn init(config: GruConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let init = DenseNet::with_output(
            &[config.history_dim(), config.init_hidden, config.units],
            Activation::Tanh,
            &mut rng,
        );
        let cell = GruCell::glorot(config.units, 1, &mut rng);
        let output = DenseNet::new(&[config.units, config.output_hidden, config.channels], &mut rng);
        Ok(Self { config, init, cell, output })
    }

    pub fn validate(&self) -> Result<()> {
        self.init.validate()?;
        self.output.validate()?;
        self.cell.validate()?;
        if self.init.outputs() != self.cell.units() || self.output.inputs() != self.cell.units() {
            return Err(Error::Dimension {
                context: "gru state width",
                expected: self.cell.units(),
                actual: self.init.outputs(),
            });
        }
        if self.init.inputs() != self.config.history_dim() || self.output.outputs() != self.config.channels {
            return Err(Error::Config("gru network shapes disagree with config".into()));
        }
        Ok(())
    }

    fn zero_grad(&self) -> GruGrad {
        GruGrad {
            init: self.init.zero_grad(),
            cell: GruCell::zeros(self.cell.units(), self.cell.inputs()),
            output: self.output.zero_grad(),
        }
    }

    /// Unrolled prediction: `n x (horizon B)` in the batch target layout.
    pub fn forward(&self, history: &DMatrix<f64>, inputs: &[DMatrix<f64>]) -> DMatrix<f64> {
        let mut x = self.init.forward(history);
        let b = x.ncols();
        let mut states = DMatrix::zeros(self.cell.units(), inputs.len() * b);
        for (k, v) in inputs.iter().enumerate() {
            x = self.cell.forward(&x, v).0;
            states.columns_mut(k * b, b).copy_from(&x);
        }
        self.output.forward(&states)
    }

    /// Mean-squared prediction error and its full BPTT gradient.
    pub fn loss_gradient(&self, batch: &SequenceBatch) -> (f64, GruGrad) {
        let init_cache = self.init.forward_cached(&batch.history);
        let mut x = init_cache.output().clone();
        let b = x.ncols();
        let t = batch.inputs.len();
        let mut caches = Vec::with_capacity(t);
        let mut states = DMatrix::zeros(self.cell.units(), t * b);
        for (k, v) in batch.inputs.iter().enumerate() {
            let (next, cache) = self.cell.forward(&x, v);
            states.columns_mut(k * b, b).copy_from(&next);
            caches.push(cache);
            x = next;
        }
        let out_cache = self.output.forward_cached(&states);
        let err = out_cache.output() - &batch.targets;
        let count = err.len() as f64;
        let loss = err.norm_squared() / count;

        let mut grad = self.zero_grad();
        let d_states = self.output.backward(&out_cache, err * (2.0 / count), &mut grad.output);
        let mut dx = DMatrix::zeros(self.cell.units(), b);
        for k in (0..t).rev() {
            dx += d_states.columns(k * b, b);
            dx = self.cell.backward(&caches[k], &dx, &mut grad.cell);
        }
        self.init.backward(&init_cache, dx, &mut grad.init);
        (loss, grad)
    }

    /// Predict `len` samples from `start`, re-initialising from the true
    /// history at the beginning of every `horizon`-long segment.
    pub fn predict_segments(&self, trace: &SimTrace, start: usize, len: usize) -> Result<SimTrace> {
        let cfg = &self.config;
        if trace.n_channels() != cfg.channels {
            return Err(Error::Dimension { context: "gru trace channels", expected: cfg.channels, actual: trace.n_channels() });
        }
        if start < cfg.lookback() {
            return Err(Error::TraceTooShort { needed: cfg.lookback(), available: start });
        }
        if start + len > trace.len() {
            return Err(Error::TraceTooShort { needed: start + len, available: trace.len() });
        }
        let mut out = vec![Vec::with_capacity(len); cfg.channels];
        let mut s = start;
        while s < start + len {
            let steps = cfg.horizon.min(start + len - s);
            let history = history_vector(trace, s, cfg);
            let history = DMatrix::from_column_slice(history.len(), 1, history.as_slice());
            let inputs: Vec<_> = (0..steps).map(|k| DMatrix::from_element(1, 1, input_at(trace, s + k))).collect();
            let pred = self.forward(&history, &inputs);
            for k in 0..steps {
                for (ch, o) in out.iter_mut().enumerate() {
                    o.push(pred[(ch, k)]);
                }
            }
            s += steps;
        }
        SimTrace::new(trace.sample_rate, trace.time(start), out, None)
    }

    pub fn to_doc(&self) -> GruDoc {
        let c = &self.cell;
        GruDoc {
            config: self.config,
            init: self.init.to_doc(),
            cell: [&c.wi_z, &c.wi_r, &c.wi_h, &c.wx_z, &c.wx_r, &c.wx_h].map(MatrixDoc::from).to_vec(),
            biases: [&c.b_z, &c.b_r, &c.b_h].map(|b| b.as_slice().to_vec()).to_vec(),
            output: self.output.to_doc(),
        }
    }

    pub fn from_doc(doc: &GruDoc) -> Result<Self> {
        if doc.cell.len() != 6 || doc.biases.len() != 3 {
            return Err(Error::Format("gru cell needs 6 weight matrices and 3 biases".into()));
        }
        let w: Vec<DMatrix<f64>> = doc.cell.iter().map(MatrixDoc::to_matrix).collect::<Result<_>>()?;
        let b: Vec<DVector<f64>> = doc.biases.iter().map(|v| DVector::from_vec(v.clone())).collect();
        let cell = GruCell {
            wi_z: w[0].clone(),
            wi_r: w[1].clone(),
            wi_h: w[2].clone(),
            wx_z: w[3].clone(),
            wx_r: w[4].clone(),
            wx_h: w[5].clone(),
            b_z: b[0].clone(),
            b_r: b[1].clone(),
            b_h: b[2].clone(),
        };
        let model = Self {
            config: doc.config,
            init: DenseNet::from_doc(&doc.init)?,
            cell,
            output: DenseNet::from_doc(&doc.output)?,
        };
        model.validate()?;
        Ok(model)
    }
}

/// Serialised [`GruModel`]: gate matrices in the order
/// `wi_z, wi_r, wi_h, wx_z, wx_r, wx_h`, biases `b_z, b_r, b_h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GruDoc {
    pub config: GruConfig,
    pub init: Vec<LayerDoc>,
    pub cell: Vec<MatrixDoc>,
    pub biases: Vec<Vec<f64>>,
    pub output: Vec<LayerDoc>,
}

/// Sequence starts usable for training on `trace`.
pub fn training_starts(trace_len: usize, config: &GruConfig) -> Vec<usize> {
    let first = config.lookback();
    if trace_len < first + config.horizon {
        return Vec::new();
    }
    (first..=trace_len - config.horizon).step_by(config.stride).collect()
}

/// BPTT + Adam on shuffled mini-batches of unrolled sequences.
pub fn train_gru(trace: &SimTrace, config: GruConfig) -> Result<(GruModel, Vec<f64>)> {
    let mut model = GruModel::init(config)?;
    if trace.n_channels() != config.channels {
        return Err(Error::Config(format!(
            "trace has {} channels, gru config expects {}",
            trace.n_channels(),
            config.channels
        )));
    }
    let mut starts = training_starts(trace.len(), &config);
    if starts.is_empty() {
        return Err(Error::TraceTooShort { needed: config.lookback() + config.horizon, available: trace.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x9e37_79b9));
    let mut opt = Adam::new(config.learning_rate);
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        starts.shuffle(&mut rng);
        let mut sum = 0.0;
        let chunks: Vec<&[usize]> = starts.chunks(config.batch_size).collect();
        for chunk in &chunks {
            let batch = build_batch(trace, chunk, &config);
            let (loss, grad) = model.loss_gradient(&batch);
            if !loss.is_finite() || !grad.init.all_finite() || !grad.output.all_finite() {
                return Err(Error::Diverged { epoch });
            }
            let mut grads = grad.init.slices();
            grads.extend(grad.cell.param_slices());
            grads.extend(grad.output.slices());
            let mut params = model.init.param_slices_mut();
            params.extend(model.cell.param_slices_mut());
            params.extend(model.output.param_slices_mut());
            opt.step(params, grads);
            sum += loss;
        }
        let mean = sum / chunks.len() as f64;
        if epoch == 1 || epoch % 10 == 0 {
            debug!("gru epoch {epoch}: mse {mean:.5}");
        }
        history.push(mean);
    }
    model.cell.validate().map_err(|_| Error::Diverged { epoch: config.epochs })?;
    Ok((model, history))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> GruConfig {
        GruConfig {
            past_inputs: 2,
            past_outputs: 3,
            horizon: 6,
            batch_size: 4,
            init_hidden: 3,
            output_hidden: 3,
            units: 2,
            epochs: 1,
            stride: 1,
            ..Default::default()
        }
    }

    #[test]
    fn hard_sigmoid_shape() {
        assert_eq!(hard_sigmoid(0.0), 0.5);
        assert_eq!(hard_sigmoid(-2.5), 0.0);
        assert_eq!(hard_sigmoid(2.5), 1.0);
        assert_eq!(hard_sigmoid(-10.0), 0.0);
        assert_eq!(hard_sigmoid(10.0), 1.0);
        assert!((hard_sigmoid(1.0) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn zero_weights_halve_the_state() {
        let cell = GruCell::zeros(3, 1);
        let x = DVector::from_vec(vec![1.0, -2.0, 0.4]);
        let next = gru_cell(&x, &DVector::from_vec(vec![0.7]), &cell).unwrap();
        assert_eq!(next, x * 0.5);
    }

    #[test]
    fn saturated_update_gate_carries_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut cell = GruCell::glorot(3, 1, &mut rng);
        cell.wx_z.fill(0.0);
        cell.wi_z.fill(0.0);
        cell.b_z.fill(100.0);
        let x = DVector::from_vec(vec![0.3, -0.9, 0.1]);
        assert_eq!(gru_cell(&x, &DVector::from_vec(vec![2.0]), &cell).unwrap(), x);
    }

    #[test]
    fn closed_update_gate_yields_candidate() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut cell = GruCell::glorot(3, 1, &mut rng);
        cell.wx_z.fill(0.0);
        cell.wi_z.fill(0.0);
        cell.b_z.fill(-100.0);
        let x = DVector::from_vec(vec![0.3, -0.9, 0.1]);
        let v = DVector::from_vec(vec![0.5]);
        let next = gru_cell(&x, &v, &cell).unwrap();
        let (_, cache) = cell.forward(&DMatrix::from_column_slice(3, 1, x.as_slice()), &DMatrix::from_element(1, 1, 0.5));
        assert_eq!(next.as_slice(), cache.h.as_slice());
    }

    #[test]
    fn matches_scalar_transcription() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut cell = GruCell::glorot(3, 2, &mut rng);
        cell.b_z = DVector::from_fn(3, |_, _| rng.gen_range(-1.0..1.0));
        cell.b_r = DVector::from_fn(3, |_, _| rng.gen_range(-1.0..1.0));
        cell.b_h = DVector::from_fn(3, |_, _| rng.gen_range(-1.0..1.0));
        let x = [0.2, -0.4, 0.7];
        let v = [0.3, -1.1];
        let dot = |w: &DMatrix<f64>, i: usize, a: &[f64]| -> f64 { (0..a.len()).map(|j| w[(i, j)] * a[j]).sum() };
        let mut z = [0.0; 3];
        let mut r = [0.0; 3];
        for i in 0..3 {
            z[i] = hard_sigmoid(dot(&cell.wi_z, i, &v) + dot(&cell.wx_z, i, &x) + cell.b_z[i]);
            r[i] = hard_sigmoid(dot(&cell.wi_r, i, &v) + dot(&cell.wx_r, i, &x) + cell.b_r[i]);
        }
        let rx: Vec<f64> = (0..3).map(|i| r[i] * x[i]).collect();
        let got = gru_cell(&DVector::from_row_slice(&x), &DVector::from_row_slice(&v), &cell).unwrap();
        for i in 0..3 {
            let h = (dot(&cell.wi_h, i, &v) + dot(&cell.wx_h, i, &rx) + cell.b_h[i]).tanh();
            let want = z[i] * x[i] + (1.0 - z[i]) * h;
            assert!((got[i] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let cell = GruCell::zeros(3, 1);
        assert!(gru_cell(&DVector::zeros(2), &DVector::zeros(1), &cell).is_err());
        assert!(gru_cell(&DVector::zeros(3), &DVector::zeros(2), &cell).is_err());
    }

    #[test]
    fn batch_layout_is_step_major() {
        let cfg = tiny_config();
        let y: Vec<f64> = (0..20).map(f64::from).collect();
        let u: Vec<f64> = (0..20).map(|i| -f64::from(i)).collect();
        let t = SimTrace::new(50.0, 0.0, vec![y], Some(u)).unwrap();
        let b = build_batch(&t, &[3, 7], &cfg);
        assert_eq!(b.history.column(0).as_slice(), &[-1.0, -2.0, 0.0, 1.0, 2.0]);
        assert_eq!(b.targets[(0, 0)], 3.0);
        assert_eq!(b.targets[(0, 1)], 7.0);
        assert_eq!(b.targets[(0, 2)], 4.0);
        assert_eq!(b.inputs[0][(0, 1)], -6.0);
        assert_eq!(training_starts(20, &cfg), (3..=14).collect::<Vec<_>>());
    }

    #[test]
    fn segments_reanchor_on_truth() {
        let cfg = GruConfig { horizon: 4, ..tiny_config() };
        let model = GruModel::init(cfg).unwrap();
        let y: Vec<f64> = (0..30).map(|i| (f64::from(i) * 0.3).sin()).collect();
        let t = SimTrace::new(50.0, 0.0, vec![y], None).unwrap();
        let p = model.predict_segments(&t, 5, 10).unwrap();
        assert_eq!(p.len(), 10);
        let second = model.predict_segments(&t, 9, 4).unwrap();
        assert_eq!(&p.channels[0][4..8], &second.channels[0][..]);
        assert!(model.predict_segments(&t, 1, 4).is_err());
    }

    #[test]
    fn doc_round_trip_is_exact() {
        let model = GruModel::init(tiny_config()).unwrap();
        let back = GruModel::from_doc(&model.to_doc()).unwrap();
        assert_eq!(model, back);
    }
}
