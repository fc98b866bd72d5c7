//! A small fully connected network trained with mini-batch gradient descent
//! on softmax cross-entropy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{permutation, streams, CounterRng};

use super::RingData;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }

    #[inline]
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Dense layer; `weights` is input-major (`weights[i * outputs + j]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    fn forward_into(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(&self.bias);
        for (i, &xi) in x.iter().enumerate() {
            let row = &self.weights[i * self.outputs..(i + 1) * self.outputs];
            for (o, w) in out.iter_mut().zip(row) {
                *o += xi * w;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Layer>,
    pub activation: Activation,
}

/// Pre-activations and activations of one forward pass.
struct Trace {
    pre: Vec<Vec<f64>>,
    post: Vec<Vec<f64>>,
}

fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|&f| (f - m).exp()).sum::<f64>().ln();
    logits.iter().map(|&f| f - lse).collect()
}

impl Mlp {
    fn check_widths(widths: &[usize]) -> Result<()> {
        if widths.len() < 2 {
            return Err(Error::domain("an MLP needs at least an input and an output width"));
        }
        if let Some(w) = widths.iter().find(|&&w| w == 0) {
            return Err(Error::domain(format!("layer width {w} is not allowed")));
        }
        Ok(())
    }

    pub fn zeros(widths: &[usize], activation: Activation) -> Result<Self> {
        Self::check_widths(widths)?;
        let layers = widths
            .windows(2)
            .map(|w| Layer {
                inputs: w[0],
                outputs: w[1],
                weights: vec![0.0; w[0] * w[1]],
                bias: vec![0.0; w[1]],
            })
            .collect();
        Ok(Self { layers, activation })
    }

    /// He-initialized weights (`N(0, 2 / fan_in)`), zero biases.
    pub fn new(widths: &[usize], activation: Activation, seed: u64) -> Result<Self> {
        let mut mlp = Self::zeros(widths, activation)?;
        let rng = CounterRng::new(seed, streams::MLP_INIT);
        for (l, layer) in mlp.layers.iter_mut().enumerate() {
            let sd = (2.0 / layer.inputs as f64).sqrt();
            let mut s = rng.at(l as u64);
            layer.weights.iter_mut().for_each(|w| *w = sd * s.normal());
        }
        Ok(mlp)
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().outputs
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// All parameters flattened: per layer, weights then biases.
    pub fn parameters(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
            .collect()
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.parameter_count() {
            return Err(Error::domain("parameter vector has the wrong length"));
        }
        let mut it = params.iter();
        for l in &mut self.layers {
            l.weights.iter_mut().chain(l.bias.iter_mut()).for_each(|p| *p = *it.next().unwrap());
        }
        Ok(())
    }

    fn trace(&self, x: &[f64]) -> Trace {
        let last = self.layers.len() - 1;
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post = Vec::with_capacity(self.layers.len() + 1);
        post.push(x.to_vec());
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = Vec::new();
            layer.forward_into(&post[l], &mut z);
            let a = if l == last {
                z.clone()
            } else {
                z.iter().map(|&v| self.activation.apply(v)).collect()
            };
            pre.push(z);
            post.push(a);
        }
        Trace { pre, post }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let last = self.layers.len() - 1;
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            layer.forward_into(&cur, &mut next);
            if l != last {
                next.iter_mut().for_each(|v| *v = self.activation.apply(*v));
            }
            std::mem::swap(&mut cur, &mut next);
        }
        cur
    }

    /// Cross-entropy loss of one example.
    pub fn loss(&self, x: &[f64], label: usize) -> f64 {
        -log_softmax(&self.forward(x))[label]
    }

    /// Loss and its gradient with respect to [`Mlp::parameters`], added
    /// into `grad` scaled by `weight`.
    fn accumulate_gradient(&self, x: &[f64], label: usize, weight: f64, grad: &mut [f64]) -> f64 {
        let t = self.trace(x);
        let logp = log_softmax(t.post.last().unwrap());
        let mut delta: Vec<f64> = logp.iter().map(|lp| lp.exp()).collect();
        delta[label] -= 1.0;

        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut off = 0;
        for l in &self.layers {
            offsets.push(off);
            off += l.weights.len() + l.bias.len();
        }
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let input = &t.post[l];
            let g = &mut grad[offsets[l]..offsets[l] + layer.weights.len() + layer.bias.len()];
            let (gw, gb) = g.split_at_mut(layer.weights.len());
            for (i, &xi) in input.iter().enumerate() {
                let row = &mut gw[i * layer.outputs..(i + 1) * layer.outputs];
                for (w, d) in row.iter_mut().zip(&delta) {
                    *w += weight * xi * d;
                }
            }
            for (b, d) in gb.iter_mut().zip(&delta) {
                *b += weight * d;
            }
            if l > 0 {
                let z = &t.pre[l - 1];
                delta = (0..layer.inputs)
                    .map(|i| {
                        let row = &layer.weights[i * layer.outputs..(i + 1) * layer.outputs];
                        let s: f64 = row.iter().zip(&delta).map(|(w, d)| w * d).sum();
                        s * self.activation.derivative(z[i])
                    })
                    .collect();
            }
        }
        -logp[label]
    }

    /// Loss and analytic parameter gradient of one example.
    pub fn loss_and_gradient(&self, x: &[f64], label: usize) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.parameter_count()];
        let loss = self.accumulate_gradient(x, label, 1.0, &mut grad);
        (loss, grad)
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        let f = self.forward(x);
        (0..f.len()).fold(0, |best, k| if f[k] > f[best] { k } else { best })
    }
}

/// Worst relative error `|a - n| / max(|a|, |n|, 1e-6)` between analytic
/// and central-difference gradients of the cross-entropy loss.
pub fn gradient_check(mlp: &Mlp, point: &[f64], label: usize, epsilon: f64) -> Result<f64> {
    if !(1e-7..=1e-3).contains(&epsilon) {
        return Err(Error::domain(format!("epsilon must lie in [1e-7, 1e-3], got {epsilon}")));
    }
    if label >= mlp.output_dim() || point.len() != mlp.input_dim() {
        return Err(Error::domain("point or label does not match the network"));
    }
    let (_, analytic) = mlp.loss_and_gradient(point, label);
    let base = mlp.parameters();
    let mut probe = mlp.clone();
    let mut worst = 0.0f64;
    let mut params = base.clone();
    for (p, &a) in analytic.iter().enumerate() {
        params[p] = base[p] + epsilon;
        probe.set_parameters(&params)?;
        let up = probe.loss(point, label);
        params[p] = base[p] - epsilon;
        probe.set_parameters(&params)?;
        let down = probe.loss(point, label);
        params[p] = base[p];
        let numeric = (up - down) / (2.0 * epsilon);
        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max(err);
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub activation: Activation,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: 64,
            epochs: 2000,
            learning_rate: 0.05,
            batch_size: 32,
            activation: Activation::Relu,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedMlp {
    pub mlp: Mlp,
    pub config: TrainConfig,
    pub trace: Vec<EpochStats>,
}

impl TrainedMlp {
    pub fn final_accuracy(&self) -> f64 {
        self.trace.last().map_or(0.0, |s| s.accuracy)
    }
}

fn full_data_stats(mlp: &Mlp, data: &RingData, epoch: usize) -> EpochStats {
    let mut loss = 0.0;
    let mut correct = 0usize;
    for (p, &y) in data.points.iter().zip(&data.labels) {
        let f = mlp.forward(p);
        loss -= log_softmax(&f)[y];
        correct += (f[y] >= f[1 - y]) as usize;
    }
    let n = data.len() as f64;
    EpochStats {
        epoch,
        loss: loss / n,
        accuracy: correct as f64 / n,
    }
}

/// Train a `[2, h, h, 2]` network. Sequential and deterministic in the seed.
pub fn train_mlp(data: &RingData, cfg: &TrainConfig) -> Result<TrainedMlp> {
    if cfg.epochs == 0 {
        return Err(Error::domain("training needs at least one epoch"));
    }
    if !(cfg.learning_rate > 0.0 && cfg.learning_rate.is_finite()) {
        return Err(Error::domain("learning rate must be positive"));
    }
    if cfg.batch_size == 0 || data.is_empty() {
        return Err(Error::domain("batch size and data must be nonempty"));
    }
    let mut mlp = Mlp::new(&[2, cfg.hidden, cfg.hidden, 2], cfg.activation, cfg.seed)?;
    let shuffle = CounterRng::new(cfg.seed, streams::MLP_SHUFFLE);
    let mut params = mlp.parameters();
    let mut grad = vec![0.0; params.len()];
    let mut trace = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let order = permutation(data.len(), shuffle.substream(epoch as u64));
        for batch in order.chunks(cfg.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let w = 1.0 / batch.len() as f64;
            for &i in batch {
                mlp.accumulate_gradient(&data.points[i], data.labels[i], w, &mut grad);
            }
            params.iter_mut().zip(&grad).for_each(|(p, g)| *p -= cfg.learning_rate * g);
            mlp.set_parameters(&params)?;
        }
        let stats = full_data_stats(&mlp, data, epoch);
        if !stats.loss.is_finite() || params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Training {
                epoch,
                loss: stats.loss,
            });
        }
        trace.push(stats);
    }
    Ok(TrainedMlp {
        mlp,
        config: cfg.clone(),
        trace,
    })
}
