//! Single-layer tanh recurrent classifier.
//!
//! ```text
//! h_0 = 0
//! h_t = tanh(W_xh·x_t + W_hh·h_{t−1} + b_h)
//! p   = σ(w_o·h_T + b_o)
//! ```
//!
//! Trained by full-batch gradient descent on mean binary cross-entropy, with
//! gradients from backpropagation through time.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::PredictionError;
use crate::logistics::Milestone;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rnn {
    pub input_dim: usize,
    pub hidden_dim: usize,
    /// `hidden_dim × input_dim`, row-major.
    pub w_xh: Vec<f64>,
    /// `hidden_dim × hidden_dim`, row-major.
    pub w_hh: Vec<f64>,
    pub b_h: Vec<f64>,
    pub w_o: Vec<f64>,
    pub b_o: f64,
}

/// Same shapes as [`Rnn`]'s parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w_xh: Vec<f64>,
    pub w_hh: Vec<f64>,
    pub b_h: Vec<f64>,
    pub w_o: Vec<f64>,
    pub b_o: f64,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `−[y·ln σ(z) + (1−y)·ln(1−σ(z))]` without overflow.
fn bce_from_logit(z: f64, label: bool) -> f64 {
    let softplus = z.max(0.0) + (-z.abs()).exp().ln_1p();
    softplus - if label { z } else { 0.0 }
}

impl Rnn {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Rnn {
        Rnn {
            input_dim,
            hidden_dim,
            w_xh: vec![0.0; hidden_dim * input_dim],
            w_hh: vec![0.0; hidden_dim * hidden_dim],
            b_h: vec![0.0; hidden_dim],
            w_o: vec![0.0; hidden_dim],
            b_o: 0.0,
        }
    }

    /// Uniform Glorot initialisation; biases start at zero.
    pub fn random<R: Rng>(input_dim: usize, hidden_dim: usize, rng: &mut R) -> Rnn {
        let mut m = Rnn::zeros(input_dim, hidden_dim);
        let a = (6.0 / (input_dim + hidden_dim) as f64).sqrt();
        let b = (3.0 / hidden_dim as f64).sqrt();
        let c = (6.0 / (hidden_dim + 1) as f64).sqrt();
        m.w_xh.iter_mut().for_each(|w| *w = rng.random_range(-a..a));
        m.w_hh.iter_mut().for_each(|w| *w = rng.random_range(-b..b));
        m.w_o.iter_mut().for_each(|w| *w = rng.random_range(-c..c));
        m
    }

    pub fn param_count(&self) -> usize {
        self.w_xh.len() + self.w_hh.len() + self.b_h.len() + self.w_o.len() + 1
    }

    /// All parameters flattened in declaration order.
    pub fn params(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.param_count());
        v.extend_from_slice(&self.w_xh);
        v.extend_from_slice(&self.w_hh);
        v.extend_from_slice(&self.b_h);
        v.extend_from_slice(&self.w_o);
        v.push(self.b_o);
        v
    }

    pub fn set_params(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.param_count());
        let mut rest = flat;
        for dst in [&mut self.w_xh, &mut self.w_hh, &mut self.b_h, &mut self.w_o] {
            let (head, tail) = rest.split_at(dst.len());
            dst.copy_from_slice(head);
            rest = tail;
        }
        self.b_o = rest[0];
    }

    pub fn is_finite(&self) -> bool {
        self.params().iter().all(|p| p.is_finite())
    }

    fn check(&self, xs: &[Vec<f64>]) -> Result<(), PredictionError> {
        if xs.is_empty() {
            return Err(PredictionError::EmptySequence);
        }
        if let Some((step, x)) = xs.iter().enumerate().find(|(_, x)| x.len() != self.input_dim) {
            return Err(PredictionError::DimensionMismatch { step, expected: self.input_dim, got: x.len() });
        }
        Ok(())
    }

    fn step(&self, x: &[f64], h_prev: &[f64]) -> Vec<f64> {
        let (d, hd) = (self.input_dim, self.hidden_dim);
        (0..hd)
            .map(|i| {
                let wx: f64 = self.w_xh[i * d..(i + 1) * d].iter().zip(x).map(|(w, x)| w * x).sum();
                let wh: f64 = self.w_hh[i * hd..(i + 1) * hd].iter().zip(h_prev).map(|(w, h)| w * h).sum();
                (wx + wh + self.b_h[i]).tanh()
            })
            .collect()
    }

    /// Hidden states `h_0..=h_T` and the output logit.
    pub fn trace(&self, xs: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, f64), PredictionError> {
        self.check(xs)?;
        let mut hs = Vec::with_capacity(xs.len() + 1);
        hs.push(vec![0.0; self.hidden_dim]);
        for x in xs {
            let h = self.step(x, hs.last().expect("h_0"));
            hs.push(h);
        }
        let last = hs.last().expect("nonempty");
        let z = self.w_o.iter().zip(last).map(|(w, h)| w * h).sum::<f64>() + self.b_o;
        Ok((hs, z))
    }

    /// Probability of class 1.
    pub fn forward(&self, xs: &[Vec<f64>]) -> Result<f64, PredictionError> {
        Ok(sigmoid(self.trace(xs)?.1))
    }

    pub fn loss(&self, batch: &[(Vec<Vec<f64>>, bool)]) -> Result<f64, PredictionError> {
        let mut total = 0.0;
        for (xs, y) in batch {
            total += bce_from_logit(self.trace(xs)?.1, *y);
        }
        Ok(total / batch.len().max(1) as f64)
    }

    /// Mean cross-entropy over the batch and its gradient by BPTT.
    pub fn loss_and_gradients(&self, batch: &[(Vec<Vec<f64>>, bool)]) -> Result<(f64, Gradients), PredictionError> {
        let (d, hd) = (self.input_dim, self.hidden_dim);
        let mut g = Gradients {
            w_xh: vec![0.0; hd * d],
            w_hh: vec![0.0; hd * hd],
            b_h: vec![0.0; hd],
            w_o: vec![0.0; hd],
            b_o: 0.0,
        };
        let mut total = 0.0;
        for (xs, y) in batch {
            let (hs, z) = self.trace(xs)?;
            total += bce_from_logit(z, *y);
            let dz = sigmoid(z) - if *y { 1.0 } else { 0.0 };
            let h_last = hs.last().expect("h_T");
            for i in 0..hd {
                g.w_o[i] += dz * h_last[i];
            }
            g.b_o += dz;

            let mut dh: Vec<f64> = self.w_o.iter().map(|w| w * dz).collect();
            for t in (1..hs.len()).rev() {
                let x = &xs[t - 1];
                let h_prev = &hs[t - 1];
                let da: Vec<f64> = dh.iter().zip(&hs[t]).map(|(g, h)| g * (1.0 - h * h)).collect();
                for i in 0..hd {
                    let row = &mut g.w_xh[i * d..(i + 1) * d];
                    row.iter_mut().zip(x).for_each(|(gw, xj)| *gw += da[i] * xj);
                    let row = &mut g.w_hh[i * hd..(i + 1) * hd];
                    row.iter_mut().zip(h_prev).for_each(|(gw, hj)| *gw += da[i] * hj);
                    g.b_h[i] += da[i];
                }
                dh = (0..hd).map(|j| (0..hd).map(|i| self.w_hh[i * hd + j] * da[i]).sum()).collect();
            }
        }
        let n = batch.len().max(1) as f64;
        for v in [&mut g.w_xh, &mut g.w_hh, &mut g.b_h, &mut g.w_o] {
            v.iter_mut().for_each(|x| *x /= n);
        }
        g.b_o /= n;
        Ok((total / n, g))
    }
}

impl Gradients {
    pub fn flat(&self) -> Vec<f64> {
        let mut v = Vec::new();
        v.extend_from_slice(&self.w_xh);
        v.extend_from_slice(&self.w_hh);
        v.extend_from_slice(&self.b_h);
        v.extend_from_slice(&self.w_o);
        v.push(self.b_o);
        v
    }

    pub fn norm(&self) -> f64 {
        self.flat().iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

/// Per-column affine standardisation fitted on training data. Columns
/// holding only 0/1 (one-hots, event type) pass through unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Normalizer {
    pub fn identity(dim: usize) -> Normalizer {
        Normalizer { mean: vec![0.0; dim], scale: vec![1.0; dim] }
    }

    pub fn fit<'a, I>(dim: usize, rows: I) -> Normalizer
    where
        I: IntoIterator<Item = &'a Vec<f64>>,
    {
        let mut n = 0usize;
        let mut sum = vec![0.0; dim];
        let mut sumsq = vec![0.0; dim];
        let mut binary = vec![true; dim];
        for r in rows {
            n += 1;
            for (j, &x) in r.iter().enumerate() {
                sum[j] += x;
                sumsq[j] += x * x;
                if x != 0.0 && x != 1.0 {
                    binary[j] = false;
                }
            }
        }
        let mut out = Normalizer::identity(dim);
        if n == 0 {
            return out;
        }
        for j in 0..dim {
            if binary[j] {
                continue;
            }
            let mean = sum[j] / n as f64;
            let var = (sumsq[j] / n as f64 - mean * mean).max(0.0);
            out.mean[j] = mean;
            out.scale[j] = if var > 1e-12 { var.sqrt() } else { 1.0 };
        }
        out
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(self.mean.iter().zip(&self.scale)).map(|(x, (m, s))| (x - m) / s).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hyperparams {
    pub hidden_dim: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Rescale the gradient when its L2 norm exceeds this.
    pub clip_norm: Option<f64>,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams { hidden_dim: 8, epochs: 300, learning_rate: 0.5, clip_norm: Some(5.0) }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<(), PredictionError> {
        if self.hidden_dim == 0 {
            return Err(PredictionError::Hyperparams("hidden_dim must be at least 1".into()));
        }
        if self.epochs == 0 {
            return Err(PredictionError::Hyperparams("epochs must be at least 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(PredictionError::Hyperparams("learning_rate must be positive".into()));
        }
        if let Some(c) = self.clip_norm {
            if !(c.is_finite() && c > 0.0) {
                return Err(PredictionError::Hyperparams("clip_norm must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Training loss before each epoch's update, then the final loss.
    pub loss_curve: Vec<f64>,
}

/// A trained dwell-threshold classifier with its input standardisation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DwellModel {
    pub threshold_hours: u32,
    #[serde(default)]
    pub lane_id: String,
    #[serde(default)]
    pub milestone: Option<Milestone>,
    #[serde(default)]
    pub port: Option<String>,
    pub normalizer: Normalizer,
    pub rnn: Rnn,
    pub training: TrainingMeta,
}

impl DwellModel {
    pub fn hidden_dim(&self) -> usize {
        self.rnn.hidden_dim
    }

    pub fn input_dim(&self) -> usize {
        self.rnn.input_dim
    }

    /// Probability that dwell exceeds `threshold_hours`.
    pub fn score(&self, sequence: &[Vec<f64>]) -> Result<f64, PredictionError> {
        if let Some((step, x)) = sequence.iter().enumerate().find(|(_, x)| x.len() != self.input_dim()) {
            return Err(PredictionError::DimensionMismatch { step, expected: self.input_dim(), got: x.len() });
        }
        let xs: Vec<Vec<f64>> = sequence.iter().map(|x| self.normalizer.apply(x)).collect();
        self.rnn.forward(&xs)
    }

    pub fn classify(&self, sequence: &[Vec<f64>]) -> Result<bool, PredictionError> {
        Ok(self.score(sequence)? > 0.5)
    }
}

/// Fit a dwell classifier. Deterministic in `seed`.
pub fn train(
    dataset: &[(Vec<Vec<f64>>, bool)],
    threshold_hours: u32,
    hyperparams: &Hyperparams,
    seed: u64,
) -> Result<DwellModel, PredictionError> {
    hyperparams.validate()?;
    let first = dataset.first().ok_or(PredictionError::EmptySequence)?;
    if first.0.is_empty() {
        return Err(PredictionError::EmptySequence);
    }
    let dim = first.0[0].len();
    for (xs, _) in dataset {
        if xs.is_empty() {
            return Err(PredictionError::EmptySequence);
        }
        if let Some((step, x)) = xs.iter().enumerate().find(|(_, x)| x.len() != dim) {
            return Err(PredictionError::DimensionMismatch { step, expected: dim, got: x.len() });
        }
    }
    let positives = dataset.iter().filter(|(_, y)| *y).count();
    if positives == 0 || positives == dataset.len() {
        return Err(PredictionError::SingleClass(positives > 0));
    }

    let normalizer = Normalizer::fit(dim, dataset.iter().flat_map(|(xs, _)| xs.iter()));
    let batch: Vec<(Vec<Vec<f64>>, bool)> =
        dataset.iter().map(|(xs, y)| (xs.iter().map(|x| normalizer.apply(x)).collect(), *y)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rnn = Rnn::random(dim, hyperparams.hidden_dim, &mut rng);
    let mut curve = Vec::with_capacity(hyperparams.epochs + 1);
    for _ in 0..hyperparams.epochs {
        let (loss, g) = rnn.loss_and_gradients(&batch)?;
        curve.push(loss);
        let norm = g.norm();
        let mut step = hyperparams.learning_rate;
        if let Some(c) = hyperparams.clip_norm {
            if norm > c {
                step *= c / norm;
            }
        }
        let mut p = rnn.params();
        p.iter_mut().zip(g.flat()).for_each(|(w, g)| *w -= step * g);
        rnn.set_params(&p);
    }
    curve.push(rnn.loss(&batch)?);

    Ok(DwellModel {
        threshold_hours,
        lane_id: String::new(),
        milestone: None,
        port: None,
        normalizer,
        rnn,
        training: TrainingMeta {
            seed,
            epochs: hyperparams.epochs,
            learning_rate: hyperparams.learning_rate,
            loss_curve: curve,
        },
    })
}
