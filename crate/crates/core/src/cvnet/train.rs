use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::loss::{weighted_bce, weighted_bce_grad_logit, PosWeight};
use super::model::{Network, NetworkParams};
use super::tensor::Tensor;
use crate::dhdc::LabeledFrame;
use crate::error::{Error, Result};
use crate::numerics::SeededRng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub epochs: usize,
    pub batch: usize,
    pub seed: u64,
    /// Hard cap on optimizer steps across all epochs.
    pub max_steps: Option<usize>,
    pub pos_weight: PosWeight,
    /// Probability that a training crop is placed over a labelled peak.
    pub target_crop_prob: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            epochs: 30,
            batch: 8,
            seed: 0,
            max_steps: None,
            pos_weight: PosWeight::Auto,
            target_crop_prob: 0.9,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) || self.batch == 0 || self.epochs == 0 {
            return Err(Error::Parameter("lr, batch and epochs must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.target_crop_prob) {
            return Err(Error::Parameter("target_crop_prob must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub steps: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: NetworkParams,
    pub log: Vec<EpochLog>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    /// Set when training stopped on a non-finite loss or parameter.
    pub aborted: Option<String>,
}

/// A network-sized input crop and its label.
#[derive(Clone, Debug)]
pub struct Sample {
    pub input: Tensor,
    pub mask: Vec<f64>,
}

/// Cut a `patch` crop from `frame`. With probability `target_prob` (and a
/// non-empty mask) the crop covers a randomly chosen labelled cell.
pub fn sample_crop(frame: &LabeledFrame, patch: [usize; 2], target_prob: f64, rng: &mut SeededRng) -> Result<Sample> {
    let (rows, cols) = frame.rdm.shape();
    let [ph, pw] = patch;
    if ph > rows || pw > cols {
        return Err(Error::Dimension(format!("patch {ph}x{pw} exceeds frame {rows}x{cols}")));
    }
    let positives: Vec<usize> = frame
        .mask
        .bits()
        .iter()
        .enumerate()
        .filter_map(|(i, &b)| b.then_some(i))
        .collect();
    let (r0, c0) = if !positives.is_empty() && rng.bernoulli(target_prob) {
        let i = positives[rng.uniform_int(0, positives.len() as u64 - 1) as usize];
        let (r, c) = (i / cols, i % cols);
        let pick = |rng: &mut SeededRng, p: usize, len: usize, size: usize| {
            let lo = (p + 1).saturating_sub(size);
            let hi = p.min(len - size);
            rng.uniform_int(lo as u64, hi as u64) as usize
        };
        (pick(rng, r, rows, ph), pick(rng, c, cols, pw))
    } else {
        (
            rng.uniform_int(0, (rows - ph) as u64) as usize,
            rng.uniform_int(0, (cols - pw) as u64) as usize,
        )
    };
    let crop = frame.rdm.crop(r0, c0, ph, pw)?;
    Ok(Sample {
        input: Tensor::from_frame(&crop),
        mask: frame.mask.crop(r0, c0, ph, pw).as_f64(),
    })
}

/// Loss and parameter gradient for one sample.
pub fn sample_loss_grad(net: &Network, params: &NetworkParams, s: &Sample, pw: PosWeight) -> Result<(f64, Vec<f64>)> {
    let cache = net.forward_cached(params, &s.input)?;
    let w = pw.resolve(&s.mask);
    let loss = weighted_bce(&cache.probs, &s.mask, w)?;
    let gl = weighted_bce_grad_logit(&cache.probs, &s.mask, w);
    let (grads, _) = net.backward(params, &cache, &gl);
    Ok((loss, grads))
}

pub fn sample_loss(net: &Network, params: &NetworkParams, s: &Sample, pw: PosWeight) -> Result<f64> {
    let cache = net.forward_cached(params, &s.input)?;
    weighted_bce(&cache.probs, &s.mask, pw.resolve(&s.mask))
}

fn mean_loss(net: &Network, params: &NetworkParams, samples: &[Sample], pw: PosWeight) -> Result<f64> {
    let losses = samples
        .par_iter()
        .map(|s| sample_loss(net, params, s, pw))
        .collect::<Result<Vec<_>>>()?;
    Ok(losses.iter().sum::<f64>() / losses.len().max(1) as f64)
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn step(&mut self, hp: &TrainConfig, params: &mut [f64], grads: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - hp.beta1.powi(self.t);
        let c2 = 1.0 - hp.beta2.powi(self.t);
        for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *m = hp.beta1 * *m + (1.0 - hp.beta1) * g;
            *v = hp.beta2 * *v + (1.0 - hp.beta2) * g * g;
            *p -= hp.lr * (*m / c1) / ((*v / c2).sqrt() + hp.adam_eps);
        }
    }
}

/// Train from a seeded initialisation and return the checkpoint with the
/// lowest validation loss (training loss when `val` is empty).
pub fn train(net: &Network, train_set: &[LabeledFrame], val: &[LabeledFrame], hp: &TrainConfig) -> Result<TrainOutcome> {
    train_from(net, net.init_params(hp.seed), train_set, val, hp)
}

pub fn train_from(
    net: &Network,
    init: NetworkParams,
    train_set: &[LabeledFrame],
    val: &[LabeledFrame],
    hp: &TrainConfig,
) -> Result<TrainOutcome> {
    hp.validate()?;
    net.check_params(&init)?;
    if train_set.is_empty() {
        return Err(Error::Parameter("training set is empty".into()));
    }
    let patch = net.config().patch;
    let root = SeededRng::new(hp.seed, 0x7EA1);
    let mut val_rng = root.derive(1);
    let val_samples = val
        .iter()
        .map(|f| sample_crop(f, patch, hp.target_crop_prob, &mut val_rng))
        .collect::<Result<Vec<_>>>()?;

    let mut params = init;
    let mut best = params.clone();
    let mut best_loss = f64::INFINITY;
    let mut best_epoch = 0;
    let mut adam = Adam {
        m: vec![0.0; params.len()],
        v: vec![0.0; params.len()],
        t: 0,
    };
    let mut log = Vec::new();
    let mut steps = 0usize;
    let steps_per_epoch = train_set.len().div_ceil(hp.batch);
    let cap = hp.max_steps.unwrap_or(usize::MAX);

    for epoch in 0..hp.epochs {
        if steps >= cap {
            break;
        }
        let mut rng = root.derive(2 + epoch as u64);
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        for i in (1..order.len()).rev() {
            let j = rng.uniform_int(0, i as u64) as usize;
            order.swap(i, j);
        }
        let mut epoch_loss = 0.0;
        let mut epoch_samples = 0usize;
        for step in 0..steps_per_epoch {
            if steps >= cap {
                break;
            }
            let batch = (0..hp.batch)
                .map(|b| {
                    let f = &train_set[order[(step * hp.batch + b) % order.len()]];
                    sample_crop(f, patch, hp.target_crop_prob, &mut rng)
                })
                .collect::<Result<Vec<_>>>()?;
            let results = batch
                .par_iter()
                .map(|s| sample_loss_grad(net, &params, s, hp.pos_weight))
                .collect::<Result<Vec<_>>>()?;
            let mut grad = vec![0.0; params.len()];
            let mut loss = 0.0;
            for (l, g) in &results {
                loss += l;
                for (a, b) in grad.iter_mut().zip(g) {
                    *a += b;
                }
            }
            let inv = 1.0 / results.len() as f64;
            grad.iter_mut().for_each(|g| *g *= inv);
            loss *= inv;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Ok(abort(best, params, log, best_epoch, best_loss, format!("non-finite loss at epoch {epoch}, step {steps}")));
            }
            let last = params.clone();
            adam.step(hp, &mut params.values, &grad);
            steps += 1;
            if !params.is_finite() {
                return Ok(abort(best, last, log, best_epoch, best_loss, format!("non-finite parameters at epoch {epoch}, step {steps}")));
            }
            epoch_loss += loss * results.len() as f64;
            epoch_samples += results.len();
        }
        let train_loss = epoch_loss / epoch_samples.max(1) as f64;
        let val_loss = if val_samples.is_empty() {
            train_loss
        } else {
            mean_loss(net, &params, &val_samples, hp.pos_weight)?
        };
        log.push(EpochLog {
            epoch,
            steps,
            train_loss,
            val_loss,
        });
        if val_loss < best_loss {
            best_loss = val_loss;
            best_epoch = epoch;
            best = params.clone();
        }
    }
    Ok(TrainOutcome {
        params: best,
        log,
        best_epoch,
        best_val_loss: best_loss,
        aborted: None,
    })
}

fn abort(
    best: NetworkParams,
    last: NetworkParams,
    log: Vec<EpochLog>,
    best_epoch: usize,
    best_loss: f64,
    reason: String,
) -> TrainOutcome {
    let params = if best_loss.is_finite() { best } else { last };
    TrainOutcome {
        params,
        log,
        best_epoch,
        best_val_loss: best_loss,
        aborted: Some(reason),
    }
}
