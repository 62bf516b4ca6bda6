//! Full-batch training of the push-value model with weighted smooth-L1 loss.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::par::{self, Execution};
use crate::scene::WorkspaceSpec;
use crate::sim::TipSpec;
use crate::{derive_seed, rng_for};

use super::dataset::{Dataset, TransitionRecord};
use super::features::{FeatureView, FEATURE_COUNT};
use super::label::make_label;
use super::model::{sigmoid, PriorModel};
use super::PriorError;

const CHUNK: usize = 2048;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub beta: f64,
    pub w_collision: f64,
    pub w_empty: f64,
    /// Label weight is `min(N, s) / s`.
    pub visit_saturation: u32,
    pub epochs: usize,
    pub learn_rate: f64,
    /// Cosine schedule decays to `learn_rate * final_lr_fraction`.
    pub final_lr_fraction: f64,
    pub hidden: usize,
    pub holdout_fraction: f64,
    /// Training cells are subsampled to at most this many.
    pub max_samples: usize,
    pub eta: f64,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            beta: 0.8,
            w_collision: 0.001,
            w_empty: 0.0001,
            visit_saturation: 10,
            epochs: 300,
            learn_rate: 0.01,
            final_lr_fraction: 0.05,
            hidden: 32,
            holdout_fraction: 0.2,
            max_samples: 60_000,
            eta: 1.2,
            seed: 0,
        }
    }
}

/// Flattened labeled cells.
#[derive(Clone, Debug, Default)]
pub struct Samples {
    pub x: Vec<[f64; FEATURE_COUNT]>,
    pub y: Vec<f64>,
    pub w: Vec<f64>,
}

impl Samples {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    fn extend(&mut self, other: Samples) {
        self.x.extend(other.x);
        self.y.extend(other.y);
        self.w.extend(other.w);
    }
}

pub fn record_samples(rec: &TransitionRecord, cfg: &TrainingConfig, ws: &WorkspaceSpec, tip: &TipSpec) -> Result<Samples, PriorError> {
    let grids = rec.grids.decode().map_err(PriorError::Format)?;
    let view = FeatureView::new(&grids, rec.push_angle, ws);
    let label = make_label(&grids, rec.action_cell, rec.q, rec.n_visits, cfg, ws, tip);
    let mut s = Samples::default();
    for c in label.cells.iter().filter(|c| c.weight > 0.0) {
        s.x.push(view.features(c.cell));
        s.y.push(c.label);
        s.w.push(c.weight);
    }
    Ok(s)
}

pub fn build_samples(
    records: &[&TransitionRecord],
    cfg: &TrainingConfig,
    ws: &WorkspaceSpec,
    tip: &TipSpec,
    exec: Execution,
) -> Result<Samples, PriorError> {
    let parts = par::map(exec, records, |r| record_samples(r, cfg, ws, tip));
    let mut out = Samples::default();
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

pub fn smooth_l1(d: f64, beta: f64) -> f64 {
    let a = d.abs();
    if a < beta {
        0.5 * d * d / beta
    } else {
        a - 0.5 * beta
    }
}

/// Weighted mean smooth-L1 of `model` over `samples`.
pub fn weighted_loss(model: &PriorModel, samples: &Samples, beta: f64) -> f64 {
    let total: f64 = samples.w.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let sum: f64 = (0..samples.len())
        .map(|i| samples.w[i] * smooth_l1(model.forward_std(&model.standardize(&samples.x[i])) - samples.y[i], beta))
        .sum();
    sum / total
}

/// Same loss for a predictor that outputs 0 everywhere.
pub fn zero_predictor_loss(samples: &Samples, beta: f64) -> f64 {
    let total: f64 = samples.w.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    samples.y.iter().zip(&samples.w).map(|(y, w)| w * smooth_l1(*y, beta)).sum::<f64>() / total
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct TrainReport {
    pub train_loss: Vec<f64>,
    pub heldout_loss: Vec<f64>,
    pub zero_heldout_loss: f64,
    pub train_samples: usize,
    pub heldout_samples: usize,
    /// Held-out loss was measured on the training set (no held-out cases).
    pub heldout_is_train: bool,
}

pub fn is_heldout(case_id: u64, cfg: &TrainingConfig) -> bool {
    (derive_seed(cfg.seed, case_id ^ 0x4E1D) % 10_000) < (cfg.holdout_fraction * 10_000.0) as u64
}

struct Params {
    h: usize,
    theta: Vec<f64>,
}

impl Params {
    fn b1_off(&self) -> usize {
        self.h * FEATURE_COUNT
    }
    fn w2_off(&self) -> usize {
        self.b1_off() + self.h
    }
    fn b2_off(&self) -> usize {
        self.w2_off() + self.h
    }

    fn into_model(&self, base: &PriorModel) -> PriorModel {
        let t = &self.theta;
        PriorModel {
            w1: t[..self.b1_off()].to_vec(),
            b1: t[self.b1_off()..self.w2_off()].to_vec(),
            w2: t[self.w2_off()..self.b2_off()].to_vec(),
            b2: t[self.b2_off()],
            ..base.clone()
        }
    }
}

/// Weighted loss and gradient on standardized inputs, summed per fixed chunk.
fn loss_grad(p: &Params, z: &[[f64; FEATURE_COUNT]], y: &[f64], w: &[f64], eta: f64, beta: f64, exec: Execution) -> (f64, Vec<f64>) {
    let idx: Vec<usize> = (0..y.len()).collect();
    let parts = par::map_chunks(exec, &idx, CHUNK, |chunk| {
        let mut g = vec![0.0; p.theta.len()];
        let mut loss = 0.0;
        let mut hid = vec![0.0; p.h];
        let (b1o, w2o, b2o) = (p.b1_off(), p.w2_off(), p.b2_off());
        for &i in chunk {
            let x = &z[i];
            let mut o = p.theta[b2o];
            for j in 0..p.h {
                let row = &p.theta[j * FEATURE_COUNT..(j + 1) * FEATURE_COUNT];
                let a = p.theta[b1o + j] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                hid[j] = a.tanh();
                o += p.theta[w2o + j] * hid[j];
            }
            let s = sigmoid(o);
            let d = eta * s - y[i];
            loss += w[i] * smooth_l1(d, beta);
            let dl = w[i] * if d.abs() < beta { d / beta } else { d.signum() };
            let go = dl * eta * s * (1.0 - s);
            g[b2o] += go;
            for j in 0..p.h {
                g[w2o + j] += go * hid[j];
                let ga = go * p.theta[w2o + j] * (1.0 - hid[j] * hid[j]);
                g[b1o + j] += ga;
                let row = &mut g[j * FEATURE_COUNT..(j + 1) * FEATURE_COUNT];
                for (gk, xk) in row.iter_mut().zip(x) {
                    *gk += ga * xk;
                }
            }
        }
        (loss, g)
    });
    let total: f64 = w.iter().sum::<f64>().max(f64::MIN_POSITIVE);
    let mut grad = vec![0.0; p.theta.len()];
    let mut loss = 0.0;
    for (l, g) in parts {
        loss += l;
        for (a, b) in grad.iter_mut().zip(g) {
            *a += b;
        }
    }
    grad.iter_mut().for_each(|v| *v /= total);
    (loss / total, grad)
}

fn standardization(x: &[[f64; FEATURE_COUNT]]) -> (Vec<f64>, Vec<f64>) {
    let n = x.len().max(1) as f64;
    let mut mean = vec![0.0; FEATURE_COUNT];
    for r in x {
        for k in 0..FEATURE_COUNT {
            mean[k] += r[k] / n;
        }
    }
    let mut var = [0.0; FEATURE_COUNT];
    for r in x {
        for k in 0..FEATURE_COUNT {
            var[k] += (r[k] - mean[k]).powi(2) / n;
        }
    }
    let scale = var.iter().map(|v| if v.sqrt() > 1e-9 { 1.0 / v.sqrt() } else { 1.0 }).collect();
    (mean, scale)
}

/// Fit a model on the non-held-out cases of `dataset`. The training loss
/// never increases between epochs: a step that would raise it is discarded
/// and the step size halved.
pub fn train(
    dataset: &Dataset,
    cfg: &TrainingConfig,
    ws: &WorkspaceSpec,
    tip: &TipSpec,
    exec: Execution,
) -> Result<(PriorModel, TrainReport), PriorError> {
    if dataset.is_empty() {
        return Err(PriorError::EmptyDataset);
    }
    let (held, fit): (Vec<&TransitionRecord>, Vec<&TransitionRecord>) =
        dataset.records.iter().partition(|r| is_heldout(r.case_id, cfg));
    let (fit, held, heldout_is_train) = if fit.is_empty() || held.is_empty() {
        let all: Vec<&TransitionRecord> = dataset.records.iter().collect();
        (all.clone(), all, true)
    } else {
        (fit, held, false)
    };
    let mut train_set = build_samples(&fit, cfg, ws, tip, exec)?;
    let held_set = build_samples(&held, cfg, ws, tip, exec)?;
    if train_set.is_empty() {
        return Err(PriorError::EmptyDataset);
    }
    let mut rng = rng_for(cfg.seed, 0x7EA1);
    if train_set.len() > cfg.max_samples {
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        order.shuffle(&mut rng);
        order.truncate(cfg.max_samples);
        order.sort_unstable();
        train_set = Samples {
            x: order.iter().map(|&i| train_set.x[i]).collect(),
            y: order.iter().map(|&i| train_set.y[i]).collect(),
            w: order.iter().map(|&i| train_set.w[i]).collect(),
        };
    }

    let (mean, scale) = standardization(&train_set.x);
    let mut base = PriorModel::zeros(cfg.hidden, cfg.eta);
    base.mean = mean;
    base.scale = scale;
    let z: Vec<[f64; FEATURE_COUNT]> = train_set.x.iter().map(|x| base.standardize(x)).collect();

    let h = cfg.hidden;
    let mut params = Params { h, theta: vec![0.0; h * FEATURE_COUNT + 2 * h + 1] };
    let a1 = (6.0 / (FEATURE_COUNT + h) as f64).sqrt();
    let a2 = (6.0 / (h + 1) as f64).sqrt();
    for v in &mut params.theta[..h * FEATURE_COUNT] {
        *v = rng.gen_range(-a1..a1);
    }
    let w2o = params.w2_off();
    for v in &mut params.theta[w2o..w2o + h] {
        *v = rng.gen_range(-a2..a2);
    }

    let (b1, b2, eps) = (0.9, 0.999, 1e-8);
    let mut m = vec![0.0; params.theta.len()];
    let mut v = vec![0.0; params.theta.len()];
    let mut step = 0i32;
    let mut mult = 1.0;
    let (mut loss, mut grad) = loss_grad(&params, &z, &train_set.y, &train_set.w, cfg.eta, cfg.beta, exec);
    let mut report = TrainReport {
        zero_heldout_loss: zero_predictor_loss(&held_set, cfg.beta),
        train_samples: train_set.len(),
        heldout_samples: held_set.len(),
        heldout_is_train,
        ..TrainReport::default()
    };
    let lr_min = cfg.learn_rate * cfg.final_lr_fraction;
    for epoch in 0..cfg.epochs {
        let cos = 0.5 * (1.0 + (std::f64::consts::PI * epoch as f64 / cfg.epochs.max(1) as f64).cos());
        let lr = (lr_min + (cfg.learn_rate - lr_min) * cos) * mult;
        let t = step + 1;
        let mut m2 = m.clone();
        let mut v2 = v.clone();
        let mut trial = Params { h, theta: params.theta.clone() };
        for k in 0..trial.theta.len() {
            m2[k] = b1 * m2[k] + (1.0 - b1) * grad[k];
            v2[k] = b2 * v2[k] + (1.0 - b2) * grad[k] * grad[k];
            let mh = m2[k] / (1.0 - b1.powi(t));
            let vh = v2[k] / (1.0 - b2.powi(t));
            trial.theta[k] -= lr * mh / (vh.sqrt() + eps);
        }
        let (l2, g2) = loss_grad(&trial, &z, &train_set.y, &train_set.w, cfg.eta, cfg.beta, exec);
        if l2 <= loss {
            params = trial;
            m = m2;
            v = v2;
            step = t;
            loss = l2;
            grad = g2;
        } else {
            mult *= 0.5;
        }
        report.train_loss.push(loss);
        let model = params.into_model(&base);
        report.heldout_loss.push(weighted_loss(&model, &held_set, cfg.beta));
    }
    Ok((params.into_model(&base), report))
}
