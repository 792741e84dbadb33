//! A per-patch logistic head distilled from UnionCut masks.
//!
//! The head scores each frozen patch feature with `sigmoid(w·k + b)`; scores
//! above 0.5 form the hard prediction. Training targets come from
//! [`select_label`]: the UnionCut mask while the head still disagrees with it
//! (IoU below 0.5), the head's own hard prediction once it agrees. During the
//! first warm-up iterations a second cross-entropy term against the UnionCut
//! mask is added.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::analysis::mask_iou;
use crate::error::{Error, Result};
use crate::tensor_io::{
    read_file, write_f32s, write_file, write_header, BinaryMask, Decoder, FeatureGrid, HeatMap,
    HEAD_MAGIC,
};

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` inside logarithms.
pub const PROB_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticHead {
    weights: Vec<f64>,
    bias: f64,
}

impl LogisticHead {
    pub fn new(weights: Vec<f64>, bias: f64) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidDimensions("head has no weights".into()));
        }
        if let Some(i) = weights.iter().position(|w| !w.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        if !bias.is_finite() {
            return Err(Error::NonFinite(weights.len()));
        }
        Ok(Self { weights, bias })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            weights: vec![0.0; dim],
            bias: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    /// The same head with parameters rounded to `f32`, as stored on disk.
    pub fn rounded_to_f32(&self) -> Self {
        Self {
            weights: self.weights.iter().map(|&w| f64::from(w as f32)).collect(),
            bias: f64::from(self.bias as f32),
        }
    }

    fn logit(&self, feature: &[f32]) -> f64 {
        self.weights
            .iter()
            .zip(feature)
            .map(|(&w, &k)| w * f64::from(k))
            .sum::<f64>()
            + self.bias
    }

    fn check_grid(&self, grid: &FeatureGrid) -> Result<()> {
        if grid.dim() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "head has dimension {}, features have {}",
                self.dim(),
                grid.dim()
            )));
        }
        Ok(())
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn scores(head: &LogisticHead, grid: &FeatureGrid) -> Vec<f64> {
    grid.vectors().map(|k| sigmoid(head.logit(k))).collect()
}

fn hard_from_scores(grid: &FeatureGrid, scores: &[f64]) -> BinaryMask {
    let bits: Vec<bool> = scores.iter().map(|&s| s > 0.5).collect();
    BinaryMask::from_bools(grid.height(), grid.width(), &bits).expect("one score per patch")
}

/// Soft scores in `[0, 1]` and the hard mask `score > 0.5`.
pub fn predict(head: &LogisticHead, grid: &FeatureGrid) -> Result<(HeatMap, BinaryMask)> {
    head.check_grid(grid)?;
    let s = scores(head, grid);
    let soft = HeatMap::new(
        grid.height(),
        grid.width(),
        s.iter().map(|&v| v as f32).collect(),
    )?;
    Ok((soft, hard_from_scores(grid, &s)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelSource {
    UnionCut,
    OwnPrediction,
}

/// Training label and where it came from.
pub fn select_label_with_source(
    u_seg_hard: &BinaryMask,
    u_cut: &BinaryMask,
) -> Result<(BinaryMask, LabelSource)> {
    let iou = mask_iou(u_seg_hard, u_cut)?;
    if iou < 0.5 {
        Ok((u_cut.clone(), LabelSource::UnionCut))
    } else {
        Ok((u_seg_hard.clone(), LabelSource::OwnPrediction))
    }
}

pub fn select_label(u_seg_hard: &BinaryMask, u_cut: &BinaryMask) -> Result<BinaryMask> {
    select_label_with_source(u_seg_hard, u_cut).map(|(l, _)| l)
}

fn bce_term(target: u8, s: f64) -> (f64, f64) {
    // returns (loss, d loss / d logit)
    let p = s.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    let y = f64::from(target);
    let loss = -(y * p.ln() + (1.0 - y) * (1.0 - p).ln());
    let grad = if s == p { s - y } else { 0.0 };
    (loss, grad)
}

/// Mean cross-entropy against `label`, plus the same against `u_cut` when
/// `warmup` is set, with its gradient in `(weights..., bias)` order.
pub fn loss_with_labels(
    head: &LogisticHead,
    grid: &FeatureGrid,
    label: &BinaryMask,
    u_cut: &BinaryMask,
    warmup: bool,
) -> Result<(f64, Vec<f64>)> {
    head.check_grid(grid)?;
    for m in [label, u_cut] {
        if m.height() != grid.height() || m.width() != grid.width() {
            return Err(Error::DimensionMismatch(format!(
                "mask {}x{} vs features {}x{}",
                m.height(),
                m.width(),
                grid.height(),
                grid.width()
            )));
        }
    }
    let n = grid.patch_count() as f64;
    let dim = head.dim();
    let mut loss = 0.0;
    let mut grad = vec![0.0; dim + 1];
    for (i, k) in grid.vectors().enumerate() {
        let s = sigmoid(head.logit(k));
        let (mut l, mut g) = bce_term(label.data()[i], s);
        if warmup {
            let (l2, g2) = bce_term(u_cut.data()[i], s);
            l += l2;
            g += g2;
        }
        loss += l;
        if g != 0.0 {
            for (gw, &x) in grad[..dim].iter_mut().zip(k) {
                *gw += g * f64::from(x);
            }
            grad[dim] += g;
        }
    }
    for g in &mut grad {
        *g /= n;
    }
    Ok((loss / n, grad))
}

/// Per-image objective at training iteration `iter`: the label is selected
/// from the head's current hard prediction, and the UnionCut term is active
/// while `iter < warmup_iters`.
pub fn loss_and_gradient_with_warmup(
    head: &LogisticHead,
    grid: &FeatureGrid,
    u_cut: &BinaryMask,
    iter: usize,
    warmup_iters: usize,
) -> Result<(f64, Vec<f64>)> {
    head.check_grid(grid)?;
    let s = scores(head, grid);
    let hard = hard_from_scores(grid, &s);
    let label = select_label(&hard, u_cut)?;
    loss_with_labels(head, grid, &label, u_cut, iter < warmup_iters)
}

/// [`loss_and_gradient_with_warmup`] with the default 100-iteration warm-up.
pub fn loss_and_gradient(
    head: &LogisticHead,
    grid: &FeatureGrid,
    u_cut: &BinaryMask,
    iter: usize,
) -> Result<(f64, Vec<f64>)> {
    loss_and_gradient_with_warmup(head, grid, u_cut, iter, TrainConfig::default().warmup_iters)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Learning rate is multiplied by `lr_decay` every `decay_every` iterations.
    pub lr_decay: f64,
    pub decay_every: usize,
    pub iterations: usize,
    pub warmup_iters: usize,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 50,
            learning_rate: 0.05,
            lr_decay: 0.95,
            decay_every: 50,
            iterations: 600,
            warmup_iters: 100,
            weight_decay: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 3407,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if self.batch_size == 0 {
            return bad("batch size must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return bad("learning-rate decay must be in (0, 1]");
        }
        if self.decay_every == 0 {
            return bad("decay interval must be positive");
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad("weight decay must be nonnegative");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("moment coefficients must be in [0, 1)");
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return bad("epsilon must be positive");
        }
        Ok(())
    }

    pub fn learning_rate_at(&self, iter: usize) -> f64 {
        self.learning_rate * self.lr_decay.powi((iter / self.decay_every) as i32)
    }
}

/// One training image: frozen features and its UnionCut mask.
#[derive(Debug, Clone)]
pub struct TrainingSample {
    pub grid: FeatureGrid,
    pub union: BinaryMask,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub head: LogisticHead,
    /// Mean batch loss before each update.
    pub losses: Vec<f64>,
}

/// Adam with decoupled weight decay.
struct AdamW {
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl AdamW {
    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }

    fn update(&mut self, params: &mut [f64], grad: &[f64], lr: f64, cfg: &TrainConfig) {
        self.step += 1;
        let bc1 = 1.0 - cfg.beta1.powi(self.step);
        let bc2 = 1.0 - cfg.beta2.powi(self.step);
        for (((p, &g), m), v) in params
            .iter_mut()
            .zip(grad)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            *p -= lr * cfg.weight_decay * *p;
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
    }
}

/// Yields batches from reshuffled epochs; a short final remainder starts a new epoch.
struct BatchSampler {
    order: Vec<usize>,
    cursor: usize,
    batch: usize,
    rng: ChaCha8Rng,
}

impl BatchSampler {
    fn new(n: usize, batch: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        Self {
            order,
            cursor: 0,
            batch: batch.min(n),
            rng,
        }
    }

    fn next_batch(&mut self) -> &[usize] {
        if self.cursor + self.batch > self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.cursor = 0;
        }
        let start = self.cursor;
        self.cursor += self.batch;
        &self.order[start..self.cursor]
    }
}

pub fn train(samples: &[TrainingSample], cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_with_observer(samples, cfg, |_, _| {})
}

/// Trains from a zero-initialized head. `observe(iter, loss)` sees each
/// iteration's pre-update batch loss.
pub fn train_with_observer(
    samples: &[TrainingSample],
    cfg: &TrainConfig,
    mut observe: impl FnMut(usize, f64),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let first = samples
        .first()
        .ok_or_else(|| Error::Empty("no training samples".into()))?;
    let dim = first.grid.dim();
    for s in samples {
        if s.grid.dim() != dim {
            return Err(Error::DimensionMismatch(format!(
                "feature dimension {} vs {dim}",
                s.grid.dim()
            )));
        }
        if s.union.height() != s.grid.height() || s.union.width() != s.grid.width() {
            return Err(Error::DimensionMismatch(format!(
                "UnionCut mask {}x{} vs features {}x{}",
                s.union.height(),
                s.union.width(),
                s.grid.height(),
                s.grid.width()
            )));
        }
    }

    let mut head = LogisticHead::zeros(dim);
    let mut params = vec![0.0; dim + 1];
    let mut opt = AdamW::new(dim + 1);
    let mut sampler = BatchSampler::new(samples.len(), cfg.batch_size, cfg.seed);
    let mut losses = Vec::with_capacity(cfg.iterations);

    for iter in 0..cfg.iterations {
        let batch = sampler.next_batch().to_vec();
        let results = batch
            .par_iter()
            .map(|&i| {
                let s = &samples[i];
                loss_and_gradient_with_warmup(&head, &s.grid, &s.union, iter, cfg.warmup_iters)
            })
            .collect::<Result<Vec<_>>>()?;
        let scale = 1.0 / results.len() as f64;
        let mut loss = 0.0;
        let mut grad = vec![0.0; dim + 1];
        for (l, g) in &results {
            loss += l * scale;
            for (a, b) in grad.iter_mut().zip(g) {
                *a += b * scale;
            }
        }
        losses.push(loss);
        observe(iter, loss);

        opt.update(&mut params, &grad, cfg.learning_rate_at(iter), cfg);
        head = LogisticHead {
            weights: params[..dim].to_vec(),
            bias: params[dim],
        };
    }

    Ok(TrainOutcome {
        head: head.rounded_to_f32(),
        losses,
    })
}

pub fn encode_head(head: &LogisticHead) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 4 * (head.dim() + 1));
    write_header(&mut out, HEAD_MAGIC, &[head.dim()]).expect("writing to a Vec cannot fail");
    let values: Vec<f32> = head
        .weights
        .iter()
        .chain(std::iter::once(&head.bias))
        .map(|&v| v as f32)
        .collect();
    write_f32s(&mut out, &values).expect("writing to a Vec cannot fail");
    out
}

pub fn decode_head(bytes: &[u8]) -> Result<LogisticHead> {
    let (mut dec, dims) = Decoder::open(bytes, HEAD_MAGIC, 1)?;
    let dim = dims[0];
    let values = dec
        .f32s(dim.checked_add(1).ok_or_else(|| {
            Error::InvalidDimensions(format!("head dimension {dim} overflows"))
        })?)?;
    dec.finish()?;
    let (w, b) = values.split_at(dim);
    LogisticHead::new(w.iter().map(|&v| f64::from(v)).collect(), f64::from(b[0]))
}

pub fn save_head(path: impl AsRef<Path>, head: &LogisticHead) -> Result<()> {
    write_file(path.as_ref(), &encode_head(head))
}

pub fn load_head(path: impl AsRef<Path>) -> Result<LogisticHead> {
    decode_head(&read_file(path.as_ref())?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pm_grid() -> FeatureGrid {
        // patches alternate between +u and -u, u = e0
        let data: Vec<f32> = (0..6)
            .flat_map(|i| if i % 2 == 0 { [1.0, 0.0] } else { [-1.0, 0.0] })
            .collect();
        FeatureGrid::new(2, 3, 2, data).unwrap()
    }

    #[test]
    fn zero_head_predicts_half_and_empty() {
        let grid = pm_grid();
        let (soft, hard) = predict(&LogisticHead::zeros(2), &grid).unwrap();
        assert!(soft.data().iter().all(|&v| v == 0.5));
        assert_eq!(hard.count_ones(), 0);
    }

    #[test]
    fn saturated_head_follows_sign() {
        let grid = pm_grid();
        let head = LogisticHead::new(vec![10.0, 0.0], 0.0).unwrap();
        let (soft, hard) = predict(&head, &grid).unwrap();
        for i in 0..6 {
            let expected = if i % 2 == 0 {
                sigmoid(10.0)
            } else {
                sigmoid(-10.0)
            };
            assert_eq!(soft.data()[i], expected as f32);
            assert_eq!(hard.is_set(i), i % 2 == 0);
        }
    }

    #[test]
    fn dimension_mismatch() {
        assert!(predict(&LogisticHead::zeros(3), &pm_grid()).is_err());
    }

    #[test]
    fn label_selection_cases() {
        let a = BinaryMask::new(1, 4, vec![1, 1, 0, 0]).unwrap();
        let b = BinaryMask::new(1, 4, vec![0, 0, 1, 1]).unwrap();
        let ab = BinaryMask::new(1, 4, vec![1, 1, 1, 1]).unwrap();
        assert_eq!(
            select_label_with_source(&a, &a).unwrap().1,
            LabelSource::OwnPrediction
        );
        assert_eq!(select_label(&a, &b).unwrap(), b);
        // IoU exactly 0.5 is not below the threshold
        assert_eq!(select_label(&a, &ab).unwrap(), a);
        // two empty masks agree
        let z = BinaryMask::zeros(1, 4);
        assert_eq!(
            select_label_with_source(&z, &z).unwrap().1,
            LabelSource::OwnPrediction
        );
    }

    #[test]
    fn uninformative_prediction_costs_ln2() {
        let grid = pm_grid();
        let label = BinaryMask::new(2, 3, vec![1, 0, 0, 1, 1, 0]).unwrap();
        let (loss, _) = loss_and_gradient(&LogisticHead::zeros(2), &grid, &label, 100).unwrap();
        assert!((loss - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn perfect_prediction_costs_nothing() {
        let grid = pm_grid();
        let label = BinaryMask::new(2, 3, vec![1, 0, 1, 0, 1, 0]).unwrap();
        let head = LogisticHead::new(vec![40.0, 0.0], 0.0).unwrap();
        let (loss, _) = loss_and_gradient(&head, &grid, &label, 100).unwrap();
        assert!(loss < 1e-6, "loss {loss}");
    }

    #[test]
    fn warmup_term_doubles_loss_when_labels_agree() {
        let grid = pm_grid();
        let cut = BinaryMask::new(2, 3, vec![1, 0, 0, 1, 1, 0]).unwrap();
        let head = LogisticHead::zeros(2);
        let (late, _) = loss_and_gradient(&head, &grid, &cut, 100).unwrap();
        let (early, _) = loss_and_gradient(&head, &grid, &cut, 99).unwrap();
        assert!((early - 2.0 * late).abs() < 1e-12);
    }

    #[test]
    fn learning_rate_schedule() {
        let cfg = TrainConfig::default();
        assert_eq!(cfg.learning_rate_at(0), 0.05);
        assert_eq!(cfg.learning_rate_at(49), 0.05);
        assert!((cfg.learning_rate_at(50) - 0.0475).abs() < 1e-15);
        assert!((cfg.learning_rate_at(599) - 0.05 * 0.95f64.powi(11)).abs() < 1e-15);
    }

    #[test]
    fn head_checkpoint_layout() {
        let head = LogisticHead::new(vec![0.5, -1.25], 2.0).unwrap();
        let bytes = encode_head(&head);
        assert_eq!(&bytes[..4], b"UCWT");
        assert_eq!(bytes.len(), 12 + 3 * 4);
        assert_eq!(decode_head(&bytes).unwrap(), head);
        let mut bad = bytes.clone();
        bad[..4].copy_from_slice(b"UCFT");
        assert!(matches!(decode_head(&bad), Err(Error::BadMagic { .. })));
        assert!(matches!(
            decode_head(&bytes[..bytes.len() - 2]),
            Err(Error::Truncated { .. })
        ));
    }

    #[test]
    fn train_rejects_empty() {
        assert!(matches!(
            train(&[], &TrainConfig::default()),
            Err(Error::Empty(_))
        ));
    }

    #[test]
    fn empty_union_drifts_to_background() {
        let grid = pm_grid();
        let sample = TrainingSample {
            grid: grid.clone(),
            union: BinaryMask::zeros(2, 3),
        };
        let cfg = TrainConfig {
            iterations: 200,
            ..TrainConfig::default()
        };
        let out = train(&[sample], &cfg).unwrap();
        let (soft, hard) = predict(&out.head, &grid).unwrap();
        assert_eq!(hard.count_ones(), 0);
        assert!(soft.data().iter().all(|&s| s < 0.1));
        assert!(out.losses.last().unwrap() < &out.losses[0]);
    }

    #[test]
    fn zero_iterations_returns_initial_head() {
        let sample = TrainingSample {
            grid: pm_grid(),
            union: BinaryMask::zeros(2, 3),
        };
        let cfg = TrainConfig {
            iterations: 0,
            ..TrainConfig::default()
        };
        let out = train(&[sample], &cfg).unwrap();
        assert_eq!(out.head, LogisticHead::zeros(2));
        assert!(out.losses.is_empty());
    }
}
