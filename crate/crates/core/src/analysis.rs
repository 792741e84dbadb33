//! Evaluation metrics, Monte-Carlo estimation of voter behavior, the
//! background-dominance inequality, the corner-prior audit and the
//! precision-gated usage contract for downstream discovery methods.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor_io::{BinaryMask, FeatureGrid};
use crate::unit_voter::VoterContext;

pub const DEFAULT_F_BETA: f64 = 0.3;
pub const DEFAULT_THETA: f64 = 0.5;
pub const DEFAULT_GAMMA: f64 = 0.8;

fn same_shape(a: &BinaryMask, b: &BinaryMask) -> Result<()> {
    if a.same_shape(b) {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(format!(
            "mask {}x{} vs {}x{}",
            a.height(),
            a.width(),
            b.height(),
            b.width()
        )))
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    num as f64 / den as f64
}

/// Intersection over union, with two empty masks counting as identical.
pub fn mask_iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    same_shape(a, b)?;
    let inter = a.intersection_count(b);
    let union = a.count_ones() + b.count_ones() - inter;
    Ok(if union == 0 { 1.0 } else { ratio(inter, union) })
}

/// Fraction of `mask` that lies inside `reference`; zero for an empty mask.
pub fn mask_precision(mask: &BinaryMask, reference: &BinaryMask) -> Result<f64> {
    same_shape(mask, reference)?;
    let area = mask.count_ones();
    Ok(if area == 0 {
        0.0
    } else {
        ratio(mask.intersection_count(reference), area)
    })
}

pub fn f_beta(precision: f64, recall: f64, beta: f64) -> f64 {
    let b2 = beta * beta;
    let den = b2 * precision + recall;
    if den == 0.0 {
        0.0
    } else {
        (1.0 + b2) * precision * recall / den
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub iou: f64,
    pub precision: f64,
    pub recall: f64,
    pub max_f_beta: f64,
}

/// Pixel (or patch) metrics of a hard prediction against ground truth.
///
/// Empty-set conventions: IoU of two empty masks is 1; an empty prediction has
/// precision 1 only when the ground truth is also empty; recall against an
/// empty ground truth is 1. For a hard mask the F-measure has a single
/// operating point, so `max_f_beta` is that point's value.
pub fn mask_metrics(pred: &BinaryMask, gt: &BinaryMask, beta: f64) -> Result<MetricsReport> {
    same_shape(pred, gt)?;
    let n = pred.len();
    let inter = pred.intersection_count(gt);
    let (p_area, g_area) = (pred.count_ones(), gt.count_ones());
    let matching = pred
        .data()
        .iter()
        .zip(gt.data())
        .filter(|(a, b)| a == b)
        .count();
    let precision = match (p_area, g_area) {
        (0, 0) => 1.0,
        (0, _) => 0.0,
        _ => ratio(inter, p_area),
    };
    let recall = if g_area == 0 {
        1.0
    } else {
        ratio(inter, g_area)
    };
    let union = p_area + g_area - inter;
    Ok(MetricsReport {
        accuracy: ratio(matching, n),
        iou: if union == 0 { 1.0 } else { ratio(inter, union) },
        precision,
        recall,
        max_f_beta: f_beta(precision, recall, beta),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskMetric {
    Iou,
    Precision,
    Recall,
}

impl MaskMetric {
    pub fn pick(self, report: &MetricsReport) -> f64 {
        match self {
            MaskMetric::Iou => report.iou,
            MaskMetric::Precision => report.precision,
            MaskMetric::Recall => report.recall,
        }
    }
}

impl std::str::FromStr for MaskMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "iou" => Ok(MaskMetric::Iou),
            "precision" => Ok(MaskMetric::Precision),
            "recall" => Ok(MaskMetric::Recall),
            other => Err(Error::InvalidArgument(format!(
                "unknown metric {other:?}; expected iou, precision or recall"
            ))),
        }
    }
}

/// Fraction of images whose chosen metric strictly exceeds `threshold`.
pub fn corunion(
    preds: &[BinaryMask],
    gts: &[BinaryMask],
    metric: MaskMetric,
    threshold: f64,
) -> Result<f64> {
    if preds.is_empty() {
        return Err(Error::Empty("no images to score".into()));
    }
    if preds.len() != gts.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions vs {} ground-truth masks",
            preds.len(),
            gts.len()
        )));
    }
    let mut hits = 0usize;
    for (p, g) in preds.iter().zip(gts) {
        let report = mask_metrics(p, g, DEFAULT_F_BETA)?;
        if metric.pick(&report) > threshold {
            hits += 1;
        }
    }
    Ok(ratio(hits, preds.len()))
}

/// Axis-aligned box `[x0, x1) × [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0).max(0.0) * (self.y1 - self.y0).max(0.0)
    }

    pub fn iou(&self, other: &Rect) -> f64 {
        let w = (self.x1.min(other.x1) - self.x0.max(other.x0)).max(0.0);
        let h = (self.y1.min(other.y1) - self.y0.max(other.y0)).max(0.0);
        let inter = w * h;
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }
}

/// Whether the predicted box overlaps some ground-truth box with IoU above 0.5.
pub fn corloc(pred: &Rect, gts: &[Rect]) -> bool {
    gts.iter().any(|g| pred.iou(g) > 0.5)
}

/// Tight box around the set patches, in patch units (column = x, row = y).
pub fn mask_to_box(mask: &BinaryMask) -> Result<Rect> {
    let mut bounds: Option<(usize, usize, usize, usize)> = None;
    for row in 0..mask.height() {
        for col in 0..mask.width() {
            if mask.get(row, col) {
                bounds = Some(match bounds {
                    None => (col, row, col, row),
                    Some((x0, y0, x1, y1)) => (x0.min(col), y0.min(row), x1.max(col), y1.max(row)),
                });
            }
        }
    }
    let (x0, y0, x1, y1) = bounds.ok_or_else(|| Error::Empty("mask has no set patches".into()))?;
    Ok(Rect::new(
        x0 as f64,
        y0 as f64,
        (x1 + 1) as f64,
        (y1 + 1) as f64,
    ))
}

/// Downsamples a pixel mask onto a patch grid by majority vote within each
/// cell; exact ties go to foreground.
pub fn downsample_majority(mask: &BinaryMask, height: usize, width: usize) -> Result<BinaryMask> {
    if height == 0 || width == 0 || height > mask.height() || width > mask.width() {
        return Err(Error::InvalidDimensions(format!(
            "cannot downsample {}x{} to {height}x{width}",
            mask.height(),
            mask.width()
        )));
    }
    let (h, w) = (mask.height(), mask.width());
    Ok(BinaryMask::from_fn(height, width, |r, c| {
        let (r0, r1) = (r * h / height, (r + 1) * h / height);
        let (c0, c1) = (c * w / width, (c + 1) * w / width);
        let mut ones = 0;
        for y in r0..r1 {
            for x in c0..c1 {
                ones += usize::from(mask.get(y, x));
            }
        }
        2 * ones >= (r1 - r0) * (c1 - c0)
    }))
}

/// Nearest-neighbor resampling to any resolution.
pub fn resize_nearest(mask: &BinaryMask, height: usize, width: usize) -> Result<BinaryMask> {
    if height == 0 || width == 0 {
        return Err(Error::InvalidDimensions(format!(
            "cannot resize to {height}x{width}"
        )));
    }
    let (h, w) = (mask.height(), mask.width());
    Ok(BinaryMask::from_fn(height, width, |r, c| {
        mask.get(
            (2 * r + 1) * h / (2 * height),
            (2 * c + 1) * w / (2 * width),
        )
    }))
}

/// Brings a ground-truth mask onto a prediction's grid: identity when shapes
/// match, majority vote when the ground truth is finer, nearest neighbor
/// otherwise.
pub fn align_to(gt: &BinaryMask, height: usize, width: usize) -> Result<BinaryMask> {
    if gt.height() == height && gt.width() == width {
        Ok(gt.clone())
    } else if gt.height() >= height && gt.width() >= width {
        downsample_majority(gt, height, width)
    } else {
        resize_nearest(gt, height, width)
    }
}

/// Conditional probabilities of a patch being returned by a weak classifier:
///
/// * `a`: background patch, foreground seed
/// * `b`: background patch, background seed
/// * `c`: foreground patch, foreground seed
/// * `d`: foreground patch, background seed
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MceEstimate {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub images_used: usize,
    pub images_skipped: usize,
    pub seeds_used: usize,
}

impl MceEstimate {
    /// An estimate assembled from known values, such as published tables.
    pub fn from_values(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        for (name, v) in [("a", a), ("b", b), ("c", c), ("d", d)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidArgument(format!(
                    "{name} = {v} is not a probability"
                )));
            }
        }
        Ok(Self {
            a,
            b,
            c,
            d,
            images_used: 0,
            images_skipped: 0,
            seeds_used: 0,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeakClassifier {
    UnitVoter,
    /// Every patch with a positive dot product to the seed.
    Cosine,
}

impl std::str::FromStr for WeakClassifier {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uv" | "unit_voter" => Ok(WeakClassifier::UnitVoter),
            "cosine" => Ok(WeakClassifier::Cosine),
            other => Err(Error::InvalidArgument(format!(
                "unknown classifier {other:?}; expected uv or cosine"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MceOptions {
    pub classifier: WeakClassifier,
    /// Seeds drawn per image without replacement; `None` uses every patch.
    pub subsample_seeds: Option<usize>,
    pub seed: u64,
}

impl Default for MceOptions {
    fn default() -> Self {
        Self {
            classifier: WeakClassifier::UnitVoter,
            subsample_seeds: None,
            seed: 3407,
        }
    }
}

/// A labeled image for estimation; `gt` must be on the feature grid.
#[derive(Debug, Clone)]
pub struct MceSample {
    pub image_id: String,
    pub grid: FeatureGrid,
    pub gt: BinaryMask,
}

#[derive(Debug, Clone, Copy, Default)]
struct MceSums {
    fg_seeds: usize,
    bg_seeds: usize,
    a: f64,
    b: f64,
    c: f64,
    d: f64,
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

fn seeds_for(sample: &MceSample, opts: &MceOptions) -> Vec<usize> {
    let n = sample.grid.patch_count();
    match opts.subsample_seeds {
        Some(k) if k < n => {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ fnv1a(&sample.image_id));
            let mut picked = rand::seq::index::sample(&mut rng, n, k).into_vec();
            picked.sort_unstable();
            picked
        }
        _ => (0..n).collect(),
    }
}

fn image_sums(sample: &MceSample, opts: &MceOptions) -> MceSums {
    let gt = &sample.gt;
    let n = gt.len();
    let fg = gt.count_ones();
    let bg = n - fg;
    let seeds = seeds_for(sample, opts);
    let ctx = match opts.classifier {
        WeakClassifier::UnitVoter => Some(VoterContext::new(&sample.grid)),
        WeakClassifier::Cosine => None,
    };
    let returned = |seed: usize| -> BinaryMask {
        match &ctx {
            Some(ctx) => ctx.vote(seed),
            None => {
                let k = sample.grid.vector(seed);
                let bits: Vec<bool> = sample
                    .grid
                    .vectors()
                    .map(|v| {
                        v.iter()
                            .zip(k)
                            .map(|(&x, &y)| f64::from(x) * f64::from(y))
                            .sum::<f64>()
                            > 0.0
                    })
                    .collect();
                BinaryMask::from_bools(gt.height(), gt.width(), &bits).expect("one bit per patch")
            }
        }
    };
    let per_seed: Vec<(bool, f64, f64)> = seeds
        .par_iter()
        .map(|&s| {
            let f_hat = returned(s);
            let in_fg = f_hat.intersection_count(gt);
            let in_bg = f_hat.count_ones() - in_fg;
            (gt.is_set(s), ratio(in_bg, bg), ratio(in_fg, fg))
        })
        .collect();
    let mut sums = MceSums::default();
    for (seed_is_fg, bg_frac, fg_frac) in per_seed {
        if seed_is_fg {
            sums.fg_seeds += 1;
            sums.a += bg_frac;
            sums.c += fg_frac;
        } else {
            sums.bg_seeds += 1;
            sums.b += bg_frac;
            sums.d += fg_frac;
        }
    }
    sums
}

/// Monte-Carlo estimate of `a, b, c, d` over a labeled dataset. Each seed
/// contributes the fractions of the image's background and foreground that
/// its classifier returns; sums are normalized by the number of foreground
/// (for `a`, `c`) or background (for `b`, `d`) seeds. Images whose ground
/// truth is all foreground or all background are skipped.
pub fn estimate_mce(samples: &[MceSample], opts: &MceOptions) -> Result<MceEstimate> {
    for s in samples {
        if s.gt.height() != s.grid.height() || s.gt.width() != s.grid.width() {
            return Err(Error::DimensionMismatch(format!(
                "{}: ground truth {}x{} vs features {}x{}",
                s.image_id,
                s.gt.height(),
                s.gt.width(),
                s.grid.height(),
                s.grid.width()
            )));
        }
    }
    let usable: Vec<&MceSample> = samples
        .iter()
        .filter(|s| {
            let fg = s.gt.count_ones();
            fg > 0 && fg < s.gt.len()
        })
        .collect();
    let skipped = samples.len() - usable.len();
    if usable.is_empty() {
        return Err(Error::Empty(
            "no image has both foreground and background patches".into(),
        ));
    }
    let partials: Vec<MceSums> = usable.iter().map(|s| image_sums(s, opts)).collect();
    let total = partials.iter().fold(MceSums::default(), |acc, p| MceSums {
        fg_seeds: acc.fg_seeds + p.fg_seeds,
        bg_seeds: acc.bg_seeds + p.bg_seeds,
        a: acc.a + p.a,
        b: acc.b + p.b,
        c: acc.c + p.c,
        d: acc.d + p.d,
    });
    if total.fg_seeds == 0 || total.bg_seeds == 0 {
        return Err(Error::Empty(
            "seed sample contains no foreground or no background seeds".into(),
        ));
    }
    let fg = total.fg_seeds as f64;
    let bg = total.bg_seeds as f64;
    Ok(MceEstimate {
        a: total.a / fg,
        b: total.b / bg,
        c: total.c / fg,
        d: total.d / bg,
        images_used: usable.len(),
        images_skipped: skipped,
        seeds_used: total.fg_seeds + total.bg_seeds,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparator {
    Greater,
    Less,
    Always,
    Never,
}

impl Comparator {
    pub fn as_str(self) -> &'static str {
        match self {
            Comparator::Greater => "greater",
            Comparator::Less => "less",
            Comparator::Always => "always",
            Comparator::Never => "never",
        }
    }
}

/// Condition on the background fraction `P(s ∈ B)` under which background
/// patches collect more expected votes than foreground patches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IneqSolution {
    pub comparator: Comparator,
    pub threshold: Option<f64>,
}

impl IneqSolution {
    pub fn holds_at(&self, background_fraction: f64) -> bool {
        match (self.comparator, self.threshold) {
            (Comparator::Greater, Some(t)) => background_fraction > t,
            (Comparator::Less, Some(t)) => background_fraction < t,
            (Comparator::Always, _) => true,
            _ => false,
        }
    }
}

impl std::fmt::Display for IneqSolution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.threshold {
            // four decimals, truncated rather than rounded
            Some(t) => {
                let t4 = (t * 1e4 + 1e-9).floor() / 1e4;
                write!(f, "{} {t4:.4}", self.comparator.as_str())
            }
            None => f.write_str(self.comparator.as_str()),
        }
    }
}

/// Both sides of the rearranged inequality `(a - c) > p·[(d - b) + (a - c)]`.
pub fn inequality_sides(e: &MceEstimate, background_fraction: f64) -> (f64, f64) {
    let delta = e.a - e.c;
    (delta, background_fraction * ((e.d - e.b) + delta))
}

/// Solves `(a - c) > p·[(d - b) + (a - c)]` for `p`.
pub fn solve_inequality(e: &MceEstimate) -> IneqSolution {
    let delta = e.a - e.c;
    let sigma = (e.d - e.b) + delta;
    if sigma < 0.0 {
        IneqSolution {
            comparator: Comparator::Greater,
            threshold: Some(delta / sigma),
        }
    } else if sigma > 0.0 {
        IneqSolution {
            comparator: Comparator::Less,
            threshold: Some(delta / sigma),
        }
    } else {
        IneqSolution {
            comparator: if delta > 0.0 {
                Comparator::Always
            } else {
                Comparator::Never
            },
            threshold: None,
        }
    }
}

/// Whether a mask covers all four corner patches.
pub fn covers_all_corners(mask: &BinaryMask) -> bool {
    let (h, w) = (mask.height(), mask.width());
    [(0, 0), (0, w - 1), (h - 1, 0), (h - 1, w - 1)]
        .iter()
        .all(|&(r, c)| mask.get(r, c))
}

/// Fraction of ground-truth unions that leave at least one corner empty.
pub fn corner_prior_success_rate(gts: &[BinaryMask]) -> Result<f64> {
    if gts.is_empty() {
        return Err(Error::Empty("no ground-truth masks".into()));
    }
    let ok = gts.iter().filter(|m| !covers_all_corners(m)).count();
    Ok(ratio(ok, gts.len()))
}

/// A discovered region counts as foreground when more than `theta` of it lies
/// inside the foreground union.
pub fn judge_foreground(candidate: &BinaryMask, union: &BinaryMask, theta: f64) -> Result<bool> {
    same_shape(candidate, union)?;
    if candidate.count_ones() == 0 {
        return Ok(false);
    }
    Ok(mask_precision(candidate, union)? > theta)
}

/// Fraction of the union covered by the discovered regions; 1 for an empty union.
pub fn union_coverage(discovered: &[BinaryMask], union: &BinaryMask) -> Result<f64> {
    let total = union.count_ones();
    let mut covered = vec![false; union.len()];
    for m in discovered {
        same_shape(m, union)?;
        for (c, &v) in covered.iter_mut().zip(m.data()) {
            *c |= v == 1;
        }
    }
    if total == 0 {
        return Ok(1.0);
    }
    let hit = covered
        .iter()
        .zip(union.data())
        .filter(|(&c, &u)| c && u == 1)
        .count();
    Ok(ratio(hit, total))
}

/// Discovery can stop once at least `gamma` of the union has been found.
pub fn should_stop(discovered: &[BinaryMask], union: &BinaryMask, gamma: f64) -> Result<bool> {
    Ok(union_coverage(discovered, union)? >= gamma)
}
