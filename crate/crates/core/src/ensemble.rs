//! UnionCut: every patch seeds one unit voter, the votes are summed into a
//! background heat map, inverted, split by 1-D mean shift and checked against
//! the corner prior.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor_io::{BinaryMask, FeatureGrid, HeatMap};
use crate::unit_voter::VoterContext;

/// Flat-kernel 1-D mean-shift parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanShiftConfig {
    pub bandwidth: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

pub const DEFAULT_BANDWIDTH: f64 = 25.5;

impl Default for MeanShiftConfig {
    fn default() -> Self {
        Self {
            bandwidth: DEFAULT_BANDWIDTH,
            tolerance: 1e-3,
            max_iterations: 100,
        }
    }
}

/// Mean-shift result: one label per input value and one center per cluster.
/// Cluster ids are ordered by ascending center.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub labels: Vec<usize>,
    pub centers: Vec<f64>,
}

impl Clustering {
    pub fn cluster_count(&self) -> usize {
        self.centers.len()
    }
}

/// Clusters `values` by shifting each distinct value to the mean of all values
/// within `bandwidth` until it moves less than `tolerance`, then merging modes
/// whose consecutive gap is at most half the bandwidth.
pub fn mean_shift_1d(values: &[f64], cfg: &MeanShiftConfig) -> Clustering {
    if values.is_empty() {
        return Clustering {
            labels: vec![],
            centers: vec![],
        };
    }
    // distinct values with multiplicities
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut uniq: Vec<f64> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    for v in sorted {
        if uniq.last() == Some(&v) {
            *counts.last_mut().unwrap() += 1;
        } else {
            uniq.push(v);
            counts.push(1);
        }
    }

    let window_mean = |x: f64| -> f64 {
        let lo = uniq.partition_point(|&v| v < x - cfg.bandwidth);
        let hi = uniq.partition_point(|&v| v <= x + cfg.bandwidth);
        let (mut sum, mut n) = (0.0, 0usize);
        for k in lo..hi {
            sum += uniq[k] * counts[k] as f64;
            n += counts[k];
        }
        if n == 0 {
            x
        } else {
            sum / n as f64
        }
    };

    let modes: Vec<f64> = uniq
        .iter()
        .map(|&start| {
            let mut x = start;
            for _ in 0..cfg.max_iterations {
                let next = window_mean(x);
                let done = (next - x).abs() < cfg.tolerance;
                x = next;
                if done {
                    break;
                }
            }
            x
        })
        .collect();

    let mut order: Vec<usize> = (0..uniq.len()).collect();
    order.sort_by(|&a, &b| modes[a].total_cmp(&modes[b]).then(a.cmp(&b)));
    let mut cluster_of = vec![0usize; uniq.len()];
    let mut sums: Vec<(f64, usize)> = Vec::new();
    let mut prev: Option<f64> = None;
    for &k in &order {
        if prev.is_none_or(|p| modes[k] - p > cfg.bandwidth / 2.0) {
            sums.push((0.0, 0));
        }
        prev = Some(modes[k]);
        let c = sums.len() - 1;
        cluster_of[k] = c;
        sums[c].0 += modes[k] * counts[k] as f64;
        sums[c].1 += counts[k];
    }
    let centers = sums.iter().map(|&(s, n)| s / n as f64).collect();

    let labels = values
        .iter()
        .map(|v| {
            let k = uniq
                .binary_search_by(|u| u.total_cmp(v))
                .expect("every value is among the distinct values");
            cluster_of[k]
        })
        .collect();
    Clustering { labels, centers }
}

/// Sums voter masks patch by patch. Counts are exact integers.
pub fn aggregate_votes(masks: &[BinaryMask]) -> Result<HeatMap> {
    let first = masks
        .first()
        .ok_or_else(|| Error::Empty("no voter masks to aggregate".into()))?;
    let mut counts = vec![0u32; first.len()];
    for m in masks {
        if !m.same_shape(first) {
            return Err(Error::DimensionMismatch(format!(
                "voter mask {}x{} vs {}x{}",
                m.height(),
                m.width(),
                first.height(),
                first.width()
            )));
        }
        for (c, &v) in counts.iter_mut().zip(m.data()) {
            *c += u32::from(v);
        }
    }
    counts_to_heatmap(first.height(), first.width(), &counts)
}

fn counts_to_heatmap(height: usize, width: usize, counts: &[u32]) -> Result<HeatMap> {
    HeatMap::new(height, width, counts.iter().map(|&c| c as f32).collect())
}

/// Min-max inversion onto `[0, 255]` so that rarely-voted patches are bright.
/// A constant map inverts to all zeros.
pub fn invert_heatmap(aggregate: &HeatMap) -> HeatMap {
    let (lo, hi) = aggregate.min_max();
    let (lo, hi) = (f64::from(lo), f64::from(hi));
    let data = if hi > lo {
        aggregate
            .data()
            .iter()
            .map(|&a| (255.0 - 255.0 * (f64::from(a) - lo) / (hi - lo)) as f32)
            .collect()
    } else {
        vec![0.0; aggregate.data().len()]
    };
    HeatMap::new(aggregate.height(), aggregate.width(), data)
        .expect("inverted values lie in [0, 255]")
}

/// Keeps the patches whose heat falls in the brighter half of the mean-shift
/// clusters (`ceil(n / 2)` of them). A constant map yields an empty mask.
pub fn meanshift_threshold(heat: &HeatMap, cfg: &MeanShiftConfig) -> BinaryMask {
    let (lo, hi) = heat.min_max();
    if lo == hi {
        return BinaryMask::zeros(heat.height(), heat.width());
    }
    let values: Vec<f64> = heat.data().iter().map(|&v| f64::from(v)).collect();
    let clustering = mean_shift_1d(&values, cfg);
    let n = clustering.cluster_count();
    let keep = n.div_ceil(2);
    // ids ascend with center, so the brightest `keep` clusters are the last ids
    let bits: Vec<bool> = clustering.labels.iter().map(|&l| l >= n - keep).collect();
    BinaryMask::from_bools(heat.height(), heat.width(), &bits).expect("one label per patch")
}

/// Complements a mask that covers all four corner patches.
pub fn apply_corner_prior(mask: &BinaryMask) -> (BinaryMask, bool) {
    let (h, w) = (mask.height(), mask.width());
    let corners = [(0, 0), (0, w - 1), (h - 1, 0), (h - 1, w - 1)];
    if corners.iter().all(|&(r, c)| mask.get(r, c)) {
        (mask.complement(), true)
    } else {
        (mask.clone(), false)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnionCutOutput {
    /// Per-patch vote counts.
    pub aggregate: HeatMap,
    /// Inverted map in `[0, 255]`; bright means foreground.
    pub inverted: HeatMap,
    pub union_mask: BinaryMask,
    pub corner_inverted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UnionCutConfig {
    pub mean_shift: MeanShiftConfig,
}

/// Runs all voters on the current rayon pool and reduces their votes.
pub fn union_cut(grid: &FeatureGrid) -> UnionCutOutput {
    union_cut_with(grid, &UnionCutConfig::default())
}

pub fn union_cut_with(grid: &FeatureGrid, cfg: &UnionCutConfig) -> UnionCutOutput {
    let ctx = VoterContext::new(grid);
    let counts = vote_counts(&ctx);
    finish_union(grid.height(), grid.width(), &counts, cfg)
}

/// Integer vote count per patch over all seeds.
pub fn vote_counts(ctx: &VoterContext) -> Vec<u32> {
    let n = ctx.patch_count();
    (0..n)
        .into_par_iter()
        .map(|seed| {
            let mask = ctx.vote(seed);
            mask.data()
                .iter()
                .map(|&v| u32::from(v))
                .collect::<Vec<u32>>()
        })
        .reduce(
            || vec![0u32; n],
            |mut acc, v| {
                for (a, b) in acc.iter_mut().zip(v) {
                    *a += b;
                }
                acc
            },
        )
}

fn finish_union(
    height: usize,
    width: usize,
    counts: &[u32],
    cfg: &UnionCutConfig,
) -> UnionCutOutput {
    let aggregate = counts_to_heatmap(height, width, counts).expect("counts are finite");
    let inverted = invert_heatmap(&aggregate);
    let raw = meanshift_threshold(&inverted, &cfg.mean_shift);
    let (union_mask, corner_inverted) = apply_corner_prior(&raw);
    UnionCutOutput {
        aggregate,
        inverted,
        union_mask,
        corner_inverted,
    }
}
