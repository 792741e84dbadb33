//! Independent reference implementations shared by the integration and
//! acceptance tests. Nothing here calls the code it checks.

#![allow(dead_code)]

use rand::Rng;
use unioncut::distill::{loss_and_gradient, LogisticHead};
use unioncut::maxflow::{FlowNetwork, NeighborArc};
use unioncut::tensor_io::{BinaryMask, FeatureGrid};

/// Random network with integer capacities on `n` nodes.
pub fn random_network<R: Rng>(rng: &mut R, n: usize) -> (Vec<NeighborArc>, Vec<f64>, Vec<f64>) {
    let mut arcs = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen_bool(0.4) {
                arcs.push(NeighborArc {
                    u,
                    v,
                    capacity_uv: f64::from(rng.gen_range(0..10u32)),
                    capacity_vu: f64::from(rng.gen_range(0..10u32)),
                });
            }
        }
    }
    let caps = |rng: &mut R| -> Vec<f64> {
        (0..n)
            .map(|_| {
                if rng.gen_bool(0.5) {
                    f64::from(rng.gen_range(0..15u32))
                } else {
                    0.0
                }
            })
            .collect()
    };
    let s = caps(rng);
    let t = caps(rng);
    (arcs, s, t)
}

/// Minimum over all 2^n source sets of the cut capacity.
pub fn brute_force_min_cut(n: usize, arcs: &[NeighborArc], s: &[f64], t: &[f64]) -> f64 {
    let mut best = f64::INFINITY;
    for bits in 0u32..(1 << n) {
        let src = |i: usize| bits >> i & 1 == 1;
        let mut cut = 0.0;
        for i in 0..n {
            cut += if src(i) { t[i] } else { s[i] };
        }
        for a in arcs {
            match (src(a.u), src(a.v)) {
                (true, false) => cut += a.capacity_uv,
                (false, true) => cut += a.capacity_vu,
                _ => {}
            }
        }
        best = best.min(cut);
    }
    best
}

pub fn network(n: usize, arcs: Vec<NeighborArc>, s: Vec<f64>, t: Vec<f64>) -> FlowNetwork {
    FlowNetwork::new(n, arcs, s, t).expect("valid network")
}

fn dist2(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (f64::from(x) - f64::from(y)).powi(2))
        .sum()
}

/// The labeling with least graph-cut energy for one voter, by enumeration
/// over every partition that keeps the seed and drops the anti-seeds. Only
/// usable on tiny grids. Returns `None` if two labelings tie.
pub fn brute_force_voter(grid: &FeatureGrid, seed: usize) -> Option<BinaryMask> {
    let (h, w) = (grid.height(), grid.width());
    let n = h * w;
    assert!(n <= 16);
    let k = |i: usize| grid.vector(i);
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let (ri, ci, rj, cj) = (i / w, i % w, j / w, j % w);
            if i != j && ri.abs_diff(rj) <= 1 && ci.abs_diff(cj) <= 1 {
                pairs.push((i, j));
            }
        }
    }
    let total: f64 = pairs.iter().map(|&(i, j)| dist2(k(i), k(j))).sum();
    let beta = (2.0 * total / pairs.len() as f64).max(1e-6);
    let weight = |i: usize, j: usize| {
        let spacing = (((i / w) as f64 - (j / w) as f64).powi(2)
            + ((i % w) as f64 - (j % w) as f64).powi(2))
        .sqrt();
        (-dist2(k(i), k(j)) / beta).exp() / spacing
    };
    let dot = |i: usize, j: usize| -> f64 {
        k(i).iter()
            .zip(k(j))
            .map(|(&x, &y)| f64::from(x) * f64::from(y))
            .sum()
    };
    let anti: Vec<usize> = (0..n)
        .filter(|&b| b != seed && dot(b, seed) < 0.0)
        .collect();
    if anti.is_empty() {
        return Some(BinaryMask::ones(h, w));
    }
    // region costs: keeping a patch costs its sink-side affinity and vice versa
    let mut keep_cost = vec![0.0; n];
    let mut drop_cost = vec![0.0; n];
    for i in 0..n {
        if i == seed || anti.contains(&i) {
            continue;
        }
        let df = dist2(k(i), k(seed)).sqrt();
        let db = anti
            .iter()
            .map(|&b| dist2(k(i), k(b)).sqrt())
            .fold(f64::INFINITY, f64::min);
        let z = df.exp() + db.exp();
        // source link -log(e^df / z) is paid when the patch is dropped
        drop_cost[i] = -(df.exp() / z).ln();
        keep_cost[i] = -(db.exp() / z).ln();
    }
    let mut best: Option<(f64, u32)> = None;
    let mut tie = false;
    for bits in 0u32..(1 << n) {
        let on = |i: usize| bits >> i & 1 == 1;
        if !on(seed) || anti.iter().any(|&b| on(b)) {
            continue;
        }
        let mut e = 0.0;
        for i in 0..n {
            e += if on(i) { keep_cost[i] } else { drop_cost[i] };
        }
        for &(i, j) in &pairs {
            if on(i) && !on(j) {
                e += weight(i, j);
            }
        }
        match best {
            Some((b, _)) if (e - b).abs() < 1e-9 => tie = true,
            Some((b, _)) if e > b => {}
            _ => {
                best = Some((e, bits));
                tie = false;
            }
        }
    }
    if tie {
        return None;
    }
    let bits = best?.1;
    Some(BinaryMask::from_fn(h, w, |r, c| {
        bits >> (r * w + c) & 1 == 1
    }))
}

/// Flat-kernel mean shift run separately from every point, with windows found
/// by a full linear scan. Returns one label per value, clusters in ascending
/// order of their modes.
pub fn brute_force_mean_shift(
    values: &[f64],
    bandwidth: f64,
    tol: f64,
    max_iter: usize,
) -> Vec<usize> {
    let modes: Vec<f64> = values
        .iter()
        .map(|&start| {
            let mut x = start;
            for _ in 0..max_iter {
                let inside: Vec<f64> = values
                    .iter()
                    .copied()
                    .filter(|v| (v - x).abs() <= bandwidth)
                    .collect();
                let next = inside.iter().sum::<f64>() / inside.len() as f64;
                let moved = (next - x).abs();
                x = next;
                if moved < tol {
                    break;
                }
            }
            x
        })
        .collect();
    let mut sorted = modes.clone();
    sorted.sort_by(f64::total_cmp);
    let mut cluster_starts = Vec::new();
    for (i, &m) in sorted.iter().enumerate() {
        if i == 0 || m - sorted[i - 1] > bandwidth / 2.0 {
            cluster_starts.push(m);
        }
    }
    modes
        .iter()
        .map(|&m| {
            cluster_starts
                .iter()
                .rposition(|&s| s <= m)
                .expect("mode belongs to a run")
        })
        .collect()
}

/// Central differences of the per-image objective.
pub fn finite_difference_gradient(
    head: &LogisticHead,
    grid: &FeatureGrid,
    u_cut: &BinaryMask,
    iter: usize,
    step: f64,
) -> Vec<f64> {
    let dim = head.dim();
    let mut out = Vec::with_capacity(dim + 1);
    for p in 0..=dim {
        let shifted = |delta: f64| {
            let mut w = head.weights().to_vec();
            let mut b = head.bias();
            if p < dim {
                w[p] += delta;
            } else {
                b += delta;
            }
            let h = LogisticHead::new(w, b).expect("finite head");
            loss_and_gradient(&h, grid, u_cut, iter)
                .expect("shapes agree")
                .0
        };
        out.push((shifted(step) - shifted(-step)) / (2.0 * step));
    }
    out
}

pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let scale: f64 = a
        .iter()
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
        .max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// A random small distillation instance whose logits all sit at least `margin`
/// away from zero, so hard labels do not flip under a finite-difference step.
pub fn random_distill_instance<R: Rng>(
    rng: &mut R,
    margin: f64,
) -> (LogisticHead, FeatureGrid, BinaryMask, usize) {
    loop {
        let (h, w, dim) = (
            rng.gen_range(2..5),
            rng.gen_range(2..5),
            rng.gen_range(2..6),
        );
        let data: Vec<f32> = (0..h * w * dim)
            .map(|_| rng.gen_range(-1.0f32..1.0))
            .collect();
        let Ok(grid) = FeatureGrid::from_unnormalized(h, w, dim, data) else {
            continue;
        };
        let head = LogisticHead::new(
            (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect(),
            rng.gen_range(-1.0..1.0),
        )
        .expect("finite head");
        let stable = grid.vectors().all(|k| {
            let z: f64 = head
                .weights()
                .iter()
                .zip(k)
                .map(|(&a, &b)| a * f64::from(b))
                .sum::<f64>()
                + head.bias();
            z.abs() >= margin
        });
        if !stable {
            continue;
        }
        let u_cut = BinaryMask::from_fn(h, w, |_, _| rng.gen_bool(0.5));
        let iter = if rng.gen_bool(0.5) { 0 } else { 150 };
        return (head, grid, u_cut, iter);
    }
}
