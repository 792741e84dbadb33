//! The unit voter: a single min-cut weak classifier seeded at one patch.
//!
//! Patch nodes are linked to their 8-neighbors by n-links weighted by feature
//! similarity. The seed is tied to the source and every anti-seed (a patch
//! whose feature has a negative dot product with the seed's) to the sink with
//! a weight no cut can afford; all other patches get t-links from a softmax
//! over their distance to the seed and to the nearest anti-seed. The source
//! side of the minimum cut is the voter's mask.

use crate::error::{Error, Result};
use crate::maxflow::{solve_min_cut, FlowNetwork, NeighborArc};
use crate::tensor_io::{BinaryMask, FeatureGrid};

/// Lower bound on the n-link bandwidth, used when every neighbor pair is identical.
pub const BETA_FLOOR: f64 = 1e-6;

/// Offsets that enumerate every unordered 8-neighbor pair exactly once.
const FORWARD_NEIGHBORS: [(isize, isize); 4] = [(0, 1), (1, -1), (1, 0), (1, 1)];

fn squared_distance(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = f64::from(x) - f64::from(y);
            d * d
        })
        .sum()
}

fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| f64::from(x) * f64::from(y))
        .sum()
}

/// Unordered 8-neighbor pairs `(i, j)` with `i < j`, in row-major order of `i`.
pub fn neighbor_pairs(height: usize, width: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity(4 * height * width);
    for row in 0..height {
        for col in 0..width {
            for (dr, dc) in FORWARD_NEIGHBORS {
                let r = row as isize + dr;
                let c = col as isize + dc;
                if r >= 0 && c >= 0 && (r as usize) < height && (c as usize) < width {
                    let i = row * width + col;
                    let j = r as usize * width + c as usize;
                    pairs.push((i.min(j), i.max(j)));
                }
            }
        }
    }
    pairs
}

fn grid_spacing(width: usize, i: usize, j: usize) -> f64 {
    let (ir, ic) = ((i / width) as f64, (i % width) as f64);
    let (jr, jc) = ((j / width) as f64, (j % width) as f64);
    ((ir - jr).powi(2) + (ic - jc).powi(2)).sqrt()
}

fn are_adjacent(width: usize, i: usize, j: usize) -> bool {
    let dr = (i / width).abs_diff(j / width);
    let dc = (i % width).abs_diff(j % width);
    i != j && dr <= 1 && dc <= 1
}

/// Bandwidth of the n-link kernel: twice the mean squared feature distance
/// over ordered adjacent pairs, floored at [`BETA_FLOOR`].
pub fn compute_beta(grid: &FeatureGrid) -> f64 {
    let pairs = neighbor_pairs(grid.height(), grid.width());
    // Each unordered pair stands for two ordered pairs in both the sum and the count.
    let ordered_sum: f64 = pairs
        .iter()
        .map(|&(i, j)| 2.0 * squared_distance(grid.vector(i), grid.vector(j)))
        .sum();
    let ordered_count = 2 * pairs.len();
    if ordered_count == 0 {
        return BETA_FLOOR;
    }
    let beta = 2.0 * ordered_sum / ordered_count as f64;
    beta.max(BETA_FLOOR)
}

fn nlink_from_sq(sq_dist: f64, spacing: f64, beta: f64) -> f64 {
    (-sq_dist / beta).exp() / spacing
}

/// Weight of the n-link between adjacent patches `i` and `j`.
pub fn nlink_weight(grid: &FeatureGrid, i: usize, j: usize, beta: f64) -> Result<f64> {
    let n = grid.patch_count();
    if i >= n || j >= n {
        return Err(Error::InvalidArgument(format!(
            "patch index out of range 0..{n}: ({i}, {j})"
        )));
    }
    if !are_adjacent(grid.width(), i, j) {
        return Err(Error::InvalidArgument(format!(
            "patches {i} and {j} are not 8-neighbors"
        )));
    }
    let sq = squared_distance(grid.vector(i), grid.vector(j));
    Ok(nlink_from_sq(sq, grid_spacing(grid.width(), i, j), beta))
}

fn big_weight_from_links(n: usize, links: &[(usize, usize, f64)]) -> f64 {
    let mut sums = vec![0.0f64; n];
    for &(i, j, w) in links {
        sums[i] += w;
        sums[j] += w;
    }
    1.0 + sums.into_iter().fold(0.0, f64::max)
}

/// Terminal weight that no cut can afford: one more than the largest total
/// n-link weight at any patch.
pub fn big_weight(grid: &FeatureGrid, beta: f64) -> f64 {
    let links: Vec<_> = neighbor_pairs(grid.height(), grid.width())
        .into_iter()
        .map(|(i, j)| {
            let sq = squared_distance(grid.vector(i), grid.vector(j));
            (
                i,
                j,
                nlink_from_sq(sq, grid_spacing(grid.width(), i, j), beta),
            )
        })
        .collect();
    big_weight_from_links(grid.patch_count(), &links)
}

/// Per-image constants shared by every voter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UvConfig {
    pub beta: f64,
    pub big_weight: f64,
}

impl UvConfig {
    pub fn for_grid(grid: &FeatureGrid) -> Self {
        let beta = compute_beta(grid);
        Self {
            beta,
            big_weight: big_weight(grid, beta),
        }
    }
}

/// Seed patch and its anti-seed set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedContext {
    pub seed_index: usize,
    pub anti_seed: Vec<usize>,
}

impl SeedContext {
    pub fn new(grid: &FeatureGrid, seed_index: usize) -> Result<Self> {
        check_seed(grid, seed_index)?;
        let seed = grid.vector(seed_index);
        let anti_seed = (0..grid.patch_count())
            .filter(|&b| b != seed_index && dot(grid.vector(b), seed) < 0.0)
            .collect();
        Ok(Self {
            seed_index,
            anti_seed,
        })
    }
}

fn check_seed(grid: &FeatureGrid, seed: usize) -> Result<()> {
    if seed >= grid.patch_count() {
        return Err(Error::InvalidArgument(format!(
            "seed {seed} out of range 0..{}",
            grid.patch_count()
        )));
    }
    Ok(())
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Source and sink t-link weights for a patch given its distance to the seed
/// and to the nearest anti-seed.
///
/// `w_source = -ln(e^{d_seed} / (e^{d_seed} + e^{d_anti}))` and symmetrically
/// for the sink, which reduce to softplus of the distance difference.
pub fn tlink_from_distances(d_seed: f64, d_anti: f64) -> (f64, f64) {
    (softplus(d_anti - d_seed), softplus(d_seed - d_anti))
}

/// T-link weights of an ordinary (neither seed nor anti-seed) patch.
pub fn tlink_weights(grid: &FeatureGrid, ctx: &SeedContext, i: usize) -> Result<(f64, f64)> {
    check_seed(grid, i)?;
    if ctx.anti_seed.is_empty() {
        return Err(Error::InvalidArgument(
            "anti-seed set is empty; the voter degenerates to the full mask".into(),
        ));
    }
    if i == ctx.seed_index || ctx.anti_seed.contains(&i) {
        return Err(Error::InvalidArgument(format!(
            "patch {i} is the seed or an anti-seed and carries fixed terminal weights"
        )));
    }
    let k = grid.vector(i);
    let d_seed = squared_distance(k, grid.vector(ctx.seed_index)).sqrt();
    let d_anti = ctx
        .anti_seed
        .iter()
        .map(|&b| squared_distance(k, grid.vector(b)))
        .fold(f64::INFINITY, f64::min)
        .sqrt();
    Ok(tlink_from_distances(d_seed, d_anti))
}

/// Everything about an image's voter graphs that does not depend on the seed:
/// pairwise distances and dot products, β, W and the n-link arcs.
#[derive(Debug, Clone)]
pub struct VoterContext {
    height: usize,
    width: usize,
    config: UvConfig,
    distances: Vec<f64>,
    dots: Vec<f64>,
    template: FlowNetwork,
}

impl VoterContext {
    pub fn new(grid: &FeatureGrid) -> Self {
        let n = grid.patch_count();
        let mut sq = vec![0.0f64; n * n];
        let mut dots = vec![0.0f64; n * n];
        for i in 0..n {
            let ki = grid.vector(i);
            dots[i * n + i] = dot(ki, ki);
            for j in i + 1..n {
                let kj = grid.vector(j);
                let mut s = 0.0f64;
                let mut d = 0.0f64;
                for (&x, &y) in ki.iter().zip(kj) {
                    let (x, y) = (f64::from(x), f64::from(y));
                    s += (x - y) * (x - y);
                    d += x * y;
                }
                sq[i * n + j] = s;
                sq[j * n + i] = s;
                dots[i * n + j] = d;
                dots[j * n + i] = d;
            }
        }

        let pairs = neighbor_pairs(grid.height(), grid.width());
        let pair_sum: f64 = pairs.iter().map(|&(i, j)| 2.0 * sq[i * n + j]).sum();
        let beta = if pairs.is_empty() {
            BETA_FLOOR
        } else {
            (2.0 * pair_sum / (2 * pairs.len()) as f64).max(BETA_FLOOR)
        };
        let links: Vec<(usize, usize, f64)> = pairs
            .iter()
            .map(|&(i, j)| {
                let w = nlink_from_sq(sq[i * n + j], grid_spacing(grid.width(), i, j), beta);
                (i, j, w)
            })
            .collect();
        let big = big_weight_from_links(n, &links);
        let arcs = links
            .iter()
            .map(|&(u, v, w)| NeighborArc {
                u,
                v,
                capacity_uv: w,
                capacity_vu: w,
            })
            .collect();
        let template = FlowNetwork::new(n, arcs, vec![0.0; n], vec![0.0; n])
            .expect("n-link weights are finite and nonnegative");

        let distances = sq.into_iter().map(f64::sqrt).collect();
        Self {
            height: grid.height(),
            width: grid.width(),
            config: UvConfig {
                beta,
                big_weight: big,
            },
            distances,
            dots,
            template,
        }
    }

    pub fn config(&self) -> UvConfig {
        self.config
    }

    pub fn patch_count(&self) -> usize {
        self.height * self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dot(&self, i: usize, j: usize) -> f64 {
        self.dots[i * self.patch_count() + j]
    }

    pub fn anti_seed(&self, seed: usize) -> Vec<usize> {
        let n = self.patch_count();
        let row = &self.dots[seed * n..(seed + 1) * n];
        (0..n).filter(|&b| b != seed && row[b] < 0.0).collect()
    }

    /// The seed's flow network, or `None` when its anti-seed set is empty.
    pub fn network_for_seed(&self, seed: usize) -> Option<FlowNetwork> {
        let n = self.patch_count();
        let anti = self.anti_seed(seed);
        if anti.is_empty() {
            return None;
        }
        let w = self.config.big_weight;
        let mut source_caps = vec![0.0; n];
        let mut target_caps = vec![0.0; n];
        let mut is_anti = vec![false; n];
        for &b in &anti {
            is_anti[b] = true;
            target_caps[b] = w;
        }
        source_caps[seed] = w;
        for i in 0..n {
            if i == seed || is_anti[i] {
                continue;
            }
            let row = &self.distances[i * n..(i + 1) * n];
            let d_anti = anti.iter().map(|&b| row[b]).fold(f64::INFINITY, f64::min);
            let (s, t) = tlink_from_distances(row[seed], d_anti);
            source_caps[i] = s;
            target_caps[i] = t;
        }
        Some(
            self.template
                .with_terminal_caps(source_caps, target_caps)
                .expect("t-link weights are finite and nonnegative"),
        )
    }

    /// Runs the voter seeded at `seed`.
    pub fn vote(&self, seed: usize) -> BinaryMask {
        assert!(seed < self.patch_count(), "seed {seed} out of range");
        match self.network_for_seed(seed) {
            None => BinaryMask::ones(self.height, self.width),
            Some(net) => {
                let cut = solve_min_cut(&net);
                BinaryMask::from_bools(self.height, self.width, &cut.source_side)
                    .expect("cut covers every patch")
            }
        }
    }
}

/// Runs one unit voter. For repeated voters on the same image, build a
/// [`VoterContext`] once instead.
pub fn run_unit_voter(grid: &FeatureGrid, seed_index: usize) -> Result<BinaryMask> {
    check_seed(grid, seed_index)?;
    Ok(VoterContext::new(grid).vote(seed_index))
}
