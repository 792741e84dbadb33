//! Generated feature grids with known foreground, for tests, examples and
//! the acceptance suite.

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor_io::{BinaryMask, FeatureGrid};

/// Grid whose foreground patches carry `+e0` and background patches `-e0`.
pub fn two_feature_grid(mask: &BinaryMask, dim: usize) -> Result<FeatureGrid> {
    if dim == 0 {
        return Err(Error::InvalidDimensions(
            "feature dim must be positive".into(),
        ));
    }
    let mut data = vec![0.0f32; mask.len() * dim];
    for (i, &v) in mask.data().iter().enumerate() {
        data[i * dim] = if v == 1 { 1.0 } else { -1.0 };
    }
    FeatureGrid::new(mask.height(), mask.width(), dim, data)
}

/// Axis-aligned rectangle covering between `min_frac` and `max_frac` of the
/// grid, kept `margin` patches away from every border.
pub fn random_rectangle<R: Rng>(
    rng: &mut R,
    height: usize,
    width: usize,
    min_frac: f64,
    max_frac: f64,
    margin: usize,
) -> Result<BinaryMask> {
    let (inner_h, inner_w) = (
        height.saturating_sub(2 * margin),
        width.saturating_sub(2 * margin),
    );
    let total = (height * width) as f64;
    let sizes: Vec<(usize, usize)> = (1..=inner_h)
        .flat_map(|h| (1..=inner_w).map(move |w| (h, w)))
        .filter(|&(h, w)| {
            let f = (h * w) as f64 / total;
            f >= min_frac && f <= max_frac
        })
        .collect();
    if sizes.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no rectangle in {height}x{width} with margin {margin} covers {min_frac}..{max_frac}"
        )));
    }
    let (rh, rw) = sizes[rng.gen_range(0..sizes.len())];
    let r0 = margin + rng.gen_range(0..=inner_h - rh);
    let c0 = margin + rng.gen_range(0..=inner_w - rw);
    Ok(BinaryMask::from_fn(height, width, |r, c| {
        (r0..r0 + rh).contains(&r) && (c0..c0 + rw).contains(&c)
    }))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneConfig {
    pub height: usize,
    pub width: usize,
    pub dim: usize,
    pub objects: usize,
    /// Half-width of the uniform per-component noise added before normalizing.
    pub noise: f32,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            height: 28,
            width: 28,
            dim: 16,
            objects: 2,
            noise: 0.3,
        }
    }
}

fn random_unit<R: Rng>(rng: &mut R, dim: usize) -> Vec<f32> {
    loop {
        let v: Vec<f32> = (0..dim).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f32>().sqrt();
        if n > 0.1 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Feature directions shared by every scene drawn from it: one for the
/// background and one per object, each pointing away from the background.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenePalette {
    pub background: Vec<f32>,
    pub objects: Vec<Vec<f32>>,
}

impl ScenePalette {
    pub fn random<R: Rng>(rng: &mut R, dim: usize, objects: usize) -> Result<Self> {
        if dim < 2 || objects == 0 {
            return Err(Error::InvalidArgument(
                "scenes need dim >= 2 and at least one object".into(),
            ));
        }
        let background = random_unit(rng, dim);
        let objects = (0..objects)
            .map(|_| {
                let mut d = random_unit(rng, dim);
                let along: f32 = d.iter().zip(&background).map(|(a, b)| a * b).sum();
                for (x, b) in d.iter_mut().zip(&background) {
                    *x -= (along + 0.5) * b;
                }
                d
            })
            .collect();
        Ok(Self {
            background,
            objects,
        })
    }
}

/// Noisy multi-object scene with its own random palette. Returns the features
/// and the ground-truth union.
pub fn noisy_scene<R: Rng>(rng: &mut R, cfg: &SceneConfig) -> Result<(FeatureGrid, BinaryMask)> {
    let palette = ScenePalette::random(rng, cfg.dim, cfg.objects)?;
    noisy_scene_with(rng, cfg, &palette)
}

/// Noisy scene whose objects are rectangles kept off the border, colored from
/// `palette`; `cfg.dim` and `cfg.objects` are taken from the palette.
pub fn noisy_scene_with<R: Rng>(
    rng: &mut R,
    cfg: &SceneConfig,
    palette: &ScenePalette,
) -> Result<(FeatureGrid, BinaryMask)> {
    let (h, w, dim) = (cfg.height, cfg.width, palette.background.len());
    let per_object = 0.4 / palette.objects.len() as f64;
    let mut labels = vec![usize::MAX; h * w];
    for k in 0..palette.objects.len() {
        let rect = random_rectangle(rng, h, w, per_object * 0.25, per_object, 1)?;
        for (i, &v) in rect.data().iter().enumerate() {
            if v == 1 {
                labels[i] = k;
            }
        }
    }
    let mut data = Vec::with_capacity(h * w * dim);
    for &label in &labels {
        let base = if label == usize::MAX {
            &palette.background
        } else {
            &palette.objects[label]
        };
        data.extend(
            base.iter()
                .map(|&x| x + rng.gen_range(-cfg.noise..=cfg.noise)),
        );
    }
    let grid = FeatureGrid::from_unnormalized(h, w, dim, data)?;
    let gt = BinaryMask::from_fn(h, w, |r, c| labels[r * w + c] != usize::MAX);
    Ok((grid, gt))
}
