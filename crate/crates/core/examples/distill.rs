// Distilling UnionCut masks into a per-patch logistic head, then using the
// head on an unseen scene.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use unioncut::analysis::mask_metrics;
use unioncut::distill::{predict, train_with_observer, TrainConfig, TrainingSample};
use unioncut::ensemble::union_cut;
use unioncut::synthetic::{noisy_scene_with, SceneConfig, ScenePalette};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    // a linear head only transfers between scenes that share feature directions
    let cfg = SceneConfig {
        height: 12,
        width: 12,
        objects: 1,
        dim: 8,
        noise: 0.2,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let palette = ScenePalette::random(&mut rng, cfg.dim, 2)?;
    let mut samples = Vec::new();
    let mut truth = Vec::new();
    for _ in 0..7 {
        let (grid, gt) = noisy_scene_with(&mut rng, &cfg, &palette)?;
        let union = union_cut(&grid).union_mask;
        samples.push(TrainingSample { grid, union });
        truth.push(gt);
    }
    let held_out = samples.pop().expect("seven scenes");
    let held_gt = truth.pop().expect("seven scenes");

    let train_cfg = TrainConfig {
        batch_size: 3,
        iterations: 200,
        ..TrainConfig::default()
    };
    let outcome = train_with_observer(&samples, &train_cfg, |iter, loss| {
        if iter % 50 == 0 {
            println!("iter {iter:>3} loss {loss:.4}");
        }
    })?;
    let (scores, mask) = predict(&outcome.head, &held_out.grid)?;
    let (lo, hi) = scores.min_max();
    println!("held-out scores in {lo:.3}..{hi:.3}");
    let head = mask_metrics(&mask, &held_gt, 0.3)?;
    let cut = mask_metrics(&held_out.union, &held_gt, 0.3)?;
    println!(
        "head:     IoU {:.3} precision {:.3}",
        head.iou, head.precision
    );
    println!(
        "unioncut: IoU {:.3} precision {:.3}",
        cut.iou, cut.precision
    );
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
