// The full ensemble on a noisy scene: votes, inversion, mean-shift threshold
// and the corner prior.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use unioncut::analysis::mask_metrics;
use unioncut::ensemble::union_cut;
use unioncut::synthetic::{noisy_scene, SceneConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = SceneConfig {
        height: 16,
        width: 16,
        objects: 2,
        ..SceneConfig::default()
    };
    let (grid, gt) = noisy_scene(&mut ChaCha8Rng::seed_from_u64(11), &cfg)?;
    let out = union_cut(&grid);
    let (lo, hi) = out.aggregate.min_max();
    println!("votes per patch range {lo}..{hi}");
    println!("corner prior applied: {}", out.corner_inverted);
    for r in 0..gt.height() {
        let row: String = (0..gt.width())
            .map(|c| match (out.union_mask.get(r, c), gt.get(r, c)) {
                (true, true) => '#',
                (true, false) => '+',
                (false, true) => '-',
                (false, false) => '.',
            })
            .collect();
        println!("  {row}");
    }
    let m = mask_metrics(&out.union_mask, &gt, 0.3)?;
    println!(
        "IoU {:.3}  precision {:.3}  recall {:.3}",
        m.iou, m.precision, m.recall
    );
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
