// Estimating how unit voters behave on labeled data and solving for the
// background fraction above which background votes dominate.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use unioncut::analysis::{
    estimate_mce, solve_inequality, MceEstimate, MceOptions, MceSample, WeakClassifier,
};
use unioncut::synthetic::{noisy_scene, SceneConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = SceneConfig {
        height: 12,
        width: 12,
        ..SceneConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let samples = (0..4)
        .map(|k| {
            let (grid, gt) = noisy_scene(&mut rng, &cfg)?;
            Ok(MceSample {
                image_id: format!("scene{k}"),
                grid,
                gt,
            })
        })
        .collect::<unioncut::Result<Vec<_>>>()?;

    for classifier in [WeakClassifier::UnitVoter, WeakClassifier::Cosine] {
        let opts = MceOptions {
            classifier,
            subsample_seeds: Some(40),
            seed: 3407,
        };
        let e = estimate_mce(&samples, &opts)?;
        println!(
            "{classifier:?}: a={:.4} b={:.4} c={:.4} d={:.4} over {} seeds -> {}",
            e.a,
            e.b,
            e.c,
            e.d,
            e.seeds_used,
            solve_inequality(&e)
        );
    }

    // published voter statistics for COCO2014 train
    let coco = MceEstimate::from_values(0.1215, 0.5496, 0.1981, 0.0563)?;
    let sol = solve_inequality(&coco);
    println!("COCO2014 train: P(s in B) {sol}");
    assert_eq!(sol.to_string(), "greater 0.1344");
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
