// One unit voter: the min-cut mask of patches that side with a seed patch.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use unioncut::synthetic::{noisy_scene, SceneConfig};
use unioncut::tensor_io::BinaryMask;
use unioncut::unit_voter::{run_unit_voter, UvConfig, VoterContext};

fn show(mask: &BinaryMask) {
    for r in 0..mask.height() {
        let row: String = (0..mask.width())
            .map(|c| if mask.get(r, c) { '#' } else { '.' })
            .collect();
        println!("  {row}");
    }
}

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = SceneConfig {
        height: 12,
        width: 12,
        objects: 1,
        ..SceneConfig::default()
    };
    let (grid, gt) = noisy_scene(&mut ChaCha8Rng::seed_from_u64(5), &cfg)?;
    let uv = UvConfig::for_grid(&grid);
    println!("beta = {:.4}, W = {:.2}", uv.beta, uv.big_weight);

    let fg_seed = gt
        .data()
        .iter()
        .position(|&v| v == 1)
        .expect("scene has an object");
    let bg_seed = 0;
    for (name, seed) in [("foreground", fg_seed), ("background", bg_seed)] {
        let mask = run_unit_voter(&grid, seed)?;
        println!("{name} seed {seed}: {} patches", mask.count_ones());
        show(&mask);
    }

    // the precomputed context gives the same answer without rebuilding the graph
    let ctx = VoterContext::new(&grid);
    assert_eq!(ctx.vote(fg_seed), run_unit_voter(&grid, fg_seed)?);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
