// Driving the command line in-process: detect, distill, predict and score a
// small generated dataset.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use unioncut::cli::run_cli;
use unioncut::synthetic::{noisy_scene, SceneConfig};
use unioncut::tensor_io::{save_feature_grid, save_mask};

fn unioncut(args: &[&str]) -> Result<String, Box<dyn std::error::Error>> {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("unioncut").chain(args.iter().copied());
    let code = run_cli(argv, &mut out, &mut err);
    if code != 0 {
        return Err(format!("exit {code}: {}", String::from_utf8_lossy(&err)).into());
    }
    Ok(String::from_utf8(out)?)
}

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let root = dir.path();
    let cfg = SceneConfig {
        height: 12,
        width: 12,
        ..SceneConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut manifest = String::new();
    for k in 0..3 {
        let (grid, gt) = noisy_scene(&mut rng, &cfg)?;
        save_feature_grid(root.join(format!("s{k}.ucft")), &grid)?;
        save_mask(root.join(format!("s{k}.gt.ucmk")), &gt)?;
        manifest.push_str(&format!("s{k}\ts{k}.ucft\ts{k}.gt.ucmk\n"));
    }
    std::fs::write(root.join("manifest.tsv"), manifest)?;
    std::fs::create_dir(root.join("cut"))?;
    std::fs::create_dir(root.join("seg"))?;
    let m = root.join("manifest.tsv");
    let m = m.to_str().ok_or("non-utf8 path")?;
    let p = |s: &str| root.join(s).to_string_lossy().into_owned();

    print!(
        "{}",
        unioncut(&["run", "--manifest", m, "--out-dir", &p("cut")])?
    );
    print!(
        "{}",
        unioncut(&["eval", "--manifest", m, "--pred-dir", &p("cut")])?
    );
    print!(
        "{}",
        unioncut(&[
            "distill",
            "--manifest",
            m,
            "--mask-dir",
            &p("cut"),
            "--out",
            &p("head.ucwt"),
            "--iterations",
            "100",
            "--batch-size",
            "2",
        ])?
    );
    for k in 0..3 {
        unioncut(&[
            "predict",
            "--head",
            &p("head.ucwt"),
            "--features",
            &p(&format!("s{k}.ucft")),
            "--out",
            &p(&format!("seg/s{k}.ucmk")),
        ])?;
    }
    print!(
        "{}",
        unioncut(&["eval", "--manifest", m, "--pred-dir", &p("seg")])?
    );
    print!("{}", unioncut(&["corner-audit", "--manifest", m])?);
    print!(
        "{}",
        unioncut(&["solve", "0.0549", "0.6621", "0.2099", "0.0294"])?
    );
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
