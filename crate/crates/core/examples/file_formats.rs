// Writing and reading the binary feature, mask, heat-map and head files, and
// a dataset manifest that ties them together.

use unioncut::distill::{load_head, save_head, LogisticHead};
use unioncut::tensor_io::{
    encode_feature_grid, load_feature_grid, load_heatmap, load_mask, save_feature_grid,
    save_heatmap, save_mask, BinaryMask, DatasetManifest, FeatureGrid, HeatMap,
};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let grid = FeatureGrid::from_unnormalized(
        2,
        2,
        3,
        vec![1.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 3.0, 1.0, 1.0, 1.0],
    )?;
    println!(
        "2x2 grid with D=3 encodes to {} bytes",
        encode_feature_grid(&grid).len()
    );

    let feat = dir.path().join("img0.ucft");
    let gt = dir.path().join("img0.ucmk");
    save_feature_grid(&feat, &grid)?;
    save_mask(&gt, &BinaryMask::from_fn(2, 2, |r, c| r == c))?;
    save_heatmap(
        dir.path().join("img0.ucht"),
        &HeatMap::new(2, 2, vec![0.0, 255.0, 255.0, 0.0])?,
    )?;
    save_head(
        dir.path().join("head.ucwt"),
        &LogisticHead::new(vec![0.5, -0.5, 0.0], 0.1)?,
    )?;

    assert_eq!(load_feature_grid(&feat)?, grid);
    println!("mask: {:?}", load_mask(&gt)?.data());
    println!(
        "heat: {:?}",
        load_heatmap(dir.path().join("img0.ucht"))?.data()
    );
    println!("head: {:?}", load_head(dir.path().join("head.ucwt"))?);

    // tab-separated: id, features, optional ground truth; paths relative to the manifest
    let manifest_path = dir.path().join("manifest.tsv");
    std::fs::write(&manifest_path, "img0\timg0.ucft\timg0.ucmk\n")?;
    let manifest = DatasetManifest::load(&manifest_path)?;
    println!(
        "manifest has {} entry: {:?}",
        manifest.len(),
        manifest.entries()[0].image_id
    );

    std::fs::write(&feat, b"NOPE")?;
    println!("corrupt file: {}", load_feature_grid(&feat).unwrap_err());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
