// Mask metrics, CorUnion rates and box-level CorLoc.

use unioncut::analysis::{corloc, corunion, mask_metrics, mask_to_box, MaskMetric, Rect};
use unioncut::tensor_io::BinaryMask;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let gt = BinaryMask::from_fn(8, 8, |r, c| (2..6).contains(&r) && (2..6).contains(&c));
    let preds = vec![
        gt.clone(),
        BinaryMask::from_fn(8, 8, |r, c| (2..6).contains(&r) && (1..6).contains(&c)),
        BinaryMask::from_fn(8, 8, |r, c| r < 3 && c < 3),
    ];
    let gts = vec![gt.clone(); preds.len()];
    for (i, p) in preds.iter().enumerate() {
        let m = mask_metrics(p, &gt, 0.3)?;
        println!(
            "pred {i}: acc {:.3} IoU {:.3} P {:.3} R {:.3} F {:.3}",
            m.accuracy, m.iou, m.precision, m.recall, m.max_f_beta
        );
    }
    for t in [0.5, 0.7, 0.9] {
        println!(
            "CorUnion@{t} = {:.3}",
            corunion(&preds, &gts, MaskMetric::Iou, t)?
        );
    }
    let gt_box = mask_to_box(&gt)?;
    for (i, p) in preds.iter().enumerate() {
        let b = mask_to_box(p)?;
        println!("pred {i}: box {b:?} CorLoc {}", corloc(&b, &[gt_box]));
    }
    assert!(corloc(&Rect::new(2.0, 2.0, 6.0, 6.0), &[gt_box]));
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
