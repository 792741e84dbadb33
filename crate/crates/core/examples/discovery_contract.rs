// Using a foreground union to vet regions proposed by another discovery
// method and to decide when to stop proposing.

use unioncut::analysis::{
    judge_foreground, should_stop, union_coverage, DEFAULT_GAMMA, DEFAULT_THETA,
};
use unioncut::tensor_io::BinaryMask;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let union = BinaryMask::from_fn(10, 10, |r, c| (1..5).contains(&r) && (1..9).contains(&c));
    let proposals = [
        BinaryMask::from_fn(10, 10, |r, c| (1..5).contains(&r) && (1..5).contains(&c)),
        BinaryMask::from_fn(10, 10, |r, _| r >= 6),
        BinaryMask::from_fn(10, 10, |r, c| (1..5).contains(&r) && (5..9).contains(&c)),
    ];
    let mut found = Vec::new();
    for (i, p) in proposals.iter().enumerate() {
        if !judge_foreground(p, &union, DEFAULT_THETA)? {
            println!("proposal {i}: rejected as background");
            continue;
        }
        found.push(p.clone());
        let cov = union_coverage(&found, &union)?;
        println!("proposal {i}: accepted, union coverage {cov:.2}");
        if should_stop(&found, &union, DEFAULT_GAMMA)? {
            println!("coverage reached {DEFAULT_GAMMA}, stopping");
            break;
        }
    }
    assert_eq!(found.len(), 2);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
