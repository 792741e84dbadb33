mod common;

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use unioncut::distill::loss_and_gradient;
use unioncut::ensemble::{mean_shift_1d, union_cut, MeanShiftConfig};
use unioncut::maxflow::solve_min_cut;
use unioncut::synthetic::two_feature_grid;
use unioncut::tensor_io::{BinaryMask, FeatureGrid};
use unioncut::unit_voter::run_unit_voter;

#[test]
fn min_cut_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..200 {
        let n = rng.gen_range(2..=9);
        let (arcs, s, t) = random_network(&mut rng, n);
        let expected = brute_force_min_cut(n, &arcs, &s, &t);
        let net = network(n, arcs, s, t);
        let cut = solve_min_cut(&net);
        assert_eq!(cut.flow_value, expected);
        assert_eq!(net.cut_capacity(&cut.source_side), expected);
    }
}

#[test]
fn left_column_voter_matches_enumeration() {
    let mask = BinaryMask::from_fn(3, 3, |_, c| c == 0);
    let grid = two_feature_grid(&mask, 2).unwrap();
    for seed in [0, 3, 6] {
        let got = run_unit_voter(&grid, seed).unwrap();
        assert_eq!(got, mask);
        assert_eq!(brute_force_voter(&grid, seed).unwrap(), mask);
    }
}

#[test]
fn random_voters_match_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut checked = 0;
    while checked < 60 {
        let (h, w) = (rng.gen_range(1..=3), rng.gen_range(2..=4));
        let dim = rng.gen_range(2..=4);
        let data: Vec<f32> = (0..h * w * dim)
            .map(|_| rng.gen_range(-1.0f32..1.0))
            .collect();
        let Ok(grid) = FeatureGrid::from_unnormalized(h, w, dim, data) else {
            continue;
        };
        let seed = rng.gen_range(0..h * w);
        let Some(expected) = brute_force_voter(&grid, seed) else {
            continue;
        };
        assert_eq!(
            run_unit_voter(&grid, seed).unwrap(),
            expected,
            "grid {grid:?} seed {seed}"
        );
        checked += 1;
    }
}

#[test]
fn block_union_on_full_size_grid() {
    let block = BinaryMask::from_fn(28, 28, |r, c| (10..16).contains(&r) && (4..10).contains(&c));
    let out = union_cut(&two_feature_grid(&block, 4).unwrap());
    assert_eq!(out.union_mask, block);
    assert!(!out.corner_inverted);
    // background voters each return the 748 background patches, object voters the 36
    for i in 0..784 {
        let expected = if block.is_set(i) { 36.0 } else { 748.0 };
        assert_eq!(out.aggregate.data()[i], expected);
    }
}

fn same_partition(a: &[usize], b: &[usize]) -> bool {
    a.len() == b.len()
        && (0..a.len()).all(|i| (0..a.len()).all(|j| (a[i] == a[j]) == (b[i] == b[j])))
}

#[test]
fn mean_shift_matches_per_point_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let cfg = MeanShiftConfig::default();
    for _ in 0..40 {
        let n = rng.gen_range(1..120);
        let groups = rng.gen_range(1..5);
        let centers: Vec<i32> = (0..groups).map(|_| rng.gen_range(0..=255)).collect();
        let values: Vec<f64> = (0..n)
            .map(|_| {
                let c = centers[rng.gen_range(0..groups)];
                f64::from((c + rng.gen_range(-12..=12)).clamp(0, 255))
            })
            .collect();
        let got = mean_shift_1d(&values, &cfg);
        let expected =
            brute_force_mean_shift(&values, cfg.bandwidth, cfg.tolerance, cfg.max_iterations);
        assert!(same_partition(&got.labels, &expected), "values {values:?}");
    }
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..30 {
        let (head, grid, u_cut, iter) = random_distill_instance(&mut rng, 1e-2);
        let (_, analytic) = loss_and_gradient(&head, &grid, &u_cut, iter).unwrap();
        let numeric = finite_difference_gradient(&head, &grid, &u_cut, iter, 1e-4);
        assert!(relative_error(&analytic, &numeric) < 1e-3);
    }
}

#[test]
fn objects_larger_than_background_need_the_corner_prior() {
    // 22x22 object off the border: object voters outvote background voters,
    // the raw threshold picks the background and the corner prior flips it
    let inner = BinaryMask::from_fn(28, 28, |r, c| (3..25).contains(&r) && (3..25).contains(&c));
    let out = union_cut(&two_feature_grid(&inner, 4).unwrap());
    assert!(out.corner_inverted);
    assert_eq!(out.union_mask, inner);

    // the same area reaching the top corners leaves the bottom strip selected
    // and no prior to rescue it
    let top = BinaryMask::from_fn(28, 28, |r, _| r < 20);
    let out = union_cut(&two_feature_grid(&top, 4).unwrap());
    assert!(!out.corner_inverted);
    assert_eq!(out.union_mask, top.complement());
}
