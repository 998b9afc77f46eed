mod common;

use common::*;
use typesize::markov::{
    cyclic_ternary_family, entropy_rate, flip_family, markov_size_estimates, markov_type_index, stationary_dist,
    transition_matrix,
};
use typesize::{Error, GridParams};

#[test]
fn monte_carlo_sizes_track_exact_sizes() {
    let mspec = cyclic_ternary_family(RHO, 0).unwrap();
    let grid = GridParams::unit(2).at(8).unwrap();
    let exact = markov_type_index(&mspec, &grid, 1 << 20).unwrap();
    let est = markov_size_estimates(&mspec, &grid, 200_000, 3).unwrap();
    for e in est.iter().filter(|e| e.hits > 1000) {
        let c = &exact.classes()[exact.find_class(&e.key).unwrap()];
        let size: f64 = c.size.to_string().parse().unwrap();
        assert!((e.estimate - size).abs() <= 5.0 * e.std_error, "{:?} vs {size}", e);
    }
    // Same seed, same answer.
    assert_eq!(est, markov_size_estimates(&mspec, &grid, 200_000, 3).unwrap());
}

#[test]
fn over_budget_points_to_monte_carlo() {
    let mspec = flip_family(RHO, 0).unwrap();
    let grid = GridParams::unit(1).at(30).unwrap();
    match markov_type_index(&mspec, &grid, 1 << 20) {
        Err(Error::Resource { what, .. }) => assert!(what.contains("Monte Carlo")),
        other => panic!("expected a resource error, got {other:?}"),
    }
}

#[test]
fn stationary_distribution_of_symmetric_chain_is_uniform() {
    let mspec = cyclic_ternary_family(RHO, 0).unwrap();
    let theta = mspec.param(vec![1.0, -0.5]).unwrap();
    let pi = stationary_dist(&transition_matrix(&mspec, &theta).unwrap()).unwrap();
    for p in pi {
        assert!((p - 1.0 / 3.0).abs() < 1e-12);
    }
    let flip = flip_family(RHO, 1).unwrap();
    let h = entropy_rate(&flip, &flip.param(vec![0.0]).unwrap()).unwrap();
    assert!((h - 1.0).abs() < 1e-12);
}
