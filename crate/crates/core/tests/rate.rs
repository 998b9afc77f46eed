mod common;

use common::*;
use num_bigint::BigUint;
use typesize::rate::{gaussian_q, gaussian_qinv, m_eps, overflow_prob};
use typesize::{GridParams, TypeSizeCodec};

#[test]
fn m_eps_small_bernoulli() {
    // n=4 per-composition classes have sizes 1,1,4,4,6; ε=0.4 keeps 1+1+4+4.
    let source = bernoulli_source();
    let index = typesize::quantized::build_type_index(source.family(), &GridParams::unit(1).at(4).unwrap(), 1 << 20).unwrap();
    let r = m_eps(&source, &index, 0.4).unwrap();
    assert_eq!(r.m, BigUint::from(10u32));
    assert_eq!(r.ceil_log2_m, 4);
    assert!(r.overflow <= 0.4 + 1e-12);
    assert!((overflow_prob(&source, &index, r.gamma) - r.overflow).abs() < 1e-15);
}

#[test]
fn m_eps_is_monotone_in_epsilon() {
    let source = ternary_source();
    let grid = GridParams::unit(2).at(9).unwrap();
    let index = typesize::quantized::build_type_index(source.family(), &grid, 1 << 20).unwrap();
    let mut prev = index.total_size();
    for e in 1..100 {
        let r = m_eps(&source, &index, e as f64 / 100.0).unwrap();
        assert!(r.m <= prev);
        assert!(r.overflow <= e as f64 / 100.0 + 1e-12);
        prev = r.m;
    }
}

#[test]
fn q_and_inverse_agree() {
    assert!((gaussian_q(0.0) - 0.5).abs() < 1e-15);
    assert!((gaussian_q(1.0) - 0.158_655_253_931_457_05).abs() < 1e-15);
    for e in 1..100 {
        let p = e as f64 / 100.0;
        assert!((gaussian_q(gaussian_qinv(p).unwrap()) - p).abs() < 1e-10);
    }
    assert!(gaussian_qinv(0.0).is_err());
}

#[test]
fn exact_rank_prefix_sits_below_m_eps() {
    let source = bernoulli_source();
    let codec = TypeSizeCodec::quantized(source.family().clone(), &GridParams::unit(1).at(10).unwrap(), 1 << 20).unwrap();
    for e in 1..100 {
        let eps = e as f64 / 100.0;
        let m_star = typesize::rate::min_rank_prefix(&source, &codec, eps);
        assert!(m_star <= m_eps(&source, codec.index(), eps).unwrap().m);
    }
}
