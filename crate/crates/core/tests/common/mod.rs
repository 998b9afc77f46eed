//! Families shared by the integration tests.
#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use typesize::point::{derive_lattice, BasisConstant};
use typesize::{ExactStatMap, FamilySpec, LatticeMap, ParamVector, SourceSpec};

pub const RHO: f64 = 8.0;

pub fn q(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// Full Bernoulli family, τ = (0, 1).
pub fn bernoulli() -> FamilySpec {
    FamilySpec::new(vec![vec![0.0], vec![1.0]], RHO).unwrap()
}

pub fn bernoulli_lattice() -> LatticeMap {
    let map = ExactStatMap::rational(vec![vec![q(0)], vec![q(1)]]).unwrap();
    derive_lattice(&map, &bernoulli()).unwrap()
}

/// Full ternary family on the simplex corners.
pub fn ternary() -> FamilySpec {
    FamilySpec::new(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]], RHO).unwrap()
}

pub fn ternary_lattice() -> LatticeMap {
    let map = ExactStatMap::rational(vec![vec![q(0), q(0)], vec![q(1), q(0)], vec![q(0), q(1)]]).unwrap();
    derive_lattice(&map, &ternary()).unwrap()
}

/// One-dimensional family τ = (0, 1, √2): d = 1 but d′ = 2.
pub fn sqrt2() -> FamilySpec {
    FamilySpec::new(vec![vec![0.0], vec![1.0], vec![2f64.sqrt()]], RHO).unwrap()
}

pub fn sqrt2_lattice() -> LatticeMap {
    let map = ExactStatMap::new(
        vec![vec![BasisConstant::new("sqrt2", 2f64.sqrt())]],
        vec![vec![vec![q(0), q(0)]], vec![vec![q(1), q(0)]], vec![vec![q(0), q(1)]]],
    )
    .unwrap();
    derive_lattice(&map, &sqrt2()).unwrap()
}

/// θ with p(1) = 0.3 under τ = (0, 1).
pub fn bernoulli_source() -> SourceSpec {
    let fam = bernoulli();
    let theta = ParamVector::new(&fam, vec![(0.3f64 / 0.7).log2()]).unwrap();
    SourceSpec::new(fam, theta).unwrap()
}

pub fn ternary_source() -> SourceSpec {
    let fam = ternary();
    let theta = ParamVector::new(&fam, vec![0.6, -0.9]).unwrap();
    SourceSpec::new(fam, theta).unwrap()
}

/// Every sequence of length `n` over `k` symbols, in lexicographic order.
pub fn all_sequences(k: usize, n: u32) -> impl Iterator<Item = Vec<usize>> {
    let total = (k as u64).pow(n);
    (0..total).map(move |mut idx| {
        let mut seq = vec![0; n as usize];
        for slot in seq.iter_mut().rev() {
            *slot = (idx % k as u64) as usize;
            idx /= k as u64;
        }
        seq
    })
}

pub fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}
