//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

mod common;

use std::time::Instant;

use common::*;
use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use typesize::bigmath::ceil_log2_big;
use typesize::compositions::for_each_composition;
use typesize::expofam::{entropy, entropy_direct, mle, psi, suffstat};
use typesize::markov::{
    entropy_rate, exhaustive_information_moments, flip_family, cyclic_ternary_family, markov_type_index,
    varentropy_rate, MarkovCodec,
};
use typesize::point::point_type_index;
use typesize::quantized::{build_type_index, r_of_composition, IndexMode};
use typesize::rate::{
    codeword_length_distribution, m_eps, min_length_threshold, ml_approx_check, normality_check, third_order_fit,
    ClassMode,
};
use typesize::{
    FamilySpec, Grid, GridParams, LatticeMap, ModelEval, ParamVector, TypeSizeCodec, DEFAULT_COMPOSITION_BUDGET,
};

const BUDGET: u64 = DEFAULT_COMPOSITION_BUDGET;

fn round_trip_failures(codec: &TypeSizeCodec) -> u64 {
    let k = codec.family().alphabet_size();
    let mut failures = 0;
    let mut seen = BigUint::default();
    for seq in all_sequences(k, codec.n()) {
        let word = codec.encode(&seq).unwrap();
        if codec.decode(&word).unwrap() != seq {
            failures += 1;
        }
        seen += 1u32;
    }
    if &seen != codec.total() {
        failures += 1;
    }
    failures
}

#[test]
fn criterion_1_codec_bijectivity() {
    let start = Instant::now();
    let mut failures = 0u64;
    let mut checked = 0u64;
    let cases: [(FamilySpec, LatticeMap, u32); 2] =
        [(bernoulli(), bernoulli_lattice(), 12), (ternary(), ternary_lattice(), 8)];
    for (fam, lmap, n_max) in cases {
        let d = fam.d();
        for n in 1..=n_max {
            let grid = GridParams::unit(d).at(n).unwrap();
            let q = TypeSizeCodec::quantized(fam.clone(), &grid, BUDGET).unwrap();
            let p = TypeSizeCodec::point(fam.clone(), &lmap, n, BUDGET).unwrap();
            failures += round_trip_failures(&q) + round_trip_failures(&p);
            checked += 2 * (fam.alphabet_size() as u64).pow(n);
        }
    }
    for n in 1..=12u32 {
        let mspec = flip_family(RHO, 0).unwrap();
        let codec = MarkovCodec::new(mspec, &Grid::new(n, 1.0, vec![0.0]).unwrap(), 1 << 20).unwrap();
        for seq in all_sequences(2, n) {
            let word = codec.encode(&seq).unwrap();
            if codec.decode(&word).unwrap() != seq {
                failures += 1;
            }
            checked += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let ok = failures == 0 && secs < 120.0;
    println!(
        "{} criterion 1 codec bijectivity: {checked} round trips, {failures} failures, {secs:.1}s",
        verdict(ok)
    );
    assert!(ok);
}

#[test]
fn criterion_2_m_eps_matches_definitional_threshold() {
    let mut cells = 0u64;
    let mut mismatches = 0u64;
    let mut first = None;
    let sources = [(bernoulli_source(), "bernoulli"), (ternary_source(), "ternary")];
    for (source, name) in &sources {
        let d = source.family().d();
        for n in 1..=10u32 {
            let grid = GridParams::unit(d).at(n).unwrap();
            let codec = TypeSizeCodec::quantized(source.family().clone(), &grid, BUDGET).unwrap();
            let dist = codeword_length_distribution(source, &codec);
            for e in 1..=99u32 {
                let eps = e as f64 / 100.0;
                let via_m = m_eps(source, codec.index(), eps).unwrap().ceil_log2_m;
                let brute = min_length_threshold(&dist, eps);
                cells += 1;
                if via_m != brute {
                    mismatches += 1;
                    first.get_or_insert(format!("{name} n={n} eps={eps}: ceil log2 M = {via_m}, brute force = {brute}"));
                }
            }
        }
    }
    let ok = mismatches == 0;
    println!(
        "{} criterion 2 m_eps vs brute-force threshold: {mismatches}/{cells} cells differ{}",
        verdict(ok),
        first.map(|f| format!(" (first: {f})")).unwrap_or_default()
    );
    assert!(ok);
}

const FIT_NS: [u32; 7] = [16, 32, 64, 128, 256, 512, 1024];

#[test]
fn criterion_3_quantized_slope_bernoulli() {
    let start = Instant::now();
    let source = bernoulli_source();
    let fit = third_order_fit(&source, &ClassMode::Quantized(GridParams::unit(1)), &FIT_NS, 0.1, BUDGET).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let ok = (fit.slope + 0.5).abs() <= 0.2 && secs < 300.0;
    println!(
        "{} criterion 3 Bernoulli quantized slope: {:.4} (target -0.5 ± 0.2), {secs:.1}s",
        verdict(ok),
        fit.slope
    );
    assert!(ok);
}

#[test]
fn criterion_4_point_vs_quantized_separation() {
    let start = Instant::now();
    let fam = sqrt2();
    let source = typesize::SourceSpec::new(fam.clone(), ParamVector::new(&fam, vec![1.0]).unwrap()).unwrap();
    let point = third_order_fit(&source, &ClassMode::Point(sqrt2_lattice()), &FIT_NS, 0.1, BUDGET).unwrap();
    let quant = third_order_fit(&source, &ClassMode::Quantized(GridParams::unit(1)), &FIT_NS, 0.1, BUDGET).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let gap = point.slope - quant.slope;
    let ok = point.slope.abs() <= 0.2 && (quant.slope + 0.5).abs() <= 0.2 && gap >= 0.3 && secs < 600.0;
    println!(
        "{} criterion 4 point vs quantized: point {:.4} (0 ± 0.2), quantized {:.4} (-0.5 ± 0.2), gap {gap:.4} (≥ 0.3), {secs:.1}s",
        verdict(ok),
        point.slope,
        quant.slope
    );
    assert!(ok);
}

#[test]
fn criterion_5_ml_approximation_bound() {
    let mut violations = Vec::new();
    let mut compositions = 0u64;
    for fam in [bernoulli(), ternary()] {
        for s in [0.5, 1.0, 2.0] {
            for n in [8u32, 16, 32, 64] {
                let gap = ml_approx_check(&fam, &GridParams::with_s(fam.d(), s), n, BUDGET).unwrap();
                compositions += gap.compositions;
                if !gap.holds(1e-9) {
                    violations.push(format!(
                        "d={} s={s} n={n}: gap in [{:.3e}, {:.3e}], bound {:.3}",
                        fam.d(),
                        gap.min_gap,
                        gap.max_gap,
                        gap.bound
                    ));
                }
            }
        }
    }
    let ok = violations.is_empty();
    println!(
        "{} criterion 5 likelihood gap within [0, 2κs]: {compositions} compositions, {} violating configurations {violations:?}",
        verdict(ok),
        violations.len()
    );
    assert!(ok);
}

/// `max |log₂|T| − r(xⁿ)|` over the classes of a quantized index.
fn worst_size_deviation(fam: &FamilySpec, grid: &Grid) -> f64 {
    let index = build_type_index(fam, grid, BUDGET).unwrap();
    let IndexMode::Quantized(g) = index.mode() else { unreachable!() };
    let mut worst = 0.0f64;
    for class in index.classes() {
        let log_size = typesize::bigmath::log2_big(&class.size);
        for m in &class.members {
            worst = worst.max((log_size - r_of_composition(fam, g, m.counts()).unwrap()).abs());
        }
    }
    worst
}

#[test]
fn criterion_6_uniform_size_sandwich() {
    let mut violations = Vec::new();
    let mut configs = 0;
    for fam in [bernoulli(), ternary()] {
        for s in [0.5, 1.0, 2.0] {
            let params = GridParams::with_s(fam.d(), s);
            let bound = 2.0 * fam.kappa() * s;
            let c_star = (worst_size_deviation(&fam, &params.at(8).unwrap()) - bound).max(0.0);
            for n in [16u32, 32, 64] {
                configs += 1;
                let dev = worst_size_deviation(&fam, &params.at(n).unwrap());
                if dev > bound + c_star {
                    violations.push(format!("d={} s={s} n={n}: {dev:.4} > {:.4}", fam.d(), bound + c_star));
                }
            }
        }
    }
    let ok = violations.is_empty();
    println!(
        "{} criterion 6 |log|T| - r| ≤ 2κs + C* (C* from n=8): {configs} configurations, violations {violations:?}",
        verdict(ok)
    );
    assert!(ok);
}

#[test]
fn criterion_7_normality_stability() {
    let source = bernoulli_source();
    let samples = 100_000;
    let seed = 7;
    let scaled: Vec<(u32, f64)> = [64u32, 256, 1024]
        .iter()
        .map(|&n| (n, normality_check(&source, n, samples, seed).unwrap() * (n as f64).sqrt()))
        .collect();
    let reference = scaled[0].1;
    let repeat = normality_check(&source, 64, samples, seed).unwrap() * 8.0;
    let reproducible = repeat.to_bits() == reference.to_bits();
    let ok = reproducible && scaled.iter().all(|&(_, a)| a <= 1.5 * reference);
    println!(
        "{} criterion 7 sup-deviation·√n: {} (limit {:.4}), reproducible = {reproducible}",
        verdict(ok),
        scaled.iter().map(|(n, a)| format!("n={n}: {a:.4}")).collect::<Vec<_>>().join(", "),
        1.5 * reference
    );
    assert!(ok);
}

fn random_family(rng: &mut ChaCha20Rng) -> FamilySpec {
    let k = rng.random_range(2..=5usize);
    let d = rng.random_range(1..k);
    let tau = (0..k).map(|_| (0..d).map(|_| rng.random_range(-1.5..1.5)).collect()).collect();
    FamilySpec::new(tau, RHO).unwrap()
}

fn random_theta(rng: &mut ChaCha20Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(-1.5..1.5)).collect()
}

#[test]
fn criterion_8_exponential_family_numerics() {
    let start = Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(8);
    let (mut grad_err, mut hess_err, mut stat_err, mut ent_err) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut partition_failures = 0u32;
    let h = 1e-5;
    for _ in 0..300 {
        let fam = random_family(&mut rng);
        let d = fam.d();
        let theta = random_theta(&mut rng, d);
        let eval = ModelEval::new(&fam, &ParamVector::new(&fam, theta.clone()).unwrap()).unwrap();
        for i in 0..d {
            let mut up = theta.clone();
            let mut dn = theta.clone();
            up[i] += h;
            dn[i] -= h;
            let pu = ParamVector::new(&fam, up).unwrap();
            let pd = ParamVector::new(&fam, dn).unwrap();
            let fd = (psi(&fam, &pu).unwrap() - psi(&fam, &pd).unwrap()) / (2.0 * h);
            grad_err = grad_err.max((fd - eval.grad_psi[i]).abs());
            let gu = ModelEval::new(&fam, &pu).unwrap().grad_psi;
            let gd = ModelEval::new(&fam, &pd).unwrap().grad_psi;
            for j in 0..d {
                hess_err = hess_err.max(((gu[j] - gd[j]) / (2.0 * h) - eval.hess_psi[(j, i)]).abs());
            }
        }
        ent_err = ent_err.max(
            (entropy(&fam, &eval.theta).unwrap() - entropy_direct(&eval.pmf)).abs(),
        );

        // Stationarity at an interior empirical mean.
        let n = rng.random_range(5..40u32);
        let seq: Vec<usize> = (0..n).map(|_| rng.random_range(0..fam.alphabet_size())).collect();
        let tbar = suffstat(&fam, &seq).unwrap();
        let that = mle(&fam, &tbar).unwrap();
        if that.norm() < RHO - 1e-6 {
            let g = ModelEval::new(&fam, &that).unwrap().grad_psi;
            let r = g.iter().zip(&tbar).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            stat_err = stat_err.max(r);
        }
    }
    for (fam, n) in [(bernoulli(), 30u32), (ternary(), 20), (sqrt2(), 20)] {
        let k = fam.alphabet_size();
        let expected = BigUint::from(k).pow(n);
        let mut sum = BigUint::default();
        for_each_composition(n, k, |_, m| sum += m);
        let index = build_type_index(&fam, &GridParams::unit(fam.d()).at(n).unwrap(), BUDGET).unwrap();
        let members: BigUint = index
            .classes()
            .iter()
            .map(|c| c.member_sizes.iter().sum::<BigUint>())
            .sum();
        if sum != expected || index.total_size() != expected || members != expected {
            partition_failures += 1;
        }
        let lmap = match fam.alphabet_size() {
            2 => bernoulli_lattice(),
            _ if fam.d() == 2 => ternary_lattice(),
            _ => sqrt2_lattice(),
        };
        if point_type_index(&fam, &lmap, n, BUDGET).unwrap().total_size() != expected {
            partition_failures += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let ok = grad_err <= 1e-6
        && hess_err <= 1e-6
        && stat_err <= 1e-9
        && ent_err <= 1e-12
        && partition_failures == 0
        && secs < 60.0;
    println!(
        "{} criterion 8 numerics: grad {grad_err:.2e}, hessian {hess_err:.2e}, stationarity {stat_err:.2e}, entropy {ent_err:.2e}, partition failures {partition_failures}, {secs:.1}s",
        verdict(ok)
    );
    assert!(ok);
}

#[test]
fn criterion_9_markov() {
    let budget = 1 << 22;
    let mut notes = Vec::new();
    let mut ok = true;
    let cases = [
        (flip_family(RHO, 0).unwrap(), vec![0.8], 2usize),
        (cyclic_ternary_family(RHO, 1).unwrap(), vec![0.7, -0.4], 3),
    ];
    for (mspec, theta, k) in cases {
        let theta = mspec.param(theta).unwrap();
        let h = entropy_rate(&mspec, &theta).unwrap();
        let v = varentropy_rate(&mspec, &theta).unwrap();
        let (mean12, _) = exhaustive_information_moments(&mspec, &theta, 12, budget).unwrap();
        let ent_gap = (mean12 / 12.0 - h).abs();

        // Var[−log p(Xⁿ)] grows linearly; the slope over n estimates the rate.
        let ns = [8u32, 10, 12];
        let vars: Vec<f64> = ns
            .iter()
            .map(|&n| exhaustive_information_moments(&mspec, &theta, n, budget).unwrap().1)
            .collect();
        let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
        let (slope, _) = typesize::rate::ols(&xs, &vars);
        let var_rel = (slope - v).abs() / v;

        let d = mspec.d();
        let mut exact = true;
        for n in [6u32, 9] {
            let grid = GridParams::unit(d).at(n).unwrap();
            let index = markov_type_index(&mspec, &grid, budget).unwrap();
            let total = BigUint::from(k).pow(n);
            let paths: u64 = index.classes().iter().map(|c| c.paths.len() as u64).sum();
            exact &= index.total_size() == total && BigUint::from(paths) == total;
            let codec = MarkovCodec::new(mspec.clone(), &grid, budget).unwrap();
            for seq in all_sequences(k, n) {
                exact &= codec.decode(&codec.encode(&seq).unwrap()).unwrap() == seq;
            }
        }
        let case_ok = ent_gap <= 0.02 && var_rel <= 0.02 && exact;
        ok &= case_ok;
        notes.push(format!(
            "|X|={k}: entropy gap {ent_gap:.2e}, varentropy rel err {var_rel:.2e}, partition+round trip {exact}"
        ));
    }
    println!("{} criterion 9 Markov: {}", verdict(ok), notes.join("; "));
    assert!(ok);
}

#[test]
fn codeword_threshold_identity_holds_exactly() {
    // The exact relation between the minimal rank prefix and the brute-force
    // threshold, over the same grid as criterion 2.
    let mut bad = 0;
    for source in [bernoulli_source(), ternary_source()] {
        for n in 1..=10u32 {
            let grid = GridParams::unit(source.family().d()).at(n).unwrap();
            let codec = TypeSizeCodec::quantized(source.family().clone(), &grid, BUDGET).unwrap();
            let dist = codeword_length_distribution(&source, &codec);
            for e in 1..=99u32 {
                let eps = e as f64 / 100.0;
                let m_star = typesize::rate::min_rank_prefix(&source, &codec, eps);
                if ceil_log2_big(&(m_star + 1u32)) != min_length_threshold(&dist, eps) {
                    bad += 1;
                }
            }
        }
    }
    assert_eq!(bad, 0);
}
