//! Exact ε-coding rate of the Type Size code, third-order fits, and
//! empirical checks of the supporting bounds.
//!
//! Class probabilities are accumulated per composition as
//! `2^{log₂ size + Σ_x k_x log₂ p(x)}` with compensated summation.

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigUint;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::bigmath::{ceil_log2_big, log2_big, CompensatedSum};
use crate::codec::TypeSizeCodec;
use crate::compositions::{check_budget, for_each_composition};
use crate::error::{domain, spec, Result};
use crate::expofam::{constrained_argmax, dot, entropy, psi_pmf, varentropy, FamilySpec, ParamVector};
use crate::point::LatticeMap;
use crate::quantized::{r_of_composition, GridParams, IndexMode, TypeIndex};

/// Slack allowed when comparing probability masses against ε.
pub const MASS_TOL: f64 = 1e-12;
/// Monte Carlo work is split into this many independent substreams,
/// independent of the thread count.
pub const MC_SHARDS: u64 = 16;

/// The family together with the true parameter.
#[derive(Debug, Clone)]
pub struct SourceSpec {
    family: FamilySpec,
    theta_star: ParamVector,
    log2_pmf: Vec<f64>,
    entropy: f64,
    varentropy: f64,
}

impl SourceSpec {
    pub fn new(family: FamilySpec, theta_star: ParamVector) -> Result<Self> {
        if theta_star.as_slice().len() != family.d() {
            return spec("true parameter dimension does not match the family");
        }
        let (psi, _) = psi_pmf(&family, theta_star.as_slice());
        let log2_pmf = family
            .tau_table()
            .iter()
            .map(|t| dot(theta_star.as_slice(), t) - psi)
            .collect();
        let entropy = entropy(&family, &theta_star)?;
        let varentropy = varentropy(&family, &theta_star)?;
        Ok(SourceSpec {
            family,
            theta_star,
            log2_pmf,
            entropy,
            varentropy,
        })
    }

    pub fn family(&self) -> &FamilySpec {
        &self.family
    }

    pub fn theta_star(&self) -> &ParamVector {
        &self.theta_star
    }

    pub fn pmf(&self) -> Vec<f64> {
        self.log2_pmf.iter().map(|v| v.exp2()).collect()
    }

    pub fn entropy(&self) -> f64 {
        self.entropy
    }

    pub fn varentropy(&self) -> f64 {
        self.varentropy
    }

    pub fn sigma(&self) -> f64 {
        self.varentropy.max(0.0).sqrt()
    }

    /// `log₂ p_{θ*}` of one sequence with these counts.
    pub fn log2_prob(&self, counts: &[u32]) -> f64 {
        counts
            .iter()
            .zip(&self.log2_pmf)
            .filter(|(&c, _)| c > 0)
            .map(|(&c, lp)| c as f64 * lp)
            .sum()
    }
}

/// Exact size and probability of one class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassMass {
    pub size: BigUint,
    pub log2_size: f64,
    pub mass: f64,
}

fn class_mass(size: BigUint, mass: f64) -> ClassMass {
    ClassMass {
        log2_size: log2_big(&size),
        size,
        mass,
    }
}

/// Size and probability of every class of `index`, in index order.
pub fn class_masses(source: &SourceSpec, index: &TypeIndex) -> Vec<ClassMass> {
    index
        .classes()
        .iter()
        .map(|c| {
            let mass: CompensatedSum = c
                .members
                .iter()
                .zip(&c.member_sizes)
                .map(|(m, sz)| (log2_big(sz) + source.log2_prob(m.counts())).exp2())
                .collect();
            class_mass(c.size.clone(), mass.value())
        })
        .collect()
}

/// How classes are formed in a rate experiment.
#[derive(Debug, Clone)]
pub enum ClassMode {
    Quantized(GridParams),
    Point(LatticeMap),
}

impl ClassMode {
    pub fn name(&self) -> &'static str {
        match self {
            ClassMode::Quantized(_) => "quantized",
            ClassMode::Point(_) => "point",
        }
    }
}

/// Class sizes and masses at blocklength `n` without retaining member lists.
pub fn stream_class_masses(source: &SourceSpec, mode: &ClassMode, n: u32, budget: u64) -> Result<Vec<ClassMass>> {
    let family = source.family();
    check_budget(n as u64, family.alphabet_size(), budget)?;
    let grid = match mode {
        ClassMode::Quantized(p) => Some(p.at(n)?),
        ClassMode::Point(_) => None,
    };
    let mut groups: BTreeMap<Vec<i64>, (BigUint, CompensatedSum)> = BTreeMap::new();
    let mut failure = None;
    for_each_composition(n, family.alphabet_size(), |counts, size| {
        let key = match (mode, &grid) {
            (ClassMode::Point(lmap), _) => match lmap.scaled_sum(counts) {
                Ok(k) => k,
                Err(e) => {
                    failure.get_or_insert(e);
                    return;
                }
            },
            (_, Some(g)) => g.cell_of_sum(&family.stat_sum(counts)),
            _ => unreachable!("quantized mode always has a grid"),
        };
        let entry = groups
            .entry(key)
            .or_insert_with(|| (BigUint::zero(), CompensatedSum::default()));
        entry.0 += size;
        entry.1.add((log2_big(size) + source.log2_prob(counts)).exp2());
    });
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(groups
        .into_values()
        .map(|(size, mass)| class_mass(size, mass.value()))
        .collect())
}

/// Outcome of the `M(ε)` computation at one blocklength.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub n: u32,
    pub epsilon: f64,
    /// Threshold: classes with `log₂ size ≤ n·γ` are kept.
    pub gamma: f64,
    pub m: BigUint,
    /// `⌈log₂ M⌉`.
    pub ceil_log2_m: u64,
    /// `⌈log₂ M⌉ / n`.
    pub rate: f64,
    /// Probability of the dropped classes.
    pub overflow: f64,
    pub mode: String,
}

/// `P_{θ*}[log₂|T_{Xⁿ}| > nγ]`.
pub fn overflow_prob(source: &SourceSpec, index: &TypeIndex, gamma: f64) -> f64 {
    overflow_of(&class_masses(source, index), index.n(), gamma)
}

pub fn overflow_of(masses: &[ClassMass], n: u32, gamma: f64) -> f64 {
    let thr = n as f64 * gamma;
    let s: CompensatedSum = masses
        .iter()
        .filter(|c| c.log2_size > thr + 1e-9 * thr.abs().max(1.0))
        .map(|c| c.mass)
        .collect();
    s.value().clamp(0.0, 1.0)
}

pub fn m_eps(source: &SourceSpec, index: &TypeIndex, epsilon: f64) -> Result<RateReport> {
    m_eps_of(&class_masses(source, index), index.n(), epsilon, index.mode().name())
}

/// Smallest `M = Σ_{log₂|T| ≤ nγ} |T|` over thresholds whose overflow
/// probability is at most ε. Thresholds only matter at realized class sizes,
/// so whole groups of equal-size classes are dropped from the top while the
/// dropped mass stays within ε.
pub fn m_eps_of(masses: &[ClassMass], n: u32, epsilon: f64, mode: &str) -> Result<RateReport> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return domain(format!("ε must lie in (0, 1), got {epsilon}"));
    }
    if masses.is_empty() {
        return domain("no classes");
    }
    let mut order: Vec<usize> = (0..masses.len()).collect();
    order.sort_by(|&a, &b| masses[a].size.cmp(&masses[b].size));

    // Group boundaries in ascending size order.
    let mut groups: Vec<(usize, usize)> = Vec::new();
    let mut start = 0;
    for i in 1..=order.len() {
        if i == order.len() || masses[order[i]].size != masses[order[start]].size {
            groups.push((start, i));
            start = i;
        }
    }

    let mut dropped = CompensatedSum::default();
    let mut keep = groups.len();
    while keep > 1 {
        let (a, b) = groups[keep - 1];
        let mut trial = dropped;
        for &c in &order[a..b] {
            trial.add(masses[c].mass);
        }
        if trial.value() > epsilon + MASS_TOL {
            break;
        }
        dropped = trial;
        keep -= 1;
    }
    let kept_end = groups[keep - 1].1;
    let m: BigUint = order[..kept_end].iter().map(|&c| &masses[c].size).sum();
    let largest_kept = &masses[order[kept_end - 1]];
    let ceil_log2_m = ceil_log2_big(&m);
    Ok(RateReport {
        n,
        epsilon,
        gamma: largest_kept.log2_size / n as f64,
        ceil_log2_m,
        rate: ceil_log2_m as f64 / n as f64,
        overflow: dropped.value().clamp(0.0, 1.0),
        m,
        mode: mode.to_string(),
    })
}

pub fn eps_rate(source: &SourceSpec, index: &TypeIndex, epsilon: f64) -> Result<f64> {
    Ok(m_eps(source, index, epsilon)?.rate)
}

/// `P[l(φ(Xⁿ)) = L]` for every codeword length `L`, from the codec's rank layout.
pub fn codeword_length_distribution(source: &SourceSpec, codec: &TypeSizeCodec) -> Vec<f64> {
    let index = codec.index();
    let ordering = codec.ordering();
    let max_len = TypeSizeCodec::length_of_rank(&(ordering.total() - 1u32)) as usize;
    let mut acc = vec![CompensatedSum::default(); max_len + 1];
    for (pos, &ci) in ordering.order().iter().enumerate() {
        let class = &index.classes()[ci];
        let mut start = ordering.offsets()[pos].clone();
        for (member, size) in class.members.iter().zip(&class.member_sizes) {
            let lp = source.log2_prob(member.counts());
            let end = &start + size;
            let first = TypeSizeCodec::length_of_rank(&start);
            let last = TypeSizeCodec::length_of_rank(&(&end - 1u32));
            for len in first..=last {
                // ranks of length `len` are [2^len − 1, 2^{len+1} − 1)
                let lo = ((BigUint::one() << len) - 1u32).max(start.clone());
                let hi = ((BigUint::one() << (len + 1)) - 1u32).min(end.clone());
                acc[len as usize].add((log2_big(&(hi - lo)) + lp).exp2());
            }
            start = end;
        }
    }
    acc.iter().map(|s| s.value()).collect()
}

/// `min{k : P[l ≥ k] ≤ ε}` from a length distribution.
pub fn min_length_threshold(dist: &[f64], epsilon: f64) -> u64 {
    let mut tail = CompensatedSum::default();
    let mut tails = vec![0.0; dist.len() + 1];
    for k in (0..dist.len()).rev() {
        tail.add(dist[k]);
        tails[k] = tail.value();
    }
    (0..=dist.len())
        .find(|&k| tails[k] <= epsilon + MASS_TOL)
        .unwrap_or(dist.len()) as u64
}

/// The ε-coding rate straight from its definition, `min{k/n : P[l ≥ k] ≤ ε}`.
pub fn definitional_rate(source: &SourceSpec, codec: &TypeSizeCodec, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return domain(format!("ε must lie in (0, 1), got {epsilon}"));
    }
    let dist = codeword_length_distribution(source, codec);
    Ok(min_length_threshold(&dist, epsilon) as f64 / codec.n() as f64)
}

/// Fewest lowest ranks `m` with `P[rank ≥ m] ≤ ε`. The definitional length
/// threshold is exactly `⌈log₂(m + 1)⌉`, since `l ≥ k ⟺ rank ≥ 2^k − 1`.
pub fn min_rank_prefix(source: &SourceSpec, codec: &TypeSizeCodec, epsilon: f64) -> BigUint {
    let index = codec.index();
    let ordering = codec.ordering();
    let mut tail = CompensatedSum::default();
    for (pos, &ci) in ordering.order().iter().enumerate().rev() {
        let class = &index.classes()[ci];
        let mut end = ordering.offsets()[pos + 1].clone();
        for (member, size) in class.members.iter().zip(&class.member_sizes).rev() {
            let lp = source.log2_prob(member.counts());
            let whole = (log2_big(size) + lp).exp2();
            let mut trial = tail;
            trial.add(whole);
            if trial.value() > epsilon + MASS_TOL {
                // only part of this member fits under ε
                let room = (epsilon + MASS_TOL - tail.value()).max(0.0);
                let fit = (room / lp.exp2()).floor();
                let fit = BigUint::from(fit.min(1e300) as u128).min(size.clone());
                return end - fit;
            }
            tail = trial;
            end -= size;
        }
    }
    BigUint::zero()
}

/// `Q(z) = P[N(0,1) > z]`.
pub fn gaussian_q(z: f64) -> f64 {
    0.5 * libm::erfc(z / std::f64::consts::SQRT_2)
}

/// Inverse of [`gaussian_q`] on `(0, 1)`.
pub fn gaussian_qinv(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return domain(format!("Q⁻¹ needs p in (0, 1), got {p}"));
    }
    let (mut lo, mut hi) = (-40.0f64, 40.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gaussian_q(mid) > p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-6 {
            break;
        }
    }
    let mut z = 0.5 * (lo + hi);
    for _ in 0..50 {
        let density = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
        if density == 0.0 {
            break;
        }
        let step = (gaussian_q(z) - p) / density;
        z += step;
        if step.abs() <= 1e-15 * z.abs().max(1.0) {
            break;
        }
    }
    Ok(z)
}

/// One blocklength of a third-order fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitPoint {
    pub n: u32,
    pub report: RateReport,
    /// `⌈log₂ M⌉ − nH − σ√n Q⁻¹(ε)`.
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThirdOrderFit {
    pub slope: f64,
    pub intercept: f64,
    pub points: Vec<FitPoint>,
    pub residuals: Vec<f64>,
}

/// Ordinary least squares `y ≈ slope·x + intercept`.
pub fn ols(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Fits `n·R_n − nH − σ√n Q⁻¹(ε)` against `log₂ n`.
pub fn third_order_fit(
    source: &SourceSpec,
    mode: &ClassMode,
    n_list: &[u32],
    epsilon: f64,
    budget: u64,
) -> Result<ThirdOrderFit> {
    if n_list.len() < 3 {
        return domain("a third-order fit needs at least three blocklengths");
    }
    if n_list.windows(2).any(|w| w[0] >= w[1]) || n_list[0] == 0 {
        return domain("blocklengths must be positive and strictly increasing");
    }
    let qinv = gaussian_qinv(epsilon)?;
    for &n in n_list {
        check_budget(n as u64, source.family().alphabet_size(), budget)?;
    }
    let points = n_list
        .par_iter()
        .map(|&n| {
            let masses = stream_class_masses(source, mode, n, budget)?;
            let report = m_eps_of(&masses, n, epsilon, mode.name())?;
            let nf = n as f64;
            let y = report.ceil_log2_m as f64 - nf * source.entropy() - source.sigma() * nf.sqrt() * qinv;
            Ok(FitPoint { n, report, y })
        })
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = points.iter().map(|p| (p.n as f64).log2()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.y).collect();
    let (slope, intercept) = ols(&xs, &ys);
    let residuals = xs.iter().zip(&ys).map(|(x, y)| y - (slope * x + intercept)).collect();
    Ok(ThirdOrderFit {
        slope,
        intercept,
        points,
        residuals,
    })
}

/// Standardized information `(−log₂ p_{θ̂(xⁿ)}(xⁿ) − nH)/(√n σ)` for `samples`
/// i.i.d. draws from `p_{θ*}`.
///
/// Sample `i` of shard `j` comes from ChaCha20 seeded with `seed`, stream `j`;
/// each symbol is the first `x` whose cumulative probability exceeds a uniform
/// `[0,1)` draw.
pub fn information_samples(source: &SourceSpec, n: u32, samples: usize, seed: u64) -> Result<Vec<f64>> {
    let sigma = source.sigma();
    if sigma < 1e-12 {
        return domain("the source has zero varentropy; normalized information is undefined");
    }
    if n == 0 {
        return domain("blocklength must be at least 1");
    }
    let family = source.family();
    let pmf = source.pmf();
    let mut cdf = Vec::with_capacity(pmf.len());
    let mut acc = 0.0;
    for p in &pmf {
        acc += p;
        cdf.push(acc);
    }
    let nf = n as f64;
    let shards = MC_SHARDS as usize;
    let per: Vec<usize> = (0..shards)
        .map(|j| samples / shards + usize::from(j < samples % shards))
        .collect();
    let parts = (0..shards)
        .into_par_iter()
        .map(|j| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(j as u64);
            let mut cache: HashMap<Vec<u32>, f64> = HashMap::new();
            let mut out = Vec::with_capacity(per[j]);
            let mut counts = vec![0u32; pmf.len()];
            for _ in 0..per[j] {
                counts.iter_mut().for_each(|c| *c = 0);
                for _ in 0..n {
                    let u: f64 = rng.random();
                    let x = cdf.iter().position(|&c| u < c).unwrap_or(pmf.len() - 1);
                    counts[x] += 1;
                }
                let info = match cache.get(&counts) {
                    Some(&v) => v,
                    None => {
                        let sum = family.stat_sum(&counts);
                        let tau: Vec<f64> = sum.iter().map(|v| v / nf).collect();
                        let th = constrained_argmax(family, &tau)?;
                        let v = nf * psi_pmf(family, th.as_slice()).0 - dot(th.as_slice(), &sum);
                        cache.insert(counts.clone(), v);
                        v
                    }
                };
                out.push((info - nf * source.entropy()) / (nf.sqrt() * sigma));
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(parts.concat())
}

/// `sup_{z ∈ [−3,3]} |P̂[Z > z] − Q(z)|` on a 0.01 grid.
pub fn normality_check(source: &SourceSpec, n: u32, samples: usize, seed: u64) -> Result<f64> {
    if samples < 10_000 {
        return domain(format!("normality check needs at least 10000 samples, got {samples}"));
    }
    let mut z = information_samples(source, n, samples, seed)?;
    z.sort_by(f64::total_cmp);
    let total = z.len() as f64;
    let mut sup = 0.0f64;
    for i in 0..=600 {
        let t = -3.0 + i as f64 * 0.01;
        let above = z.len() - z.partition_point(|&v| v <= t);
        sup = sup.max((above as f64 / total - gaussian_q(t)).abs());
    }
    Ok(sup)
}

/// Extremes of `log₂ p_{θ̂(xⁿ)}(xⁿ) − log₂ p_{θ̂_c(xⁿ)}(xⁿ)` over all compositions.
#[derive(Debug, Clone, PartialEq)]
pub struct MlGap {
    pub min_gap: f64,
    pub max_gap: f64,
    /// `2κs`.
    pub bound: f64,
    pub compositions: u64,
}

impl MlGap {
    /// Violations counted with a solver slack of `tol` below zero.
    pub fn holds(&self, tol: f64) -> bool {
        self.min_gap >= -tol && self.max_gap <= self.bound
    }
}

pub fn ml_approx_check(family: &FamilySpec, params: &GridParams, n: u32, budget: u64) -> Result<MlGap> {
    let grid = params.at(n)?;
    check_budget(n as u64, family.alphabet_size(), budget)?;
    let nf = n as f64;
    let mut at_center: HashMap<Vec<i64>, Vec<f64>> = HashMap::new();
    let mut min_gap = f64::INFINITY;
    let mut max_gap = f64::NEG_INFINITY;
    let mut count = 0u64;
    let mut failure = None;
    for_each_composition(n, family.alphabet_size(), |counts, _| {
        if failure.is_some() {
            return;
        }
        let sum = family.stat_sum(counts);
        let cell = grid.cell_of_sum(&sum);
        let tc = match at_center.get(&cell) {
            Some(t) => t.clone(),
            None => match constrained_argmax(family, &grid.center(&cell)) {
                Ok(t) => {
                    let t = t.into_inner();
                    at_center.insert(cell, t.clone());
                    t
                }
                Err(e) => {
                    failure = Some(e);
                    return;
                }
            },
        };
        let tau: Vec<f64> = sum.iter().map(|v| v / nf).collect();
        let th = match constrained_argmax(family, &tau) {
            Ok(t) => t.into_inner(),
            Err(e) => {
                failure = Some(e);
                return;
            }
        };
        let loglik = |t: &[f64]| dot(t, &sum) - nf * psi_pmf(family, t).0;
        let gap = loglik(&th) - loglik(&tc);
        min_gap = min_gap.min(gap);
        max_gap = max_gap.max(gap);
        count += 1;
    });
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(MlGap {
        min_gap,
        max_gap,
        bound: 2.0 * family.kappa() * grid.s(),
        compositions: count,
    })
}

/// `max |log₂|T_{xⁿ}| − r(xⁿ)|` over every composition of a quantized index.
pub fn size_deviation(family: &FamilySpec, index: &TypeIndex) -> Result<f64> {
    let IndexMode::Quantized(grid) = index.mode() else {
        return spec("size deviation needs a quantized type index");
    };
    let mut worst = 0.0f64;
    for class in index.classes() {
        let log_size = log2_big(&class.size);
        for m in &class.members {
            let r = r_of_composition(family, grid, m.counts())?;
            worst = worst.max((log_size - r).abs());
        }
    }
    Ok(worst)
}

/// Smallest slack `n·f(τ_c) − log₂|T_{τ_c}|` over the classes of a quantized index.
pub fn upper_bound_slack(family: &FamilySpec, index: &TypeIndex, constant: f64) -> Result<f64> {
    let IndexMode::Quantized(grid) = index.mode() else {
        return spec("upper-bound slack needs a quantized type index");
    };
    let nf = index.n() as f64;
    let mut slack = f64::INFINITY;
    for class in index.classes() {
        let f = crate::quantized::f_of(family, grid, &class.center, constant)?;
        slack = slack.min(nf * f - log2_big(&class.size));
    }
    Ok(slack)
}
