//! First-order Markov exponential families with pair statistics.
//!
//! `p_θ(b | a) = 2^{⟨θ,τ(a,b)⟩ − ψ(θ)}` with one `ψ` shared by every row, so
//! each row sum `Σ_b 2^{⟨θ,τ(a,b)⟩}` must be the same; families breaking that
//! are rejected. Paths `x₁…xₙ` start after a fixed, known `x₀` and are
//! identified with integers in base `|X|` (first symbol most significant),
//! so numeric order is lexicographic path order.

use std::collections::{BTreeMap, HashMap};

use nalgebra::{DMatrix, DVector};
use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::bigmath::CompensatedSum;
use crate::codec::{index_of_string, string_of_index, ClassOrdering, Codeword};
use crate::error::{domain, spec, Error, Result};
use crate::expofam::{dot, norm, ParamVector};
use crate::quantized::{Grid, GridParams};
use crate::rate::{gaussian_qinv, m_eps_of, ols, ClassMass, FitPoint, RateReport, ThirdOrderFit, MC_SHARDS};

/// Relative tolerance for equal row sums.
const ROW_TOL: f64 = 1e-9;
const STATIONARY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct MarkovFamilySpec {
    k: usize,
    d: usize,
    /// `tau2[a·k + b] = τ(a, b)`.
    tau2: Vec<Vec<f64>>,
    rho_max: f64,
    x0: usize,
}

impl MarkovFamilySpec {
    pub fn new(tau2: Vec<Vec<f64>>, rho_max: f64, x0: usize) -> Result<Self> {
        let k = (tau2.len() as f64).sqrt().round() as usize;
        if k < 2 || k * k != tau2.len() {
            return spec(format!(
                "pair statistic table has {} rows; expected |X|² with |X| ≥ 2",
                tau2.len()
            ));
        }
        let d = tau2[0].len();
        if d == 0 {
            return spec("pair statistic must have at least one coordinate");
        }
        for (i, row) in tau2.iter().enumerate() {
            if row.len() != d {
                return spec(format!("pair row {i} has length {}, expected {d}", row.len()));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return spec(format!("pair row {i} has a non-finite entry"));
            }
        }
        if !(rho_max.is_finite() && rho_max > 0.0) {
            return spec(format!("parameter radius must be positive and finite, got {rho_max}"));
        }
        if x0 >= k {
            return spec(format!("initial symbol {x0} outside an alphabet of size {k}"));
        }
        let m = MarkovFamilySpec {
            k,
            d,
            tau2,
            rho_max,
            x0,
        };
        for theta in m.validation_grid() {
            m.check_rows(&theta)?;
        }
        Ok(m)
    }

    pub fn alphabet_size(&self) -> usize {
        self.k
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn x0(&self) -> usize {
        self.x0
    }

    pub fn rho_max(&self) -> f64 {
        self.rho_max
    }

    pub fn tau(&self, a: usize, b: usize) -> &[f64] {
        &self.tau2[a * self.k + b]
    }

    pub fn tau_table(&self) -> &[Vec<f64>] {
        &self.tau2
    }

    /// Origin, `±℘/2` and `±℘` along each axis, and `±℘` along the diagonal.
    fn validation_grid(&self) -> Vec<Vec<f64>> {
        let mut grid = vec![vec![0.0; self.d]];
        for j in 0..self.d {
            for scale in [-1.0, -0.5, 0.5, 1.0] {
                let mut t = vec![0.0; self.d];
                t[j] = scale * self.rho_max;
                grid.push(t);
            }
        }
        let diag = self.rho_max / (self.d as f64).sqrt();
        grid.push(vec![diag; self.d]);
        grid.push(vec![-diag; self.d]);
        grid
    }

    /// `log₂ Σ_b 2^{⟨θ,τ(a,b)⟩}` for each row `a`.
    fn row_log_sums(&self, theta: &[f64]) -> Vec<f64> {
        (0..self.k)
            .map(|a| {
                let e: Vec<f64> = (0..self.k).map(|b| dot(theta, self.tau(a, b))).collect();
                crate::bigmath::log2_sum_exp2(&e)
            })
            .collect()
    }

    fn check_rows(&self, theta: &[f64]) -> Result<()> {
        let sums = self.row_log_sums(theta);
        let ref_sum = sums[0].exp2();
        for (a, s) in sums.iter().enumerate().skip(1) {
            let v = s.exp2();
            if (v - ref_sum).abs() > ROW_TOL * ref_sum.max(v) {
                return spec(format!(
                    "row {a} of the transition kernel does not normalize with the shared ψ at θ = {theta:?} \
                     (row sum {v} vs {ref_sum} for row 0)"
                ));
            }
        }
        Ok(())
    }

    fn check_theta(&self, theta: &ParamVector) -> Result<()> {
        let t = theta.as_slice();
        if t.len() != self.d {
            return spec(format!("θ has length {}, expected d = {}", t.len(), self.d));
        }
        if norm(t) > self.rho_max * (1.0 + 1e-12) {
            return domain(format!("‖θ‖ = {} exceeds ℘ = {}", norm(t), self.rho_max));
        }
        Ok(())
    }

    /// Parameter vector checked against this family's radius.
    pub fn param(&self, theta: Vec<f64>) -> Result<ParamVector> {
        let p = ParamVector::from_raw(theta);
        self.check_theta(&p)?;
        Ok(p)
    }

    /// Shared log-normalizer `ψ(θ)`.
    pub fn psi(&self, theta: &ParamVector) -> Result<f64> {
        self.check_theta(theta)?;
        self.check_rows(theta.as_slice())?;
        Ok(self.row_log_sums(theta.as_slice())[0])
    }

    /// `Σ_{a,b} counts[a·k+b]·τ(a,b)` in a fixed order.
    pub fn pair_stat_sum(&self, pair_counts: &[u32]) -> Vec<f64> {
        let mut acc = vec![0.0; self.d];
        for (row, &c) in self.tau2.iter().zip(pair_counts) {
            if c > 0 {
                for (a, v) in acc.iter_mut().zip(row) {
                    *a += c as f64 * v;
                }
            }
        }
        acc
    }

    /// Pair counts of a path, the first pair being `(x₀, x₁)`.
    pub fn pair_counts(&self, path: &[usize]) -> Result<Vec<u32>> {
        let mut counts = vec![0u32; self.k * self.k];
        let mut prev = self.x0;
        for (i, &x) in path.iter().enumerate() {
            if x >= self.k {
                return domain(format!("symbol {x} at position {i} is outside the alphabet"));
            }
            counts[prev * self.k + x] += 1;
            prev = x;
        }
        Ok(counts)
    }

    /// `τ(xⁿ) = (1/n) Σ τ(x_{i−1}, x_i)`.
    pub fn suffstat(&self, path: &[usize]) -> Result<Vec<f64>> {
        if path.is_empty() {
            return domain("empty path");
        }
        let n = path.len() as f64;
        Ok(self
            .pair_stat_sum(&self.pair_counts(path)?)
            .into_iter()
            .map(|v| v / n)
            .collect())
    }

    /// `log₂ p_θ(xⁿ | x₀) = n(⟨θ,τ(xⁿ)⟩ − ψ(θ))`.
    pub fn path_log_prob(&self, theta: &ParamVector, path: &[usize]) -> Result<f64> {
        let psi = self.psi(theta)?;
        let sum = self.pair_stat_sum(&self.pair_counts(path)?);
        Ok(dot(theta.as_slice(), &sum) - path.len() as f64 * psi)
    }
}

pub fn transition_matrix(mspec: &MarkovFamilySpec, theta: &ParamVector) -> Result<DMatrix<f64>> {
    let psi = mspec.psi(theta)?;
    let k = mspec.alphabet_size();
    Ok(DMatrix::from_fn(k, k, |a, b| {
        (dot(theta.as_slice(), mspec.tau(a, b)) - psi).exp2()
    }))
}

/// Stationary law of an irreducible chain.
pub fn stationary_dist(p: &DMatrix<f64>) -> Result<Vec<f64>> {
    let k = p.nrows();
    if k == 0 || p.ncols() != k {
        return domain("transition matrix must be square and nonempty");
    }
    for a in 0..k {
        let mut seen = vec![false; k];
        let mut stack = vec![a];
        seen[a] = true;
        while let Some(u) = stack.pop() {
            for v in 0..k {
                if p[(u, v)] > 0.0 && !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        if let Some(b) = seen.iter().position(|&s| !s) {
            return domain(format!("chain is reducible: state {b} is unreachable from state {a}"));
        }
    }
    // (Pᵀ − I)π = 0 with the last equation replaced by Σπ = 1.
    let mut a = p.transpose() - DMatrix::identity(k, k);
    for j in 0..k {
        a[(k - 1, j)] = 1.0;
    }
    let mut rhs = DVector::zeros(k);
    rhs[k - 1] = 1.0;
    let pi = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Domain("stationary system is singular".into()))?;
    let pi: Vec<f64> = pi.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = pi.iter().sum();
    let pi: Vec<f64> = pi.into_iter().map(|v| v / total).collect();
    let resid = (DVector::from_row_slice(&pi).transpose() * p - DVector::from_row_slice(&pi).transpose()).amax();
    if resid > STATIONARY_TOL {
        return domain(format!("stationary solve residual {resid:e} above tolerance"));
    }
    Ok(pi)
}

fn surprisal(p: &DMatrix<f64>) -> DMatrix<f64> {
    p.map(|v| if v > 0.0 { -v.log2() } else { 0.0 })
}

/// `Σ_a π(a) Σ_b P(b|a)(−log₂ P(b|a))`.
pub fn entropy_rate(mspec: &MarkovFamilySpec, theta: &ParamVector) -> Result<f64> {
    let p = transition_matrix(mspec, theta)?;
    let pi = stationary_dist(&p)?;
    let g = surprisal(&p);
    let k = p.nrows();
    let s: CompensatedSum = (0..k)
        .flat_map(|a| {
            let (p, g, pi) = (&p, &g, &pi);
            (0..k).map(move |b| pi[a] * p[(a, b)] * g[(a, b)])
        })
        .collect();
    Ok(s.value())
}

/// Asymptotic variance of `Σ −log₂ P(x_i|x_{i−1})` per symbol, via the
/// fundamental matrix `Z = (I − P + 1πᵀ)⁻¹`: with `h(a) = Σ_b P(b|a) g(a,b)`
/// and `u = Z(h − H)`, `σ² = Σ_a π(a) Σ_b P(b|a)(g(a,b) − H + u(b) − u(a))²`.
pub fn varentropy_rate(mspec: &MarkovFamilySpec, theta: &ParamVector) -> Result<f64> {
    let p = transition_matrix(mspec, theta)?;
    let pi = stationary_dist(&p)?;
    let g = surprisal(&p);
    let k = p.nrows();
    let h: Vec<f64> = (0..k).map(|a| (0..k).map(|b| p[(a, b)] * g[(a, b)]).sum()).collect();
    let rate: f64 = (0..k).map(|a| pi[a] * h[a]).sum();
    let one_pi = DMatrix::from_fn(k, k, |_, j| pi[j]);
    let z = (DMatrix::identity(k, k) - &p + one_pi)
        .try_inverse()
        .ok_or_else(|| Error::Domain("fundamental matrix is singular".into()))?;
    let u = z * DVector::from_iterator(k, h.iter().map(|v| v - rate));
    let s: CompensatedSum = (0..k)
        .flat_map(|a| {
            let (p, g, pi, u) = (&p, &g, &pi, &u);
            (0..k).map(move |b| {
                let dev = g[(a, b)] - rate + u[b] - u[a];
                pi[a] * p[(a, b)] * dev * dev
            })
        })
        .collect();
    Ok(s.value().max(0.0))
}

/// `|X|^n`, failing when it exceeds the path budget.
fn path_count(k: usize, n: u32, budget: u64) -> Result<u64> {
    let count = (k as u64).checked_pow(n).filter(|&c| c <= budget);
    count.ok_or_else(|| Error::Resource {
        what: format!("exhaustive enumeration of {k}^{n} paths (use Monte Carlo estimation instead)"),
        needed: BigUint::from(k).pow(n).to_string(),
        budget: format!("{budget} (budget-paths)"),
    })
}

pub fn path_of_index(k: usize, n: u32, mut idx: u64) -> Vec<usize> {
    let mut path = vec![0usize; n as usize];
    for slot in path.iter_mut().rev() {
        *slot = (idx % k as u64) as usize;
        idx /= k as u64;
    }
    path
}

pub fn index_of_path(k: usize, path: &[usize]) -> u64 {
    path.iter().fold(0u64, |acc, &x| acc * k as u64 + x as u64)
}

/// Visits every path in lexicographic order with its pair counts.
fn for_each_path<F: FnMut(u64, &[u32])>(mspec: &MarkovFamilySpec, n: u32, first: usize, f: &mut F) {
    let k = mspec.alphabet_size();
    let mut counts = vec![0u32; k * k];
    counts[mspec.x0() * k + first] += 1;
    fn go<F: FnMut(u64, &[u32])>(k: usize, left: u32, prev: usize, idx: u64, counts: &mut [u32], f: &mut F) {
        if left == 0 {
            f(idx, counts);
            return;
        }
        for x in 0..k {
            counts[prev * k + x] += 1;
            go(k, left - 1, x, idx * k as u64 + x as u64, counts, f);
            counts[prev * k + x] -= 1;
        }
    }
    go(k, n - 1, first, first as u64, &mut counts, f);
}

/// Paths grouped by exact pair counts, in lexicographic path order per group.
fn paths_by_pair_counts(mspec: &MarkovFamilySpec, n: u32, budget: u64) -> Result<BTreeMap<Vec<u32>, Vec<u64>>> {
    if n == 0 {
        return domain("blocklength must be at least 1");
    }
    path_count(mspec.alphabet_size(), n, budget)?;
    let shards: Vec<HashMap<Vec<u32>, Vec<u64>>> = (0..mspec.alphabet_size())
        .into_par_iter()
        .map(|first| {
            let mut groups: HashMap<Vec<u32>, Vec<u64>> = HashMap::new();
            for_each_path(mspec, n, first, &mut |idx, counts| {
                groups.entry(counts.to_vec()).or_default().push(idx);
            });
            groups
        })
        .collect();
    // Shards hold increasing, disjoint index ranges; appending in shard order keeps lists sorted.
    let mut merged: BTreeMap<Vec<u32>, Vec<u64>> = BTreeMap::new();
    for shard in shards {
        let mut sorted: Vec<_> = shard.into_iter().collect();
        sorted.sort_by(|a, b| a.0.cmp(&b.0));
        for (sig, paths) in sorted {
            merged.entry(sig).or_default().extend(paths);
        }
    }
    Ok(merged)
}

/// One Markov type class: all paths whose pair statistic lies in one cuboid.
#[derive(Debug, Clone)]
pub struct MarkovClass {
    pub key: Vec<i64>,
    pub center: Vec<f64>,
    /// Path indices, ascending.
    pub paths: Vec<u64>,
    /// Distinct pair-count matrices with their path counts.
    pub signatures: Vec<(Vec<u32>, u64)>,
    pub size: BigUint,
}

/// Exact Markov type classes from exhaustive path enumeration.
#[derive(Debug, Clone)]
pub struct MarkovTypeIndex {
    n: u32,
    grid: Grid,
    classes: Vec<MarkovClass>,
}

impl MarkovTypeIndex {
    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn classes(&self) -> &[MarkovClass] {
        &self.classes
    }

    pub fn total_size(&self) -> BigUint {
        self.classes.iter().map(|c| &c.size).sum()
    }

    pub fn find_class(&self, key: &[i64]) -> Option<usize> {
        self.classes.binary_search_by(|c| c.key.as_slice().cmp(key)).ok()
    }
}

pub fn markov_type_index(mspec: &MarkovFamilySpec, grid: &Grid, path_budget: u64) -> Result<MarkovTypeIndex> {
    if grid.d() != mspec.d() {
        return spec(format!("grid dimension {} does not match d = {}", grid.d(), mspec.d()));
    }
    let n = grid.n();
    let groups = paths_by_pair_counts(mspec, n, path_budget)?;
    let mut cells: BTreeMap<Vec<i64>, MarkovClass> = BTreeMap::new();
    for (sig, paths) in groups {
        let cell = grid.cell_of_sum(&mspec.pair_stat_sum(&sig));
        let class = cells.entry(cell.clone()).or_insert_with(|| MarkovClass {
            center: grid.center(&cell),
            key: cell,
            paths: Vec::new(),
            signatures: Vec::new(),
            size: BigUint::zero(),
        });
        class.signatures.push((sig, paths.len() as u64));
        class.paths.extend(paths);
    }
    let classes = cells
        .into_values()
        .map(|mut c| {
            c.paths.sort_unstable();
            c.size = BigUint::from(c.paths.len());
            c
        })
        .collect();
    Ok(MarkovTypeIndex {
        n,
        grid: grid.clone(),
        classes,
    })
}

/// Monte Carlo estimate of one class size.
#[derive(Debug, Clone, PartialEq)]
pub struct SizeEstimate {
    pub key: Vec<i64>,
    pub center: Vec<f64>,
    pub estimate: f64,
    pub std_error: f64,
    pub hits: u64,
}

/// Class sizes estimated as `|X|^n ·` (fraction of uniformly drawn paths in
/// the class). Shard `j` draws from ChaCha20 seeded with `seed`, stream `j`.
pub fn markov_size_estimates(mspec: &MarkovFamilySpec, grid: &Grid, samples: u64, seed: u64) -> Result<Vec<SizeEstimate>> {
    if samples == 0 {
        return domain("Monte Carlo estimation needs at least one sample");
    }
    if grid.d() != mspec.d() {
        return spec(format!("grid dimension {} does not match d = {}", grid.d(), mspec.d()));
    }
    let k = mspec.alphabet_size();
    let n = grid.n();
    let per: Vec<u64> = (0..MC_SHARDS)
        .map(|j| samples / MC_SHARDS + u64::from(j < samples % MC_SHARDS))
        .collect();
    let shards: Vec<BTreeMap<Vec<i64>, u64>> = (0..MC_SHARDS)
        .into_par_iter()
        .map(|j| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(j);
            let mut hits: BTreeMap<Vec<i64>, u64> = BTreeMap::new();
            let mut counts = vec![0u32; k * k];
            for _ in 0..per[j as usize] {
                counts.iter_mut().for_each(|c| *c = 0);
                let mut prev = mspec.x0();
                for _ in 0..n {
                    let x = rng.random_range(0..k);
                    counts[prev * k + x] += 1;
                    prev = x;
                }
                *hits.entry(grid.cell_of_sum(&mspec.pair_stat_sum(&counts))).or_default() += 1;
            }
            hits
        })
        .collect();
    let mut total: BTreeMap<Vec<i64>, u64> = BTreeMap::new();
    for shard in shards {
        for (key, h) in shard {
            *total.entry(key).or_default() += h;
        }
    }
    let paths = (k as f64).powi(n as i32);
    let s = samples as f64;
    Ok(total
        .into_iter()
        .map(|(key, hits)| {
            let f = hits as f64 / s;
            SizeEstimate {
                center: grid.center(&key),
                key,
                estimate: paths * f,
                std_error: paths * (f * (1.0 - f) / s).sqrt(),
                hits,
            }
        })
        .collect())
}

/// Type Size code over exhaustive Markov classes; within a class paths are
/// in lexicographic order.
#[derive(Debug, Clone)]
pub struct MarkovCodec {
    mspec: MarkovFamilySpec,
    index: MarkovTypeIndex,
    ordering: ClassOrdering,
}

impl MarkovCodec {
    pub fn new(mspec: MarkovFamilySpec, grid: &Grid, path_budget: u64) -> Result<Self> {
        let index = markov_type_index(&mspec, grid, path_budget)?;
        let ordering = ClassOrdering::from_classes(index.classes.iter().map(|c| (&c.size, c.key.as_slice())));
        Ok(MarkovCodec { mspec, index, ordering })
    }

    pub fn spec(&self) -> &MarkovFamilySpec {
        &self.mspec
    }

    pub fn index(&self) -> &MarkovTypeIndex {
        &self.index
    }

    pub fn ordering(&self) -> &ClassOrdering {
        &self.ordering
    }

    pub fn n(&self) -> u32 {
        self.index.n
    }

    pub fn rank(&self, path: &[usize]) -> Result<BigUint> {
        if path.len() != self.n() as usize {
            return domain(format!("path length {} does not match blocklength {}", path.len(), self.n()));
        }
        let counts = self.mspec.pair_counts(path)?;
        let key = self.index.grid.cell_of_sum(&self.mspec.pair_stat_sum(&counts));
        let ci = self
            .index
            .find_class(&key)
            .ok_or_else(|| Error::Domain(format!("no class with key {key:?}")))?;
        let idx = index_of_path(self.mspec.alphabet_size(), path);
        let pos = self.index.classes[ci]
            .paths
            .binary_search(&idx)
            .map_err(|_| Error::Domain("path missing from its class".into()))?;
        Ok(&self.ordering.offsets()[self.ordering.position_of(ci)] + pos)
    }

    pub fn unrank(&self, k: &BigUint) -> Result<Vec<usize>> {
        let Some(pos) = self.ordering.position_at_rank(k) else {
            return domain(format!("rank {k} is not below |X|^n = {}", self.ordering.total()));
        };
        let class = &self.index.classes[self.ordering.order()[pos]];
        let within = (k - &self.ordering.offsets()[pos])
            .to_usize()
            .expect("within-class offset fits a path list index");
        Ok(path_of_index(self.mspec.alphabet_size(), self.n(), class.paths[within]))
    }

    pub fn encode(&self, path: &[usize]) -> Result<Codeword> {
        Ok(string_of_index(&self.rank(path)?))
    }

    pub fn decode(&self, word: &Codeword) -> Result<Vec<usize>> {
        let k = index_of_string(word);
        if &k >= self.ordering.total() {
            return Err(Error::Corrupt(format!(
                "codeword index {k} is not below |X|^n = {}",
                self.ordering.total()
            )));
        }
        self.unrank(&k)
    }
}

/// Class sizes and probabilities under `θ*` from an exhaustive index.
pub fn markov_class_masses(mspec: &MarkovFamilySpec, theta: &ParamVector, index: &MarkovTypeIndex) -> Result<Vec<ClassMass>> {
    let psi = mspec.psi(theta)?;
    let n = index.n() as f64;
    Ok(index
        .classes
        .iter()
        .map(|c| {
            let mass: CompensatedSum = c
                .signatures
                .iter()
                .map(|(sig, cnt)| {
                    let lp = dot(theta.as_slice(), &mspec.pair_stat_sum(sig)) - n * psi;
                    ((*cnt as f64).log2() + lp).exp2()
                })
                .collect();
            ClassMass {
                log2_size: crate::bigmath::log2_big(&c.size),
                size: c.size.clone(),
                mass: mass.value(),
            }
        })
        .collect())
}

pub fn markov_eps_rate(mspec: &MarkovFamilySpec, theta: &ParamVector, index: &MarkovTypeIndex, epsilon: f64) -> Result<RateReport> {
    let masses = markov_class_masses(mspec, theta, index)?;
    m_eps_of(&masses, index.n(), epsilon, "markov")
}

/// Third-order fit with the entropy and varentropy rates in place of the
/// i.i.d. quantities.
pub fn markov_third_order_fit(
    mspec: &MarkovFamilySpec,
    theta: &ParamVector,
    params: &GridParams,
    n_list: &[u32],
    epsilon: f64,
    path_budget: u64,
) -> Result<ThirdOrderFit> {
    if n_list.len() < 3 {
        return domain("a third-order fit needs at least three blocklengths");
    }
    if n_list.windows(2).any(|w| w[0] >= w[1]) || n_list[0] == 0 {
        return domain("blocklengths must be positive and strictly increasing");
    }
    for &n in n_list {
        path_count(mspec.alphabet_size(), n, path_budget)?;
    }
    let h = entropy_rate(mspec, theta)?;
    let sigma = varentropy_rate(mspec, theta)?.sqrt();
    let qinv = gaussian_qinv(epsilon)?;
    let mut points = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let index = markov_type_index(mspec, &params.at(n)?, path_budget)?;
        let report = markov_eps_rate(mspec, theta, &index, epsilon)?;
        let nf = n as f64;
        let y = report.ceil_log2_m as f64 - nf * h - sigma * nf.sqrt() * qinv;
        points.push(FitPoint { n, report, y });
    }
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

/// Mean and variance of `−log₂ p_θ(Xⁿ | x₀)` by exhaustive enumeration.
pub fn exhaustive_information_moments(
    mspec: &MarkovFamilySpec,
    theta: &ParamVector,
    n: u32,
    path_budget: u64,
) -> Result<(f64, f64)> {
    let psi = mspec.psi(theta)?;
    let groups = paths_by_pair_counts(mspec, n, path_budget)?;
    let nf = n as f64;
    let terms: Vec<(f64, f64)> = groups
        .iter()
        .map(|(sig, paths)| {
            let lp = dot(theta.as_slice(), &mspec.pair_stat_sum(sig)) - nf * psi;
            (paths.len() as f64 * lp.exp2(), -lp)
        })
        .collect();
    let mean: CompensatedSum = terms.iter().map(|(p, i)| p * i).collect();
    let mean = mean.value();
    let var: CompensatedSum = terms.iter().map(|(p, i)| p * (i - mean) * (i - mean)).collect();
    Ok((mean, var.value()))
}

/// Binary chain with statistic `1{a ≠ b}`.
pub fn flip_family(rho_max: f64, x0: usize) -> Result<MarkovFamilySpec> {
    MarkovFamilySpec::new(vec![vec![0.0], vec![1.0], vec![1.0], vec![0.0]], rho_max, x0)
}

/// Ternary chain with statistic `(1{b − a ≡ 1}, 1{b − a ≡ 2})` mod 3.
pub fn cyclic_ternary_family(rho_max: f64, x0: usize) -> Result<MarkovFamilySpec> {
    let mut tau2 = Vec::with_capacity(9);
    for a in 0..3usize {
        for b in 0..3usize {
            let step = (b + 3 - a) % 3;
            tau2.push(vec![f64::from(step == 1), f64::from(step == 2)]);
        }
    }
    MarkovFamilySpec::new(tau2, rho_max, x0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn binary_entropy(p: f64) -> f64 {
        -(p * p.log2() + (1.0 - p) * (1.0 - p).log2())
    }

    #[test]
    fn flip_chain_kernel() {
        let m = flip_family(4.0, 0).unwrap();
        let th = m.param(vec![1.0]).unwrap();
        let p = transition_matrix(&m, &th).unwrap();
        assert_abs_diff_eq!(p[(0, 1)], 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p[(1, 0)], 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.psi(&th).unwrap(), 3f64.log2(), epsilon = 1e-15);
        let pi = stationary_dist(&p).unwrap();
        assert_abs_diff_eq!(pi[0], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(entropy_rate(&m, &th).unwrap(), binary_entropy(2.0 / 3.0), epsilon = 1e-13);
        let q: f64 = 2.0 / 3.0;
        let iid_var = q * (1.0 - q) * ((q / (1.0 - q)).log2()).powi(2);
        assert_abs_diff_eq!(varentropy_rate(&m, &th).unwrap(), iid_var, epsilon = 1e-12);
    }

    #[test]
    fn uniform_rows() {
        let m = cyclic_ternary_family(2.0, 1).unwrap();
        let th = m.param(vec![0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(entropy_rate(&m, &th).unwrap(), 3f64.log2(), epsilon = 1e-14);
        assert_abs_diff_eq!(varentropy_rate(&m, &th).unwrap(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn unnormalized_rows_rejected() {
        // τ(a,b) = 1{b = 1}: row sums agree, but τ(a,b) = 1{a = 1 ∧ b = 1} does not
        let bad = MarkovFamilySpec::new(vec![vec![0.0], vec![0.0], vec![0.0], vec![1.0]], 1.0, 0);
        assert!(matches!(bad, Err(Error::Spec(msg)) if msg.contains("row 1")));
        let full = MarkovFamilySpec::new(
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 0.0]],
            1.0,
            0,
        );
        assert!(full.is_err());
    }

    #[test]
    fn stationary_of_random_kernel() {
        let p = DMatrix::from_row_slice(3, 3, &[0.2, 0.5, 0.3, 0.1, 0.1, 0.8, 0.6, 0.3, 0.1]);
        let pi = stationary_dist(&p).unwrap();
        let v = DVector::from_row_slice(&pi);
        assert!((v.transpose() * &p - v.transpose()).amax() <= 1e-12);
        let reducible = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.5, 0.5]);
        assert!(stationary_dist(&reducible).is_err());
    }

    #[test]
    fn flip_classes_are_binomial() {
        let m = flip_family(4.0, 0).unwrap();
        let grid = Grid::new(12, 0.5, vec![0.0]).unwrap();
        let idx = markov_type_index(&m, &grid, 1 << 20).unwrap();
        let sizes: Vec<BigUint> = idx.classes().iter().map(|c| c.size.clone()).collect();
        let want: Vec<BigUint> = (0..=12).map(|k| crate::bigmath::binomial(12, k)).collect();
        assert_eq!(sizes, want);
        assert_eq!(idx.total_size(), BigUint::from(4096u32));
    }

    #[test]
    fn budget_error_suggests_monte_carlo() {
        let m = flip_family(4.0, 0).unwrap();
        let grid = Grid::new(30, 1.0, vec![0.0]).unwrap();
        let err = markov_type_index(&m, &grid, 1000).unwrap_err();
        assert!(err.to_string().contains("Monte Carlo"));
    }

    #[test]
    fn path_factorization() {
        let m = cyclic_ternary_family(3.0, 2).unwrap();
        let th = m.param(vec![0.7, -1.1]).unwrap();
        let p = transition_matrix(&m, &th).unwrap();
        let path = [0, 2, 2, 1, 0, 0, 1, 2, 1];
        let mut direct = 0.0;
        let mut prev = 2;
        for &x in &path {
            direct += p[(prev, x)].log2();
            prev = x;
        }
        assert_abs_diff_eq!(m.path_log_prob(&th, &path).unwrap(), direct, epsilon = 1e-12);
    }

    #[test]
    fn codec_round_trip() {
        let m = flip_family(4.0, 1).unwrap();
        let codec = MarkovCodec::new(m, &Grid::new(10, 1.0, vec![0.0]).unwrap(), 1 << 20).unwrap();
        let mut seen = vec![false; 1024];
        for i in 0..1024u64 {
            let path = path_of_index(2, 10, i);
            let k = codec.rank(&path).unwrap().to_usize().unwrap();
            assert!(!seen[k]);
            seen[k] = true;
            assert_eq!(codec.decode(&codec.encode(&path).unwrap()).unwrap(), path);
        }
    }

    #[test]
    fn monte_carlo_near_truth() {
        let m = flip_family(4.0, 0).unwrap();
        let grid = Grid::new(10, 1.0, vec![0.0]).unwrap();
        let exact = markov_type_index(&m, &grid, 1 << 20).unwrap();
        let est = markov_size_estimates(&m, &grid, 20_000, 7).unwrap();
        assert_eq!(est, markov_size_estimates(&m, &grid, 20_000, 7).unwrap());
        for e in &est {
            let ci = exact.find_class(&e.key).unwrap();
            let truth = exact.classes()[ci].size.to_f64().unwrap();
            if e.hits > 0 && e.std_error > 0.0 {
                assert!((e.estimate - truth).abs() <= 5.0 * e.std_error + 1.0);
            }
        }
    }
}
