//! Finite-alphabet exponential families `p_θ(x) = 2^{⟨θ,τ(x)⟩ − ψ(θ)}`.
//!
//! Every exposed quantity is in bits. Symbols are zero-based indices into the
//! alphabet; file formats and the CLI use one-based tokens and translate at
//! the boundary.

mod hull;
mod mle;

pub use hull::hull_residual;
pub use mle::{constrained_argmax, mle, MLE_GRAD_TOL, MLE_MAX_ITERS};

use std::f64::consts::LN_2;

use nalgebra::{DMatrix, DVector};

use crate::error::{domain, spec, Result};

/// Tolerance used by the minimality (rank) check on the statistic table.
const RANK_TOL: f64 = 1e-9;

/// Finite alphabet `{0, …, size−1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Alphabet {
    size: usize,
}

impl Alphabet {
    pub fn new(size: usize) -> Result<Self> {
        if size < 2 {
            return spec(format!("alphabet size must be at least 2, got {size}"));
        }
        Ok(Alphabet { size })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn check(&self, seq: &[usize]) -> Result<()> {
        match seq.iter().position(|&s| s >= self.size) {
            Some(i) => domain(format!(
                "symbol {} at position {i} is outside an alphabet of size {}",
                seq[i], self.size
            )),
            None => Ok(()),
        }
    }
}

/// An i.i.d. exponential family: statistic table plus the parameter-norm bound ℘.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilySpec {
    alphabet: Alphabet,
    d: usize,
    tau: Vec<Vec<f64>>,
    rho_max: f64,
}

impl FamilySpec {
    /// Validates the table: equal row lengths, finite entries, a minimal
    /// parameterization (rank `d` of the differences `τ(x) − τ(0)`), and a
    /// positive finite ℘.
    pub fn new(tau: Vec<Vec<f64>>, rho_max: f64) -> Result<Self> {
        let alphabet = Alphabet::new(tau.len())?;
        let d = tau[0].len();
        if d == 0 {
            return spec("statistic dimension d must be positive");
        }
        for (x, row) in tau.iter().enumerate() {
            if row.len() != d {
                return spec(format!(
                    "tau row for symbol {} has length {}, expected d = {d}",
                    x + 1,
                    row.len()
                ));
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite()) {
                return spec(format!("tau row for symbol {} contains {v}", x + 1));
            }
        }
        if !(rho_max.is_finite() && rho_max > 0.0) {
            return spec(format!("rho_max must be positive and finite, got {rho_max}"));
        }
        let k = alphabet.size() - 1;
        let diffs = DMatrix::from_fn(d, k, |j, c| tau[c + 1][j] - tau[0][j]);
        let rank = diffs.clone().svd(false, false).rank(RANK_TOL * (1.0 + diffs.amax()));
        if rank != d {
            return spec(format!(
                "statistic table is not minimal: rank of tau differences is {rank}, d = {d}"
            ));
        }
        Ok(FamilySpec {
            alphabet,
            d,
            tau,
            rho_max,
        })
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet.size()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn tau(&self, x: usize) -> &[f64] {
        &self.tau[x]
    }

    pub fn tau_table(&self) -> &[Vec<f64>] {
        &self.tau
    }

    pub fn rho_max(&self) -> f64 {
        self.rho_max
    }

    /// `κ = ℘·√d / 2`.
    pub fn kappa(&self) -> f64 {
        self.rho_max * (self.d as f64).sqrt() / 2.0
    }

    /// Mean of τ under the uniform distribution, which is `∇ψ(0)`.
    pub fn uniform_mean(&self) -> Vec<f64> {
        let k = self.alphabet_size() as f64;
        (0..self.d)
            .map(|j| self.tau.iter().map(|row| row[j]).sum::<f64>() / k)
            .collect()
    }

    /// Statistic sum `Σ_x counts[x]·τ(x)` (not normalized by n).
    pub fn stat_sum(&self, counts: &[u32]) -> Vec<f64> {
        let mut acc = vec![0.0; self.d];
        for (x, &c) in counts.iter().enumerate() {
            if c > 0 {
                for (a, t) in acc.iter_mut().zip(&self.tau[x]) {
                    *a += c as f64 * t;
                }
            }
        }
        acc
    }

    fn exponents(&self, theta: &[f64]) -> Vec<f64> {
        self.tau.iter().map(|row| dot(theta, row)).collect()
    }
}

/// A parameter vector checked against its family's dimension and ℘-ball.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(spec: &FamilySpec, theta: Vec<f64>) -> Result<Self> {
        check_theta(spec.d(), spec.rho_max(), &theta)?;
        Ok(ParamVector(theta))
    }

    pub fn zero(spec: &FamilySpec) -> Self {
        ParamVector(vec![0.0; spec.d()])
    }

    pub(crate) fn from_raw(theta: Vec<f64>) -> Self {
        ParamVector(theta)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

pub(crate) fn check_theta(d: usize, rho_max: f64, theta: &[f64]) -> Result<()> {
    if theta.len() != d {
        return spec(format!("theta has length {}, expected d = {d}", theta.len()));
    }
    if theta.iter().any(|v| !v.is_finite()) {
        return domain("theta has a non-finite component");
    }
    let nrm = norm(theta);
    if nrm > rho_max * (1.0 + 1e-12) {
        return domain(format!("|theta| = {nrm} exceeds rho_max = {rho_max}"));
    }
    Ok(())
}

/// Everything about `p_θ` needed downstream, computed once.
#[derive(Debug, Clone)]
pub struct ModelEval {
    pub theta: ParamVector,
    /// Log-normalizer in bits.
    pub psi: f64,
    pub pmf: Vec<f64>,
    /// `∇ψ(θ) = E_θ τ(X)`.
    pub grad_psi: Vec<f64>,
    /// `∇²ψ(θ) = ln 2 · Cov_θ τ(X)` (ψ is a base-2 logarithm).
    pub hess_psi: DMatrix<f64>,
}

impl ModelEval {
    pub fn new(spec: &FamilySpec, theta: &ParamVector) -> Result<Self> {
        check_theta(spec.d(), spec.rho_max(), theta.as_slice())?;
        Ok(evaluate(spec, theta.as_slice()))
    }

    /// Covariance of τ(X) under the model.
    pub fn covariance(&self) -> DMatrix<f64> {
        &self.hess_psi / LN_2
    }
}

/// Unchecked evaluation; θ may leave the ℘-ball (used inside the solver).
pub(crate) fn evaluate(spec: &FamilySpec, theta: &[f64]) -> ModelEval {
    let (psi, pmf) = psi_pmf(spec, theta);
    let d = spec.d();
    let mut mean = vec![0.0; d];
    for (p, row) in pmf.iter().zip(spec.tau_table()) {
        for (m, t) in mean.iter_mut().zip(row) {
            *m += p * t;
        }
    }
    let mut cov = DMatrix::zeros(d, d);
    for (p, row) in pmf.iter().zip(spec.tau_table()) {
        for i in 0..d {
            let di = row[i] - mean[i];
            for j in 0..=i {
                cov[(i, j)] += p * di * (row[j] - mean[j]);
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            cov[(j, i)] = cov[(i, j)];
        }
    }
    ModelEval {
        theta: ParamVector(theta.to_vec()),
        psi,
        pmf,
        grad_psi: mean,
        hess_psi: cov * LN_2,
    }
}

/// ψ and the pmf, with the largest exponent shifted out before exponentiation.
pub(crate) fn psi_pmf(spec: &FamilySpec, theta: &[f64]) -> (f64, Vec<f64>) {
    let e = spec.exponents(theta);
    let max = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = e.iter().map(|v| (v - max).exp2()).collect();
    let z: f64 = w.iter().sum();
    let psi = max + z.log2();
    (psi, w.into_iter().map(|v| v / z).collect())
}

/// `ψ(θ) = log₂ Σ_x 2^{⟨θ,τ(x)⟩}`.
pub fn psi(spec: &FamilySpec, theta: &ParamVector) -> Result<f64> {
    check_theta(spec.d(), spec.rho_max(), theta.as_slice())?;
    Ok(psi_pmf(spec, theta.as_slice()).0)
}

/// `log₂ p_θ(xⁿ) = n(⟨θ, τ(xⁿ)⟩ − ψ(θ))`.
pub fn seq_log_prob(spec: &FamilySpec, theta: &ParamVector, seq: &[usize]) -> Result<f64> {
    let tau = suffstat(spec, seq)?;
    let psi = psi(spec, theta)?;
    Ok(seq.len() as f64 * (dot(theta.as_slice(), &tau) - psi))
}

/// `log₂ p_θ` of any sequence with the given composition.
pub fn composition_log_prob(spec: &FamilySpec, theta: &[f64], counts: &[u32]) -> f64 {
    let psi = psi_pmf(spec, theta).0;
    let n: u32 = counts.iter().sum();
    dot(theta, &spec.stat_sum(counts)) - n as f64 * psi
}

/// `τ(xⁿ) = (1/n) Σ τ(x_i)`.
pub fn suffstat(spec: &FamilySpec, seq: &[usize]) -> Result<Vec<f64>> {
    if seq.is_empty() {
        return domain("sufficient statistic of an empty sequence");
    }
    spec.alphabet().check(seq)?;
    let mut counts = vec![0u32; spec.alphabet_size()];
    for &s in seq {
        counts[s] += 1;
    }
    let n = seq.len() as f64;
    Ok(spec.stat_sum(&counts).into_iter().map(|v| v / n).collect())
}

/// Entropy in bits via `−⟨θ,∇ψ(θ)⟩ + ψ(θ)`.
pub fn entropy(spec: &FamilySpec, theta: &ParamVector) -> Result<f64> {
    let m = ModelEval::new(spec, theta)?;
    Ok(closed_form_entropy(&m))
}

fn closed_form_entropy(m: &ModelEval) -> f64 {
    m.psi - dot(m.theta.as_slice(), &m.grad_psi)
}

/// Entropy by direct summation `−Σ p log₂ p`.
pub fn entropy_direct(pmf: &[f64]) -> f64 {
    pmf.iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum()
}

/// `Var_θ[−log₂ p_θ(X)]` by direct summation over the alphabet.
pub fn varentropy(spec: &FamilySpec, theta: &ParamVector) -> Result<f64> {
    let m = ModelEval::new(spec, theta)?;
    Ok(varentropy_direct(&m.pmf))
}

pub fn varentropy_direct(pmf: &[f64]) -> f64 {
    let h = entropy_direct(pmf);
    pmf.iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| {
            let dev = -p.log2() - h;
            p * dev * dev
        })
        .sum()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn to_dvec(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn bernoulli(rho: f64) -> FamilySpec {
        FamilySpec::new(vec![vec![0.0], vec![1.0]], rho).unwrap()
    }

    fn ternary() -> FamilySpec {
        FamilySpec::new(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]], 4.0).unwrap()
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(FamilySpec::new(vec![vec![0.0]], 1.0).is_err());
        assert!(FamilySpec::new(vec![vec![0.0], vec![1.0, 2.0]], 1.0).is_err());
        assert!(FamilySpec::new(vec![vec![0.0], vec![f64::NAN]], 1.0).is_err());
        assert!(FamilySpec::new(vec![vec![0.0], vec![1.0]], f64::INFINITY).is_err());
        assert!(FamilySpec::new(vec![vec![0.0], vec![1.0]], 0.0).is_err());
        // two coordinates that always agree: rank 1 < d = 2
        let dup = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 2.0]];
        assert!(matches!(FamilySpec::new(dup, 1.0), Err(crate::Error::Spec(_))));
    }

    #[test]
    fn psi_examples() {
        let b = bernoulli(4.0);
        assert_abs_diff_eq!(psi(&b, &ParamVector::zero(&b)).unwrap(), 1.0, epsilon = 1e-15);
        let one = ParamVector::new(&b, vec![1.0]).unwrap();
        assert_abs_diff_eq!(psi(&b, &one).unwrap(), 3f64.log2(), epsilon = 1e-15);
        let t = ternary();
        assert_abs_diff_eq!(psi(&t, &ParamVector::zero(&t)).unwrap(), 3f64.log2(), epsilon = 1e-15);
        let m = ModelEval::new(&b, &ParamVector::zero(&b)).unwrap();
        assert_eq!(m.pmf, vec![0.5, 0.5]);
    }

    #[test]
    fn psi_dimension_mismatch() {
        let b = bernoulli(4.0);
        assert!(ParamVector::new(&b, vec![0.0, 0.0]).is_err());
        assert!(ParamVector::new(&b, vec![5.0]).is_err());
    }

    #[test]
    fn seq_log_prob_examples() {
        let b = bernoulli(4.0);
        let zero = ParamVector::zero(&b);
        assert_abs_diff_eq!(seq_log_prob(&b, &zero, &[0, 1, 0, 1]).unwrap(), -4.0, epsilon = 1e-14);
        let one = ParamVector::new(&b, vec![1.0]).unwrap();
        assert_abs_diff_eq!(
            seq_log_prob(&b, &one, &[1, 1]).unwrap(),
            2.0 * (1.0 - 3f64.log2()),
            epsilon = 1e-14
        );
        assert!(seq_log_prob(&b, &one, &[]).is_err());
        assert!(seq_log_prob(&b, &one, &[0, 2]).is_err());
    }

    #[test]
    fn suffstat_examples() {
        let b = bernoulli(4.0);
        assert_eq!(suffstat(&b, &[0, 0, 0]).unwrap(), vec![0.0]);
        assert_eq!(suffstat(&b, &[0, 1, 0, 1]).unwrap(), vec![0.5]);
        let t = ternary();
        let s = suffstat(&t, &[0, 1, 2]).unwrap();
        assert_abs_diff_eq!(s[0], 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s[1], 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn entropy_examples() {
        let b = bernoulli(4.0);
        assert_abs_diff_eq!(entropy(&b, &ParamVector::zero(&b)).unwrap(), 1.0, epsilon = 1e-15);
        let t = ternary();
        assert_abs_diff_eq!(
            entropy(&t, &ParamVector::zero(&t)).unwrap(),
            3f64.log2(),
            epsilon = 1e-15
        );
        let one = ParamVector::new(&b, vec![1.0]).unwrap();
        let h23 = -(2.0 / 3.0) * (2.0f64 / 3.0).log2() - (1.0 / 3.0) * (1.0f64 / 3.0).log2();
        assert_abs_diff_eq!(entropy(&b, &one).unwrap(), h23, epsilon = 1e-14);
    }

    #[test]
    fn varentropy_examples() {
        let b = bernoulli(4.0);
        assert_abs_diff_eq!(varentropy(&b, &ParamVector::zero(&b)).unwrap(), 0.0, epsilon = 1e-15);
        let one = ParamVector::new(&b, vec![1.0]).unwrap();
        // two-point variance of {log 3, log 3 − 1} under (1/3, 2/3)
        let a = 3f64.log2();
        let c = 3f64.log2() - 1.0;
        let mean = a / 3.0 + 2.0 * c / 3.0;
        let want = (a - mean).powi(2) / 3.0 + 2.0 * (c - mean).powi(2) / 3.0;
        assert_abs_diff_eq!(varentropy(&b, &one).unwrap(), want, epsilon = 1e-14);
        assert_abs_diff_eq!(want, 2.0 / 9.0, epsilon = 1e-14);
    }
}
