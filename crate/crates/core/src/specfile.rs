//! Spec files: TOML documents describing an i.i.d. family (optionally with an
//! exact rational decomposition) or a Markov family.
//!
//! ```toml
//! alphabet_size = 3
//! d = 1
//! rho_max = 8.0
//! tau = [[0.0], [1.0], [1.4142135623730951]]
//! theta_star = [1.0]          # optional true parameter for rate experiments
//!
//! [exact]                     # optional, enables point classes
//! basis = [[{ name = "sqrt2", value = 1.4142135623730951 }]]
//! coeffs = [[["0", "0"]], [["1", "0"]], [["0", "1"]]]
//! ```
//!
//! A Markov file replaces `tau` by `tau2` (`|X|²` rows, row `a·|X| + b` for
//! the pair `(a, b)`) and adds `x0`. Symbols in files are 1-based.

use std::path::Path;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::expofam::{FamilySpec, ParamVector};
use crate::markov::MarkovFamilySpec;
use crate::point::{BasisConstant, ExactStatMap};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    alphabet_size: usize,
    d: usize,
    rho_max: f64,
    tau: Option<Vec<Vec<f64>>>,
    tau2: Option<Vec<Vec<f64>>>,
    x0: Option<usize>,
    theta_star: Option<Vec<f64>>,
    exact: Option<RawExact>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExact {
    basis: Vec<Vec<RawConstant>>,
    coeffs: Vec<Vec<Vec<String>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConstant {
    name: String,
    value: f64,
}

/// The family described by a spec file.
#[derive(Debug, Clone)]
pub enum SpecModel {
    Iid {
        family: FamilySpec,
        exact: Option<ExactStatMap>,
    },
    Markov(MarkovFamilySpec),
}

#[derive(Debug, Clone)]
pub struct SpecDocument {
    pub model: SpecModel,
    pub theta_star: Option<Vec<f64>>,
    canonical: Vec<u8>,
}

impl SpecDocument {
    pub fn alphabet_size(&self) -> usize {
        match &self.model {
            SpecModel::Iid { family, .. } => family.alphabet_size(),
            SpecModel::Markov(m) => m.alphabet_size(),
        }
    }

    pub fn d(&self) -> usize {
        match &self.model {
            SpecModel::Iid { family, .. } => family.d(),
            SpecModel::Markov(m) => m.d(),
        }
    }

    pub fn family(&self) -> Option<&FamilySpec> {
        match &self.model {
            SpecModel::Iid { family, .. } => Some(family),
            SpecModel::Markov(_) => None,
        }
    }

    pub fn exact(&self) -> Option<&ExactStatMap> {
        match &self.model {
            SpecModel::Iid { exact, .. } => exact.as_ref(),
            SpecModel::Markov(_) => None,
        }
    }

    pub fn markov(&self) -> Option<&MarkovFamilySpec> {
        match &self.model {
            SpecModel::Markov(m) => Some(m),
            SpecModel::Iid { .. } => None,
        }
    }

    /// True parameter for the i.i.d. family, checked against `℘`.
    pub fn theta_param(&self) -> Result<Option<ParamVector>> {
        match (&self.model, &self.theta_star) {
            (_, None) => Ok(None),
            (SpecModel::Iid { family, .. }, Some(t)) => ParamVector::new(family, t.clone()).map(Some),
            (SpecModel::Markov(m), Some(t)) => m.param(t.clone()).map(Some),
        }
    }

    /// Byte string identifying the family definition (the true parameter is
    /// excluded: it does not affect the code).
    pub fn canonical_bytes(&self) -> &[u8] {
        &self.canonical
    }

    pub fn hash(&self) -> [u8; 32] {
        Sha256::digest(&self.canonical).into()
    }
}

pub fn load_spec(path: &Path) -> Result<SpecDocument> {
    let text = std::fs::read_to_string(path)?;
    parse_spec(&text)
}

/// Parses and validates a spec. Structural problems are reported together as
/// one schema error; violated family invariants as spec errors.
pub fn parse_spec(text: &str) -> Result<SpecDocument> {
    let raw: RawSpec = toml::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
    let mut problems = Vec::new();
    let k = raw.alphabet_size;
    let d = raw.d;
    if k < 2 {
        problems.push(format!("alphabet_size must be at least 2, got {k}"));
    }
    if d == 0 {
        problems.push("d must be at least 1".to_string());
    }
    if !raw.rho_max.is_finite() {
        problems.push("rho_max must be finite".to_string());
    }
    let check_table = |name: &str, rows: &[Vec<f64>], want_rows: usize, problems: &mut Vec<String>| {
        if rows.len() != want_rows {
            problems.push(format!("`{name}` has {} rows, expected {want_rows}", rows.len()));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                problems.push(format!("`{name}` row {} has {} entries, expected d = {d}", i + 1, row.len()));
            }
            if row.iter().any(|v| !v.is_finite()) {
                problems.push(format!("`{name}` row {} contains NaN or infinity", i + 1));
            }
        }
    };
    match (&raw.tau, &raw.tau2) {
        (Some(t), None) => {
            check_table("tau", t, k, &mut problems);
            if raw.x0.is_some() {
                problems.push("`x0` only applies to Markov specs (with `tau2`)".to_string());
            }
        }
        (None, Some(t2)) => {
            check_table("tau2", t2, k * k, &mut problems);
            match raw.x0 {
                None => problems.push("Markov spec needs `x0`".to_string()),
                Some(x) if x == 0 || x > k => problems.push(format!("`x0` = {x} is not a symbol in 1..={k}")),
                Some(_) => {}
            }
            if raw.exact.is_some() {
                problems.push("`exact` decompositions apply to i.i.d. specs only".to_string());
            }
        }
        (Some(_), Some(_)) => problems.push("give either `tau` or `tau2`, not both".to_string()),
        (None, None) => problems.push("missing `tau` (i.i.d.) or `tau2` (Markov)".to_string()),
    }
    if let Some(t) = &raw.theta_star {
        if t.len() != d {
            problems.push(format!("`theta_star` has {} entries, expected d = {d}", t.len()));
        }
        if t.iter().any(|v| !v.is_finite()) {
            problems.push("`theta_star` contains NaN or infinity".to_string());
        }
    }
    let exact_parts = raw.exact.as_ref().map(|e| parse_exact(e, k, d, &mut problems));
    if !problems.is_empty() {
        return Err(Error::Schema(problems.join("; ")));
    }

    let mut canonical = b"typesize-spec-v1".to_vec();
    let push_f64 = |buf: &mut Vec<u8>, v: f64| buf.extend_from_slice(&v.to_be_bytes());
    let push_u32 = |buf: &mut Vec<u8>, v: usize| buf.extend_from_slice(&(v as u32).to_be_bytes());
    push_u32(&mut canonical, k);
    push_u32(&mut canonical, d);
    push_f64(&mut canonical, raw.rho_max);

    let model = if let Some(tau) = raw.tau {
        canonical.push(0);
        for v in tau.iter().flatten() {
            push_f64(&mut canonical, *v);
        }
        let exact = match exact_parts.flatten() {
            Some((basis, coeffs)) => {
                canonical.push(1);
                for consts in &basis {
                    push_u32(&mut canonical, consts.len());
                    for c in consts {
                        push_u32(&mut canonical, c.name.len());
                        canonical.extend_from_slice(c.name.as_bytes());
                        push_f64(&mut canonical, c.value);
                    }
                }
                for q in coeffs.iter().flatten().flatten() {
                    let s = q.to_string();
                    push_u32(&mut canonical, s.len());
                    canonical.extend_from_slice(s.as_bytes());
                }
                Some(ExactStatMap::new(basis, coeffs)?)
            }
            None => {
                canonical.push(0);
                None
            }
        };
        SpecModel::Iid {
            family: FamilySpec::new(tau, raw.rho_max)?,
            exact,
        }
    } else {
        let tau2 = raw.tau2.expect("checked above");
        let x0 = raw.x0.expect("checked above") - 1;
        canonical.push(2);
        for v in tau2.iter().flatten() {
            push_f64(&mut canonical, *v);
        }
        push_u32(&mut canonical, x0);
        SpecModel::Markov(MarkovFamilySpec::new(tau2, raw.rho_max, x0)?)
    };
    Ok(SpecDocument {
        model,
        theta_star: raw.theta_star,
        canonical,
    })
}

type ExactParts = (Vec<Vec<BasisConstant>>, Vec<Vec<Vec<BigRational>>>);

fn parse_exact(raw: &RawExact, k: usize, d: usize, problems: &mut Vec<String>) -> Option<ExactParts> {
    let before = problems.len();
    if raw.basis.len() != d {
        problems.push(format!("`exact.basis` has {} coordinates, expected d = {d}", raw.basis.len()));
    }
    for c in raw.basis.iter().flatten() {
        if !c.value.is_finite() {
            problems.push(format!("basis constant `{}` is not finite", c.name));
        }
    }
    if raw.coeffs.len() != k {
        problems.push(format!("`exact.coeffs` has {} rows, expected {k}", raw.coeffs.len()));
    }
    let mut coeffs = Vec::with_capacity(k);
    for (x, row) in raw.coeffs.iter().enumerate() {
        if row.len() != d {
            problems.push(format!("`exact.coeffs` row {} has {} coordinates, expected {d}", x + 1, row.len()));
            continue;
        }
        let mut parsed_row = Vec::with_capacity(d);
        for (j, cell) in row.iter().enumerate() {
            let want = 1 + raw.basis.get(j).map_or(0, |b| b.len());
            if cell.len() != want {
                problems.push(format!(
                    "`exact.coeffs` row {}, coordinate {}: {} coefficients, expected {want}",
                    x + 1,
                    j + 1,
                    cell.len()
                ));
            }
            let mut parsed = Vec::with_capacity(cell.len());
            for s in cell {
                match parse_rational(s) {
                    Some(q) => parsed.push(q),
                    None => problems.push(format!("`{s}` is not a rational (expected p/q or a decimal)")),
                }
            }
            parsed_row.push(parsed);
        }
        coeffs.push(parsed_row);
    }
    if problems.len() > before {
        return None;
    }
    let basis = raw
        .basis
        .iter()
        .map(|cs| cs.iter().map(|c| BasisConstant::new(c.name.clone(), c.value)).collect())
        .collect();
    Some((basis, coeffs))
}

/// `p/q`, an integer, or a finite decimal such as `-0.125`, exactly.
pub fn parse_rational(s: &str) -> Option<BigRational> {
    let s = s.trim();
    if s.contains('/') {
        let q = BigRational::from_str(s).ok()?;
        return Some(q);
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int}{frac}");
    let num = BigInt::from_str(if digits.is_empty() { "0" } else { &digits }).ok()?;
    let den = num_traits::pow(BigInt::from(10), frac.len());
    let q = BigRational::new(if neg { -num } else { num }, den);
    Some(if q.is_zero() { BigRational::zero() } else { q })
}

/// Reads a whitespace-separated, 1-based symbol file into 0-based symbols.
pub fn parse_symbols(text: &str, alphabet_size: usize) -> Result<Vec<usize>> {
    text.split_whitespace()
        .enumerate()
        .map(|(i, tok)| {
            let v: usize = tok
                .parse()
                .map_err(|_| Error::Schema(format!("token {} (`{tok}`) is not a symbol number", i + 1)))?;
            if v == 0 || v > alphabet_size {
                return Err(Error::Domain(format!(
                    "symbol {v} at position {} is outside 1..={alphabet_size}",
                    i + 1
                )));
            }
            Ok(v - 1)
        })
        .collect()
}

/// Inverse of [`parse_symbols`]: one line, space separated, trailing newline.
pub fn format_symbols(seq: &[usize]) -> String {
    let mut out = seq
        .iter()
        .map(|s| (s + 1).to_string())
        .collect::<Vec<_>>()
        .join(" ");
    out.push('\n');
    out
}
