//! Point type classes: sequences whose sufficient statistics are exactly equal.
//!
//! Each coordinate of `τ(x)` is written as a rational combination of declared
//! incommensurable constants (the constant 1 is always present). Clearing
//! denominators gives an integer vector per symbol; an exact rank computation
//! over the rationals keeps a maximal independent set of rows, whose number is
//! the lattice dimension `d′`. Two sequences have equal statistics iff their
//! integer sums agree.

use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::compositions::Composition;
use crate::error::{domain, spec, Error, Result};
use crate::expofam::{dot, mle, psi_pmf, FamilySpec};
use crate::quantized::{IndexMode, TypeIndex};

/// Largest denominator treated as "a rational relation" between declared constants.
const RELATION_MAX_DEN: i64 = 1000;
const RELATION_TOL: f64 = 1e-12;
/// Agreement required between the rational decomposition and the family table.
const TABLE_TOL: f64 = 1e-9;

/// A named real constant. `value` is a decimal approximation used for
/// plausibility checks and display.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisConstant {
    pub name: String,
    pub value: f64,
}

impl BasisConstant {
    pub fn new(name: impl Into<String>, value: f64) -> Self {
        BasisConstant {
            name: name.into(),
            value,
        }
    }
}

/// `τ(x)[j] = c[x][j][0] + Σ_{t≥1} c[x][j][t]·β[j][t]` with rational `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactStatMap {
    /// Per coordinate, the constants besides 1.
    basis: Vec<Vec<BasisConstant>>,
    /// `coeffs[x][j]` has length `1 + basis[j].len()`.
    coeffs: Vec<Vec<Vec<BigRational>>>,
}

impl ExactStatMap {
    pub fn new(basis: Vec<Vec<BasisConstant>>, coeffs: Vec<Vec<Vec<BigRational>>>) -> Result<Self> {
        if coeffs.len() < 2 {
            return spec("exact map needs at least two symbols");
        }
        let d = basis.len();
        if d == 0 {
            return spec("exact map needs at least one coordinate");
        }
        for (x, row) in coeffs.iter().enumerate() {
            if row.len() != d {
                return spec(format!("symbol {x} has {} coordinates, expected {d}", row.len()));
            }
            for (j, c) in row.iter().enumerate() {
                if c.len() != 1 + basis[j].len() {
                    return spec(format!(
                        "symbol {x}, coordinate {j}: {} coefficients for {} basis constants",
                        c.len(),
                        1 + basis[j].len()
                    ));
                }
            }
        }
        for (j, consts) in basis.iter().enumerate() {
            check_basis(j, consts)?;
        }
        Ok(ExactStatMap { basis, coeffs })
    }

    /// All-rational statistics: every basis is `{1}`.
    pub fn rational(table: Vec<Vec<BigRational>>) -> Result<Self> {
        let d = table.first().map_or(0, |r| r.len());
        let coeffs = table
            .into_iter()
            .map(|row| row.into_iter().map(|v| vec![v]).collect())
            .collect();
        ExactStatMap::new(vec![Vec::new(); d], coeffs)
    }

    pub fn alphabet_size(&self) -> usize {
        self.coeffs.len()
    }

    pub fn d(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Vec<BasisConstant>] {
        &self.basis
    }

    pub fn coeffs(&self) -> &[Vec<Vec<BigRational>>] {
        &self.coeffs
    }

    /// Decimal value of `τ(x)` from the declared constants.
    pub fn approx_tau(&self, x: usize) -> Vec<f64> {
        self.coeffs[x]
            .iter()
            .zip(&self.basis)
            .map(|(c, consts)| {
                let mut v = c[0].to_f64().unwrap_or(f64::NAN);
                for (ct, b) in c[1..].iter().zip(consts) {
                    v += ct.to_f64().unwrap_or(f64::NAN) * b.value;
                }
                v
            })
            .collect()
    }
}

fn check_basis(j: usize, consts: &[BasisConstant]) -> Result<()> {
    for (t, b) in consts.iter().enumerate() {
        if !b.value.is_finite() || b.value == 0.0 {
            return spec(format!("basis constant `{}` must be finite and nonzero", b.name));
        }
        if let Some((p, q)) = small_rational(b.value) {
            return spec(format!(
                "basis constant `{}` of coordinate {j} is declared dependent on 1 (≈ {p}/{q})",
                b.name
            ));
        }
        for other in &consts[..t] {
            if other.name == b.name {
                return spec(format!("basis constant `{}` repeated in coordinate {j}", b.name));
            }
            if let Some((p, q)) = small_rational(b.value / other.value) {
                return spec(format!(
                    "basis constants `{}` and `{}` of coordinate {j} are declared dependent (ratio ≈ {p}/{q})",
                    b.name, other.name
                ));
            }
        }
    }
    Ok(())
}

/// A rational `p/q` with `q ≤ RELATION_MAX_DEN` matching `r` to relative
/// precision, found among the continued-fraction convergents.
fn small_rational(r: f64) -> Option<(i64, i64)> {
    let (mut h0, mut h1) = (0i64, 1i64);
    let (mut k0, mut k1) = (1i64, 0i64);
    let mut x = r;
    for _ in 0..40 {
        let a = x.floor();
        if a.abs() > 1e9 {
            return None;
        }
        let a = a as i64;
        let h = a.checked_mul(h1)?.checked_add(h0)?;
        let k = a.checked_mul(k1)?.checked_add(k0)?;
        if k > RELATION_MAX_DEN {
            return None;
        }
        if (h as f64 / k as f64 - r).abs() <= RELATION_TOL * r.abs().max(1.0) {
            return Some((h, k));
        }
        (h0, h1, k0, k1) = (h1, h, k1, k);
        let frac = x - a as f64;
        if frac == 0.0 {
            return None;
        }
        x = 1.0 / frac;
    }
    None
}

/// Integer lattice coordinates of each symbol after row selection.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeMap {
    d_prime: usize,
    l: Vec<Vec<i64>>,
    row_selection: Vec<usize>,
    /// `τ(ℓ) = origin + W·ℓ`.
    origin: Vec<f64>,
    w: DMatrix<f64>,
    diagnostics: Vec<String>,
}

impl LatticeMap {
    pub fn d_prime(&self) -> usize {
        self.d_prime
    }

    pub fn l(&self, x: usize) -> &[i64] {
        &self.l[x]
    }

    pub fn table(&self) -> &[Vec<i64>] {
        &self.l
    }

    /// Indices into the flattened `(coordinate, constant)` rows of the
    /// denominator-cleared table that were kept.
    pub fn row_selection(&self) -> &[usize] {
        &self.row_selection
    }

    /// Non-fatal findings, e.g. `d′ < d`.
    pub fn diagnostics(&self) -> &[String] {
        &self.diagnostics
    }

    pub fn alphabet_size(&self) -> usize {
        self.l.len()
    }

    /// `Σ_x counts[x]·L(x)`, exactly.
    pub fn scaled_sum(&self, counts: &[u32]) -> Result<Vec<i64>> {
        if counts.len() != self.l.len() {
            return domain(format!(
                "count vector has {} entries for an alphabet of {}",
                counts.len(),
                self.l.len()
            ));
        }
        let mut acc = vec![0i64; self.d_prime];
        for (lx, &c) in self.l.iter().zip(counts) {
            for (a, &v) in acc.iter_mut().zip(lx) {
                *a = v
                    .checked_mul(c as i64)
                    .and_then(|p| a.checked_add(p))
                    .ok_or_else(|| Error::Domain("lattice coordinate overflows 64 bits".into()))?;
            }
        }
        Ok(acc)
    }

    /// The statistic at lattice coordinate `ℓ`.
    pub fn tau_of(&self, ell: &[f64]) -> Vec<f64> {
        let t = &self.w * DVector::from_column_slice(ell);
        self.origin.iter().zip(t.iter()).map(|(o, v)| o + v).collect()
    }
}

/// Builds the reduced integer map by exact elimination, and the affine map
/// back to statistic space by solving against the family table.
pub fn derive_lattice(map: &ExactStatMap, family: &FamilySpec) -> Result<LatticeMap> {
    let k = map.alphabet_size();
    if k != family.alphabet_size() || map.d() != family.d() {
        return spec(format!(
            "exact map is {k} symbols × {} coordinates, family is {} × {}",
            map.d(),
            family.alphabet_size(),
            family.d()
        ));
    }

    // Rows of L̃: one per (coordinate, constant), columns = symbols.
    let mut rows: Vec<Vec<BigInt>> = Vec::new();
    for j in 0..map.d() {
        for t in 0..=map.basis[j].len() {
            let diffs: Vec<BigRational> = (0..k)
                .map(|x| &map.coeffs[x][j][t] - &map.coeffs[0][j][t])
                .collect();
            let lcm = diffs
                .iter()
                .fold(BigInt::one(), |acc, v| acc.lcm(v.denom()));
            rows.push(
                diffs
                    .iter()
                    .map(|v| (v * BigRational::from_integer(lcm.clone())).to_integer())
                    .collect(),
            );
        }
    }

    let row_selection = independent_rows(&rows);
    let d_prime = row_selection.len();
    if d_prime == 0 {
        return spec("exact map assigns every symbol the same statistic");
    }
    let mut l = vec![Vec::with_capacity(d_prime); k];
    for &r in &row_selection {
        for (x, lx) in l.iter_mut().enumerate() {
            let v = rows[r][x]
                .to_i64()
                .ok_or_else(|| Error::Spec("lattice entry exceeds 64 bits".into()))?;
            lx.push(v);
        }
    }

    let mut diagnostics = Vec::new();
    if d_prime < family.d() {
        diagnostics.push(format!(
            "lattice dimension d' = {d_prime} is below the family dimension d = {}; \
             the declared basis is inconsistent with the family",
            family.d()
        ));
    }

    // Symbols whose L vectors span ℚ^{d′}.
    let cols: Vec<Vec<BigInt>> = l.iter().map(|lx| lx.iter().map(|&v| BigInt::from(v)).collect()).collect();
    let pivots = independent_rows(&cols);
    let lm = DMatrix::from_fn(d_prime, d_prime, |i, c| l[pivots[c]][i] as f64);
    let origin = family.tau(0).to_vec();
    let tm = DMatrix::from_fn(family.d(), d_prime, |i, c| family.tau(pivots[c])[i] - origin[i]);
    let inv = lm
        .try_inverse()
        .ok_or_else(|| Error::Spec("lattice basis symbols are numerically singular".into()))?;
    let w = tm * inv;

    let lmap = LatticeMap {
        d_prime,
        l,
        row_selection,
        origin,
        w,
        diagnostics,
    };
    for x in 0..k {
        let ell: Vec<f64> = lmap.l[x].iter().map(|&v| v as f64).collect();
        let got = lmap.tau_of(&ell);
        let want = family.tau(x);
        let approx = map.approx_tau(x);
        for i in 0..family.d() {
            let scale = 1.0 + want[i].abs();
            if (got[i] - want[i]).abs() > TABLE_TOL * scale || (approx[i] - want[i]).abs() > TABLE_TOL * scale {
                return spec(format!(
                    "exact coefficients of symbol {x} do not reproduce the family statistic {want:?}"
                ));
            }
        }
    }
    Ok(lmap)
}

/// Greedy maximal independent subset of `rows` over ℚ, in order.
fn independent_rows(rows: &[Vec<BigInt>]) -> Vec<usize> {
    // Each kept row is stored reduced, with its pivot column.
    let mut reduced: Vec<(usize, Vec<BigRational>)> = Vec::new();
    let mut chosen = Vec::new();
    for (r, row) in rows.iter().enumerate() {
        let mut v: Vec<BigRational> = row.iter().cloned().map(BigRational::from_integer).collect();
        for (p, b) in &reduced {
            if !v[*p].is_zero() {
                let f = &v[*p] / &b[*p];
                for (vi, bi) in v.iter_mut().zip(b) {
                    *vi -= &f * bi;
                }
            }
        }
        if let Some(p) = v.iter().position(|e| !e.is_zero()) {
            reduced.push((p, v));
            chosen.push(r);
        }
    }
    chosen
}

/// `n·L(xⁿ)` together with `n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LatticePoint {
    pub scaled: Vec<i64>,
    pub n: u32,
}

impl LatticePoint {
    /// `L(xⁿ) = scaled / n` as exact rationals.
    pub fn ell(&self) -> Vec<BigRational> {
        self.scaled
            .iter()
            .map(|&v| BigRational::new(BigInt::from(v), BigInt::from(self.n)))
            .collect()
    }

    pub fn ell_f64(&self) -> Vec<f64> {
        self.scaled.iter().map(|&v| v as f64 / self.n as f64).collect()
    }
}

pub fn point_class_of(lmap: &LatticeMap, seq: &[usize]) -> Result<LatticePoint> {
    if seq.is_empty() {
        return domain("empty sequence");
    }
    let comp = Composition::of_sequence(lmap.alphabet_size(), seq)?;
    Ok(LatticePoint {
        scaled: lmap.scaled_sum(comp.counts())?,
        n: seq.len() as u32,
    })
}

/// Groups all compositions at blocklength `n` by exact lattice point.
pub fn point_type_index(family: &FamilySpec, lmap: &LatticeMap, n: u32, budget: u64) -> Result<TypeIndex> {
    if lmap.alphabet_size() != family.alphabet_size() {
        return spec("lattice map and family disagree on the alphabet size");
    }
    let nf = n as f64;
    TypeIndex::from_keyed(
        n,
        family.alphabet_size(),
        IndexMode::Point(lmap.clone()),
        budget,
        |counts| {
            let key = lmap.scaled_sum(counts)?;
            let tau = family.stat_sum(counts).into_iter().map(|v| v / nf).collect();
            Ok((key, tau))
        },
    )
}

/// `f₀(ℓ) = −(⟨θ̂,τ(ℓ)⟩ − ψ(θ̂)) − (d′/2n) log₂(2πn) + C/n`.
pub fn f0_of(family: &FamilySpec, lmap: &LatticeMap, n: u32, ell: &[BigRational], constant: f64) -> Result<f64> {
    if ell.len() != lmap.d_prime() {
        return spec(format!("ℓ has length {}, expected d' = {}", ell.len(), lmap.d_prime()));
    }
    let ell: Vec<f64> = ell.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect();
    f0_at(family, lmap, n, &lmap.tau_of(&ell), constant)
}

pub fn f0_of_point(family: &FamilySpec, lmap: &LatticeMap, point: &LatticePoint, constant: f64) -> Result<f64> {
    f0_at(family, lmap, point.n, &lmap.tau_of(&point.ell_f64()), constant)
}

fn f0_at(family: &FamilySpec, lmap: &LatticeMap, n: u32, tau: &[f64], constant: f64) -> Result<f64> {
    if n == 0 {
        return domain("blocklength must be at least 1");
    }
    let theta = mle(family, tau)?;
    let nf = n as f64;
    let core = psi_pmf(family, theta.as_slice()).0 - dot(theta.as_slice(), tau);
    Ok(core - lmap.d_prime() as f64 / (2.0 * nf) * (2.0 * std::f64::consts::PI * nf).log2() + constant / nf)
}

/// `log₂|T| − n·f₀(L)` with `C = 0`, one entry per class of a point index.
/// The class-size bound holds with constant `C` iff every residual lies in `[−C, C]`.
pub fn point_size_residuals(family: &FamilySpec, index: &TypeIndex) -> Result<Vec<f64>> {
    let IndexMode::Point(lmap) = index.mode() else {
        return spec("size residuals need a point type index");
    };
    let n = index.n();
    index
        .classes()
        .iter()
        .map(|c| {
            let point = LatticePoint {
                scaled: c.key.clone(),
                n,
            };
            let f0 = f0_of_point(family, lmap, &point, 0.0)?;
            Ok(crate::bigmath::log2_big(&c.size) - n as f64 * f0)
        })
        .collect()
}
