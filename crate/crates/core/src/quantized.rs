//! Quantized type classes: the statistic space is cut into half-open cuboids
//! of side `s/n`, and two sequences share a class when their sufficient
//! statistics fall in the same cuboid.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_bigint::BigUint;
use num_traits::Zero;

use crate::compositions::{check_budget, for_each_composition, Composition};
use crate::error::{domain, spec, Result};
use crate::expofam::{constrained_argmax, dot, psi_pmf, suffstat, FamilySpec};
use crate::point::LatticeMap;

/// Relative tolerance for deciding that a statistic sits on a cuboid face.
const FACE_TOL: f64 = 1e-12;

/// Blocklength-independent grid configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct GridParams {
    /// Side scale; cuboids have side `s/n`.
    pub s: f64,
    /// A designated cuboid center.
    pub anchor: Vec<f64>,
}

impl GridParams {
    /// `s = 1`, anchored at the origin.
    pub fn unit(d: usize) -> Self {
        GridParams {
            s: 1.0,
            anchor: vec![0.0; d],
        }
    }

    pub fn with_s(d: usize, s: f64) -> Self {
        GridParams {
            s,
            anchor: vec![0.0; d],
        }
    }

    pub fn at(&self, n: u32) -> Result<Grid> {
        Grid::new(n, self.s, self.anchor.clone())
    }
}

/// Cuboid lattice `anchor + (s/n)·ℤ^d` at blocklength `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    n: u32,
    s: f64,
    anchor: Vec<f64>,
}

impl Grid {
    pub fn new(n: u32, s: f64, anchor: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return domain("blocklength must be at least 1");
        }
        if !(s.is_finite() && s > 0.0) {
            return spec(format!("side scale s must be positive and finite, got {s}"));
        }
        if anchor.is_empty() || anchor.iter().any(|v| !v.is_finite()) {
            return spec("grid anchor must be a nonempty finite vector");
        }
        Ok(Grid { n, s, anchor })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn d(&self) -> usize {
        self.anchor.len()
    }

    pub fn anchor(&self) -> &[f64] {
        &self.anchor
    }

    /// Cuboid side length `s/n`.
    pub fn side(&self) -> f64 {
        self.s / self.n as f64
    }

    /// Integer coordinates of the cuboid holding `tau`.
    pub fn cell_of(&self, tau: &[f64]) -> Vec<i64> {
        let n = self.n as f64;
        tau.iter()
            .zip(&self.anchor)
            .map(|(t, a)| cell_coord((t - a) * n / self.s))
            .collect()
    }

    /// Same as [`Grid::cell_of`] for an unnormalized statistic sum `n·τ`,
    /// avoiding a division by `n`.
    pub fn cell_of_sum(&self, stat_sum: &[f64]) -> Vec<i64> {
        let n = self.n as f64;
        stat_sum
            .iter()
            .zip(&self.anchor)
            .map(|(t, a)| cell_coord((t - a * n) / self.s))
            .collect()
    }

    pub fn center(&self, cell: &[i64]) -> Vec<f64> {
        let w = self.side();
        cell.iter()
            .zip(&self.anchor)
            .map(|(&j, a)| a + j as f64 * w)
            .collect()
    }
}

/// `u` is the offset from the anchor in units of the side. Cuboid `j` holds
/// `u ∈ (j − ½, j + ½]`.
fn cell_coord(u: f64) -> i64 {
    let v = u - 0.5;
    let r = v.round();
    if (v - r).abs() <= FACE_TOL * u.abs().max(1.0) {
        r as i64
    } else {
        v.ceil() as i64
    }
}

/// Center of the half-open cuboid containing `tau`.
pub fn cuboid_center_of(grid: &Grid, tau: &[f64]) -> Vec<f64> {
    grid.center(&grid.cell_of(tau))
}

/// How classes were formed.
#[derive(Debug, Clone)]
pub enum IndexMode {
    Quantized(Grid),
    Point(LatticeMap),
}

impl IndexMode {
    pub fn name(&self) -> &'static str {
        match self {
            IndexMode::Quantized(_) => "quantized",
            IndexMode::Point(_) => "point",
        }
    }
}

/// One type class: its key, a representative statistic, and its member
/// compositions in colexicographic order with their exact sizes.
#[derive(Debug, Clone)]
pub struct TypeClass {
    /// Cuboid cell (quantized) or the integer lattice point `n·L` (point).
    pub key: Vec<i64>,
    /// Cuboid center (quantized) or the exact statistic value (point).
    pub center: Vec<f64>,
    pub members: Vec<Composition>,
    pub member_sizes: Vec<BigUint>,
    pub size: BigUint,
}

/// Every type class at blocklength `n`, sorted by key.
#[derive(Debug, Clone)]
pub struct TypeIndex {
    n: u32,
    alphabet_size: usize,
    mode: IndexMode,
    classes: Vec<TypeClass>,
}

impl TypeIndex {
    /// Groups every composition by `key_of`. The closure returns the class key
    /// and the class's representative statistic.
    pub(crate) fn from_keyed<K>(
        n: u32,
        alphabet_size: usize,
        mode: IndexMode,
        budget: u64,
        mut key_of: K,
    ) -> Result<Self>
    where
        K: FnMut(&[u32]) -> Result<(Vec<i64>, Vec<f64>)>,
    {
        if n == 0 {
            return domain("blocklength must be at least 1");
        }
        check_budget(n as u64, alphabet_size, budget)?;
        let mut groups: BTreeMap<Vec<i64>, TypeClass> = BTreeMap::new();
        let mut failure = None;
        for_each_composition(n, alphabet_size, |counts, size| {
            if failure.is_some() {
                return;
            }
            let (key, center) = match key_of(counts) {
                Ok(v) => v,
                Err(e) => {
                    failure = Some(e);
                    return;
                }
            };
            let class = groups.entry(key.clone()).or_insert_with(|| TypeClass {
                key,
                center,
                members: Vec::new(),
                member_sizes: Vec::new(),
                size: BigUint::zero(),
            });
            class.members.push(Composition::new(counts.to_vec()));
            class.member_sizes.push(size.clone());
            class.size += size;
        });
        if let Some(e) = failure {
            return Err(e);
        }
        Ok(TypeIndex {
            n,
            alphabet_size,
            mode,
            classes: groups.into_values().collect(),
        })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    pub fn mode(&self) -> &IndexMode {
        &self.mode
    }

    pub fn classes(&self) -> &[TypeClass] {
        &self.classes
    }

    pub fn total_size(&self) -> BigUint {
        self.classes.iter().map(|c| &c.size).sum()
    }

    /// Position of a class by key.
    pub fn find_class(&self, key: &[i64]) -> Option<usize> {
        self.classes
            .binary_search_by(|c| c.key.as_slice().cmp(key))
            .ok()
    }

    /// `(class, member)` position of a composition.
    pub fn locate(&self, family: &FamilySpec, comp: &Composition) -> Result<(usize, usize)> {
        if comp.n() != self.n as u64 || comp.counts().len() != self.alphabet_size {
            return domain(format!(
                "composition {:?} does not belong to blocklength {} over {} symbols",
                comp.counts(),
                self.n,
                self.alphabet_size
            ));
        }
        let key = match &self.mode {
            IndexMode::Quantized(grid) => grid.cell_of_sum(&family.stat_sum(comp.counts())),
            IndexMode::Point(lmap) => lmap.scaled_sum(comp.counts())?,
        };
        let ci = self
            .find_class(&key)
            .ok_or_else(|| crate::Error::Domain(format!("no class with key {key:?}")))?;
        let mi = self.classes[ci]
            .members
            .binary_search_by(|m| m.colex_cmp(comp))
            .map_err(|_| crate::Error::Domain("composition missing from its class".into()))?;
        Ok((ci, mi))
    }

    /// One row per class: center coordinates, member count, exact size.
    pub fn export_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# typesize type-index v1 mode={} n={} classes={}",
            self.mode.name(),
            self.n,
            self.classes.len()
        );
        let _ = writeln!(out, "# center\tmembers\tsize");
        for c in &self.classes {
            let center: Vec<String> = c.center.iter().map(|v| format!("{v:.17}")).collect();
            let _ = writeln!(out, "{}\t{}\t{}", center.join(","), c.members.len(), c.size);
        }
        out
    }
}

/// Groups all compositions at blocklength `grid.n()` by cuboid.
pub fn build_type_index(family: &FamilySpec, grid: &Grid, budget: u64) -> Result<TypeIndex> {
    if grid.d() != family.d() {
        return spec(format!(
            "grid dimension {} does not match family dimension {}",
            grid.d(),
            family.d()
        ));
    }
    TypeIndex::from_keyed(
        grid.n(),
        family.alphabet_size(),
        IndexMode::Quantized(grid.clone()),
        budget,
        |counts| {
            let cell = grid.cell_of_sum(&family.stat_sum(counts));
            let center = grid.center(&cell);
            Ok((cell, center))
        },
    )
}

/// Exact size of the class that holds `seq`.
pub fn type_size_of_sequence(index: &TypeIndex, family: &FamilySpec, seq: &[usize]) -> Result<BigUint> {
    if seq.len() != index.n() as usize {
        return domain(format!(
            "sequence length {} does not match index blocklength {}",
            seq.len(),
            index.n()
        ));
    }
    let comp = Composition::of_sequence(index.alphabet_size(), seq)?;
    let (ci, _) = index.locate(family, &comp)?;
    Ok(index.classes()[ci].size.clone())
}

/// `r(xⁿ) = −log₂ p_{θ̂_c}(xⁿ) − (d/2) log₂ n + d log₂ s`, where `θ̂_c` is the
/// maximum-likelihood parameter at the cuboid center. Centers may fall just
/// outside the hull; the ball-constrained maximizer exists regardless.
pub fn r_of(family: &FamilySpec, grid: &Grid, seq: &[usize]) -> Result<f64> {
    if seq.len() != grid.n() as usize {
        return domain(format!(
            "sequence length {} does not match grid blocklength {}",
            seq.len(),
            grid.n()
        ));
    }
    let comp = Composition::of_sequence(family.alphabet_size(), seq)?;
    r_of_composition(family, grid, comp.counts())
}

pub fn r_of_composition(family: &FamilySpec, grid: &Grid, counts: &[u32]) -> Result<f64> {
    let sum = family.stat_sum(counts);
    let center = grid.center(&grid.cell_of_sum(&sum));
    let theta_c = constrained_argmax(family, &center)?;
    let n = grid.n() as f64;
    let d = family.d() as f64;
    let log_p = dot(theta_c.as_slice(), &sum) - n * psi_pmf(family, theta_c.as_slice()).0;
    Ok(-log_p - 0.5 * d * n.log2() + d * grid.s().log2())
}

/// `f(τ) = −⟨θ̂(τ),τ⟩ + ψ(θ̂(τ)) − (d/2n) log₂ n + (d log₂ s)/n + 3κs/n + C/n`.
pub fn f_of(family: &FamilySpec, grid: &Grid, tau: &[f64], constant: f64) -> Result<f64> {
    let theta = constrained_argmax(family, tau)?;
    let n = grid.n() as f64;
    let d = family.d() as f64;
    let s = grid.s();
    let core = psi_pmf(family, theta.as_slice()).0 - dot(theta.as_slice(), tau);
    Ok(core - d / (2.0 * n) * n.log2() + d * s.log2() / n + 3.0 * family.kappa() * s / n + constant / n)
}

/// Checks that `seq` is a valid blocklength-`n` sequence and returns its statistic.
pub fn checked_suffstat(family: &FamilySpec, n: u32, seq: &[usize]) -> Result<Vec<f64>> {
    if seq.len() != n as usize {
        return domain(format!("sequence length {} is not {n}", seq.len()));
    }
    suffstat(family, seq)
}
