//! One-to-one Type Size code.
//!
//! Sequences are totally ordered by (class size, class key, member composition
//! in colex order, lexicographic position within the composition). The rank
//! `k` in that order is emitted as the `k`-th string of `∅, 0, 1, 00, 01, …`.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, Zero};

use crate::compositions::Composition;
use crate::error::{domain, Error, Result};
use crate::expofam::FamilySpec;
use crate::point::LatticeMap;
use crate::quantized::{build_type_index, Grid, TypeIndex};

/// Classes sorted by ascending exact size, ties broken by key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassOrdering {
    /// `order[i]` is the class index (into the source list) at position `i`.
    order: Vec<usize>,
    /// `offsets[i]` is the first rank of position `i`; one extra trailing total.
    offsets: Vec<BigUint>,
    /// Inverse of `order`.
    position: Vec<usize>,
}

impl ClassOrdering {
    pub fn new(index: &TypeIndex) -> Self {
        Self::from_classes(index.classes().iter().map(|c| (&c.size, c.key.as_slice())))
    }

    pub fn from_classes<'a, I>(classes: I) -> Self
    where
        I: IntoIterator<Item = (&'a BigUint, &'a [i64])>,
    {
        let classes: Vec<(&BigUint, &[i64])> = classes.into_iter().collect();
        let mut order: Vec<usize> = (0..classes.len()).collect();
        order.sort_by(|&a, &b| {
            classes[a]
                .0
                .cmp(classes[b].0)
                .then_with(|| classes[a].1.cmp(classes[b].1))
        });
        let mut offsets = Vec::with_capacity(order.len() + 1);
        let mut acc = BigUint::zero();
        offsets.push(acc.clone());
        for &c in &order {
            acc += classes[c].0;
            offsets.push(acc.clone());
        }
        let mut position = vec![0; order.len()];
        for (p, &c) in order.iter().enumerate() {
            position[c] = p;
        }
        ClassOrdering {
            order,
            offsets,
            position,
        }
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Start rank of each position, followed by the total.
    pub fn offsets(&self) -> &[BigUint] {
        &self.offsets
    }

    pub fn total(&self) -> &BigUint {
        self.offsets.last().expect("offsets holds at least the zero start")
    }

    pub fn position_of(&self, class: usize) -> usize {
        self.position[class]
    }

    /// Position whose rank range contains `k`.
    pub fn position_at_rank(&self, k: &BigUint) -> Option<usize> {
        if k >= self.total() {
            return None;
        }
        // last offset ≤ k
        let p = self.offsets.partition_point(|o| o <= k);
        Some(p - 1)
    }
}

/// A binary string of the enumeration `∅, 0, 1, 00, 01, 10, 11, 000, …`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Codeword {
    len: u64,
    /// The bits read as a big-endian integer.
    value: BigUint,
}

impl Codeword {
    pub fn empty() -> Self {
        Codeword {
            len: 0,
            value: BigUint::zero(),
        }
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut value = BigUint::zero();
        for &b in bits {
            value <<= 1u32;
            if b {
                value += 1u32;
            }
        }
        Codeword {
            len: bits.len() as u64,
            value,
        }
    }

    /// Builds a codeword from `len` bits stored MSB-first in `bytes`.
    pub fn from_packed(bytes: &[u8], len: u64) -> Result<Self> {
        let need = len.div_ceil(8);
        if bytes.len() as u64 != need {
            return Err(Error::Corrupt(format!(
                "payload holds {} bytes, bit length {len} needs {need}",
                bytes.len()
            )));
        }
        let mut value = BigUint::from_bytes_be(bytes);
        let pad = need * 8 - len;
        if pad > 0 {
            let mask = (BigUint::one() << pad) - 1u32;
            if !(&value & &mask).is_zero() {
                return Err(Error::Corrupt("nonzero padding bits".into()));
            }
            value >>= pad;
        }
        Ok(Codeword { len, value })
    }

    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn bits(&self) -> Vec<bool> {
        (0..self.len).rev().map(|i| self.value.bit(i)).collect()
    }

    /// MSB-first, zero-padded to whole bytes.
    pub fn to_packed(&self) -> Vec<u8> {
        let nbytes = self.len.div_ceil(8) as usize;
        if nbytes == 0 {
            return Vec::new();
        }
        let shifted = &self.value << (nbytes as u64 * 8 - self.len);
        let raw = shifted.to_bytes_be();
        let mut out = vec![0u8; nbytes - raw.len().min(nbytes)];
        out.extend_from_slice(&raw);
        out
    }
}

impl fmt::Display for Codeword {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.bits() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl std::str::FromStr for Codeword {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Corrupt(format!("`{other}` is not a bit"))),
            })
            .collect::<Result<Vec<bool>>>()?;
        Ok(Codeword::from_bits(&bits))
    }
}

/// The `k`-th string: length `m = ⌊log₂(k+1)⌋`, value `k + 1 − 2^m`.
pub fn string_of_index(k: &BigUint) -> Codeword {
    let k1 = k + 1u32;
    let m = k1.bits() - 1;
    Codeword {
        len: m,
        value: k1 - (BigUint::one() << m),
    }
}

pub fn index_of_string(word: &Codeword) -> BigUint {
    (BigUint::one() << word.len) - 1u32 + &word.value
}

/// Lexicographic index of `seq` among the arrangements of its composition.
pub fn rank_within_composition(seq: &[usize], counts: &[u32]) -> BigUint {
    let mut counts = counts.to_vec();
    let mut remaining = seq.len() as u64;
    let mut m = crate::bigmath::multinomial(&counts);
    let mut rank = BigUint::zero();
    for &x in seq {
        for &c in &counts[..x] {
            if c > 0 {
                rank += &m * c / remaining;
            }
        }
        m = &m * counts[x] / remaining;
        counts[x] -= 1;
        remaining -= 1;
    }
    rank
}

/// Inverse of [`rank_within_composition`]; `k` must be below the multinomial.
pub fn unrank_within_composition(mut k: BigUint, counts: &[u32]) -> Vec<usize> {
    let mut counts = counts.to_vec();
    let n: u64 = counts.iter().map(|&c| c as u64).sum();
    let mut remaining = n;
    let mut m = crate::bigmath::multinomial(&counts);
    let mut seq = Vec::with_capacity(n as usize);
    while remaining > 0 {
        let mut picked = None;
        for (s, &c) in counts.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let block = &m * c / remaining;
            if k < block {
                m = block;
                picked = Some(s);
                break;
            }
            k -= block;
        }
        let s = picked.expect("index below the multinomial");
        seq.push(s);
        counts[s] -= 1;
        remaining -= 1;
    }
    seq
}

/// Encoder/decoder over a fixed type index.
#[derive(Debug, Clone)]
pub struct TypeSizeCodec {
    family: FamilySpec,
    index: TypeIndex,
    ordering: ClassOrdering,
}

impl TypeSizeCodec {
    pub fn new(family: FamilySpec, index: TypeIndex) -> Result<Self> {
        if index.alphabet_size() != family.alphabet_size() {
            return domain("type index and family disagree on the alphabet size");
        }
        let ordering = ClassOrdering::new(&index);
        Ok(TypeSizeCodec {
            family,
            index,
            ordering,
        })
    }

    pub fn quantized(family: FamilySpec, grid: &Grid, budget: u64) -> Result<Self> {
        let index = build_type_index(&family, grid, budget)?;
        Self::new(family, index)
    }

    pub fn point(family: FamilySpec, lmap: &LatticeMap, n: u32, budget: u64) -> Result<Self> {
        let index = crate::point::point_type_index(&family, lmap, n, budget)?;
        Self::new(family, index)
    }

    pub fn family(&self) -> &FamilySpec {
        &self.family
    }

    pub fn index(&self) -> &TypeIndex {
        &self.index
    }

    pub fn ordering(&self) -> &ClassOrdering {
        &self.ordering
    }

    pub fn n(&self) -> u32 {
        self.index.n()
    }

    /// `|X|^n`.
    pub fn total(&self) -> &BigUint {
        self.ordering.total()
    }

    pub fn rank(&self, seq: &[usize]) -> Result<BigUint> {
        if seq.len() != self.n() as usize {
            return domain(format!(
                "sequence length {} does not match blocklength {}",
                seq.len(),
                self.n()
            ));
        }
        let comp = Composition::of_sequence(self.family.alphabet_size(), seq)?;
        let (ci, mi) = self.index.locate(&self.family, &comp)?;
        let class = &self.index.classes()[ci];
        let mut k = self.ordering.offsets[self.ordering.position_of(ci)].clone();
        for size in &class.member_sizes[..mi] {
            k += size;
        }
        k += rank_within_composition(seq, comp.counts());
        Ok(k)
    }

    pub fn unrank(&self, k: &BigUint) -> Result<Vec<usize>> {
        let Some(pos) = self.ordering.position_at_rank(k) else {
            return domain(format!("rank {k} is not below |X|^n = {}", self.total()));
        };
        let class = &self.index.classes()[self.ordering.order[pos]];
        let mut rest = k - &self.ordering.offsets[pos];
        for (member, size) in class.members.iter().zip(&class.member_sizes) {
            if rest < *size {
                return Ok(unrank_within_composition(rest, member.counts()));
            }
            rest -= size;
        }
        unreachable!("class size equals the sum of its member sizes")
    }

    pub fn encode(&self, seq: &[usize]) -> Result<Codeword> {
        Ok(string_of_index(&self.rank(seq)?))
    }

    pub fn decode(&self, word: &Codeword) -> Result<Vec<usize>> {
        let k = index_of_string(word);
        if &k >= self.total() {
            return Err(Error::Corrupt(format!(
                "codeword index {k} is not below |X|^n = {}",
                self.total()
            )));
        }
        self.unrank(&k)
    }

    /// Codeword length of a rank, `⌊log₂(k+1)⌋`.
    pub fn length_of_rank(k: &BigUint) -> u64 {
        (k + 1u32).bits() - 1
    }

    /// Compares two sequences in code order.
    pub fn cmp_sequences(&self, a: &[usize], b: &[usize]) -> Result<Ordering> {
        Ok(self.rank(a)?.cmp(&self.rank(b)?))
    }
}
