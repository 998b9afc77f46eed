//! Symbol-count vectors and their exact enumeration.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};

use crate::bigmath::{binomial, multinomial};
use crate::error::{domain, Error, Result};

/// Symbol counts of a sequence; `n = Σ counts`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Composition {
    counts: Vec<u32>,
}

impl Composition {
    pub fn new(counts: Vec<u32>) -> Self {
        Composition { counts }
    }

    pub fn of_sequence(alphabet_size: usize, seq: &[usize]) -> Result<Self> {
        let mut counts = vec![0u32; alphabet_size];
        for (i, &s) in seq.iter().enumerate() {
            match counts.get_mut(s) {
                Some(c) => *c += 1,
                None => {
                    return domain(format!(
                        "symbol {s} at position {i} is outside an alphabet of size {alphabet_size}"
                    ))
                }
            }
        }
        Ok(Composition { counts })
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn n(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }

    /// Number of sequences with this composition.
    pub fn multinomial(&self) -> BigUint {
        multinomial(&self.counts)
    }

    /// Colexicographic comparison key: counts read from the last symbol.
    pub fn colex_cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.counts.iter().rev().cmp(other.counts.iter().rev())
    }
}

/// `C(n + k − 1, k − 1)`, the number of compositions of `n` into `k` parts.
pub fn composition_count(n: u64, k: usize) -> BigUint {
    binomial(n + k as u64 - 1, k as u64 - 1)
}

/// Fails with a resource error when the composition count exceeds `budget`.
pub fn check_budget(n: u64, k: usize, budget: u64) -> Result<u64> {
    let count = composition_count(n, k);
    match count.to_u64() {
        Some(c) if c <= budget => Ok(c),
        _ => Err(Error::Resource {
            what: format!("enumerating compositions of n = {n} over {k} symbols"),
            needed: count.to_string(),
            budget: format!("{budget} (budget-compositions)"),
        }),
    }
}

/// Visits every composition of `n` over `k` symbols in colexicographic order,
/// passing the counts and the exact multinomial coefficient.
pub fn for_each_composition<F>(n: u32, k: usize, mut f: F)
where
    F: FnMut(&[u32], &BigUint),
{
    assert!(k >= 1);
    let mut counts = vec![0u32; k];
    if k == 1 {
        counts[0] = n;
        f(&counts, &BigUint::one());
        return;
    }
    visit(k - 1, n, &BigUint::one(), &mut counts, &mut f);
}

fn visit<F>(level: usize, remaining: u32, prod: &BigUint, counts: &mut [u32], f: &mut F)
where
    F: FnMut(&[u32], &BigUint),
{
    if level == 0 {
        counts[0] = remaining;
        f(counts, prod);
        return;
    }
    let mut child = prod.clone();
    for c in 0..=remaining {
        if c > 0 {
            // prod·C(r, c) = prod·C(r, c−1)·(r − c + 1)/c, exact
            child *= remaining - c + 1;
            child /= c;
        }
        counts[level] = c;
        visit(level - 1, remaining - c, &child, counts, f);
    }
    counts[level] = 0;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumerates_all_in_colex_order() {
        let mut seen: Vec<Composition> = Vec::new();
        let mut total = BigUint::from(0u32);
        for_each_composition(5, 3, |c, m| {
            let comp = Composition::new(c.to_vec());
            assert_eq!(&comp.multinomial(), m);
            total += m;
            seen.push(comp);
        });
        assert_eq!(seen.len(), 21);
        assert_eq!(total, BigUint::from(243u32));
        for w in seen.windows(2) {
            assert_eq!(w[0].colex_cmp(&w[1]), std::cmp::Ordering::Less);
        }
        assert_eq!(composition_count(5, 3), BigUint::from(21u32));
    }

    #[test]
    fn budget() {
        assert!(check_budget(10, 3, 66).is_ok());
        assert!(matches!(check_budget(10, 3, 65), Err(Error::Resource { .. })));
    }

    #[test]
    fn of_sequence_rejects_bad_symbol() {
        assert!(Composition::of_sequence(2, &[0, 1, 2]).is_err());
        let c = Composition::of_sequence(3, &[0, 2, 2]).unwrap();
        assert_eq!(c.counts(), &[1, 0, 2]);
        assert_eq!(c.n(), 3);
    }
}
