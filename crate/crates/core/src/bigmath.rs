//! Exact combinatorics on arbitrary-precision integers and a few float helpers.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

/// Base-2 logarithm of a positive big integer, accurate to the last bit of an `f64`.
pub fn log2_big(x: &BigUint) -> f64 {
    assert!(!x.is_zero(), "log2 of zero");
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().expect("fits in f64").log2();
    }
    let shift = bits - 64;
    let top = (x >> shift).to_u64().expect("64-bit head");
    (top as f64).log2() + shift as f64
}

/// `⌈log₂ m⌉` computed exactly; zero for `m = 1`.
pub fn ceil_log2_big(m: &BigUint) -> u64 {
    assert!(!m.is_zero(), "ceil_log2 of zero");
    (m - 1u32).bits()
}

/// Binomial coefficient `C(n, k)`.
pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// Multinomial coefficient `(Σ c)! / Π c!`.
pub fn multinomial(counts: &[u32]) -> BigUint {
    let mut acc = BigUint::one();
    let mut total = 0u64;
    for &c in counts {
        total += c as u64;
        acc *= binomial(total, c as u64);
    }
    acc
}

/// Neumaier-compensated summation.
#[derive(Debug, Default, Clone, Copy)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::default();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// `log₂ Σ 2^{x_i}` with a max shift.
pub fn log2_sum_exp2(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    let s: CompensatedSum = xs.iter().map(|&x| (x - max).exp2()).collect();
    max + s.value().log2()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log2_of_large_powers() {
        let x = BigUint::one() << 5000u32;
        assert_eq!(log2_big(&x), 5000.0);
        let y = BigUint::from(3u32) << 4000u32;
        assert!((log2_big(&y) - (4000.0 + 3f64.log2())).abs() < 1e-12);
    }

    #[test]
    fn ceil_log2_exact() {
        for (m, want) in [(1u32, 0u64), (2, 1), (3, 2), (4, 2), (5, 3), (10, 4), (16, 4), (17, 5)] {
            assert_eq!(ceil_log2_big(&BigUint::from(m)), want, "m={m}");
        }
    }

    #[test]
    fn multinomials() {
        assert_eq!(multinomial(&[2, 2]), BigUint::from(6u32));
        assert_eq!(multinomial(&[1, 1, 1]), BigUint::from(6u32));
        assert_eq!(multinomial(&[0, 4]), BigUint::one());
        assert_eq!(binomial(52, 5), BigUint::from(2_598_960u32));
    }

    #[test]
    fn compensated_sum_beats_naive() {
        let mut s = CompensatedSum::default();
        s.add(1.0);
        for _ in 0..10 {
            s.add(1e-16);
        }
        assert!((s.value() - (1.0 + 1e-15)).abs() < 1e-17);
    }
}
