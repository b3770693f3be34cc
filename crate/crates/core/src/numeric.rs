//! Floating point helpers: a double-double accumulator, a reduction whose
//! result does not depend on the number of worker threads, and exact
//! combinatorial ratios.

use rayon::prelude::*;

/// Chunk length of the deterministic reduction. Changing it changes the
/// rounding of every reduced mean, so it is a fixed constant.
pub const REDUCTION_CHUNK: usize = 4096;

/// Double-double accumulator (error-free `two_sum` on every add).
///
/// Carries roughly 106 bits of significand, so summing `M` values of
/// magnitude at most one loses at most one rounding when read back.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DoubleDouble {
    hi: f64,
    lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

impl DoubleDouble {
    pub const ZERO: Self = Self { hi: 0.0, lo: 0.0 };

    #[inline]
    pub fn add(&mut self, x: f64) {
        let (s, e) = two_sum(self.hi, x);
        let lo = self.lo + e;
        let (hi, lo) = two_sum(s, lo);
        self.hi = hi;
        self.lo = lo;
    }

    #[inline]
    pub fn merge(&mut self, other: DoubleDouble) {
        let (s, e) = two_sum(self.hi, other.hi);
        let lo = e + self.lo + other.lo;
        let (hi, lo) = two_sum(s, lo);
        self.hi = hi;
        self.lo = lo;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.hi + self.lo
    }

    /// `(hi + lo) / n` rounded once from the double-double value.
    pub fn mean(&self, n: usize) -> f64 {
        let n = n as f64;
        let q = self.hi / n;
        // exact residual of the leading quotient, plus the low word
        let r = (-q).mul_add(n, self.hi) + self.lo;
        q + r / n
    }
}

impl std::iter::FromIterator<f64> for DoubleDouble {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = DoubleDouble::ZERO;
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Sums `f(0), …, f(len - 1)` on the current rayon pool.
///
/// Items are grouped into fixed chunks of [`REDUCTION_CHUNK`], each chunk is
/// accumulated in index order, and chunk totals are merged in chunk order.
/// The result is therefore bit-identical for any thread count.
pub fn deterministic_sum<E, F>(len: usize, f: F) -> Result<DoubleDouble, E>
where
    F: Fn(usize) -> Result<f64, E> + Sync,
    E: Send,
{
    let chunks = len.div_ceil(REDUCTION_CHUNK);
    let partials: Vec<DoubleDouble> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * REDUCTION_CHUNK;
            let end = (start + REDUCTION_CHUNK).min(len);
            let mut acc = DoubleDouble::ZERO;
            for i in start..end {
                acc.add(f(i)?);
            }
            Ok(acc)
        })
        .collect::<Result<_, E>>()?;
    let mut total = DoubleDouble::ZERO;
    for p in partials {
        total.merge(p);
    }
    Ok(total)
}

/// Sequential counterpart of [`deterministic_sum`] over a slice, using the same
/// chunking so both produce identical bits.
pub fn chunked_sum(values: &[f64]) -> DoubleDouble {
    let mut total = DoubleDouble::ZERO;
    for chunk in values.chunks(REDUCTION_CHUNK) {
        total.merge(chunk.iter().copied().collect());
    }
    total
}

/// Binomial coefficient as `u128`, `None` on overflow.
pub fn binomial(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) is divisible by (i + 1) after the multiply
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// `ln C(n, k)` for large arguments.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    (1..=k)
        .map(|i| (((n - k + i) as f64) / i as f64).ln())
        .sum()
}

/// `num / den` correctly rounded whenever the reduced fraction fits in 53 bits.
pub fn exact_ratio(num: u128, den: u128) -> f64 {
    use num_integer::Integer;
    let g = num.gcd(&den).max(1);
    (num / g) as f64 / (den / g) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn double_double_recovers_cancelled_bits() {
        let acc: DoubleDouble = [1e16, 1.0, -1e16, 1.0].into_iter().collect();
        assert_eq!(acc.value(), 2.0);
    }

    #[test]
    fn deterministic_sum_is_thread_independent() {
        let f = |i: usize| Ok::<_, ()>(((i as f64) * 0.1).sin() / 3.0);
        let n = 3 * REDUCTION_CHUNK + 17;
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| deterministic_sum(n, f).unwrap());
        let many = rayon::ThreadPoolBuilder::new()
            .num_threads(7)
            .build()
            .unwrap()
            .install(|| deterministic_sum(n, f).unwrap());
        assert_eq!(one, many);
        let values: Vec<f64> = (0..n).map(|i| f(i).unwrap()).collect();
        assert_eq!(chunked_sum(&values), one);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(4, 2), Some(6));
        assert_eq!(binomial(10, 0), Some(1));
        assert_eq!(binomial(3, 5), Some(0));
        assert_eq!(binomial(60, 30), Some(118264581564861424));
        assert!((ln_binomial(60, 30) - (118264581564861424f64).ln()).abs() < 1e-9);
    }

    #[test]
    fn exact_ratio_reduces() {
        assert_eq!(exact_ratio(12 * 462 * 462, 924 * 924), 3.0);
        assert_eq!(exact_ratio(1, 3), 1.0 / 3.0);
    }
}
