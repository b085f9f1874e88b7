//! The accelerated Collatz map and its parity bookkeeping.
//!
//! The map acts on integers by
//!
//! ```text
//! T(x) = x / 2            if x is even
//! T(x) = (3x + 1) / 2     if x is odd   (classic variant)
//! T(x) = (3x - 1) / 2     if x is odd   (minus variant)
//! ```
//!
//! Both variants halve after the odd step, so every application shrinks the
//! 2-adic information in `x` by exactly one bit.  The *parity vector* of `y`
//! records the parities of `y, T(y), ..., T^{k-1}(y)`; two starting values
//! share a length-`k` parity vector exactly when they agree modulo `2^k`
//! (see [`crate::residue::verify_periodicity`]).
//!
//! Drop times come in two flavours that must never be conflated:
//! [`MapSpec::first_weak_drop`] looks for `T^m(y) <= y` while
//! [`MapSpec::first_strict_drop`] looks for `T^m(y) < y`.  The value `y = 1`
//! separates them: its orbit `1, 2, 1, ...` weakly drops at `m = 2` but never
//! strictly drops.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, Zero};
use thiserror::Error;

/// Which odd-step rule the map applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Odd step `(3x + 1) / 2`.
    Classic,
    /// Odd step `(3x - 1) / 2`.  Its small cycles (`{1}` and `{5, 7, 10}`)
    /// make it a useful test bed for measure experiments.
    Minus,
}

/// The domain the map is allowed to act on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Domain {
    /// Strictly positive integers.  Structural claims (drops, surveys,
    /// inverse triangles) are only meaningful here.
    Naturals,
    /// All integers.  Exposed for experiments with negative roots such as
    /// the fixed point `T(-1) = -1`; no structural claims are checked.
    Integers,
}

/// A fully specified map: variant plus domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MapSpec {
    pub variant: Variant,
    pub domain: Domain,
}

/// Errors surfaced by the core map operations.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum MapError {
    /// A naturals-domain operation was handed a value `<= 0`.
    #[error("value {value} is outside the naturals domain")]
    OutsideDomain { value: BigInt },
}

impl MapSpec {
    /// Classic map on the naturals: the usual object of study.
    pub fn classic() -> Self {
        MapSpec { variant: Variant::Classic, domain: Domain::Naturals }
    }

    /// Minus variant on the naturals.
    pub fn minus() -> Self {
        MapSpec { variant: Variant::Minus, domain: Domain::Naturals }
    }

    /// Same variant, acting on all integers.
    pub fn on_integers(self) -> Self {
        MapSpec { domain: Domain::Integers, ..self }
    }

    fn check_domain(&self, x: &BigInt) -> Result<(), MapError> {
        if self.domain == Domain::Naturals && !x.is_positive() {
            return Err(MapError::OutsideDomain { value: x.clone() });
        }
        Ok(())
    }

    /// One application of the map.
    ///
    /// Parity of negative values is taken in the Euclidean sense
    /// (`-1` is odd), so the integers domain behaves as expected:
    /// `T(-1) = (3(-1) + 1)/2 = -1` under the classic variant.
    pub fn step(&self, x: &BigInt) -> Result<BigInt, MapError> {
        self.check_domain(x)?;
        Ok(self.step_unchecked(x))
    }

    fn step_unchecked(&self, x: &BigInt) -> BigInt {
        if x.mod_floor(&BigInt::from(2)).is_zero() {
            x / 2
        } else {
            match self.variant {
                Variant::Classic => (x * 3 + 1) / 2,
                Variant::Minus => (x * 3 - 1) / 2,
            }
        }
    }

    /// The orbit segment `y, T(y), ..., T^k(y)` (length `k + 1`).
    pub fn trajectory(&self, y: &BigInt, k: usize) -> Result<Trajectory, MapError> {
        self.check_domain(y)?;
        let mut values = Vec::with_capacity(k + 1);
        values.push(y.clone());
        for _ in 0..k {
            let next = self.step_unchecked(values.last().expect("nonempty"));
            values.push(next);
        }
        Ok(Trajectory { values })
    }

    /// The parity vector `E_k(y)`: bit `i` is the parity of `T^{i-1}(y)`
    /// (1-indexed, so bit 1 is the parity of `y` itself).
    pub fn parity_vector(&self, y: &BigInt, k: usize) -> Result<ParityVector, MapError> {
        self.check_domain(y)?;
        let two = BigInt::from(2);
        let mut bits = Vec::with_capacity(k);
        let mut current = y.clone();
        for _ in 0..k {
            let odd = !current.mod_floor(&two).is_zero();
            bits.push(odd);
            current = self.step_unchecked(&current);
        }
        Ok(ParityVector::from_bits(bits))
    }

    /// Least `m` in `[1, k_max]` with `T^m(y) <= y`, or `None`.
    pub fn first_weak_drop(&self, y: &BigInt, k_max: usize) -> Result<Option<usize>, MapError> {
        self.first_drop(y, k_max, |t, y| t <= y)
    }

    /// Least `m` in `[1, k_max]` with `T^m(y) < y`, or `None`.
    pub fn first_strict_drop(&self, y: &BigInt, k_max: usize) -> Result<Option<usize>, MapError> {
        self.first_drop(y, k_max, |t, y| t < y)
    }

    fn first_drop(
        &self,
        y: &BigInt,
        k_max: usize,
        dropped: impl Fn(&BigInt, &BigInt) -> bool,
    ) -> Result<Option<usize>, MapError> {
        self.check_domain(y)?;
        let mut current = y.clone();
        for m in 1..=k_max {
            current = self.step_unchecked(&current);
            if dropped(&current, y) {
                return Ok(Some(m));
            }
        }
        Ok(None)
    }
}

/// Fast path for sieves over word-sized values.  Callers are responsible
/// for keeping iterates inside `u64` range; the arithmetic here is exact
/// for `x < 2^62`.
pub(crate) fn step_u64(variant: Variant, x: u64) -> u64 {
    debug_assert!(x > 0);
    debug_assert!(x < 1 << 62, "u64 fast path needs headroom for 3x");
    if x % 2 == 0 {
        x / 2
    } else {
        match variant {
            Variant::Classic => (3 * x + 1) / 2,
            Variant::Minus => (3 * x - 1) / 2,
        }
    }
}

/// An orbit segment produced by [`MapSpec::trajectory`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    values: Vec<BigInt>,
}

impl Trajectory {
    /// All values, starting point first.
    pub fn values(&self) -> &[BigInt] {
        &self.values
    }

    /// `T^m(y)` for `m` up to the stored length.
    pub fn iterate(&self, m: usize) -> &BigInt {
        &self.values[m]
    }
}

/// A parity vector together with its running ones-counts `S_n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParityVector {
    bits: Vec<bool>,
    partial_sums: Vec<u32>,
}

impl ParityVector {
    pub fn from_bits(bits: Vec<bool>) -> Self {
        let mut partial_sums = Vec::with_capacity(bits.len());
        let mut sum = 0u32;
        for &b in &bits {
            sum += b as u32;
            partial_sums.push(sum);
        }
        ParityVector { bits, partial_sums }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Bit `i`, 1-indexed to match the usual notation `E_k(y) = (b_1, ..., b_k)`.
    pub fn bit(&self, i: usize) -> bool {
        self.bits[i - 1]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// `S_n`: the number of odd iterates among the first `n` (1-indexed).
    pub fn partial_sum(&self, n: usize) -> u32 {
        if n == 0 {
            0
        } else {
            self.partial_sums[n - 1]
        }
    }

    /// `S_k` for the full vector.
    pub fn total(&self) -> u32 {
        self.partial_sum(self.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn big(x: i64) -> BigInt {
        BigInt::from(x)
    }

    #[test]
    fn classic_step_small_values() {
        let spec = MapSpec::classic();
        assert_eq!(spec.step(&big(1)).unwrap(), big(2), "1 is odd: (3+1)/2");
        assert_eq!(spec.step(&big(4)).unwrap(), big(2), "4 is even: 4/2");
        assert_eq!(spec.step(&big(7)).unwrap(), big(11));
    }

    #[test]
    fn minus_step_small_values() {
        let spec = MapSpec::minus();
        assert_eq!(spec.step(&big(5)).unwrap(), big(7), "5 is odd: (15-1)/2");
        assert_eq!(spec.step(&big(10)).unwrap(), big(5));
        assert_eq!(spec.step(&big(1)).unwrap(), big(1), "1 is fixed by the minus variant");
    }

    #[test]
    fn naturals_domain_rejects_nonpositive() {
        let spec = MapSpec::classic();
        assert!(matches!(spec.step(&big(0)), Err(MapError::OutsideDomain { .. })));
        assert!(matches!(spec.step(&big(-4)), Err(MapError::OutsideDomain { .. })));
    }

    #[test]
    fn integers_domain_has_negative_fixed_point() {
        let spec = MapSpec::classic().on_integers();
        assert_eq!(spec.step(&big(-1)).unwrap(), big(-1), "-1 is odd: (-3+1)/2 = -1");
        assert_eq!(spec.step(&big(-2)).unwrap(), big(-1));
        let traj = spec.trajectory(&big(-5), 4).unwrap();
        assert_eq!(traj.values(), &[big(-5), big(-7), big(-10), big(-5), big(-7)]);
    }

    #[test]
    fn trajectory_of_seven() {
        let spec = MapSpec::classic();
        let traj = spec.trajectory(&big(7), 3).unwrap();
        assert_eq!(traj.values(), &[big(7), big(11), big(17), big(26)]);
    }

    #[test]
    fn trajectory_reaches_the_small_cycle() {
        let spec = MapSpec::classic();
        assert_eq!(spec.trajectory(&big(1), 2).unwrap().values(), &[big(1), big(2), big(1)]);
        assert_eq!(spec.trajectory(&big(4), 2).unwrap().values(), &[big(4), big(2), big(1)]);
    }

    #[test]
    fn parity_vector_of_seven() {
        let spec = MapSpec::classic();
        let pv = spec.parity_vector(&big(7), 3).unwrap();
        assert_eq!(pv.bits(), &[true, true, true], "7, 11, 17 are all odd");
        assert_eq!(pv.total(), 3);
    }

    #[test]
    fn parity_vector_partial_sums() {
        let spec = MapSpec::classic();
        let pv = spec.parity_vector(&big(4), 2).unwrap();
        assert_eq!(pv.bits(), &[false, false]);
        assert_eq!(pv.partial_sum(2), 0);

        let pv = spec.parity_vector(&big(1), 2).unwrap();
        assert_eq!(pv.bits(), &[true, false], "1 is odd, T(1) = 2 is even");
        assert_eq!(pv.partial_sum(1), 1);
        assert_eq!(pv.partial_sum(2), 1);
    }

    #[test]
    fn weak_drop_examples() {
        let spec = MapSpec::classic();
        assert_eq!(spec.first_weak_drop(&big(2), 5).unwrap(), Some(1), "T(2) = 1 <= 2");
        // Orbit of 3: 5, 8, 4, 2 -- the first value <= 3 is 2, at m = 4.
        assert_eq!(spec.first_weak_drop(&big(3), 5).unwrap(), Some(4));
        // Orbit of 7: 11, 17, 26, 13, 20, 10 -- every iterate exceeds 7.
        assert_eq!(spec.first_weak_drop(&big(7), 6).unwrap(), None);
    }

    #[test]
    fn strict_drop_differs_from_weak_on_the_cycle() {
        let spec = MapSpec::classic();
        assert_eq!(spec.first_strict_drop(&big(1), 5).unwrap(), None, "orbit 2,1,2,1,... never < 1");
        assert_eq!(spec.first_weak_drop(&big(1), 5).unwrap(), Some(2), "T^2(1) = 1 <= 1");
    }

    #[test]
    fn odd_step_is_exact_beyond_word_size() {
        let spec = MapSpec::classic();
        let y: BigInt = (BigInt::from(1) << 100u32) + 1; // odd
        let expected = (&y * 3 + 1) / 2;
        assert_eq!(spec.step(&y).unwrap(), expected);
        assert!(spec.step(&y).unwrap() > BigInt::from(u64::MAX));
    }

    #[test]
    fn fast_u64_path_matches_bigint() {
        let spec = MapSpec::classic();
        for x in 1..=10_000u64 {
            let fast = step_u64(Variant::Classic, x);
            let slow = spec.step(&BigInt::from(x)).unwrap();
            assert_eq!(BigInt::from(fast), slow, "mismatch at x = {x}");
        }
        let minus = MapSpec::minus();
        for x in 1..=10_000u64 {
            let fast = step_u64(Variant::Minus, x);
            let slow = minus.step(&BigInt::from(x)).unwrap();
            assert_eq!(BigInt::from(fast), slow, "minus mismatch at x = {x}");
        }
    }
}
