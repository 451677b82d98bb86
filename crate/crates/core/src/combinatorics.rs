//! Exact binomial and multiset coefficients, and a rational probability type.
//!
//! Every probability in this crate is carried as an exact rational. Floats
//! only appear at presentation time.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul};
use std::str::FromStr;
use std::sync::RwLock;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::ArithmeticError;

/// `C(n, k)`, zero when `k > n`.
pub fn binom(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        // acc * (n - i) is always divisible by (i + 1) at this point
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// Signed-argument binomial: any negative argument yields zero.
///
/// The recording-attack recursion indexes coefficients with differences such
/// as `i - j` that can go negative at the edges of the support.
pub fn binom_signed(n: i64, k: i64) -> BigUint {
    if n < 0 || k < 0 {
        BigUint::zero()
    } else {
        binom(n as u64, k as u64)
    }
}

/// Number of size-`k` multisets drawn from `n` elements, `C(n + k - 1, k)`.
pub fn multiset_coeff(n: u64, k: u64) -> BigUint {
    if k == 0 {
        return BigUint::one();
    }
    if n == 0 {
        return BigUint::zero();
    }
    binom(n + k - 1, k)
}

pub fn multiset_coeff_signed(n: i64, k: i64) -> BigUint {
    if n < 0 || k < 0 {
        BigUint::zero()
    } else {
        multiset_coeff(n as u64, k as u64)
    }
}

/// Memoized coefficient table.
///
/// Safe to share between threads: a fill is idempotent, so racing writers
/// store the same value and readers never observe anything but the exact
/// coefficient.
#[derive(Debug, Default)]
pub struct CoefficientCache {
    binomials: RwLock<HashMap<(u64, u64), BigUint>>,
    multisets: RwLock<HashMap<(u64, u64), BigUint>>,
}

impl CoefficientCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn binom(&self, n: i64, k: i64) -> BigUint {
        if n < 0 || k < 0 {
            return BigUint::zero();
        }
        Self::lookup(&self.binomials, (n as u64, k as u64), binom)
    }

    pub fn multiset(&self, n: i64, k: i64) -> BigUint {
        if n < 0 || k < 0 {
            return BigUint::zero();
        }
        Self::lookup(&self.multisets, (n as u64, k as u64), multiset_coeff)
    }

    pub fn len(&self) -> usize {
        self.binomials.read().map(|m| m.len()).unwrap_or(0)
            + self.multisets.read().map(|m| m.len()).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn lookup(
        table: &RwLock<HashMap<(u64, u64), BigUint>>,
        key: (u64, u64),
        compute: fn(u64, u64) -> BigUint,
    ) -> BigUint {
        if let Ok(map) = table.read() {
            if let Some(v) = map.get(&key) {
                return v.clone();
            }
        }
        let value = compute(key.0, key.1);
        if let Ok(mut map) = table.write() {
            map.entry(key).or_insert_with(|| value.clone());
        }
        value
    }
}

/// A probability held as an exact fraction in lowest terms, `0 <= p <= 1`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ExactProbability(BigRational);

impl ExactProbability {
    pub fn zero() -> Self {
        Self(BigRational::zero())
    }

    pub fn one() -> Self {
        Self(BigRational::one())
    }

    /// Builds `numerator / denominator`, checking the unit-interval bound.
    pub fn new(
        numerator: impl Into<BigUint>,
        denominator: impl Into<BigUint>,
    ) -> Result<Self, ArithmeticError> {
        let den: BigUint = denominator.into();
        if den.is_zero() {
            return Err(ArithmeticError::DivisionByZero);
        }
        let r = BigRational::new(BigInt::from(numerator.into()), BigInt::from(den));
        Self::from_rational(r)
    }

    pub fn from_rational(r: BigRational) -> Result<Self, ArithmeticError> {
        if r.is_negative() || r > BigRational::one() {
            return Err(ArithmeticError::OutOfUnitInterval(r.to_string()));
        }
        Ok(Self(r))
    }

    /// Parses `"0.70"`, `"7/10"` or `"1"` into an exact value.
    pub fn parse(s: &str) -> Result<Self, ArithmeticError> {
        let s = s.trim();
        let bad = || ArithmeticError::Parse(s.to_string());
        let r = if let Some((num, den)) = s.split_once('/') {
            let num = BigInt::from_str(num.trim()).map_err(|_| bad())?;
            let den = BigInt::from_str(den.trim()).map_err(|_| bad())?;
            if den.is_zero() {
                return Err(ArithmeticError::DivisionByZero);
            }
            BigRational::new(num, den)
        } else if let Some((int, frac)) = s.split_once('.') {
            if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad());
            }
            let int = if int.is_empty() { "0" } else { int };
            let whole = BigInt::from_str(int).map_err(|_| bad())?;
            let scale = BigInt::from(10u32).pow(frac.len() as u32);
            let frac = BigInt::from_str(frac).map_err(|_| bad())?;
            BigRational::new(whole * &scale + frac, scale)
        } else {
            BigRational::from_integer(BigInt::from_str(s).map_err(|_| bad())?)
        };
        Self::from_rational(r)
    }

    pub fn as_rational(&self) -> &BigRational {
        &self.0
    }

    pub fn into_rational(self) -> BigRational {
        self.0
    }

    pub fn numerator(&self) -> BigUint {
        self.0.numer().magnitude().clone()
    }

    pub fn denominator(&self) -> BigUint {
        self.0.denom().magnitude().clone()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.0.is_one()
    }

    /// Nearest `f64`, for display only.
    pub fn to_f64(&self) -> f64 {
        ratio_to_f64(self.0.numer(), self.0.denom())
    }

    /// `self + other`; an error if the sum leaves `[0, 1]`.
    pub fn checked_add(&self, other: &Self) -> Result<Self, ArithmeticError> {
        Self::from_rational(&self.0 + &other.0)
    }

    /// `self - other`; an error if the difference is negative.
    pub fn checked_sub(&self, other: &Self) -> Result<Self, ArithmeticError> {
        Self::from_rational(&self.0 - &other.0)
    }

    pub fn mul(&self, other: &Self) -> Self {
        Self(&self.0 * &other.0)
    }

    /// `self / other`; division by zero and quotients above one are errors.
    pub fn checked_div(&self, other: &Self) -> Result<Self, ArithmeticError> {
        if other.0.is_zero() {
            return Err(ArithmeticError::DivisionByZero);
        }
        Self::from_rational(&self.0 / &other.0)
    }
}

/// Converts a big ratio to `f64` without overflowing on huge operands.
pub(crate) fn ratio_to_f64(num: &BigInt, den: &BigInt) -> f64 {
    if let (Some(n), Some(d)) = (num.to_f64(), den.to_f64()) {
        if n.is_finite() && d.is_finite() && d != 0.0 {
            return n / d;
        }
    }
    // Shift both operands down to ~60 significant bits before dividing.
    let bits = num.bits().max(den.bits());
    let shift = bits.saturating_sub(60);
    let n = (num >> shift).to_f64().unwrap_or(0.0);
    let d = (den >> shift).to_f64().unwrap_or(0.0);
    if d == 0.0 {
        0.0
    } else {
        n / d
    }
}

impl fmt::Display for ExactProbability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.denom().is_one() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl fmt::Debug for ExactProbability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ExactProbability({})", self)
    }
}

impl FromStr for ExactProbability {
    type Err = ArithmeticError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

impl Mul for &ExactProbability {
    type Output = ExactProbability;
    fn mul(self, rhs: Self) -> ExactProbability {
        ExactProbability::mul(self, rhs)
    }
}

/// Unbounded sum of probabilities, used for normalization checks where the
/// total may legitimately be compared against one.
pub fn sum_rational<'a>(it: impl IntoIterator<Item = &'a ExactProbability>) -> BigRational {
    it.into_iter()
        .fold(BigRational::zero(), |acc, p| acc.add(&p.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(n: u32, d: u32) -> ExactProbability {
        ExactProbability::new(n, d).unwrap()
    }

    #[test]
    fn binomial_examples() {
        assert_eq!(binom(5, 2), BigUint::from(10u32));
        for n in 0..20 {
            assert_eq!(binom(n, 0), BigUint::one());
        }
        assert_eq!(binom(7, 9), BigUint::zero());
        assert_eq!(binom(0, 0), BigUint::one());
        assert_eq!(binom_signed(-1, 0), BigUint::zero());
        assert_eq!(binom_signed(3, -1), BigUint::zero());
    }

    #[test]
    fn binomial_is_exact_beyond_u64() {
        // C(100, 50) = 100891344545564193334812497256
        assert_eq!(
            binom(100, 50).to_string(),
            "100891344545564193334812497256"
        );
    }

    #[test]
    fn multiset_examples() {
        assert_eq!(multiset_coeff(4, 2), BigUint::from(10u32));
        assert_eq!(multiset_coeff(1, 5), BigUint::one());
        assert_eq!(multiset_coeff(0, 0), BigUint::one());
        assert_eq!(multiset_coeff(0, 3), BigUint::zero());
        for n in 0..10 {
            assert_eq!(multiset_coeff(n, 0), BigUint::one());
        }
    }

    // Enumerates non-decreasing k-tuples over 0..n.
    fn count_multisets(n: u64, k: u64) -> u64 {
        fn go(start: u64, n: u64, left: u64) -> u64 {
            if left == 0 {
                return 1;
            }
            (start..n).map(|x| go(x, n, left - 1)).sum()
        }
        go(0, n, k)
    }

    #[test]
    fn multiset_matches_enumeration() {
        for n in 0..=5 {
            for k in 0..=5 {
                assert_eq!(
                    multiset_coeff(n, k),
                    BigUint::from(count_multisets(n, k)),
                    "n={n} k={k}"
                );
                if n + k >= 1 {
                    assert_eq!(multiset_coeff(n, k), binom(n + k - 1, k));
                }
            }
        }
    }

    #[test]
    fn rational_examples() {
        assert_eq!(p(1, 6).checked_add(&p(2, 3)).unwrap(), p(5, 6));
        assert_eq!(p(1, 2).mul(&p(1, 3)), p(1, 6));
        assert_eq!(p(1, 4).checked_div(&p(1, 2)).unwrap(), p(1, 2));
        assert_eq!(
            p(1, 4).checked_div(&ExactProbability::zero()),
            Err(ArithmeticError::DivisionByZero)
        );
        assert!(matches!(
            p(2, 3).checked_add(&p(2, 3)),
            Err(ArithmeticError::OutOfUnitInterval(_))
        ));
        assert_eq!(ExactProbability::new(2u32, 4u32).unwrap().to_string(), "1/2");
    }

    #[test]
    fn decimal_parsing_is_exact() {
        assert_eq!(ExactProbability::parse("0.70").unwrap(), p(7, 10));
        assert_eq!(ExactProbability::parse(".5").unwrap(), p(1, 2));
        assert_eq!(ExactProbability::parse("3/4").unwrap(), p(3, 4));
        assert_eq!(ExactProbability::parse("1").unwrap(), ExactProbability::one());
        assert!(ExactProbability::parse("1.5").is_err());
        assert!(ExactProbability::parse("abc").is_err());
        assert!(ExactProbability::parse("1/0").is_err());
    }

    #[test]
    fn cache_agrees_with_direct_evaluation() {
        let cache = CoefficientCache::new();
        for n in -2..15i64 {
            for k in -2..15i64 {
                assert_eq!(cache.binom(n, k), binom_signed(n, k));
                assert_eq!(cache.multiset(n, k), multiset_coeff_signed(n, k));
                // second read hits the memo
                assert_eq!(cache.binom(n, k), binom_signed(n, k));
            }
        }
        assert!(!cache.is_empty());
    }

    #[test]
    fn huge_ratio_to_f64() {
        let den = BigInt::from(binom(2000, 1000));
        let num = &den / BigInt::from(4u32);
        let v = ratio_to_f64(&num, &den);
        assert!((v - 0.25).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn symmetry(n in 0u64..60, k in 0u64..60) {
            prop_assume!(k <= n);
            prop_assert_eq!(binom(n, k), binom(n, n - k));
        }

        #[test]
        fn pascal(n in 1u64..60, k in 1u64..60) {
            prop_assert_eq!(binom(n, k), binom(n - 1, k - 1) + binom(n - 1, k));
        }

        #[test]
        fn add_then_sub_is_identity(a in 0u32..1000, b in 0u32..1000, da in 1u32..1000, db in 1u32..1000) {
            prop_assume!(a <= da && b <= db);
            let x = p(a, da).mul(&p(1, 2));
            let y = p(b, db).mul(&p(1, 2));
            let s = x.checked_add(&y).unwrap();
            prop_assert_eq!(s.checked_sub(&y).unwrap(), x);
        }
    }
}
