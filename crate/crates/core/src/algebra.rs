//! Exact coefficient arithmetic over Q and prime fields F_p.
//!
//! Everything downstream counts monomials, and those counts are governed by
//! which binomial/multinomial coefficients vanish in the coefficient field.
//! This module supplies the field abstraction (exact rationals or residues
//! mod a prime), arbitrary-precision exponents, base-p digit decomposition,
//! and the Lucas-theorem binomial residues plus the closed-form monomial
//! count for powers of a linear form.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::fmt;

/// Arbitrary-precision natural number used for exponents and term counts.
///
/// Exponents of built instances can exceed any fixed width (the finite-field
/// support-style schedules produce powers like p^400), so exponent arithmetic
/// is big-integer throughout.
pub type Exponent = BigUint;

/// Convenience constructor for small exponents.
pub fn exp(v: u64) -> Exponent {
    BigUint::from(v)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AlgebraError {
    #[error("base must be at least 2, got {0}")]
    InvalidBase(u64),
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("binomial lower index exceeds upper index")]
    KExceedsN,
    #[error("division by zero in field {0}")]
    ZeroInverse(FieldSpec),
    #[error("linear form needs at least one variable")]
    EmptyLinearForm,
    #[error("mixed-field arithmetic: {0} vs {1}")]
    FieldMismatch(FieldSpec, FieldSpec),
    #[error("exponent {0} too large for exact rational power")]
    ExponentTooLarge(Exponent),
}

/// The coefficient field: characteristic 0 (exact rationals) or a prime p.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FieldSpec {
    characteristic: u64,
}

impl FieldSpec {
    /// The rational field Q.
    pub const RATIONAL: FieldSpec = FieldSpec { characteristic: 0 };

    /// F_p for prime p. Primality is checked by deterministic trial
    /// division; the toolkit targets desk-scale primes, and a verifier
    /// should not depend on a probabilistic test.
    pub fn prime(p: u64) -> Result<FieldSpec, AlgebraError> {
        if is_prime(p) {
            Ok(FieldSpec { characteristic: p })
        } else {
            Err(AlgebraError::NotPrime(p))
        }
    }

    pub fn characteristic(&self) -> u64 {
        self.characteristic
    }

    /// Some(p) for finite characteristic, None for Q.
    pub fn char_p(&self) -> Option<u64> {
        (self.characteristic != 0).then_some(self.characteristic)
    }

    pub fn zero(&self) -> FieldElement {
        FieldElement {
            spec: *self,
            repr: match self.char_p() {
                None => Repr::Rat(BigRational::zero()),
                Some(_) => Repr::Res(0),
            },
        }
    }

    pub fn one(&self) -> FieldElement {
        self.from_i64(1)
    }

    /// Embeds a signed integer (reduced mod p over finite characteristic).
    pub fn from_i64(&self, v: i64) -> FieldElement {
        match self.char_p() {
            None => FieldElement {
                spec: *self,
                repr: Repr::Rat(BigRational::from_integer(BigInt::from(v))),
            },
            Some(p) => {
                let b = BigInt::from(v).mod_floor(&BigInt::from(p));
                FieldElement {
                    spec: *self,
                    repr: Repr::Res(b.to_u64().expect("reduced residue fits u64")),
                }
            }
        }
    }

    /// Embeds an exact rational n/d; over F_p this is n·d^{-1} and fails if
    /// p divides d.
    pub fn from_ratio(&self, numer: i64, denom: i64) -> Result<FieldElement, AlgebraError> {
        assert!(denom != 0, "zero denominator");
        match self.char_p() {
            None => Ok(FieldElement {
                spec: *self,
                repr: Repr::Rat(BigRational::new(BigInt::from(numer), BigInt::from(denom))),
            }),
            Some(_) => {
                let n = self.from_i64(numer);
                let d = self.from_i64(denom);
                Ok(n.mul(&d.inverse()?))
            }
        }
    }

    /// Embeds a big natural number (reduced mod p over finite characteristic).
    pub fn from_biguint(&self, v: &BigUint) -> FieldElement {
        match self.char_p() {
            None => FieldElement {
                spec: *self,
                repr: Repr::Rat(BigRational::from_integer(BigInt::from(v.clone()))),
            },
            Some(p) => FieldElement {
                spec: *self,
                repr: Repr::Res((v % p).to_u64().expect("residue fits u64")),
            },
        }
    }
}

impl fmt::Display for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.char_p() {
            None => write!(f, "q"),
            Some(p) => write!(f, "fp:{p}"),
        }
    }
}

/// Deterministic trial-division primality check.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n.is_multiple_of(2) {
        return n == 2;
    }
    let mut d = 3u64;
    while let Some(sq) = d.checked_mul(d) {
        if sq > n {
            break;
        }
        if n.is_multiple_of(d) {
            return false;
        }
        d += 2;
    }
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Repr {
    /// Reduced fraction, canonical sign (BigRational keeps denominator > 0).
    Rat(BigRational),
    /// Residue in [0, p).
    Res(u64),
}

/// An element of the coefficient field, carrying its field.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FieldElement {
    spec: FieldSpec,
    repr: Repr,
}

impl FieldElement {
    pub fn spec(&self) -> FieldSpec {
        self.spec
    }

    pub fn is_zero(&self) -> bool {
        match &self.repr {
            Repr::Rat(r) => r.is_zero(),
            Repr::Res(v) => *v == 0,
        }
    }

    pub fn is_one(&self) -> bool {
        match &self.repr {
            Repr::Rat(r) => r.is_one(),
            Repr::Res(v) => *v == 1,
        }
    }

    fn assert_same(&self, other: &FieldElement) {
        assert!(
            self.spec == other.spec,
            "mixed-field arithmetic: {} vs {}",
            self.spec,
            other.spec
        );
    }

    pub fn add(&self, other: &FieldElement) -> FieldElement {
        self.assert_same(other);
        let repr = match (&self.repr, &other.repr) {
            (Repr::Rat(a), Repr::Rat(b)) => Repr::Rat(a + b),
            (Repr::Res(a), Repr::Res(b)) => {
                let p = self.spec.characteristic as u128;
                Repr::Res(((*a as u128 + *b as u128) % p) as u64)
            }
            _ => unreachable!("same spec implies same repr"),
        };
        FieldElement { spec: self.spec, repr }
    }

    pub fn sub(&self, other: &FieldElement) -> FieldElement {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &FieldElement) -> FieldElement {
        self.assert_same(other);
        let repr = match (&self.repr, &other.repr) {
            (Repr::Rat(a), Repr::Rat(b)) => Repr::Rat(a * b),
            (Repr::Res(a), Repr::Res(b)) => {
                let p = self.spec.characteristic as u128;
                Repr::Res(((*a as u128 * *b as u128) % p) as u64)
            }
            _ => unreachable!("same spec implies same repr"),
        };
        FieldElement { spec: self.spec, repr }
    }

    pub fn neg(&self) -> FieldElement {
        let repr = match &self.repr {
            Repr::Rat(a) => Repr::Rat(-a),
            Repr::Res(a) => {
                let p = self.spec.characteristic;
                Repr::Res(if *a == 0 { 0 } else { p - *a })
            }
        };
        FieldElement { spec: self.spec, repr }
    }

    pub fn inverse(&self) -> Result<FieldElement, AlgebraError> {
        if self.is_zero() {
            return Err(AlgebraError::ZeroInverse(self.spec));
        }
        let repr = match &self.repr {
            Repr::Rat(a) => Repr::Rat(a.recip()),
            Repr::Res(a) => {
                let p = self.spec.characteristic;
                // Fermat: a^(p-2) mod p.
                Repr::Res(mod_pow_u64(*a, p - 2, p))
            }
        };
        Ok(FieldElement { spec: self.spec, repr })
    }

    /// Exact power with an arbitrary-precision exponent.
    ///
    /// Residues use modular exponentiation directly. Rationals of magnitude
    /// 0 or 1 reduce to a parity check; other rationals require the exponent
    /// to fit in u32 (the digit count of the result is linear in the
    /// exponent, so astronomically large powers are refused rather than
    /// silently attempted).
    pub fn pow(&self, e: &Exponent) -> Result<FieldElement, AlgebraError> {
        if e.is_zero() {
            return Ok(self.spec.one());
        }
        let repr = match &self.repr {
            Repr::Res(a) => Repr::Res(mod_pow_biguint(*a, e, self.spec.characteristic)),
            Repr::Rat(a) => {
                if a.is_zero() {
                    Repr::Rat(BigRational::zero())
                } else if a.abs().is_one() {
                    let odd = e.bit(0);
                    let negative = a.is_negative() && odd;
                    Repr::Rat(if negative {
                        -BigRational::one()
                    } else {
                        BigRational::one()
                    })
                } else {
                    let small = e
                        .to_u32()
                        .ok_or_else(|| AlgebraError::ExponentTooLarge(e.clone()))?;
                    Repr::Rat(num_traits::pow::pow(a.clone(), small as usize))
                }
            }
        };
        Ok(FieldElement { spec: self.spec, repr })
    }

    /// Canonical text form: decimal residue over F_p, "n" or "n/d" over Q.
    pub fn to_coeff_string(&self) -> String {
        match &self.repr {
            Repr::Res(v) => v.to_string(),
            Repr::Rat(r) => {
                if r.denom().is_one() {
                    r.numer().to_string()
                } else {
                    format!("{}/{}", r.numer(), r.denom())
                }
            }
        }
    }

    /// Parses the canonical text form produced by `to_coeff_string`.
    pub fn parse(spec: &FieldSpec, s: &str) -> Option<FieldElement> {
        match spec.char_p() {
            Some(p) => {
                let v: u64 = s.parse().ok()?;
                (v < p).then_some(FieldElement {
                    spec: *spec,
                    repr: Repr::Res(v),
                })
            }
            None => {
                let (n, d) = match s.split_once('/') {
                    Some((n, d)) => (n, d),
                    None => (s, "1"),
                };
                let numer: BigInt = n.parse().ok()?;
                let denom: BigInt = d.parse().ok()?;
                if denom.is_zero() {
                    return None;
                }
                Some(FieldElement {
                    spec: *spec,
                    repr: Repr::Rat(BigRational::new(numer, denom)),
                })
            }
        }
    }

    /// Total order used for deterministic tie-breaking (residues by value,
    /// rationals by numeric order).
    pub fn canonical_cmp(&self, other: &FieldElement) -> std::cmp::Ordering {
        self.assert_same(other);
        match (&self.repr, &other.repr) {
            (Repr::Res(a), Repr::Res(b)) => a.cmp(b),
            (Repr::Rat(a), Repr::Rat(b)) => a.cmp(b),
            _ => unreachable!(),
        }
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_coeff_string())
    }
}

fn mod_pow_u64(base: u64, mut e: u64, p: u64) -> u64 {
    let mut acc: u128 = 1;
    let mut b: u128 = (base % p) as u128;
    let p = p as u128;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * b % p;
        }
        b = b * b % p;
        e >>= 1;
    }
    acc as u64
}

fn mod_pow_biguint(base: u64, e: &Exponent, p: u64) -> u64 {
    BigUint::from(base % p)
        .modpow(e, &BigUint::from(p))
        .to_u64()
        .expect("residue fits u64")
}

/// Base-p digits of d, least significant first. `[0]` for d = 0, no
/// trailing zeros otherwise.
pub fn base_p_digits(d: &Exponent, p: u64) -> Result<Vec<u64>, AlgebraError> {
    if p < 2 {
        return Err(AlgebraError::InvalidBase(p));
    }
    if d.is_zero() {
        return Ok(vec![0]);
    }
    let big_p = BigUint::from(p);
    let mut rest = d.clone();
    let mut digits = Vec::new();
    while !rest.is_zero() {
        let (q, r) = rest.div_rem(&big_p);
        digits.push(r.to_u64().expect("digit fits u64"));
        rest = q;
    }
    Ok(digits)
}

/// Exact big-integer binomial coefficient C(n, k).
pub fn binomial_exact(n: &Exponent, k: &Exponent) -> Result<BigUint, AlgebraError> {
    if k > n {
        return Err(AlgebraError::KExceedsN);
    }
    // C(n,k) = C(n, n-k): iterate over the smaller side.
    let small = (k.clone()).min(n - k);
    let mut acc = BigUint::one();
    let mut i = BigUint::one();
    let mut factor = n - &small + 1u32;
    while i <= small {
        acc *= &factor;
        acc /= &i; // exact at every step: C(n-small+i, i) is integral
        factor += 1u32;
        i += 1u32;
    }
    Ok(acc)
}

/// C(n, k) in the given field: exact over Q, digitwise by Lucas's theorem
/// over F_p (zero as soon as some digit of k exceeds the matching digit
/// of n). The two agree: the Lucas value equals the exact binomial mod p.
pub fn binomial_mod(
    n: &Exponent,
    k: &Exponent,
    field: &FieldSpec,
) -> Result<FieldElement, AlgebraError> {
    if k > n {
        return Err(AlgebraError::KExceedsN);
    }
    match field.char_p() {
        None => Ok(field.from_biguint(&binomial_exact(n, k)?)),
        Some(p) => {
            let nd = base_p_digits(n, p)?;
            let kd = base_p_digits(k, p)?;
            let mut acc: u64 = 1;
            for (i, kd_i) in kd.iter().enumerate() {
                let nd_i = nd.get(i).copied().unwrap_or(0);
                if *kd_i > nd_i {
                    return Ok(field.zero());
                }
                acc = mul_mod(acc, binomial_small_mod(nd_i, *kd_i, p), p);
                if acc == 0 {
                    break;
                }
            }
            Ok(field.from_biguint(&BigUint::from(acc)))
        }
    }
}

/// C(n, k) mod p for 0 <= k <= n < p, by the multiplicative formula with
/// modular inverses (every divisor is < p, hence invertible).
fn binomial_small_mod(n: u64, k: u64, p: u64) -> u64 {
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for t in 1..=k {
        acc = mul_mod(acc, (n - k + t) % p, p);
        acc = mul_mod(acc, mod_pow_u64(t % p, p - 2, p), p);
    }
    acc
}

fn mul_mod(a: u64, b: u64, p: u64) -> u64 {
    ((a as u128 * b as u128) % p as u128) as u64
}

/// Number of monomials in l^d where l is a linear form in exactly m
/// variables with all coefficients nonzero.
///
/// Over characteristic 0 this is C(d+m-1, m-1) (every multinomial
/// coefficient survives). Over F_p it is the product of C(e_i+m-1, m-1)
/// over the base-p digits e_i of d: raising to p-th powers is injective on
/// monomials, so l^d factors through the digit decomposition and each digit
/// contributes its full characteristic-0 count.
pub fn multinomial_support_count(
    d: &Exponent,
    m: u64,
    field: &FieldSpec,
) -> Result<BigUint, AlgebraError> {
    if m == 0 {
        return Err(AlgebraError::EmptyLinearForm);
    }
    let count_for = |digit: &Exponent| -> Result<BigUint, AlgebraError> {
        binomial_exact(&(digit + exp(m - 1)), &exp(m - 1))
    };
    match field.char_p() {
        None => count_for(d),
        Some(p) => {
            let mut acc = BigUint::one();
            for digit in base_p_digits(d, p)? {
                acc *= count_for(&exp(digit))?;
            }
            Ok(acc)
        }
    }
}

/// Largest t >= 0 with base^t <= x, for x >= 1.
pub fn floor_log(base: u64, x: &Exponent) -> u64 {
    assert!(base >= 2 && !x.is_zero());
    let big = BigUint::from(base);
    let mut power = big.clone();
    let mut t = 0u64;
    while power <= *x {
        power *= &big;
        t += 1;
    }
    t
}

/// Smallest value of the form p^j - 1 (j >= 1) that is >= bound.
pub fn smallest_pk_minus_one_at_least(p: u64, bound: &Exponent) -> Exponent {
    let big = BigUint::from(p);
    let mut power = big.clone();
    loop {
        let candidate = &power - 1u32;
        if candidate >= *bound {
            return candidate;
        }
        power *= &big;
    }
}
