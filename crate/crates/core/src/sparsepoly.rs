//! Exact sparse multivariate polynomials.
//!
//! A polynomial is a map from monomials to nonzero coefficients over a
//! [`FieldSpec`]. Exponents are arbitrary-precision naturals. Terms iterate
//! and serialize in graded lexicographic order: lower total degree first,
//! ties broken by comparing exponent vectors in variable-universe order
//! (earlier variables have higher precedence; at the first differing
//! variable the larger exponent sorts later). This fixed order makes every
//! downstream serialization and tie-break byte-deterministic.
//!
//! Powers are taken structurally rather than by blind repeated squaring:
//! single-term bases stay symbolic at any exponent, two-term bases expand by
//! the binomial theorem (digitwise over F_p, so only the terms Lucas's
//! theorem keeps alive are ever enumerated), and general bases over F_p
//! factor through d = sum e_i p^i as f^d = prod (f^(p^i))^(e_i). That is
//! what makes gadget instances with exponents in the millions affordable.

use crate::algebra::{
    base_p_digits, binomial_mod, exp, multinomial_support_count, AlgebraError, Exponent,
    FieldElement, FieldSpec,
};
use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PolyError {
    #[error("field mismatch: {0} vs {1}")]
    FieldMismatch(FieldSpec, FieldSpec),
    #[error("variable universe mismatch")]
    UniverseMismatch,
    #[error("variable id {0} outside universe of size {1}")]
    VariableOutOfRange(u32, usize),
    #[error("duplicate variable name {0:?}")]
    DuplicateVariable(String),
    #[error("no image for variable {0:?}")]
    MissingImage(String),
    #[error("term cap {cap} exceeded (at least {reached} terms)")]
    TermCapExceeded { cap: usize, reached: usize },
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error("malformed polynomial JSON: {0}")]
    Json(String),
}

/// Ordered list of variable names; index order is the precedence order used
/// by the monomial comparison and all serializations.
#[derive(Debug, Clone)]
pub struct VarUniverse(Arc<Vec<String>>);

impl VarUniverse {
    pub fn new<S: Into<String>>(names: Vec<S>) -> Result<VarUniverse, PolyError> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        let mut seen = BTreeSet::new();
        for n in &names {
            if !seen.insert(n.clone()) {
                return Err(PolyError::DuplicateVariable(n.clone()));
            }
        }
        Ok(VarUniverse(Arc::new(names)))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn name(&self, id: u32) -> &str {
        &self.0[id as usize]
    }

    pub fn id(&self, name: &str) -> Option<u32> {
        self.0.iter().position(|n| n == name).map(|i| i as u32)
    }

    pub fn names(&self) -> &[String] {
        &self.0
    }

    pub fn ids(&self) -> impl Iterator<Item = u32> {
        0..self.len() as u32
    }
}

impl PartialEq for VarUniverse {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0 == other.0
    }
}
impl Eq for VarUniverse {}

/// A monomial: sparse exponent vector plus cached total degree.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Monomial {
    degree: Exponent,
    /// (variable id, exponent) pairs, ascending by id, exponents nonzero.
    pairs: Vec<(u32, Exponent)>,
}

impl Monomial {
    pub fn one() -> Monomial {
        Monomial {
            degree: Exponent::zero(),
            pairs: Vec::new(),
        }
    }

    pub fn var(v: u32, e: Exponent) -> Monomial {
        if e.is_zero() {
            return Monomial::one();
        }
        Monomial {
            degree: e.clone(),
            pairs: vec![(v, e)],
        }
    }

    /// Builds from arbitrary (id, exponent) pairs: sorts, merges duplicates,
    /// drops zero exponents.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (u32, Exponent)>) -> Monomial {
        let mut pairs: Vec<(u32, Exponent)> = pairs.into_iter().filter(|(_, e)| !e.is_zero()).collect();
        pairs.sort_by_key(|(v, _)| *v);
        let mut merged: Vec<(u32, Exponent)> = Vec::with_capacity(pairs.len());
        for (v, e) in pairs {
            match merged.last_mut() {
                Some((lv, le)) if *lv == v => *le += e,
                _ => merged.push((v, e)),
            }
        }
        let degree = merged.iter().fold(Exponent::zero(), |acc, (_, e)| acc + e);
        Monomial { degree, pairs: merged }
    }

    pub fn degree(&self) -> &Exponent {
        &self.degree
    }

    /// Number of variables with nonzero exponent.
    pub fn support(&self) -> usize {
        self.pairs.len()
    }

    pub fn exponent_of(&self, v: u32) -> Exponent {
        self.pairs
            .iter()
            .find(|(w, _)| *w == v)
            .map(|(_, e)| e.clone())
            .unwrap_or_else(Exponent::zero)
    }

    pub fn pairs(&self) -> impl Iterator<Item = (u32, &Exponent)> {
        self.pairs.iter().map(|(v, e)| (*v, e))
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let mut pairs = Vec::with_capacity(self.pairs.len() + other.pairs.len());
        let (mut ia, mut ib) = (0, 0);
        while ia < self.pairs.len() || ib < other.pairs.len() {
            match (self.pairs.get(ia), other.pairs.get(ib)) {
                (Some((va, ea)), Some((vb, eb))) => match va.cmp(vb) {
                    Ordering::Less => {
                        pairs.push((*va, ea.clone()));
                        ia += 1;
                    }
                    Ordering::Greater => {
                        pairs.push((*vb, eb.clone()));
                        ib += 1;
                    }
                    Ordering::Equal => {
                        pairs.push((*va, ea + eb));
                        ia += 1;
                        ib += 1;
                    }
                },
                (Some((va, ea)), None) => {
                    pairs.push((*va, ea.clone()));
                    ia += 1;
                }
                (None, Some((vb, eb))) => {
                    pairs.push((*vb, eb.clone()));
                    ib += 1;
                }
                (None, None) => unreachable!(),
            }
        }
        Monomial {
            degree: &self.degree + &other.degree,
            pairs,
        }
    }

    /// Raises every exponent by the same factor: self^e.
    pub fn pow_scale(&self, e: &Exponent) -> Monomial {
        if e.is_zero() {
            return Monomial::one();
        }
        Monomial {
            degree: &self.degree * e,
            pairs: self.pairs.iter().map(|(v, x)| (*v, x * e)).collect(),
        }
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        match self.degree.cmp(&other.degree) {
            Ordering::Equal => {}
            o => return o,
        }
        // Lexicographic on exponent vectors, earliest variable first.
        let (mut ia, mut ib) = (0, 0);
        loop {
            match (self.pairs.get(ia), other.pairs.get(ib)) {
                (None, None) => return Ordering::Equal,
                (Some(_), None) => return Ordering::Greater,
                (None, Some(_)) => return Ordering::Less,
                (Some((va, ea)), Some((vb, eb))) => match va.cmp(vb) {
                    // The side with a positive exponent at the earlier
                    // variable is the larger monomial.
                    Ordering::Less => return Ordering::Greater,
                    Ordering::Greater => return Ordering::Less,
                    Ordering::Equal => match ea.cmp(eb) {
                        Ordering::Equal => {
                            ia += 1;
                            ib += 1;
                        }
                        o => return o,
                    },
                },
            }
        }
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Exact sparse polynomial over a fixed field and variable universe.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparsePoly {
    field: FieldSpec,
    universe: VarUniverse,
    terms: BTreeMap<Monomial, FieldElement>,
}

impl SparsePoly {
    pub fn zero(field: FieldSpec, universe: VarUniverse) -> SparsePoly {
        SparsePoly {
            field,
            universe,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(field: FieldSpec, universe: VarUniverse, c: FieldElement) -> SparsePoly {
        let mut p = SparsePoly::zero(field, universe);
        if !c.is_zero() {
            p.terms.insert(Monomial::one(), c);
        }
        p
    }

    pub fn one(field: FieldSpec, universe: VarUniverse) -> SparsePoly {
        let one = field.one();
        SparsePoly::constant(field, universe, one)
    }

    /// Single-term polynomial c * mono.
    pub fn monomial(
        field: FieldSpec,
        universe: VarUniverse,
        mono: Monomial,
        c: FieldElement,
    ) -> Result<SparsePoly, PolyError> {
        SparsePoly::from_terms(field, universe, vec![(mono, c)])
    }

    /// Builds from arbitrary terms: validates ids and coefficient fields,
    /// combines duplicate monomials, drops zero coefficients.
    pub fn from_terms(
        field: FieldSpec,
        universe: VarUniverse,
        terms: impl IntoIterator<Item = (Monomial, FieldElement)>,
    ) -> Result<SparsePoly, PolyError> {
        let mut list: Vec<(Monomial, FieldElement)> = terms.into_iter().collect();
        for (m, c) in &list {
            if c.spec() != field {
                return Err(PolyError::FieldMismatch(field, c.spec()));
            }
            if let Some((v, _)) = m.pairs.iter().find(|(v, _)| *v as usize >= universe.len()) {
                return Err(PolyError::VariableOutOfRange(*v, universe.len()));
            }
        }
        list.sort_by(|a, b| a.0.cmp(&b.0));
        let mut map = BTreeMap::new();
        let mut iter = list.into_iter();
        if let Some((mut cur_m, mut cur_c)) = iter.next() {
            for (m, c) in iter {
                if m == cur_m {
                    cur_c = cur_c.add(&c);
                } else {
                    if !cur_c.is_zero() {
                        map.insert(cur_m, cur_c);
                    }
                    cur_m = m;
                    cur_c = c;
                }
            }
            if !cur_c.is_zero() {
                map.insert(cur_m, cur_c);
            }
        }
        Ok(SparsePoly {
            field,
            universe,
            terms: map,
        })
    }

    pub fn field(&self) -> FieldSpec {
        self.field
    }

    pub fn universe(&self) -> &VarUniverse {
        &self.universe
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &FieldElement)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, m: &Monomial) -> Option<&FieldElement> {
        self.terms.get(m)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Number of monomials with nonzero coefficient.
    pub fn sparsity(&self) -> usize {
        self.terms.len()
    }

    /// Largest per-monomial variable count; 0 for the zero polynomial.
    pub fn support(&self) -> usize {
        self.terms.keys().map(Monomial::support).max().unwrap_or(0)
    }

    /// Total degree; None for the zero polynomial.
    pub fn degree(&self) -> Option<Exponent> {
        self.terms.keys().map(|m| m.degree().clone()).max()
    }

    /// Distinct total degrees.
    pub fn degree_set(&self) -> BTreeSet<Exponent> {
        self.terms.keys().map(|m| m.degree().clone()).collect()
    }

    /// Distinct degrees in the variable v (monomials without v have degree 0).
    pub fn degree_set_wrt(&self, v: u32) -> BTreeSet<Exponent> {
        self.terms.keys().map(|m| m.exponent_of(v)).collect()
    }

    /// Variables that actually occur.
    pub fn variables(&self) -> BTreeSet<u32> {
        self.terms
            .keys()
            .flat_map(|m| m.pairs.iter().map(|(v, _)| *v))
            .collect()
    }

    fn check_compatible(&self, other: &SparsePoly) -> Result<(), PolyError> {
        if self.field != other.field {
            return Err(PolyError::FieldMismatch(self.field, other.field));
        }
        if self.universe != other.universe {
            return Err(PolyError::UniverseMismatch);
        }
        Ok(())
    }

    pub fn add(&self, other: &SparsePoly) -> Result<SparsePoly, PolyError> {
        self.check_compatible(other)?;
        let mut terms = self.terms.clone();
        for (m, c) in &other.terms {
            match terms.entry(m.clone()) {
                std::collections::btree_map::Entry::Vacant(e) => {
                    e.insert(c.clone());
                }
                std::collections::btree_map::Entry::Occupied(mut e) => {
                    let sum = e.get().add(c);
                    if sum.is_zero() {
                        e.remove();
                    } else {
                        *e.get_mut() = sum;
                    }
                }
            }
        }
        Ok(SparsePoly {
            field: self.field,
            universe: self.universe.clone(),
            terms,
        })
    }

    pub fn neg(&self) -> SparsePoly {
        SparsePoly {
            field: self.field,
            universe: self.universe.clone(),
            terms: self
                .terms
                .iter()
                .map(|(m, c)| (m.clone(), c.neg()))
                .collect(),
        }
    }

    pub fn sub(&self, other: &SparsePoly) -> Result<SparsePoly, PolyError> {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: &FieldElement) -> SparsePoly {
        if c.is_zero() {
            return SparsePoly::zero(self.field, self.universe.clone());
        }
        SparsePoly {
            field: self.field,
            universe: self.universe.clone(),
            terms: self
                .terms
                .iter()
                .map(|(m, k)| (m.clone(), k.mul(c)))
                .collect(),
        }
    }

    pub fn mul(&self, other: &SparsePoly) -> Result<SparsePoly, PolyError> {
        self.check_compatible(other)?;
        let mut out: Vec<(Monomial, FieldElement)> =
            Vec::with_capacity(self.terms.len().saturating_mul(other.terms.len()));
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                out.push((ma.mul(mb), ca.mul(cb)));
            }
        }
        SparsePoly::from_terms(self.field, self.universe.clone(), out)
    }

    /// Exact power.
    ///
    /// Single-term bases are raised symbolically (any exponent magnitude).
    /// Two-term bases expand by the binomial theorem; over F_p only the
    /// Lucas-nonzero terms are enumerated, so the cost is the output size
    /// even for exponents far beyond machine words. Other bases use the
    /// Frobenius digit decomposition over F_p and binary exponentiation
    /// over Q (where the exponent must then fit in u64).
    pub fn pow(&self, d: &Exponent) -> Result<SparsePoly, PolyError> {
        if d.is_zero() {
            return Ok(SparsePoly::one(self.field, self.universe.clone()));
        }
        if d.is_one() || self.is_zero() {
            return Ok(self.clone());
        }
        match self.terms.len() {
            1 => {
                let (m, c) = self.terms.iter().next().expect("one term");
                let coeff = c.pow(d)?;
                SparsePoly::monomial(self.field, self.universe.clone(), m.pow_scale(d), coeff)
            }
            2 => self.binomial_pow(d),
            _ => match self.field.char_p() {
                Some(_) => self.frobenius_pow(d),
                None => {
                    let small = d
                        .to_u64()
                        .ok_or_else(|| AlgebraError::ExponentTooLarge(d.clone()))?;
                    self.small_pow(small)
                }
            },
        }
    }

    /// Iterated multiplication: intermediate sizes only grow toward the
    /// final count, unlike binary squaring whose large squarings dominate
    /// on dense outputs.
    fn small_pow(&self, d: u64) -> Result<SparsePoly, PolyError> {
        let mut acc = SparsePoly::one(self.field, self.universe.clone());
        for _ in 0..d {
            acc = acc.mul(self)?;
        }
        Ok(acc)
    }

    /// (a·M + b·N)^d by the binomial theorem.
    fn binomial_pow(&self, d: &Exponent) -> Result<SparsePoly, PolyError> {
        let mut it = self.terms.iter();
        let (m1, c1) = it.next().expect("two terms");
        let (m2, c2) = it.next().expect("two terms");
        match self.field.char_p() {
            None => {
                let n = d
                    .to_u64()
                    .ok_or_else(|| AlgebraError::ExponentTooLarge(d.clone()))?;
                // Walk C(n,k)·c1^(n-k)·c2^k with incremental updates.
                let mut out = Vec::with_capacity((n + 1) as usize);
                let mut binom = BigUint::one();
                let mut pow1 = c1.pow(d)?;
                let c1_inv = c1.inverse().expect("nonzero coefficient");
                let mut pow2 = self.field.one();
                for k in 0..=n {
                    if k > 0 {
                        binom = binom * (n - k + 1) / k;
                        pow1 = pow1.mul(&c1_inv);
                        pow2 = pow2.mul(c2);
                    }
                    let coeff = self.field.from_biguint(&binom).mul(&pow1).mul(&pow2);
                    let mono = m1.pow_scale(&exp(n - k)).mul(&m2.pow_scale(&exp(k)));
                    out.push((mono, coeff));
                }
                SparsePoly::from_terms(self.field, self.universe.clone(), out)
            }
            Some(p) => {
                // Enumerate only the k whose every base-p digit stays within
                // the matching digit of d; those are exactly the k with
                // C(d,k) != 0 mod p.
                let digits = base_p_digits(d, p)?;
                let spec = self.field;
                let mut powers_of_p: Vec<Exponent> = Vec::with_capacity(digits.len());
                let mut pw = Exponent::one();
                for _ in 0..digits.len() {
                    powers_of_p.push(pw.clone());
                    pw *= p;
                }
                // Per-digit binomial tables C(digit, j) mod p.
                let tables: Vec<Vec<FieldElement>> = digits
                    .iter()
                    .map(|&dig| {
                        (0..=dig)
                            .map(|j| {
                                binomial_mod(&exp(dig), &exp(j), &spec).expect("j <= digit")
                            })
                            .collect()
                    })
                    .collect();
                let c1_pow_d = c1.pow(d)?;
                let c1_inv = c1.inverse().expect("nonzero coefficient");
                let mut kv = vec![0u64; digits.len()];
                let mut k = Exponent::zero();
                let mut out = Vec::new();
                loop {
                    let mut coeff = binomial_digit_product(&tables, &kv, &spec);
                    if !coeff.is_zero() {
                        // c1^(d-k)·c2^k = c1^d · (c2/c1)^k
                        let ratio = c2.mul(&c1_inv).pow(&k)?;
                        coeff = coeff.mul(&c1_pow_d).mul(&ratio);
                        if !coeff.is_zero() {
                            let mono = m1.pow_scale(&(d - &k)).mul(&m2.pow_scale(&k));
                            out.push((mono, coeff));
                        }
                    }
                    // Odometer increment over digit ranges.
                    let mut pos = 0;
                    loop {
                        if pos == digits.len() {
                            return SparsePoly::from_terms(
                                self.field,
                                self.universe.clone(),
                                out,
                            );
                        }
                        if kv[pos] < digits[pos] {
                            kv[pos] += 1;
                            k += &powers_of_p[pos];
                            break;
                        }
                        k -= &powers_of_p[pos] * kv[pos];
                        kv[pos] = 0;
                        pos += 1;
                    }
                }
            }
        }
    }

    /// f^d over F_p via f^d = prod_i (f^(p^i))^(e_i) for d = sum e_i p^i.
    fn frobenius_pow(&self, d: &Exponent) -> Result<SparsePoly, PolyError> {
        let p = self.field.char_p().expect("finite characteristic");
        let digits = base_p_digits(d, p)?;
        let mut acc = SparsePoly::one(self.field, self.universe.clone());
        let mut pw = Exponent::one();
        for (i, &e_i) in digits.iter().enumerate() {
            if i > 0 {
                pw *= p;
            }
            if e_i == 0 {
                continue;
            }
            // Frobenius twist: coefficients are fixed (c^p = c in F_p), so
            // f^(p^i) just scales every exponent by p^i.
            let twisted = SparsePoly {
                field: self.field,
                universe: self.universe.clone(),
                terms: self
                    .terms
                    .iter()
                    .map(|(m, c)| (m.pow_scale(&pw), c.clone()))
                    .collect(),
            };
            acc = acc.mul(&twisted.small_pow(e_i)?)?;
        }
        Ok(acc)
    }

    /// f(A z + b): replaces every variable by its affine image and expands.
    ///
    /// Images are raised with the structured `pow` above and cached per
    /// (variable, exponent), so repeated high powers of the same image
    /// (ubiquitous in the gadget instances) are expanded once.
    pub fn substitute(&self, sub: &AffineSubstitution) -> Result<SparsePoly, PolyError> {
        self.substitute_capped(sub, None)
    }

    /// `substitute` with a cap on the number of accumulated terms;
    /// exceeding it aborts with [`PolyError::TermCapExceeded`].
    pub fn substitute_capped(
        &self,
        sub: &AffineSubstitution,
        cap: Option<usize>,
    ) -> Result<SparsePoly, PolyError> {
        if self.field != sub.field {
            return Err(PolyError::FieldMismatch(self.field, sub.field));
        }
        if self.universe != sub.universe {
            return Err(PolyError::UniverseMismatch);
        }
        let mut cache: BTreeMap<(u32, Exponent), SparsePoly> = BTreeMap::new();
        let mut out: Vec<(Monomial, FieldElement)> = Vec::new();
        for (mono, c) in &self.terms {
            let mut acc = SparsePoly::constant(self.field, self.universe.clone(), c.clone());
            for (v, e) in mono.pairs() {
                let key = (v, e.clone());
                if !cache.contains_key(&key) {
                    let img = sub.image_poly(v).pow(e)?;
                    cache.insert(key.clone(), img);
                }
                acc = acc.mul(&cache[&key])?;
            }
            out.extend(acc.terms);
            if let Some(cap) = cap {
                if out.len() > cap {
                    return Err(PolyError::TermCapExceeded {
                        cap,
                        reached: out.len(),
                    });
                }
            }
        }
        SparsePoly::from_terms(self.field, self.universe.clone(), out)
    }
}

fn binomial_digit_product(
    tables: &[Vec<FieldElement>],
    kv: &[u64],
    spec: &FieldSpec,
) -> FieldElement {
    let mut acc = spec.one();
    for (table, &j) in tables.iter().zip(kv) {
        acc = acc.mul(&table[j as usize]);
    }
    acc
}

impl fmt::Display for SparsePoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{}", c.to_coeff_string())?;
            for (v, e) in m.pairs() {
                write!(f, "*{}^{}", self.universe.name(v), e)?;
            }
        }
        Ok(())
    }
}

/// True iff the (total or per-variable) degree sets of the given
/// polynomials are pairwise disjoint.
pub fn check_degree_separated(polys: &[&SparsePoly], wrt: Option<u32>) -> bool {
    let sets: Vec<BTreeSet<Exponent>> = polys
        .iter()
        .map(|p| match wrt {
            None => p.degree_set(),
            Some(v) => p.degree_set_wrt(v),
        })
        .collect();
    let total: usize = sets.iter().map(BTreeSet::len).sum();
    let mut union = BTreeSet::new();
    for s in sets {
        union.extend(s);
    }
    union.len() == total
}

/// Closed-form sparsity of l^d for a linear form l in exactly m variables
/// with all-nonzero coefficients; equals `pow(l, d).sparsity()`.
pub fn linear_power_sparsity(m: u64, d: &Exponent, field: &FieldSpec) -> Result<BigUint, PolyError> {
    Ok(multinomial_support_count(d, m, field)?)
}

/// One variable's affine image: a linear combination of variables plus a
/// constant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AffineForm {
    /// (variable id, coefficient), ascending id, nonzero coefficients.
    linear: Vec<(u32, FieldElement)>,
    constant: FieldElement,
}

impl AffineForm {
    pub fn new(
        linear: impl IntoIterator<Item = (u32, FieldElement)>,
        constant: FieldElement,
    ) -> AffineForm {
        let mut linear: Vec<(u32, FieldElement)> =
            linear.into_iter().filter(|(_, c)| !c.is_zero()).collect();
        linear.sort_by_key(|(v, _)| *v);
        AffineForm { linear, constant }
    }

    pub fn variable(v: u32, field: &FieldSpec) -> AffineForm {
        AffineForm {
            linear: vec![(v, field.one())],
            constant: field.zero(),
        }
    }

    pub fn constant_part(&self) -> &FieldElement {
        &self.constant
    }

    pub fn linear_terms(&self) -> impl Iterator<Item = (u32, &FieldElement)> {
        self.linear.iter().map(|(v, c)| (*v, c))
    }

    pub fn linear_len(&self) -> usize {
        self.linear.len()
    }

    pub fn coefficient_of(&self, v: u32) -> Option<&FieldElement> {
        self.linear.iter().find(|(w, _)| *w == v).map(|(_, c)| c)
    }

    pub fn is_identity_on(&self, v: u32) -> bool {
        self.constant.is_zero()
            && self.linear.len() == 1
            && self.linear[0].0 == v
            && self.linear[0].1.is_one()
    }
}

/// Total affine change of variables: an image for every universe variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AffineSubstitution {
    field: FieldSpec,
    universe: VarUniverse,
    images: Vec<AffineForm>,
    structured_tag: Option<StructuredTag>,
}

/// Marker for witnesses built in the canonical structured family
/// x_i -> X_i, y_i -> Y_i + c_i X_i (with X, Y scaled distinct variables).
/// Purely informative: verification and extraction always recompute from
/// the images themselves.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructuredTag {
    /// Pair index (1-based) -> the c coefficient applied to that pair.
    pub pair_c: BTreeMap<u32, FieldElement>,
}

impl AffineSubstitution {
    pub fn identity(field: FieldSpec, universe: VarUniverse) -> AffineSubstitution {
        let images = universe
            .ids()
            .map(|v| AffineForm::variable(v, &field))
            .collect();
        AffineSubstitution {
            field,
            universe,
            images,
            structured_tag: None,
        }
    }

    /// Pure translation z -> z + b.
    pub fn shift(
        field: FieldSpec,
        universe: VarUniverse,
        b: impl IntoIterator<Item = (u32, FieldElement)>,
    ) -> AffineSubstitution {
        let mut sub = AffineSubstitution::identity(field, universe);
        for (v, c) in b {
            sub.images[v as usize] = AffineForm::new(
                vec![(v, field.one())],
                c,
            );
        }
        sub
    }

    pub fn field(&self) -> FieldSpec {
        self.field
    }

    pub fn universe(&self) -> &VarUniverse {
        &self.universe
    }

    pub fn set_image(&mut self, v: u32, form: AffineForm) {
        self.images[v as usize] = form;
        self.structured_tag = None;
    }

    pub fn set_structured_tag(&mut self, tag: StructuredTag) {
        self.structured_tag = Some(tag);
    }

    pub fn structured_tag(&self) -> Option<&StructuredTag> {
        self.structured_tag.as_ref()
    }

    pub fn image(&self, v: u32) -> &AffineForm {
        &self.images[v as usize]
    }

    pub fn image_poly(&self, v: u32) -> SparsePoly {
        let form = self.image(v);
        let mut terms: Vec<(Monomial, FieldElement)> = form
            .linear
            .iter()
            .map(|(w, c)| (Monomial::var(*w, Exponent::one()), c.clone()))
            .collect();
        if !form.constant.is_zero() {
            terms.push((Monomial::one(), form.constant.clone()));
        }
        SparsePoly::from_terms(self.field, self.universe.clone(), terms)
            .expect("image forms are valid")
    }

    /// True iff every image has zero constant part.
    pub fn is_linear(&self) -> bool {
        self.images.iter().all(|f| f.constant.is_zero())
    }

    /// True iff the substitution is a pure translation.
    pub fn is_shift(&self) -> bool {
        self.universe
            .ids()
            .all(|v| {
                let f = self.image(v);
                f.linear.len() == 1 && f.linear[0].0 == v && f.linear[0].1.is_one()
            })
    }

    /// Exact Gaussian elimination on the linear part.
    pub fn is_invertible(&self) -> bool {
        let n = self.universe.len();
        let mut rows: Vec<Vec<FieldElement>> = self
            .images
            .iter()
            .map(|form| {
                let mut row = vec![self.field.zero(); n];
                for (v, c) in &form.linear {
                    row[*v as usize] = c.clone();
                }
                row
            })
            .collect();
        for col in 0..n {
            let Some(pivot) = (col..n).find(|&r| !rows[r][col].is_zero()) else {
                return false;
            };
            rows.swap(col, pivot);
            let inv = rows[col][col].inverse().expect("pivot nonzero");
            let pivot_row: Vec<FieldElement> = rows[col][col..n].to_vec();
            for row in rows.iter_mut().skip(col + 1) {
                if row[col].is_zero() {
                    continue;
                }
                let factor = row[col].mul(&inv);
                for (cell, p) in row[col..n].iter_mut().zip(&pivot_row) {
                    *cell = cell.sub(&p.mul(&factor));
                }
            }
        }
        true
    }

    /// The substitution w -> self(inner(w)): applies `inner` to every image
    /// of `self`, i.e. f(self(inner(w))) = substitute(substitute(f, self), inner).
    pub fn then(&self, inner: &AffineSubstitution) -> Result<AffineSubstitution, PolyError> {
        if self.field != inner.field {
            return Err(PolyError::FieldMismatch(self.field, inner.field));
        }
        if self.universe != inner.universe {
            return Err(PolyError::UniverseMismatch);
        }
        let images = self
            .images
            .iter()
            .map(|form| {
                let mut linear: BTreeMap<u32, FieldElement> = BTreeMap::new();
                let mut constant = form.constant.clone();
                for (w, c) in &form.linear {
                    let img = inner.image(*w);
                    for (u, k) in &img.linear {
                        let add = c.mul(k);
                        match linear.entry(*u) {
                            std::collections::btree_map::Entry::Vacant(e) => {
                                e.insert(add);
                            }
                            std::collections::btree_map::Entry::Occupied(mut e) => {
                                let s = e.get().add(&add);
                                if s.is_zero() {
                                    e.remove();
                                } else {
                                    *e.get_mut() = s;
                                }
                            }
                        }
                    }
                    constant = constant.add(&c.mul(&img.constant));
                }
                AffineForm {
                    linear: linear.into_iter().collect(),
                    constant,
                }
            })
            .collect();
        Ok(AffineSubstitution {
            field: self.field,
            universe: self.universe.clone(),
            images,
            structured_tag: None,
        })
    }
}

// ---------------------------------------------------------------------------
// Canonical JSON
// ---------------------------------------------------------------------------

/// Canonical JSON form:
/// `{"field": "q" | "fp:<p>", "vars": [names...], "terms": [{"coeff": s, "exps": {var: dec}}...]}`
/// with terms in graded-lex order and exps keyed by variable name.
/// Serialization is byte-deterministic.
pub fn poly_to_json(p: &SparsePoly) -> serde_json::Value {
    let mut terms = Vec::with_capacity(p.sparsity());
    for (m, c) in p.terms() {
        let mut exps = serde_json::Map::new();
        for (v, e) in m.pairs() {
            exps.insert(
                p.universe().name(v).to_string(),
                serde_json::Value::String(e.to_string()),
            );
        }
        let mut term = serde_json::Map::new();
        term.insert(
            "coeff".to_string(),
            serde_json::Value::String(c.to_coeff_string()),
        );
        term.insert("exps".to_string(), serde_json::Value::Object(exps));
        terms.push(serde_json::Value::Object(term));
    }
    serde_json::json!({
        "field": p.field().to_string(),
        "vars": p.universe().names(),
        "terms": terms,
    })
}

pub fn field_from_str(s: &str) -> Result<FieldSpec, PolyError> {
    if s == "q" {
        return Ok(FieldSpec::RATIONAL);
    }
    if let Some(p) = s.strip_prefix("fp:") {
        let p: u64 = p
            .parse()
            .map_err(|_| PolyError::Json(format!("bad field {s:?}")))?;
        return Ok(FieldSpec::prime(p)?);
    }
    Err(PolyError::Json(format!("bad field {s:?}")))
}

pub fn poly_from_json(v: &serde_json::Value) -> Result<SparsePoly, PolyError> {
    let obj = v
        .as_object()
        .ok_or_else(|| PolyError::Json("expected object".into()))?;
    let field = field_from_str(
        obj.get("field")
            .and_then(|f| f.as_str())
            .ok_or_else(|| PolyError::Json("missing field".into()))?,
    )?;
    let vars: Vec<String> = obj
        .get("vars")
        .and_then(|x| x.as_array())
        .ok_or_else(|| PolyError::Json("missing vars".into()))?
        .iter()
        .map(|n| {
            n.as_str()
                .map(String::from)
                .ok_or_else(|| PolyError::Json("var names must be strings".into()))
        })
        .collect::<Result<_, _>>()?;
    let universe = VarUniverse::new(vars)?;
    let mut terms = Vec::new();
    for t in obj
        .get("terms")
        .and_then(|x| x.as_array())
        .ok_or_else(|| PolyError::Json("missing terms".into()))?
    {
        let t = t
            .as_object()
            .ok_or_else(|| PolyError::Json("term must be object".into()))?;
        let coeff_s = t
            .get("coeff")
            .and_then(|c| c.as_str())
            .ok_or_else(|| PolyError::Json("missing coeff".into()))?;
        let coeff = FieldElement::parse(&field, coeff_s)
            .ok_or_else(|| PolyError::Json(format!("bad coefficient {coeff_s:?}")))?;
        if coeff.is_zero() {
            return Err(PolyError::Json("zero coefficient in terms".into()));
        }
        let mut pairs = Vec::new();
        for (name, e) in t
            .get("exps")
            .and_then(|x| x.as_object())
            .ok_or_else(|| PolyError::Json("missing exps".into()))?
        {
            let v = universe
                .id(name)
                .ok_or_else(|| PolyError::Json(format!("unknown variable {name:?}")))?;
            let e_s = e
                .as_str()
                .ok_or_else(|| PolyError::Json("exponent must be string".into()))?;
            let e: Exponent = e_s
                .parse()
                .map_err(|_| PolyError::Json(format!("bad exponent {e_s:?}")))?;
            if e.is_zero() {
                return Err(PolyError::Json("zero exponent in exps".into()));
            }
            pairs.push((v, e));
        }
        terms.push((Monomial::from_pairs(pairs), coeff));
    }
    SparsePoly::from_terms(field, universe, terms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::exp;

    fn q() -> FieldSpec {
        FieldSpec::RATIONAL
    }

    fn fp(p: u64) -> FieldSpec {
        FieldSpec::prime(p).unwrap()
    }

    fn uni(names: &[&str]) -> VarUniverse {
        VarUniverse::new(names.to_vec()).unwrap()
    }

    /// l = x_0 + x_1 + ... over the given field.
    fn linear_form(field: FieldSpec, universe: &VarUniverse, vars: &[u32]) -> SparsePoly {
        SparsePoly::from_terms(
            field,
            universe.clone(),
            vars.iter()
                .map(|&v| (Monomial::var(v, exp(1)), field.one())),
        )
        .unwrap()
    }

    #[test]
    fn graded_lex_order() {
        // degree dominates; ties: larger exponent at the earliest variable
        // sorts later.
        let x2 = Monomial::var(0, exp(2));
        let xy = Monomial::from_pairs(vec![(0, exp(1)), (1, exp(1))]);
        let y2 = Monomial::var(1, exp(2));
        let x = Monomial::var(0, exp(1));
        assert!(x < y2);
        assert!(y2 < xy);
        assert!(xy < x2);
        assert!(Monomial::one() < x);
    }

    #[test]
    fn monomial_algebra() {
        let m = Monomial::from_pairs(vec![(1, exp(2)), (0, exp(1)), (1, exp(3))]);
        assert_eq!(m.exponent_of(1), exp(5));
        assert_eq!(*m.degree(), exp(6));
        assert_eq!(m.support(), 2);
        let sq = m.pow_scale(&exp(2));
        assert_eq!(sq.exponent_of(0), exp(2));
        assert_eq!(*sq.degree(), exp(12));
        assert_eq!(Monomial::var(3, exp(0)), Monomial::one());
    }

    #[test]
    fn add_basics() {
        let u = uni(&["x", "y"]);
        let x = linear_form(q(), &u, &[0]);
        let zero = SparsePoly::zero(q(), u.clone());
        assert_eq!(x.add(&zero).unwrap(), x);
        assert!(x.add(&x.neg()).unwrap().is_zero());

        // (x^2) + (x^2) over F_2 cancels.
        let u2 = uni(&["x"]);
        let x2 = SparsePoly::monomial(fp(2), u2, Monomial::var(0, exp(2)), fp(2).one()).unwrap();
        assert!(x2.add(&x2).unwrap().is_zero());
    }

    #[test]
    fn pow_cube_of_sum() {
        let u = uni(&["x", "y"]);
        let l = linear_form(q(), &u, &[0, 1]);
        let cube = l.pow(&exp(3)).unwrap();
        assert_eq!(cube.sparsity(), 4);
        let x2y = Monomial::from_pairs(vec![(0, exp(2)), (1, exp(1))]);
        assert_eq!(cube.coefficient(&x2y), Some(&q().from_i64(3)));
    }

    #[test]
    fn pow_char2_freshman_dream() {
        let u = uni(&["x", "y"]);
        let l = linear_form(fp(2), &u, &[0, 1]);
        let square = l.pow(&exp(2)).unwrap();
        assert_eq!(square.sparsity(), 2);
        assert_eq!(l.pow(&exp(0)).unwrap(), SparsePoly::one(fp(2), u));
    }

    #[test]
    fn binomial_pow_matches_binary_pow() {
        for field in [q(), fp(2), fp(3), fp(5)] {
            let u = uni(&["x", "y"]);
            let l = SparsePoly::from_terms(
                field,
                u.clone(),
                vec![
                    (Monomial::var(0, exp(1)), field.from_i64(2)),
                    (Monomial::var(1, exp(1)), field.from_i64(-3)),
                ],
            )
            .unwrap();
            for d in [1u64, 2, 5, 8, 13] {
                let fast = l.pow(&exp(d)).unwrap();
                let slow = l.small_pow(d).unwrap();
                assert_eq!(fast, slow, "d={d} field={field}");
            }
        }
    }

    #[test]
    fn frobenius_pow_matches_binary_pow() {
        let u = uni(&["x", "y", "z"]);
        for p in [2u64, 3, 5] {
            let field = fp(p);
            let l = SparsePoly::from_terms(
                field,
                u.clone(),
                vec![
                    (Monomial::var(0, exp(1)), field.one()),
                    (Monomial::var(1, exp(1)), field.from_i64(2)),
                    (Monomial::var(2, exp(1)), field.one()),
                ],
            )
            .unwrap();
            for d in [3u64, 4, 7, 11, 16] {
                assert_eq!(l.pow(&exp(d)).unwrap(), l.small_pow(d).unwrap(), "p={p} d={d}");
            }
        }
    }

    #[test]
    fn giant_symbolic_power() {
        // x^(10^40) stays one term with an exact exponent.
        let u = uni(&["x"]);
        let x = linear_form(q(), &u, &[0]);
        let giant: Exponent = BigUint::from(10u64).pow(40);
        let powed = x.pow(&giant).unwrap();
        assert_eq!(powed.sparsity(), 1);
        assert_eq!(powed.degree(), Some(giant));
    }

    #[test]
    fn giant_binomial_power_over_f3() {
        // (x + 1)^(3^7 - 1) over F_3 has exactly 3^7 terms by Lucas.
        let u = uni(&["x"]);
        let f3 = fp(3);
        let base = SparsePoly::from_terms(
            f3,
            u.clone(),
            vec![
                (Monomial::var(0, exp(1)), f3.one()),
                (Monomial::one(), f3.one()),
            ],
        )
        .unwrap();
        let d = exp(3u64.pow(7) - 1);
        let powed = base.pow(&d).unwrap();
        assert_eq!(powed.sparsity(), 3usize.pow(7));
        assert_eq!(
            BigUint::from(powed.sparsity()),
            linear_power_sparsity(2, &d, &f3).unwrap()
        );
    }

    #[test]
    fn linear_power_sparsity_examples() {
        assert_eq!(linear_power_sparsity(2, &exp(5), &q()).unwrap(), exp(6));
        assert_eq!(linear_power_sparsity(2, &exp(3), &fp(2)).unwrap(), exp(4));
        assert_eq!(linear_power_sparsity(3, &exp(2), &q()).unwrap(), exp(6));
    }

    #[test]
    fn closed_form_matches_expansion_smoke() {
        let names = ["a", "b", "c", "d"];
        for m in 1..=4u64 {
            let u = uni(&names[..m as usize]);
            for field in [q(), fp(2), fp(3), fp(5)] {
                let l = SparsePoly::from_terms(
                    field,
                    u.clone(),
                    (0..m as u32).map(|v| {
                        (Monomial::var(v, exp(1)), field.from_i64(1 + v as i64))
                    }),
                )
                .unwrap();
                if l.sparsity() < m as usize {
                    continue; // a coefficient vanished in small characteristic
                }
                for d in [0u64, 1, 2, 3, 7, 12] {
                    let expansion = l.pow(&exp(d)).unwrap();
                    assert_eq!(
                        BigUint::from(expansion.sparsity()),
                        linear_power_sparsity(m, &exp(d), &field).unwrap(),
                        "m={m} d={d} field={field}"
                    );
                }
            }
        }
    }

    #[test]
    fn substitute_identity() {
        let u = uni(&["x", "y"]);
        let f = linear_form(q(), &u, &[0, 1]).pow(&exp(4)).unwrap();
        let id = AffineSubstitution::identity(q(), u);
        assert_eq!(f.substitute(&id).unwrap(), f);
    }

    #[test]
    fn substitute_collapses_pair() {
        // f = (y+x)^2; y -> y + x gives (y+2x)^2 with 3 terms over Q,
        // y^2 with 1 term over F_2.
        for (field, want) in [(q(), 3usize), (fp(2), 1)] {
            let u = uni(&["x", "y"]);
            let f = linear_form(field, &u, &[0, 1]).pow(&exp(2)).unwrap();
            let mut sub = AffineSubstitution::identity(field, u.clone());
            sub.set_image(
                1,
                AffineForm::new(
                    vec![(1, field.one()), (0, field.one())],
                    field.zero(),
                ),
            );
            let g = f.substitute(&sub).unwrap();
            assert_eq!(g.sparsity(), want, "field {field}");
            if field == q() {
                let xy = Monomial::from_pairs(vec![(0, exp(1)), (1, exp(1))]);
                assert_eq!(g.coefficient(&xy), Some(&q().from_i64(4)));
            }
        }
    }

    #[test]
    fn substitute_shift() {
        // (x+1)^2 from shifting x^2 by 1.
        let u = uni(&["x"]);
        let f = SparsePoly::monomial(q(), u.clone(), Monomial::var(0, exp(2)), q().one()).unwrap();
        let sub = AffineSubstitution::shift(q(), u, vec![(0, q().one())]);
        let g = f.substitute(&sub).unwrap();
        assert_eq!(g.sparsity(), 3);
        assert_eq!(g.coefficient(&Monomial::one()), Some(&q().one()));
    }

    #[test]
    fn substitution_missing_nothing_total() {
        // substitutions are total by construction; spec's "missing image"
        // case is unrepresentable, so exercise the cap error instead.
        let u = uni(&["x", "y"]);
        let f = linear_form(q(), &u, &[0, 1]).pow(&exp(6)).unwrap();
        let mut sub = AffineSubstitution::identity(q(), u.clone());
        sub.set_image(
            1,
            AffineForm::new(vec![(1, q().one()), (0, q().from_i64(2))], q().zero()),
        );
        let err = f.substitute_capped(&sub, Some(3)).unwrap_err();
        assert!(matches!(err, PolyError::TermCapExceeded { cap: 3, .. }));
    }

    #[test]
    fn stats_and_degree_sets() {
        // f = x1^2 + x1 x2 + 4 x2 has degree set {2, 1}.
        let u = uni(&["x1", "x2"]);
        let f = SparsePoly::from_terms(
            q(),
            u.clone(),
            vec![
                (Monomial::var(0, exp(2)), q().one()),
                (
                    Monomial::from_pairs(vec![(0, exp(1)), (1, exp(1))]),
                    q().one(),
                ),
                (Monomial::var(1, exp(1)), q().from_i64(4)),
            ],
        )
        .unwrap();
        assert_eq!(f.degree_set(), BTreeSet::from([exp(1), exp(2)]));
        assert_eq!(f.degree_set_wrt(0), BTreeSet::from([exp(0), exp(1), exp(2)]));
        assert_eq!(f.sparsity(), 3);
        assert_eq!(f.support(), 2);
        assert_eq!(f.degree(), Some(exp(2)));

        let zero = SparsePoly::zero(q(), u);
        assert_eq!(zero.sparsity(), 0);
        assert_eq!(zero.support(), 0);
        assert!(zero.degree_set().is_empty());
        assert_eq!(zero.degree(), None);
    }

    #[test]
    fn product_of_pair_powers_has_support_six() {
        // (y1-x1)^3 (y2-x2)^3 (y3-x3)^3 over Q.
        let u = uni(&["x1", "y1", "x2", "y2", "x3", "y3"]);
        let mut f = SparsePoly::one(q(), u.clone());
        for pair in 0..3u32 {
            let diff = SparsePoly::from_terms(
                q(),
                u.clone(),
                vec![
                    (Monomial::var(2 * pair + 1, exp(1)), q().one()),
                    (Monomial::var(2 * pair, exp(1)), q().from_i64(-1)),
                ],
            )
            .unwrap();
            f = f.mul(&diff.pow(&exp(3)).unwrap()).unwrap();
        }
        assert_eq!(f.support(), 6);
        assert_eq!(f.sparsity(), 64);
    }

    #[test]
    fn degree_separation() {
        let u = uni(&["x"]);
        let x2 = SparsePoly::monomial(q(), u.clone(), Monomial::var(0, exp(2)), q().one()).unwrap();
        let x3 = SparsePoly::monomial(q(), u.clone(), Monomial::var(0, exp(3)), q().one()).unwrap();
        assert!(check_degree_separated(&[&x2, &x3], None));
        let f = x2
            .add(&SparsePoly::monomial(q(), u.clone(), Monomial::var(0, exp(1)), q().one()).unwrap())
            .unwrap();
        let g = x3.add(&x2).unwrap();
        assert!(!check_degree_separated(&[&f, &g], None));
        assert!(!check_degree_separated(&[&f, &g], Some(0)));
    }

    #[test]
    fn invertibility_by_elimination() {
        let u = uni(&["x", "y"]);
        let mut sub = AffineSubstitution::identity(q(), u.clone());
        sub.set_image(
            1,
            AffineForm::new(vec![(1, q().one()), (0, q().from_i64(5))], q().zero()),
        );
        assert!(sub.is_invertible());
        // y -> x is singular.
        sub.set_image(1, AffineForm::new(vec![(0, q().one())], q().zero()));
        assert!(!sub.is_invertible());
    }

    #[test]
    fn composition_matches_nested_substitution() {
        let f3 = fp(3);
        let u = uni(&["x", "y", "z"]);
        let f = linear_form(f3, &u, &[0, 1, 2]).pow(&exp(4)).unwrap();
        let mut a = AffineSubstitution::identity(f3, u.clone());
        a.set_image(
            1,
            AffineForm::new(vec![(1, f3.one()), (0, f3.from_i64(2))], f3.one()),
        );
        let mut b = AffineSubstitution::identity(f3, u.clone());
        b.set_image(0, AffineForm::new(vec![(2, f3.from_i64(2))], f3.zero()));
        b.set_image(2, AffineForm::new(vec![(0, f3.one())], f3.zero()));
        let nested = f.substitute(&a).unwrap().substitute(&b).unwrap();
        let composed = f.substitute(&a.then(&b).unwrap()).unwrap();
        assert_eq!(nested, composed);
    }

    #[test]
    fn json_roundtrip() {
        let u = uni(&["x0", "y1"]);
        let f = SparsePoly::from_terms(
            q(),
            u,
            vec![
                (Monomial::var(0, exp(29)), q().one()),
                (
                    Monomial::from_pairs(vec![(0, exp(2)), (1, exp(3))]),
                    q().from_ratio(-7, 2).unwrap(),
                ),
            ],
        )
        .unwrap();
        let v = poly_to_json(&f);
        let back = poly_from_json(&v).unwrap();
        assert_eq!(back, f);
        // Byte-determinism of the serialized form.
        assert_eq!(
            serde_json::to_string(&v).unwrap(),
            serde_json::to_string(&poly_to_json(&back)).unwrap()
        );

        let f3 = fp(3);
        let u2 = uni(&["a"]);
        let g = SparsePoly::from_terms(
            f3,
            u2,
            vec![(Monomial::var(0, BigUint::from(10u64).pow(30)), f3.from_i64(2))],
        )
        .unwrap();
        assert_eq!(poly_from_json(&poly_to_json(&g)).unwrap(), g);
    }

    #[test]
    fn json_rejects_malformed() {
        assert!(poly_from_json(&serde_json::json!({"field": "q"})).is_err());
        assert!(poly_from_json(&serde_json::json!({
            "field": "fp:4", "vars": ["x"], "terms": []
        }))
        .is_err());
        assert!(poly_from_json(&serde_json::json!({
            "field": "q", "vars": ["x"],
            "terms": [{"coeff": "0", "exps": {"x": "1"}}]
        }))
        .is_err());
        assert!(poly_from_json(&serde_json::json!({
            "field": "q", "vars": ["x"],
            "terms": [{"coeff": "1", "exps": {"y": "1"}}]
        }))
        .is_err());
    }
}
