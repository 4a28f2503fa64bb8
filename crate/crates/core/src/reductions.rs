//! The clause gadgets: reductions from 3-SAT to questions about sparse
//! polynomials.
//!
//! Four families are built here. Three share a "ladder" shape — a leading
//! pure power plus per-variable and per-clause blocks staggered along a
//! distinguished variable `x0`:
//!
//! * `etsparse` — paired variables (x_i, y_i), optionally translations-
//!   hardened (shift *and* scale resistant) or gap-amplified;
//! * `etsparse-hom` — the homogeneous version with a second balance
//!   variable `y0`;
//! * `setsparse` — single variables x_i shifted by constants, optionally
//!   gap-amplified.
//!
//! The fourth, `etsupport`, bounds monomial *support* instead of sparsity
//! and has no ladder: a long schedule of pure-power padding monomials plus
//! one low-degree block per clause.
//!
//! [`select_params`] fixes the degree schedule for a family over a given
//! field; [`build_instance`] expands the gadget exactly and cross-checks
//! every closed-form statistic against the expansion before returning.

use std::collections::BTreeMap;

use itertools::Itertools;
use num_bigint::BigUint;
use num_traits::{CheckedSub, One, ToPrimitive};
use serde_json::json;
use thiserror::Error;

use crate::algebra::{
    exp, floor_log, smallest_pk_minus_one_at_least, AlgebraError, Exponent, FieldElement,
    FieldSpec,
};
use crate::cnf::{normalize_first_clause_complemented, CnfError, CnfFormula, FlipRecord};
use crate::sparsepoly::{
    poly_to_json, AffineForm, Monomial, PolyError, SparsePoly, VarUniverse,
};

/// Refuse to expand instances past this many predicted terms. The closed
/// forms stay valid at any size; the expansions exist to *check* them, and
/// a desk-scale cap keeps that honest use fast.
pub const BUILD_TERM_CAP: u64 = 1_000_000;

#[derive(Debug, Error)]
pub enum ReductionError {
    #[error("need n >= 1 variables and m >= 1 clauses (got n={n}, m={m})")]
    DegenerateInput { n: u64, m: u64 },
    #[error("sigma must be at least 5 (got {0})")]
    SigmaTooSmall(u64),
    #[error("the support reduction needs sigma")]
    SigmaRequired,
    #[error("sigma only applies to the support reduction")]
    SigmaNotApplicable,
    #[error("the support reduction needs n >= sigma + 4 (sigma={sigma}, n={n})")]
    TooFewVariables { sigma: u64, n: u64 },
    #[error("the support reduction needs characteristic 0 or p > sigma + 1 (sigma={sigma}, p={p})")]
    CharacteristicTooSmall { sigma: u64, p: u64 },
    #[error("the support reduction needs distinct clauses (clauses {first} and {second} coincide)")]
    RepeatedClause { first: usize, second: usize },
    #[error("translations hardening only applies to the non-homogeneous pair gadget")]
    TranslationsNotApplicable,
    #[error("translations hardening and gap amplification are separate hardenings; combining them is unsupported")]
    TranslationsWithGap,
    #[error("gap amplification does not apply to the support reduction")]
    GapNotApplicable,
    #[error("epsilon must satisfy 0 < epsilon < 1/3 (got {num}/{den})")]
    BadEpsilon { num: u64, den: u64 },
    #[error("base degree override {got} breaks the schedule condition: {condition}")]
    OverrideBelowMinimum { got: String, condition: String },
    #[error("degree schedule violated its own constraints: {0}")]
    ScheduleViolation(String),
    #[error("instance construction invariant failed: {0}")]
    BuildInvariant(String),
    #[error("instance would exceed the desk-scale cap of {cap} terms (predicted {predicted})")]
    TooLarge { predicted: String, cap: u64 },
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Cnf(#[from] CnfError),
}

// ---------------------------------------------------------------------------
// variants

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Problem {
    EtSparse,
    EtSparseHom,
    SetSparse,
    EtSupport,
}

impl Problem {
    pub fn as_str(&self) -> &'static str {
        match self {
            Problem::EtSparse => "etsparse",
            Problem::EtSparseHom => "etsparse-hom",
            Problem::SetSparse => "setsparse",
            Problem::EtSupport => "etsupport",
        }
    }
}

impl std::fmt::Display for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Gap amplification: pushes the base clause degree up to a floor derived
/// from the instance size so the unsat/sat sparsity ratio provably exceeds
/// s^(1/3 - epsilon). `override_base_degree` replaces that floor wholesale
/// (useful at desk scale), subject to the structural schedule conditions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GapSpec {
    /// epsilon as an exact fraction (num, den), 0 < epsilon < 1/3.
    pub epsilon: (u64, u64),
    pub override_base_degree: Option<Exponent>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variant {
    pub problem: Problem,
    pub sigma: Option<u64>,
    pub gap: Option<GapSpec>,
    pub translations_hardened: bool,
}

impl Variant {
    pub fn etsparse() -> Variant {
        Variant {
            problem: Problem::EtSparse,
            sigma: None,
            gap: None,
            translations_hardened: false,
        }
    }

    pub fn etsparse_hom() -> Variant {
        Variant {
            problem: Problem::EtSparseHom,
            ..Variant::etsparse()
        }
    }

    pub fn setsparse() -> Variant {
        Variant {
            problem: Problem::SetSparse,
            ..Variant::etsparse()
        }
    }

    pub fn etsupport(sigma: u64) -> Variant {
        Variant {
            problem: Problem::EtSupport,
            sigma: Some(sigma),
            ..Variant::etsparse()
        }
    }

    pub fn with_gap(mut self, gap: GapSpec) -> Variant {
        self.gap = Some(gap);
        self
    }

    pub fn with_translations(mut self) -> Variant {
        self.translations_hardened = true;
        self
    }

    pub fn validate(&self) -> Result<(), ReductionError> {
        match self.problem {
            Problem::EtSupport => {
                let sigma = self.sigma.ok_or(ReductionError::SigmaRequired)?;
                if sigma < 5 {
                    return Err(ReductionError::SigmaTooSmall(sigma));
                }
                if self.gap.is_some() {
                    return Err(ReductionError::GapNotApplicable);
                }
            }
            _ => {
                if self.sigma.is_some() {
                    return Err(ReductionError::SigmaNotApplicable);
                }
            }
        }
        if self.translations_hardened {
            if self.problem != Problem::EtSparse {
                return Err(ReductionError::TranslationsNotApplicable);
            }
            if self.gap.is_some() {
                return Err(ReductionError::TranslationsWithGap);
            }
        }
        if let Some(gap) = &self.gap {
            let (num, den) = gap.epsilon;
            let ok = num > 0 && den > 0 && num.checked_mul(3).is_some_and(|t| t < den);
            if !ok {
                return Err(ReductionError::BadEpsilon { num, den });
            }
        }
        Ok(())
    }
}

/// Characteristic split the schedules care about: 0, 2, or an odd prime.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CharRegime {
    Zero,
    Two,
    Odd(u64),
}

impl CharRegime {
    pub fn of(field: &FieldSpec) -> CharRegime {
        match field.characteristic() {
            0 => CharRegime::Zero,
            2 => CharRegime::Two,
            p => CharRegime::Odd(p),
        }
    }

    pub fn char_p(&self) -> Option<u64> {
        match self {
            CharRegime::Zero => None,
            CharRegime::Two => Some(2),
            CharRegime::Odd(p) => Some(*p),
        }
    }
}

// ---------------------------------------------------------------------------
// degree schedules

/// A fixed degree schedule plus the sat-side budget it certifies.
///
/// `s` is the budget for the plain systems; for gap systems `s` records the
/// instance's full closed-form sparsity and `s0` the sat-side budget. For
/// `etsupport` the budget is the support target sigma and `power_schedule`
/// lists the padding exponents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegreeParams {
    pub d1: Option<Exponent>,
    pub d2: Option<Exponent>,
    pub d3: Option<Exponent>,
    pub d4: Option<Exponent>,
    pub d5: Option<Exponent>,
    pub s: BigUint,
    pub s0: Option<BigUint>,
    pub sigma: Option<u64>,
    pub epsilon: Option<(u64, u64)>,
    pub override_base_degree: Option<Exponent>,
    pub power_schedule: Option<Vec<Exponent>>,
}

impl DegreeParams {
    fn blank(s: BigUint) -> DegreeParams {
        DegreeParams {
            d1: None,
            d2: None,
            d3: None,
            d4: None,
            d5: None,
            s,
            s0: None,
            sigma: None,
            epsilon: None,
            override_base_degree: None,
            power_schedule: None,
        }
    }

    /// The bound a sparsifying witness must reach: sparsity budget for the
    /// ladder gadgets, support target for `etsupport`.
    pub fn budget(&self) -> &BigUint {
        self.s0.as_ref().unwrap_or(&self.s)
    }
}

/// floor(s^(1/3 - eps)) — the advertised unsat/sat gap at the built size.
pub fn gap_target_alpha(params: &DegreeParams) -> Option<BigUint> {
    let (num, den) = params.epsilon?;
    let e = den.checked_sub(3 * num)?;
    let root = den.checked_mul(3)?;
    if e > 10_000 || root > 1_000_000 {
        return None;
    }
    Some(params.s.pow(e as u32).nth_root(root as u32))
}

fn big(v: u64) -> BigUint {
    BigUint::from(v)
}

fn sq(x: &BigUint) -> BigUint {
    x * x
}

fn cube(x: &BigUint) -> BigUint {
    x * x * x
}

fn pk(p: u64, bound: &Exponent) -> Exponent {
    smallest_pk_minus_one_at_least(p, bound)
}

fn ppow(p: u64, k: u64) -> BigUint {
    big(p).pow(u32::try_from(k).expect("schedule exponent fits u32"))
}

/// 1 + n(dx+3) + m(dy+1)^2: what a collapsed translate of a pair gadget may
/// cost, and hence the sat-side budget.
fn pair_budget(n: u64, m: u64, dx: &Exponent, dy: &Exponent) -> BigUint {
    BigUint::one() + big(n) * (dx + 3u32) + big(m) * sq(&(dy + 1u32))
}

/// Budget for the single-variable gadget: 1 + n(d2+2) + m(d3+1)^2.
fn set_budget(n: u64, m: u64, d2: &Exponent, d3: &Exponent) -> BigUint {
    BigUint::one() + big(n) * (d2 + 2u32) + big(m) * sq(&(d3 + 1u32))
}

/// (3n+m+1)(d3+1): the rung height of the homogeneous ladder.
fn hom_block(n: u64, m: u64, d3: &Exponent) -> BigUint {
    (big(n) * 3u32 + m + 1u32) * (d3 + 1u32)
}

/// Default gap base-degree floor: 4mn over characteristic 0, 3pmn over F_p.
fn default_gap_floor(regime: CharRegime, n: u64, m: u64) -> Exponent {
    match regime.char_p() {
        None => big(4) * n * m,
        Some(p) => big(3) * p * n * m,
    }
}

fn gap_condition(
    ok: bool,
    condition: &str,
    gap: &GapSpec,
    got: &Exponent,
) -> Result<(), ReductionError> {
    if ok {
        return Ok(());
    }
    match &gap.override_base_degree {
        Some(_) => Err(ReductionError::OverrideBelowMinimum {
            got: got.to_string(),
            condition: condition.to_string(),
        }),
        None => Err(ReductionError::ScheduleViolation(condition.to_string())),
    }
}

fn params_ladder(
    d1: Exponent,
    d2: Exponent,
    d3: Exponent,
    d4: Option<Exponent>,
    d5: Option<Exponent>,
    s: BigUint,
) -> DegreeParams {
    DegreeParams {
        d1: Some(d1),
        d2: Some(d2),
        d3: Some(d3),
        d4,
        d5,
        ..DegreeParams::blank(s)
    }
}

/// Fix the degree schedule for `variant` over `field` at instance size
/// (n variables, m clauses). Pure arithmetic: no formula is needed, so
/// schedules can be compared across sizes cheaply.
pub fn select_params(
    variant: &Variant,
    field: &FieldSpec,
    n: u64,
    m: u64,
) -> Result<DegreeParams, ReductionError> {
    variant.validate()?;
    if n == 0 || m == 0 {
        return Err(ReductionError::DegenerateInput { n, m });
    }
    let regime = CharRegime::of(field);
    match variant.problem {
        Problem::EtSparse => {
            if variant.translations_hardened {
                Ok(translations_params(regime, n, m))
            } else if let Some(gap) = &variant.gap {
                nonhom_gap_params(regime, n, m, gap)
            } else {
                Ok(nonhom_params(regime, n, m))
            }
        }
        Problem::EtSparseHom => {
            if let Some(gap) = &variant.gap {
                hom_gap_params(regime, n, m, gap)
            } else {
                Ok(hom_params(regime, n, m))
            }
        }
        Problem::SetSparse => {
            if let Some(gap) = &variant.gap {
                setsparse_gap_params(regime, n, m, gap)
            } else {
                Ok(setsparse_params(regime, n, m))
            }
        }
        Problem::EtSupport => {
            etsupport_params(regime, variant.sigma.expect("validated"), n, m)
        }
    }
}

/// Plain pair gadget. Characteristic 0 takes the equalities
/// d4 = m, d3 = m(m+1)^2 + 1, d2 = 2 d3, d1 = max(s, d2+1); over F_p each
/// degree is rounded up to the least p^k - 1 meeting its bound, unless p
/// already exceeds the characteristic-0 top degree (then nothing rounds).
fn nonhom_params(regime: CharRegime, n: u64, m: u64) -> DegreeParams {
    let d4 = big(m);
    let d3 = big(m) * sq(&(&d4 + 1u32)) + 1u32;
    let d2 = &d3 * 2u32;
    let s = pair_budget(n, m, &d3, &d4);
    let d1 = std::cmp::max(s.clone(), &d2 + 1u32);
    if let Some(p) = regime.char_p() {
        if big(p) <= d1 {
            let d4 = pk(p, &big(m));
            let d3 = pk(p, &(big(m) * sq(&(&d4 + 1u32)) + 1u32));
            let d2 = pk(p, &(&d3 * 2u32));
            let s = pair_budget(n, m, &d3, &d4);
            let d1 = pk(p, &std::cmp::max(s.clone(), &d2 + 1u32));
            return params_ladder(d1, d2, d3, Some(d4), None, s);
        }
    }
    params_ladder(d1, d2, d3, Some(d4), None, s)
}

/// Translations-hardened pair gadget: the ladder steps by d2+1 instead of
/// d1 and the leading degree clears every summand even after scaling,
/// d1 = 6n(d2+1) + 2 d3 + 2.
fn translations_params(regime: CharRegime, n: u64, m: u64) -> DegreeParams {
    let d4 = big(m);
    let d3 = big(m) * sq(&(&d4 + 1u32)) + 1u32;
    let d2 = &d3 * 2u32;
    let d1 = big(n) * 6u32 * (&d2 + 1u32) + &d3 * 2u32 + 2u32;
    let s = pair_budget(n, m, &d3, &d4);
    if let Some(p) = regime.char_p() {
        if big(p) <= d1 {
            let d4 = pk(p, &big(m));
            let d3 = pk(p, &(big(m) * sq(&(&d4 + 1u32)) + 1u32));
            let d2 = pk(p, &(&d3 * 2u32));
            let d1 = pk(p, &(big(n) * 6u32 * (&d2 + 1u32) + &d3 * 2u32 + 2u32));
            let s = pair_budget(n, m, &d3, &d4);
            return params_ladder(d1, d2, d3, Some(d4), None, s);
        }
    }
    params_ladder(d1, d2, d3, Some(d4), None, s)
}

/// Gap-amplified pair gadget: the clause degree starts at a floor growing
/// with the instance (or the caller's override) and the upper degrees are
/// squared rather than merely doubled, so the unsat floor (d4+1)^3 dwarfs
/// the sat budget.
fn nonhom_gap_params(
    regime: CharRegime,
    n: u64,
    m: u64,
    gap: &GapSpec,
) -> Result<DegreeParams, ReductionError> {
    let base = gap
        .override_base_degree
        .clone()
        .unwrap_or_else(|| default_gap_floor(regime, n, m));
    let (d1, d2, d3, d4) = match regime.char_p() {
        None => {
            let d4 = base;
            let d3 = big(m) * sq(&(&d4 + 1u32)) + 1u32;
            let d2 = sq(&d3) + 1u32;
            let d1 = &d2 + 1u32;
            (d1, d2, d3, d4)
        }
        Some(p) => {
            let d4 = pk(p, &base);
            let d3 = pk(p, &(big(m) * sq(&(&d4 + 1u32)) + 1u32));
            let d2 = pk(p, &(sq(&(&d3 + 1u32)) + 1u32));
            let d1 = pk(p, &(&d2 + 1u32));
            (d1, d2, d3, d4)
        }
    };
    gap_condition(d4 >= big(m), "d4 >= m", gap, &d4)?;
    let s0 = pair_budget(n, m, &d3, &d4);
    gap_condition(d1 >= s0, "d1 >= translate budget", gap, &d4)?;
    let s = BigUint::one() + big(n) * (&d3 * 2u32 + 3u32) + big(m) * cube(&(&d4 + 1u32));
    let mut params = params_ladder(d1, d2, d3, Some(d4), None, s);
    params.s0 = Some(s0);
    params.epsilon = Some(gap.epsilon);
    params.override_base_degree = gap.override_base_degree.clone();
    Ok(params)
}

/// Homogeneous pair gadget. The balance variable's exponent budget forces
/// two extra degrees; over F_p the top two come from a digit pattern
/// p^(k1+k) - p^k that keeps every truncated binomial row fully nonzero.
fn hom_params(regime: CharRegime, n: u64, m: u64) -> DegreeParams {
    let d5 = big(m);
    let d4 = big(m) * sq(&(&d5 + 1u32)) + 1u32;
    let d3 = &d4 * 2u32;
    let s = pair_budget(n, m, &d4, &d5);
    let block = hom_block(n, m, &d3);
    let d2 = std::cmp::max(block.clone(), s.clone()) + 1u32;
    let d1 = &d2 + &block + 1u32;
    if let Some(p) = regime.char_p() {
        let total = &d1 + &d2 + &block;
        if big(p) <= total {
            let d5 = pk(p, &big(m));
            let d4 = pk(p, &(big(m) * sq(&(&d5 + 1u32)) + 1u32));
            let d3 = pk(p, &(&d4 * 2u32));
            let s = pair_budget(n, m, &d4, &d5);
            let block = hom_block(n, m, &d3);
            let k1 = floor_log(p, &s) + 1;
            let k2 = floor_log(p, &block) + 1;
            let d2 = ppow(p, k1 + k2) - ppow(p, k2);
            let k3 = floor_log(p, &(&d2 + &block)) + 1;
            let d1 = ppow(p, k1 + k3) - ppow(p, k3);
            return params_ladder(d1, d2, d3, Some(d4), Some(d5), s);
        }
    }
    params_ladder(d1, d2, d3, Some(d4), Some(d5), s)
}

fn hom_gap_params(
    regime: CharRegime,
    n: u64,
    m: u64,
    gap: &GapSpec,
) -> Result<DegreeParams, ReductionError> {
    let base = gap
        .override_base_degree
        .clone()
        .unwrap_or_else(|| default_gap_floor(regime, n, m));
    let (d1, d2, d3, d4, d5, s) = match regime.char_p() {
        None => {
            let d5 = base;
            gap_condition(d5 >= big(m), "d5 >= m", gap, &d5)?;
            let d4 = big(m) * sq(&(&d5 + 1u32)) + 1u32;
            let d3 = sq(&d4) + 1u32;
            let s =
                BigUint::one() + big(n) * (&d4 * 2u32 + 3u32) + big(m) * cube(&(&d5 + 1u32));
            let block = hom_block(n, m, &d3);
            let d2 = std::cmp::max(block.clone(), s.clone()) + 1u32;
            let d1 = &d2 + &block + 1u32;
            (d1, d2, d3, d4, d5, s)
        }
        Some(p) => {
            let d5 = pk(p, &base);
            gap_condition(d5 >= big(m), "d5 >= m", gap, &d5)?;
            let d4 = pk(p, &(big(m) * sq(&(&d5 + 1u32)) + 1u32));
            let d3 = pk(p, &(sq(&(&d4 + 1u32)) + 1u32));
            let s =
                BigUint::one() + big(n) * (&d4 * 2u32 + 3u32) + big(m) * cube(&(&d5 + 1u32));
            let block = hom_block(n, m, &d3);
            let k1 = floor_log(p, &(&d3 + 2u32)) + 1;
            let k2 = floor_log(p, &block) + 1;
            let d2 = ppow(p, k1 + k2) - ppow(p, k2);
            let k3 = floor_log(p, &(&d2 + &block)) + 1;
            let d1 = ppow(p, k1 + k3) - ppow(p, k3);
            gap_condition(
                d2 > std::cmp::max(block.clone(), s.clone()),
                "d2 > max(ladder height, sparsity)",
                gap,
                &d5,
            )?;
            gap_condition(d1 > &d2 + &block, "d1 > d2 + ladder height", gap, &d5)?;
            (d1, d2, d3, d4, d5, s)
        }
    };
    let s0 = pair_budget(n, m, &d4, &d5);
    let mut params = params_ladder(d1, d2, d3, Some(d4), Some(d5), s);
    params.s0 = Some(s0);
    params.epsilon = Some(gap.epsilon);
    params.override_base_degree = gap.override_base_degree.clone();
    Ok(params)
}

/// Single-variable gadget: d3 = m, d2 = m(d3+1)^2 + 1,
/// d1 = 4n(d2+1) + 2 d2 + 2, with the usual p^k - 1 rounding over F_p.
fn setsparse_params(regime: CharRegime, n: u64, m: u64) -> DegreeParams {
    let d3 = big(m);
    let d2 = big(m) * sq(&(&d3 + 1u32)) + 1u32;
    let d1 = big(n) * 4u32 * (&d2 + 1u32) + &d2 * 2u32 + 2u32;
    let s = set_budget(n, m, &d2, &d3);
    if let Some(p) = regime.char_p() {
        if big(p) <= d1 {
            let d3 = pk(p, &big(m));
            let d2 = pk(p, &(big(m) * sq(&(&d3 + 1u32)) + 1u32));
            let d1 = pk(p, &(big(n) * 4u32 * (&d2 + 1u32) + &d2 * 2u32 + 2u32));
            let s = set_budget(n, m, &d2, &d3);
            return params_ladder(d1, d2, d3, None, None, s);
        }
    }
    params_ladder(d1, d2, d3, None, None, s)
}

fn setsparse_gap_params(
    regime: CharRegime,
    n: u64,
    m: u64,
    gap: &GapSpec,
) -> Result<DegreeParams, ReductionError> {
    let base = gap
        .override_base_degree
        .clone()
        .unwrap_or_else(|| default_gap_floor(regime, n, m));
    let (d1, d2, d3) = match regime.char_p() {
        None => {
            let d3 = base;
            let d2 = big(m) * sq(&(&d3 + 1u32)) + 1u32;
            let d1 = sq(&d2) + big(n) * 4u32 * (&d2 + 1u32) + &d2 * 2u32 + 2u32;
            (d1, d2, d3)
        }
        Some(p) => {
            let d3 = pk(p, &base);
            let d2 = pk(p, &(big(m) * sq(&(&d3 + 1u32)) + 1u32));
            let d1 = pk(
                p,
                &(sq(&d2) + big(n) * 4u32 * (&d2 + 1u32) + &d2 * 2u32 + 2u32),
            );
            (d1, d2, d3)
        }
    };
    gap_condition(d3 >= big(m), "d3 >= m", gap, &d3)?;
    let s0 = set_budget(n, m, &d2, &d3);
    let s = BigUint::one() + big(n) * (&d2 * 2u32 + 2u32) + big(m) * cube(&(&d3 + 1u32));
    let mut params = params_ladder(d1, d2, d3, None, None, s);
    params.s0 = Some(s0);
    params.epsilon = Some(gap.epsilon);
    params.override_base_degree = gap.override_base_degree.clone();
    Ok(params)
}

/// Support gadget: no ladder degrees, just a strictly increasing schedule
/// of padding exponents, one per padding monomial. Over F_p the i-th
/// exponent is the unique p^t - 1 in [L_i, p L_i] with L_1 = sigma + 1 and
/// L_{i+1} = p L_i + 1; over Q it is simply sigma + i.
fn etsupport_params(
    regime: CharRegime,
    sigma: u64,
    n: u64,
    m: u64,
) -> Result<DegreeParams, ReductionError> {
    if n < sigma + 4 {
        return Err(ReductionError::TooFewVariables { sigma, n });
    }
    if let Some(p) = regime.char_p() {
        if p <= sigma + 1 {
            return Err(ReductionError::CharacteristicTooSmall { sigma, p });
        }
    }
    let p_count = crate::algebra::binomial_exact(&big(n + sigma - 5), &big(sigma))?;
    let half = sigma.div_ceil(2);
    let mut q_count = crate::algebra::binomial_exact(&big(n), &big(half))?;
    if sigma % 2 == 1 {
        q_count *= half;
    }
    let total = &p_count + &q_count;
    if total > big(BUILD_TERM_CAP) {
        return Err(ReductionError::TooLarge {
            predicted: total.to_string(),
            cap: BUILD_TERM_CAP,
        });
    }
    let count = total.to_u64().expect("under cap") as usize;
    let schedule = match regime.char_p() {
        None => (1..=count as u64).map(|i| big(sigma + i)).collect(),
        Some(p) => {
            let mut sched = Vec::with_capacity(count);
            let mut lo = big(sigma + 1);
            for _ in 0..count {
                sched.push(pk(p, &lo));
                lo = lo * p + 1u32;
            }
            sched
        }
    };
    let _ = m; // clause count does not enter the schedule
    let mut params = DegreeParams::blank(big(sigma));
    params.sigma = Some(sigma);
    params.power_schedule = Some(schedule);
    Ok(params)
}

// ---------------------------------------------------------------------------
// instances

/// One additive block of a gadget, kept both factored (products of powers
/// of affine forms, the shape substitution analysis wants) and expanded.
#[derive(Debug, Clone)]
pub struct Summand {
    pub label: String,
    /// Pair / variable index for per-variable blocks.
    pub variable_index: Option<u32>,
    /// 1-based clause index for clause blocks.
    pub clause_index: Option<usize>,
    pub factors: Vec<(AffineForm, Exponent)>,
    pub expanded: SparsePoly,
}

/// Predicted statistics, exact for the concrete formula. Over
/// characteristic 2 the clause blocks shrink with the complement pattern,
/// so the pattern-blind bound is kept alongside.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClosedForm {
    pub sparsity: BigUint,
    pub support: u32,
    pub degree: Exponent,
    pub sparsity_bound: Option<BigUint>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceStats {
    pub sparsity: BigUint,
    pub support: u32,
    pub degree: Exponent,
}

/// Why no two summands can merge or cancel terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeparationWitness {
    /// Pairwise disjoint total-degree sets.
    TotalDegree,
    /// Pairwise disjoint degree sets in one variable.
    Variable(u32),
    /// Degrees collide but the monomial sets are disjoint.
    DistinctMonomials,
}

#[derive(Debug, Clone)]
pub struct ReductionInstance {
    pub variant: Variant,
    pub field: FieldSpec,
    pub n: u32,
    pub m: usize,
    pub params: DegreeParams,
    /// The formula as given.
    pub source_formula: CnfFormula,
    /// The formula actually encoded (complement-normalized when the family
    /// requires it).
    pub formula: CnfFormula,
    pub flip: Option<FlipRecord>,
    pub universe: VarUniverse,
    pub summands: Vec<Summand>,
    pub f: SparsePoly,
    pub closed_form: ClosedForm,
    pub stats: InstanceStats,
}

impl ReductionInstance {
    pub fn budget(&self) -> &BigUint {
        self.params.budget()
    }

    /// Variable ids follow a fixed per-family layout.
    pub fn x0_id(&self) -> Option<u32> {
        match self.variant.problem {
            Problem::EtSupport => None,
            _ => Some(0),
        }
    }

    pub fn y0_id(&self) -> Option<u32> {
        (self.variant.problem == Problem::EtSparseHom).then_some(1)
    }

    /// Id of x_i (1-based i).
    pub fn x_id(&self, i: u32) -> u32 {
        assert!(i >= 1 && i <= self.n, "pair index out of range");
        match self.variant.problem {
            Problem::EtSparse | Problem::SetSparse => i,
            Problem::EtSparseHom => 1 + i,
            Problem::EtSupport => {
                let zc = self.variant.sigma.expect("sigma set") as u32 - 5;
                zc + i - 1
            }
        }
    }

    /// Id of y_i (1-based i), for the families that pair variables.
    pub fn y_id(&self, i: u32) -> Option<u32> {
        assert!(i >= 1 && i <= self.n, "pair index out of range");
        match self.variant.problem {
            Problem::EtSparse => Some(self.n + i),
            Problem::EtSparseHom => Some(1 + self.n + i),
            Problem::SetSparse => None,
            Problem::EtSupport => {
                let zc = self.variant.sigma.expect("sigma set") as u32 - 5;
                Some(zc + self.n + i - 1)
            }
        }
    }

    /// Id of z_j (1-based j) in the support gadget's prefix block.
    pub fn z_id(&self, j: u32) -> Option<u32> {
        if self.variant.problem != Problem::EtSupport {
            return None;
        }
        let zc = self.variant.sigma.expect("sigma set") as u32 - 5;
        (j >= 1 && j <= zc).then(|| j - 1)
    }

    /// Classify why the summands cannot share or cancel terms.
    pub fn separation(&self) -> Result<SeparationWitness, ReductionError> {
        classify_separation(&self.summands, &self.f, self.x0_id())
    }
}

fn classify_separation(
    summands: &[Summand],
    f: &SparsePoly,
    x0: Option<u32>,
) -> Result<SeparationWitness, ReductionError> {
    let total: usize = summands.iter().map(|s| s.expanded.sparsity()).sum();
    if f.sparsity() != total {
        return Err(ReductionError::BuildInvariant(format!(
            "summands share or cancel terms: {} expanded vs {} assembled",
            total,
            f.sparsity()
        )));
    }
    let disjoint_under = |key: &dyn Fn(&Summand) -> std::collections::BTreeSet<Exponent>| {
        let mut owner: BTreeMap<Exponent, usize> = BTreeMap::new();
        for (idx, s) in summands.iter().enumerate() {
            for d in key(s) {
                if owner.insert(d, idx).is_some() {
                    return false;
                }
            }
        }
        true
    };
    if disjoint_under(&|s: &Summand| s.expanded.degree_set()) {
        return Ok(SeparationWitness::TotalDegree);
    }
    if let Some(v) = x0 {
        if disjoint_under(&|s: &Summand| s.expanded.degree_set_wrt(v)) {
            return Ok(SeparationWitness::Variable(v));
        }
    }
    // Additivity already certifies that colliding degrees never share a
    // monomial.
    Ok(SeparationWitness::DistinctMonomials)
}

fn ensure(ok: bool, what: impl FnOnce() -> String) -> Result<(), ReductionError> {
    if ok {
        Ok(())
    } else {
        Err(ReductionError::BuildInvariant(what()))
    }
}

fn cap_check(predicted: &BigUint) -> Result<(), ReductionError> {
    if *predicted > big(BUILD_TERM_CAP) {
        return Err(ReductionError::TooLarge {
            predicted: predicted.to_string(),
            cap: BUILD_TERM_CAP,
        });
    }
    Ok(())
}

fn form_to_poly(
    field: FieldSpec,
    universe: &VarUniverse,
    form: &AffineForm,
) -> Result<SparsePoly, PolyError> {
    let mut terms: Vec<(Monomial, FieldElement)> = Vec::new();
    if !form.constant_part().is_zero() {
        terms.push((Monomial::one(), form.constant_part().clone()));
    }
    for (v, c) in form.linear_terms() {
        terms.push((Monomial::var(v, exp(1)), c.clone()));
    }
    SparsePoly::from_terms(field, universe.clone(), terms)
}

fn make_summand(
    field: FieldSpec,
    universe: &VarUniverse,
    label: String,
    variable_index: Option<u32>,
    clause_index: Option<usize>,
    factors: Vec<(AffineForm, Exponent)>,
) -> Result<Summand, ReductionError> {
    let mut expanded = SparsePoly::one(field, universe.clone());
    for (form, e) in &factors {
        let base = form_to_poly(field, universe, form)?;
        expanded = expanded.mul(&base.pow(e)?)?;
    }
    Ok(Summand {
        label,
        variable_index,
        clause_index,
        factors,
        expanded,
    })
}

fn assemble(
    field: FieldSpec,
    universe: &VarUniverse,
    summands: &[Summand],
) -> Result<SparsePoly, ReductionError> {
    let mut f = SparsePoly::zero(field, universe.clone());
    for s in summands {
        f = f.add(&s.expanded)?;
    }
    Ok(f)
}

fn measure(f: &SparsePoly) -> Result<InstanceStats, ReductionError> {
    Ok(InstanceStats {
        sparsity: big(f.sparsity() as u64),
        support: f.support() as u32,
        degree: f
            .degree()
            .ok_or_else(|| ReductionError::BuildInvariant("assembled zero polynomial".into()))?,
    })
}

/// Complemented-literal count per clause of the *encoded* formula.
fn complement_counts(formula: &CnfFormula) -> Vec<usize> {
    formula
        .clauses()
        .iter()
        .map(|c| c.literals().iter().filter(|l| l.negated).count())
        .collect()
}

fn powi(x: &BigUint, e: usize) -> BigUint {
    x.pow(e as u32)
}

#[allow(clippy::too_many_arguments)]
fn finish_instance(
    variant: &Variant,
    field: &FieldSpec,
    params: DegreeParams,
    source: &CnfFormula,
    work: CnfFormula,
    flip: Option<FlipRecord>,
    universe: VarUniverse,
    summands: Vec<Summand>,
    closed_form: ClosedForm,
) -> Result<ReductionInstance, ReductionError> {
    let f = assemble(*field, &universe, &summands)?;
    let stats = measure(&f)?;
    ensure(stats.sparsity == closed_form.sparsity, || {
        format!(
            "sparsity: closed form {} vs expansion {}",
            closed_form.sparsity, stats.sparsity
        )
    })?;
    ensure(stats.support == closed_form.support, || {
        format!(
            "support: closed form {} vs expansion {}",
            closed_form.support, stats.support
        )
    })?;
    ensure(stats.degree == closed_form.degree, || {
        format!(
            "degree: closed form {} vs expansion {}",
            closed_form.degree, stats.degree
        )
    })?;
    if variant.problem == Problem::EtSparseHom {
        ensure(f.degree_set().len() == 1, || {
            "homogeneous gadget has mixed total degrees".into()
        })?;
    }
    let inst = ReductionInstance {
        variant: variant.clone(),
        field: *field,
        n: source.num_vars(),
        m: source.num_clauses(),
        params,
        source_formula: source.clone(),
        formula: work,
        flip,
        universe,
        summands,
        f,
        closed_form,
        stats,
    };
    inst.separation()?;
    Ok(inst)
}

/// Encode `formula` under `variant` over `field`: pick the schedule, expand
/// every summand exactly, and cross-check the closed-form statistics.
pub fn build_instance(
    formula: &CnfFormula,
    variant: &Variant,
    field: &FieldSpec,
) -> Result<ReductionInstance, ReductionError> {
    variant.validate()?;
    match variant.problem {
        Problem::EtSparse => build_nonhom(formula, variant, field),
        Problem::EtSparseHom => build_hom(formula, variant, field),
        Problem::SetSparse => build_setsparse(formula, variant, field),
        Problem::EtSupport => build_etsupport(formula, variant, field),
    }
}

/// Did the schedule keep interior binomial terms of (y ± x)^d alive?
/// Needs d >= 2, and over characteristic 2 the all-ones digit pattern
/// (d = 2^k - 1 >= 3); the support constants hinge on it.
fn has_interior(char2: bool, d: &Exponent) -> bool {
    if char2 {
        *d >= big(3)
    } else {
        *d >= big(2)
    }
}

fn build_nonhom(
    formula: &CnfFormula,
    variant: &Variant,
    field: &FieldSpec,
) -> Result<ReductionInstance, ReductionError> {
    let n = formula.num_vars();
    let m = formula.num_clauses();
    let params = select_params(variant, field, n as u64, m as u64)?;
    let translations = variant.translations_hardened;
    let char2 = field.characteristic() == 2;
    let (work, flip) = if char2 {
        let (w, fl) = normalize_first_clause_complemented(formula);
        (w, Some(fl))
    } else {
        (formula.clone(), None)
    };
    let comps = complement_counts(&work);
    let d1 = params.d1.clone().expect("ladder sets d1");
    let d2 = params.d2.clone().expect("ladder sets d2");
    let d3 = params.d3.clone().expect("ladder sets d3");
    let d4 = params.d4.clone().expect("ladder sets d4");

    let nb = big(n as u64);
    let mb = big(m as u64);
    let (sparsity, bound) = if char2 {
        let per_var = &nb * (&d3 + 3u32);
        let exact = BigUint::one()
            + &per_var
            + comps
                .iter()
                .map(|&c| powi(&(&d4 + 1u32), c))
                .sum::<BigUint>();
        let blind = BigUint::one() + per_var + &mb * cube(&(&d4 + 1u32));
        (exact, Some(blind))
    } else {
        let exact = BigUint::one() + &nb * (&d3 * 2u32 + 3u32) + &mb * cube(&(&d4 + 1u32));
        (exact, None)
    };
    cap_check(&sparsity)?;

    let mut names = vec!["x0".to_string()];
    names.extend((1..=n).map(|i| format!("x{i}")));
    names.extend((1..=n).map(|i| format!("y{i}")));
    let universe = VarUniverse::new(names)?;

    let x0 = AffineForm::variable(0, field);
    let step = |t: u64| -> Exponent {
        if translations {
            big(t) * (&d2 + 1u32)
        } else {
            big(t) * &d1
        }
    };
    let mut summands = Vec::with_capacity(1 + 3 * n as usize + m);
    summands.push(make_summand(
        *field,
        &universe,
        "lead".into(),
        None,
        None,
        vec![(x0.clone(), d1.clone())],
    )?);
    for i in 1..=n {
        let (xi, yi) = (i, n + i);
        summands.push(make_summand(
            *field,
            &universe,
            format!("Q{i}.1"),
            Some(i),
            None,
            vec![
                (x0.clone(), step(3 * i as u64 - 2)),
                (AffineForm::variable(xi, field), d2.clone()),
            ],
        )?);
        summands.push(make_summand(
            *field,
            &universe,
            format!("Q{i}.2"),
            Some(i),
            None,
            vec![
                (x0.clone(), step(3 * i as u64 - 1)),
                (
                    AffineForm::new(
                        [(yi, field.one()), (xi, field.one())],
                        field.zero(),
                    ),
                    d3.clone(),
                ),
            ],
        )?);
        let third = if char2 {
            AffineForm::variable(yi, field)
        } else {
            AffineForm::new([(yi, field.one()), (xi, field.from_i64(-1))], field.zero())
        };
        summands.push(make_summand(
            *field,
            &universe,
            format!("Q{i}.3"),
            Some(i),
            None,
            vec![(x0.clone(), step(3 * i as u64)), (third, d3.clone())],
        )?);
    }
    for (k0, clause) in work.clauses().iter().enumerate() {
        let k = k0 + 1;
        let e = if translations {
            big(k as u64) * (&d4 * 3u32 + 1u32)
        } else {
            big(3 * n as u64 + k as u64) * &d1
        };
        let mut factors = vec![(x0.clone(), e)];
        for lit in clause.literals() {
            let (xj, yj) = (lit.var, n + lit.var);
            let form = if char2 {
                if lit.negated {
                    AffineForm::new([(yj, field.one()), (xj, field.one())], field.zero())
                } else {
                    AffineForm::variable(yj, field)
                }
            } else {
                let c = if lit.negated {
                    field.from_i64(-1)
                } else {
                    field.one()
                };
                AffineForm::new([(yj, field.one()), (xj, c)], field.zero())
            };
            factors.push((form, d4.clone()));
        }
        summands.push(make_summand(
            *field,
            &universe,
            format!("R{k}"),
            None,
            Some(k),
            factors,
        )?);
    }

    let max_comp = comps.iter().copied().max().unwrap_or(0) as u32;
    let support = if has_interior(char2, &d4) {
        if char2 {
            4 + max_comp
        } else {
            7
        }
    } else {
        4
    };
    let degree = if translations {
        d1.clone()
    } else {
        big(3 * n as u64 + m as u64) * &d1 + &d4 * 3u32
    };
    let closed_form = ClosedForm {
        sparsity,
        support,
        degree,
        sparsity_bound: bound,
    };
    finish_instance(
        variant, field, params, formula, work, flip, universe, summands, closed_form,
    )
}

fn build_hom(
    formula: &CnfFormula,
    variant: &Variant,
    field: &FieldSpec,
) -> Result<ReductionInstance, ReductionError> {
    let n = formula.num_vars();
    let m = formula.num_clauses();
    let params = select_params(variant, field, n as u64, m as u64)?;
    let char2 = field.characteristic() == 2;
    let (work, flip) = if char2 {
        let (w, fl) = normalize_first_clause_complemented(formula);
        (w, Some(fl))
    } else {
        (formula.clone(), None)
    };
    let comps = complement_counts(&work);
    let d1 = params.d1.clone().expect("ladder sets d1");
    let d2 = params.d2.clone().expect("ladder sets d2");
    let d3 = params.d3.clone().expect("ladder sets d3");
    let d4 = params.d4.clone().expect("ladder sets d4");
    let d5 = params.d5.clone().expect("hom ladder sets d5");

    let nb = big(n as u64);
    let mb = big(m as u64);
    let (sparsity, bound) = if char2 {
        let per_var = &nb * (&d4 + 3u32);
        let exact = BigUint::one()
            + &per_var
            + comps
                .iter()
                .map(|&c| powi(&(&d5 + 1u32), c))
                .sum::<BigUint>();
        let blind = BigUint::one() + per_var + &mb * cube(&(&d5 + 1u32));
        (exact, Some(blind))
    } else {
        let exact = BigUint::one() + &nb * (&d4 * 2u32 + 3u32) + &mb * cube(&(&d5 + 1u32));
        (exact, None)
    };
    cap_check(&sparsity)?;

    let mut names = vec!["x0".to_string(), "y0".to_string()];
    names.extend((1..=n).map(|i| format!("x{i}")));
    names.extend((1..=n).map(|i| format!("y{i}")));
    let universe = VarUniverse::new(names)?;

    let rung = &d3 + 1u32; // ladder step height
    let x0_at = |t: u64| -> Exponent { &d1 + big(t) * &rung };
    let y0_at = |t: u64, sub: &Exponent, what: &str| -> Result<Exponent, ReductionError> {
        (&d2 + big(t) * &rung).checked_sub(sub).ok_or_else(|| {
            ReductionError::BuildInvariant(format!("balance exponent underflow in {what}"))
        })
    };
    let x0 = AffineForm::variable(0, field);
    let y0 = AffineForm::variable(1, field);
    let steps = 3 * n as u64 + m as u64 + 1;

    let mut summands = Vec::with_capacity(1 + 3 * n as usize + m);
    summands.push(make_summand(
        *field,
        &universe,
        "lead".into(),
        None,
        None,
        vec![
            (x0.clone(), d1.clone()),
            (y0.clone(), &d2 + big(steps) * &rung),
        ],
    )?);
    for i in 1..=n {
        let (xi, yi) = (1 + i, 1 + n + i);
        let iu = i as u64;
        summands.push(make_summand(
            *field,
            &universe,
            format!("Q{i}.1"),
            Some(i),
            None,
            vec![
                (x0.clone(), x0_at(3 * iu - 2)),
                (y0.clone(), y0_at(steps - (3 * iu - 2), &d3, "Q.1")?),
                (AffineForm::variable(xi, field), d3.clone()),
            ],
        )?);
        summands.push(make_summand(
            *field,
            &universe,
            format!("Q{i}.2"),
            Some(i),
            None,
            vec![
                (x0.clone(), x0_at(3 * iu - 1)),
                (y0.clone(), y0_at(steps - (3 * iu - 1), &d4, "Q.2")?),
                (
                    AffineForm::new(
                        [(yi, field.one()), (xi, field.one())],
                        field.zero(),
                    ),
                    d4.clone(),
                ),
            ],
        )?);
        let third = if char2 {
            AffineForm::variable(yi, field)
        } else {
            AffineForm::new([(yi, field.one()), (xi, field.from_i64(-1))], field.zero())
        };
        summands.push(make_summand(
            *field,
            &universe,
            format!("Q{i}.3"),
            Some(i),
            None,
            vec![
                (x0.clone(), x0_at(3 * iu)),
                (y0.clone(), y0_at(steps - 3 * iu, &d4, "Q.3")?),
                (third, d4.clone()),
            ],
        )?);
    }
    for (k0, clause) in work.clauses().iter().enumerate() {
        let k = k0 + 1;
        let t = 3 * n as u64 + k as u64;
        let mut factors = vec![
            (x0.clone(), x0_at(t)),
            (y0.clone(), y0_at(steps - t, &(&d5 * 3u32), "R")?),
        ];
        for lit in clause.literals() {
            let (xj, yj) = (1 + lit.var, 1 + n + lit.var);
            let form = if char2 {
                if lit.negated {
                    AffineForm::new([(yj, field.one()), (xj, field.one())], field.zero())
                } else {
                    AffineForm::variable(yj, field)
                }
            } else {
                let c = if lit.negated {
                    field.from_i64(-1)
                } else {
                    field.one()
                };
                AffineForm::new([(yj, field.one()), (xj, c)], field.zero())
            };
            factors.push((form, d5.clone()));
        }
        summands.push(make_summand(
            *field,
            &universe,
            format!("R{k}"),
            None,
            Some(k),
            factors,
        )?);
    }

    let max_comp = comps.iter().copied().max().unwrap_or(0) as u32;
    let support = if has_interior(char2, &d5) {
        if char2 {
            5 + max_comp
        } else {
            8
        }
    } else {
        5
    };
    let degree = &d1 + &d2 + big(steps) * &rung;
    let closed_form = ClosedForm {
        sparsity,
        support,
        degree,
        sparsity_bound: bound,
    };
    finish_instance(
        variant, field, params, formula, work, flip, universe, summands, closed_form,
    )
}

fn build_setsparse(
    formula: &CnfFormula,
    variant: &Variant,
    field: &FieldSpec,
) -> Result<ReductionInstance, ReductionError> {
    let n = formula.num_vars();
    let m = formula.num_clauses();
    let params = select_params(variant, field, n as u64, m as u64)?;
    let char2 = field.characteristic() == 2;
    let (work, flip) = if char2 {
        let (w, fl) = normalize_first_clause_complemented(formula);
        (w, Some(fl))
    } else {
        (formula.clone(), None)
    };
    let comps = complement_counts(&work);
    let d1 = params.d1.clone().expect("ladder sets d1");
    let d2 = params.d2.clone().expect("ladder sets d2");
    let d3 = params.d3.clone().expect("ladder sets d3");

    let nb = big(n as u64);
    let mb = big(m as u64);
    let (sparsity, bound) = if char2 {
        let per_var = &nb * (&d2 + 2u32);
        let exact = BigUint::one()
            + &per_var
            + comps
                .iter()
                .map(|&c| powi(&(&d3 + 1u32), c))
                .sum::<BigUint>();
        let blind = BigUint::one() + per_var + &mb * cube(&(&d3 + 1u32));
        (exact, Some(blind))
    } else {
        let exact = BigUint::one() + &nb * (&d2 * 2u32 + 2u32) + &mb * cube(&(&d3 + 1u32));
        (exact, None)
    };
    cap_check(&sparsity)?;

    let mut names = vec!["x0".to_string()];
    names.extend((1..=n).map(|i| format!("x{i}")));
    let universe = VarUniverse::new(names)?;

    let x0 = AffineForm::variable(0, field);
    let mut summands = Vec::with_capacity(1 + 2 * n as usize + m);
    summands.push(make_summand(
        *field,
        &universe,
        "lead".into(),
        None,
        None,
        vec![(x0.clone(), d1.clone())],
    )?);
    for i in 1..=n {
        let iu = i as u64;
        let first = if char2 {
            AffineForm::variable(i, field)
        } else {
            AffineForm::new([(i, field.one())], field.one())
        };
        summands.push(make_summand(
            *field,
            &universe,
            format!("Q{i}.1"),
            Some(i),
            None,
            vec![
                (x0.clone(), big(2 * iu - 1) * (&d2 + 1u32)),
                (first, d2.clone()),
            ],
        )?);
        let second = if char2 {
            AffineForm::new([(i, field.one())], field.one())
        } else {
            AffineForm::new([(i, field.one())], field.from_i64(-1))
        };
        summands.push(make_summand(
            *field,
            &universe,
            format!("Q{i}.2"),
            Some(i),
            None,
            vec![
                (x0.clone(), big(2 * iu) * (&d2 + 1u32)),
                (second, d2.clone()),
            ],
        )?);
    }
    for (k0, clause) in work.clauses().iter().enumerate() {
        let k = k0 + 1;
        let mut factors = vec![(x0.clone(), big(k as u64))];
        for lit in clause.literals() {
            let c = if char2 {
                if lit.negated {
                    field.one()
                } else {
                    field.zero()
                }
            } else if lit.negated {
                field.from_i64(-1)
            } else {
                field.one()
            };
            factors.push((AffineForm::new([(lit.var, field.one())], c), d3.clone()));
        }
        summands.push(make_summand(
            *field,
            &universe,
            format!("R{k}"),
            None,
            Some(k),
            factors,
        )?);
    }

    let closed_form = ClosedForm {
        sparsity,
        support: 4,
        degree: d1.clone(),
        sparsity_bound: bound,
    };
    finish_instance(
        variant, field, params, formula, work, flip, universe, summands, closed_form,
    )
}

fn build_etsupport(
    formula: &CnfFormula,
    variant: &Variant,
    field: &FieldSpec,
) -> Result<ReductionInstance, ReductionError> {
    let n = formula.num_vars();
    let m = formula.num_clauses();
    let clauses = formula.clauses();
    for i in 0..clauses.len() {
        for j in (i + 1)..clauses.len() {
            if clauses[i] == clauses[j] {
                return Err(ReductionError::RepeatedClause {
                    first: i + 1,
                    second: j + 1,
                });
            }
        }
    }
    let params = select_params(variant, field, n as u64, m as u64)?;
    let sigma = variant.sigma.expect("validated");
    let schedule = params.power_schedule.clone().expect("support schedule");
    let (work, flip) = normalize_first_clause_complemented(formula);
    let comps = complement_counts(&work);

    let count = big(schedule.len() as u64);
    let bound = &count + big(64 * m as u64);
    let sparsity = &count
        + comps
            .iter()
            .map(|&c| powi(&big(4), c))
            .sum::<BigUint>();
    cap_check(&sparsity)?;

    let zc = (sigma - 5) as u32;
    let mut names: Vec<String> = (1..=zc).map(|j| format!("z{j}")).collect();
    names.extend((1..=n).map(|i| format!("x{i}")));
    names.extend((1..=n).map(|i| format!("y{i}")));
    let universe = VarUniverse::new(names)?;
    let xv = |i: u32| zc + i - 1;
    let yv = |i: u32| zc + n + i - 1;

    let mut summands = Vec::with_capacity(schedule.len() + m);
    let mut powers = schedule.iter();
    // Padding block P: every sigma-subset of the z and x variables, in
    // subset-lexicographic order over ids.
    let pool: Vec<u32> = (0..zc + n).collect();
    let mut p_idx = 0usize;
    for subset in pool.iter().copied().combinations(sigma as usize) {
        let star = powers.next().expect("schedule long enough").clone();
        p_idx += 1;
        let factors = subset
            .into_iter()
            .map(|v| (AffineForm::variable(v, field), star.clone()))
            .collect();
        summands.push(make_summand(
            *field,
            &universe,
            format!("P{p_idx}"),
            None,
            None,
            factors,
        )?);
    }
    // Padding block Q: pair products (x_t y_t)^star; odd sigma adds one
    // bare x factor, cycling over the chosen subset.
    let half = sigma.div_ceil(2) as usize;
    let mut q_idx = 0usize;
    for subset in (1..=n).combinations(half) {
        let bare_choices: Vec<Option<u32>> = if sigma.is_multiple_of(2) {
            vec![None]
        } else {
            subset.iter().copied().map(Some).collect()
        };
        for bare in bare_choices {
            let star = powers.next().expect("schedule long enough").clone();
            q_idx += 1;
            let mut factors = Vec::new();
            for &t in &subset {
                if Some(t) == bare {
                    factors.push((AffineForm::variable(xv(t), field), star.clone()));
                } else {
                    factors.push((AffineForm::variable(xv(t), field), star.clone()));
                    factors.push((AffineForm::variable(yv(t), field), star.clone()));
                }
            }
            summands.push(make_summand(
                *field,
                &universe,
                format!("Q{q_idx}"),
                None,
                None,
                factors,
            )?);
        }
    }
    ensure(powers.next().is_none(), || {
        "padding schedule length mismatch".into()
    })?;
    // Clause blocks: z-prefix times (y_j - x_j)^3 per complemented literal
    // and y_j^2 per plain one.
    for (k0, clause) in work.clauses().iter().enumerate() {
        let k = k0 + 1;
        let mut factors: Vec<(AffineForm, Exponent)> = (0..zc)
            .map(|j| (AffineForm::variable(j, field), exp(1)))
            .collect();
        for lit in clause.literals() {
            let (x, y) = (xv(lit.var), yv(lit.var));
            if lit.negated {
                factors.push((
                    AffineForm::new([(y, field.one()), (x, field.from_i64(-1))], field.zero()),
                    exp(3),
                ));
            } else {
                factors.push((AffineForm::variable(y, field), exp(2)));
            }
        }
        summands.push(make_summand(
            *field,
            &universe,
            format!("R{k}"),
            None,
            Some(k),
            factors,
        )?);
    }

    let degree = big(sigma) * schedule.last().expect("nonempty schedule");
    let closed_form = ClosedForm {
        sparsity,
        support: (sigma + 1) as u32,
        degree,
        sparsity_bound: Some(bound),
    };
    finish_instance(
        variant,
        field,
        params,
        formula,
        work,
        Some(flip),
        universe,
        summands,
        closed_form,
    )
}

// ---------------------------------------------------------------------------
// serialization

fn params_to_json(p: &DegreeParams) -> serde_json::Value {
    let deg = |d: &Option<Exponent>| d.as_ref().map(|x| x.to_string());
    json!({
        "d1": deg(&p.d1),
        "d2": deg(&p.d2),
        "d3": deg(&p.d3),
        "d4": deg(&p.d4),
        "d5": deg(&p.d5),
        "s": p.s.to_string(),
        "s0": p.s0.as_ref().map(|x| x.to_string()),
        "sigma": p.sigma,
        "epsilon": p.epsilon.map(|(a, b)| format!("{a}/{b}")),
        "override_base_degree": deg(&p.override_base_degree),
        "power_schedule": p.power_schedule.as_ref().map(|sched| {
            sched.iter().map(|e| e.to_string()).collect::<Vec<_>>()
        }),
    })
}

fn separation_json(inst: &ReductionInstance) -> serde_json::Value {
    match inst.separation() {
        Ok(SeparationWitness::TotalDegree) => json!({ "kind": "total-degree" }),
        Ok(SeparationWitness::Variable(v)) => json!({
            "kind": "variable",
            "variable": inst.universe.name(v),
        }),
        Ok(SeparationWitness::DistinctMonomials) => json!({ "kind": "distinct-monomials" }),
        Err(e) => json!({ "kind": "error", "detail": e.to_string() }),
    }
}

/// Instance as JSON. Everything needed to rebuild it deterministically
/// (formula, variant, field) plus the derived data for human inspection.
pub fn instance_to_json(inst: &ReductionInstance) -> serde_json::Value {
    json!({
        "format": "satpoly-instance/1",
        "problem": inst.variant.problem.as_str(),
        "translations_hardened": inst.variant.translations_hardened,
        "gap": inst.variant.gap.as_ref().map(|g| json!({
            "epsilon": format!("{}/{}", g.epsilon.0, g.epsilon.1),
            "override_base_degree": g.override_base_degree.as_ref().map(|d| d.to_string()),
            "target_alpha": gap_target_alpha(&inst.params).map(|a| a.to_string()),
        })),
        "sigma": inst.variant.sigma,
        "field": inst.field.to_string(),
        "n": inst.n,
        "m": inst.m,
        "dimacs": inst.source_formula.to_dimacs(),
        "flip": inst.flip.as_ref().map(|f| f.to_json()),
        "params": params_to_json(&inst.params),
        "budget": inst.budget().to_string(),
        "closed_form": {
            "sparsity": inst.closed_form.sparsity.to_string(),
            "support": inst.closed_form.support,
            "degree": inst.closed_form.degree.to_string(),
            "sparsity_bound": inst.closed_form.sparsity_bound.as_ref().map(|b| b.to_string()),
        },
        "stats": {
            "sparsity": inst.stats.sparsity.to_string(),
            "support": inst.stats.support,
            "degree": inst.stats.degree.to_string(),
        },
        "separation": separation_json(inst),
        "summands": inst.summands.iter().map(|s| json!({
            "label": s.label,
            "variable": s.variable_index,
            "clause": s.clause_index,
            "sparsity": s.expanded.sparsity(),
            "degree": s.expanded.degree().map(|d| d.to_string()),
        })).collect::<Vec<_>>(),
        "poly": poly_to_json(&inst.f),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnf::{Clause, Literal};

    fn q() -> FieldSpec {
        FieldSpec::RATIONAL
    }

    fn fp(p: u64) -> FieldSpec {
        FieldSpec::prime(p).unwrap()
    }

    fn formula(n: u32, clauses: &[[i64; 3]]) -> CnfFormula {
        let cl = clauses
            .iter()
            .map(|lits| {
                Clause::new([
                    Literal::from_dimacs(lits[0], n).unwrap(),
                    Literal::from_dimacs(lits[1], n).unwrap(),
                    Literal::from_dimacs(lits[2], n).unwrap(),
                ])
                .unwrap()
            })
            .collect();
        CnfFormula::new(n, cl).unwrap()
    }

    fn e1() -> CnfFormula {
        formula(3, &[[1, 2, -3]])
    }

    fn d(v: u64) -> Option<Exponent> {
        Some(big(v))
    }

    #[test]
    fn nonhom_chain_q() {
        let p = select_params(&Variant::etsparse(), &q(), 3, 1).unwrap();
        assert_eq!(p.d4, d(1));
        assert_eq!(p.d3, d(5));
        assert_eq!(p.d2, d(10));
        assert_eq!(p.d1, d(29));
        assert_eq!(p.s, big(29));
        assert_eq!(p.s0, None);

        let p = select_params(&Variant::etsparse(), &q(), 3, 8).unwrap();
        assert_eq!(p.d4, d(8));
        assert_eq!(p.d3, d(649));
        assert_eq!(p.d2, d(1298));
        assert_eq!(p.s, big(2605));
        // the budget dominates d2 + 1 here, so d1 rides it exactly
        assert_eq!(p.d1, d(2605));
    }

    #[test]
    fn nonhom_chain_rounds_to_prime_powers() {
        let p = select_params(&Variant::etsparse(), &fp(3), 3, 1).unwrap();
        assert_eq!(p.d4, d(2));
        assert_eq!(p.d3, d(26));
        assert_eq!(p.d2, d(80));
        assert_eq!(p.s, big(97));
        assert_eq!(p.d1, d(242));

        let p = select_params(&Variant::etsparse(), &fp(2), 5, 4).unwrap();
        assert_eq!(p.d4, d(7));
        assert_eq!(p.d3, d(511));
        assert_eq!(p.d2, d(1023));
        assert_eq!(p.s, big(2827));
        assert_eq!(p.d1, d(4095));

        // huge p clears the top characteristic-0 degree: no rounding
        let p = select_params(&Variant::etsparse(), &fp(101), 3, 1).unwrap();
        assert_eq!(p.d1, d(29));
        assert_eq!(p.d4, d(1));
    }

    #[test]
    fn hom_chain_q() {
        let p = select_params(&Variant::etsparse_hom(), &q(), 5, 4).unwrap();
        assert_eq!(p.d5, d(4));
        assert_eq!(p.d4, d(101));
        assert_eq!(p.d3, d(202));
        assert_eq!(p.s, big(621));
        assert_eq!(p.d2, d(4061));
        assert_eq!(p.d1, d(8122));
    }

    #[test]
    fn hom_chain_digit_pattern_f3() {
        let p = select_params(&Variant::etsparse_hom(), &fp(3), 5, 4).unwrap();
        assert_eq!(p.d5, d(8));
        assert_eq!(p.d4, d(728));
        assert_eq!(p.d3, d(2186));
        assert_eq!(p.s, big(3980));
        // 3^18 - 3^10 and 3^26 - 3^18
        assert_eq!(p.d2, d(387361440));
        assert_eq!(p.d1, Some("2541478407840".parse::<Exponent>().unwrap()));
    }

    #[test]
    fn setsparse_chain() {
        let p = select_params(&Variant::setsparse(), &fp(3), 3, 1).unwrap();
        assert_eq!(p.d3, d(2));
        assert_eq!(p.d2, d(26));
        assert_eq!(p.d1, d(728));
        assert_eq!(p.s, big(94));

        let p = select_params(&Variant::setsparse(), &fp(3), 3, 8).unwrap();
        assert_eq!(p.d3, d(8));
        assert_eq!(p.d2, d(728));
        assert_eq!(p.d1, d(19682));
        assert_eq!(p.s, big(2839));

        let p = select_params(&Variant::setsparse(), &q(), 5, 4).unwrap();
        assert_eq!(p.d3, d(4));
        assert_eq!(p.d2, d(101));
        assert_eq!(p.d1, d(2244));
        assert_eq!(p.s, big(616));
    }

    #[test]
    fn translations_chain_q() {
        let v = Variant::etsparse().with_translations();
        let p = select_params(&v, &q(), 3, 1).unwrap();
        assert_eq!(p.d4, d(1));
        assert_eq!(p.d3, d(5));
        assert_eq!(p.d2, d(10));
        assert_eq!(p.d1, d(210));
        assert_eq!(p.s, big(29));
    }

    #[test]
    fn gap_chains_with_override() {
        let v = Variant::etsparse().with_gap(GapSpec {
            epsilon: (1, 4),
            override_base_degree: Some(big(8)),
        });
        let p = select_params(&v, &q(), 3, 8).unwrap();
        assert_eq!(p.d4, d(8));
        assert_eq!(p.d3, d(649));
        assert_eq!(p.d2, d(421202));
        assert_eq!(p.d1, d(421203));
        assert_eq!(p.s0, Some(big(2605)));
        assert_eq!(p.s, big(9736));
        assert_eq!(gap_target_alpha(&p), Some(big(2)));

        let v = Variant::setsparse().with_gap(GapSpec {
            epsilon: (1, 4),
            override_base_degree: Some(big(8)),
        });
        let p = select_params(&v, &fp(3), 3, 8).unwrap();
        assert_eq!(p.d3, d(8));
        assert_eq!(p.d2, d(728));
        assert_eq!(p.d1, d(1594322));
        assert_eq!(p.s0, Some(big(2839)));
        assert_eq!(p.s, big(10207));
    }

    #[test]
    fn gap_default_floor() {
        let v = Variant::etsparse().with_gap(GapSpec {
            epsilon: (1, 4),
            override_base_degree: None,
        });
        let p = select_params(&v, &q(), 2, 1).unwrap();
        // floor 4mn = 8
        assert_eq!(p.d4, d(8));
        assert_eq!(p.d3, d(82));
        assert_eq!(p.d2, d(6725));
        assert_eq!(p.d1, d(6726));

        let p = select_params(&v, &fp(3), 2, 1).unwrap();
        // floor 3pmn = 18, rounded to 26
        assert_eq!(p.d4, d(26));
    }

    #[test]
    fn gap_override_too_small() {
        let v = Variant::etsparse().with_gap(GapSpec {
            epsilon: (1, 4),
            override_base_degree: Some(big(1)),
        });
        // d4 = 1 < m = 2
        match select_params(&v, &q(), 3, 2) {
            Err(ReductionError::OverrideBelowMinimum { condition, .. }) => {
                assert!(condition.contains("d4 >= m"))
            }
            other => panic!("expected override rejection, got {other:?}"),
        }
        // d4 = m = 1 passes the structural check but d1 = 27 cannot cover
        // the translate budget once n is large
        let v = Variant::etsparse().with_gap(GapSpec {
            epsilon: (1, 4),
            override_base_degree: Some(big(1)),
        });
        match select_params(&v, &q(), 300, 1) {
            Err(ReductionError::OverrideBelowMinimum { condition, .. }) => {
                assert!(condition.contains("budget"))
            }
            other => panic!("expected override rejection, got {other:?}"),
        }
    }

    #[test]
    fn etsupport_schedule() {
        let p = select_params(&Variant::etsupport(5), &q(), 9, 2).unwrap();
        let sched = p.power_schedule.as_ref().unwrap();
        // C(9,5) + C(9,3)*3 = 126 + 252
        assert_eq!(sched.len(), 378);
        assert_eq!(sched[0], big(6));
        assert_eq!(sched[377], big(383));
        assert_eq!(p.s, big(5));

        let p = select_params(&Variant::etsupport(5), &fp(7), 9, 2).unwrap();
        let sched = p.power_schedule.as_ref().unwrap();
        assert_eq!(&sched[..4], &[big(6), big(48), big(342), big(2400)]);
        // strictly increasing prime-power pattern throughout
        for w in sched.windows(2) {
            assert!(w[0] < w[1]);
        }
    }

    #[test]
    fn variant_validation_errors() {
        let err = select_params(&Variant::etsupport(4), &q(), 9, 2);
        assert!(matches!(err, Err(ReductionError::SigmaTooSmall(4))));

        let err = select_params(&Variant::etsupport(5), &q(), 8, 2);
        assert!(matches!(
            err,
            Err(ReductionError::TooFewVariables { sigma: 5, n: 8 })
        ));

        let err = select_params(&Variant::etsupport(5), &fp(5), 9, 2);
        assert!(matches!(
            err,
            Err(ReductionError::CharacteristicTooSmall { sigma: 5, p: 5 })
        ));

        let v = Variant::etsparse_hom().with_translations();
        assert!(matches!(
            select_params(&v, &q(), 3, 1),
            Err(ReductionError::TranslationsNotApplicable)
        ));

        let v = Variant::etsparse()
            .with_translations()
            .with_gap(GapSpec {
                epsilon: (1, 4),
                override_base_degree: None,
            });
        assert!(matches!(
            select_params(&v, &q(), 3, 1),
            Err(ReductionError::TranslationsWithGap)
        ));

        let v = Variant::etsupport(5).with_gap(GapSpec {
            epsilon: (1, 4),
            override_base_degree: None,
        });
        assert!(matches!(
            select_params(&v, &q(), 9, 1),
            Err(ReductionError::GapNotApplicable)
        ));

        let v = Variant::etsparse().with_gap(GapSpec {
            epsilon: (1, 3),
            override_base_degree: None,
        });
        assert!(matches!(
            select_params(&v, &q(), 3, 1),
            Err(ReductionError::BadEpsilon { num: 1, den: 3 })
        ));

        assert!(matches!(
            select_params(&Variant::etsparse(), &q(), 0, 1),
            Err(ReductionError::DegenerateInput { .. })
        ));
        assert!(matches!(
            select_params(&Variant::etsparse(), &q(), 3, 0),
            Err(ReductionError::DegenerateInput { .. })
        ));
    }

    #[test]
    fn build_nonhom_q_small() {
        let inst = build_instance(&e1(), &Variant::etsparse(), &q()).unwrap();
        assert_eq!(inst.stats.sparsity, big(48));
        assert_eq!(inst.stats.support, 4); // d4 = 1: no interior terms
        assert_eq!(inst.stats.degree, big(293));
        assert_eq!(inst.budget(), &big(29));
        assert_eq!(inst.summands.len(), 11);
        assert_eq!(inst.separation().unwrap(), SeparationWitness::TotalDegree);
        assert!(inst.flip.is_none());
        // every summand is homogeneous: a one-element degree set
        for s in &inst.summands {
            assert_eq!(s.expanded.degree_set().len(), 1, "{}", s.label);
        }
    }

    #[test]
    fn build_nonhom_f3_has_interior_support() {
        let inst = build_instance(&e1(), &Variant::etsparse(), &fp(3)).unwrap();
        assert_eq!(inst.stats.sparsity, big(193));
        assert_eq!(inst.stats.support, 7); // d4 = 2 keeps the cross terms
        assert_eq!(inst.stats.degree, big(2426));
        assert_eq!(inst.separation().unwrap(), SeparationWitness::TotalDegree);
    }

    #[test]
    fn build_nonhom_f2_flips_and_shrinks() {
        let inst = build_instance(&e1(), &Variant::etsparse(), &fp(2)).unwrap();
        let p = &inst.params;
        assert_eq!(p.d4, d(1));
        assert_eq!(p.d3, d(7));
        assert_eq!(p.d2, d(15));
        assert_eq!(p.d1, d(63));
        assert_eq!(p.s, big(35));
        let flip = inst.flip.as_ref().unwrap();
        assert_eq!(flip.flipped_vars, vec![1, 2]);
        // first clause all-complemented after the flip: 1 + 30 + 2^3
        assert_eq!(inst.stats.sparsity, big(39));
        // the pattern-blind bound coincides here (one clause, fully flipped)
        assert_eq!(inst.closed_form.sparsity_bound, Some(big(39)));
        assert_eq!(inst.stats.support, 4); // d4 = 1
        assert_eq!(inst.stats.degree, big(633));
        assert_eq!(inst.separation().unwrap(), SeparationWitness::TotalDegree);
    }

    #[test]
    fn build_hom_q_small() {
        let inst = build_instance(&e1(), &Variant::etsparse_hom(), &q()).unwrap();
        let p = &inst.params;
        assert_eq!(p.d5, d(1));
        assert_eq!(p.d4, d(5));
        assert_eq!(p.d3, d(10));
        assert_eq!(p.s, big(29));
        assert_eq!(p.d2, d(122));
        assert_eq!(p.d1, d(244));
        assert_eq!(inst.stats.sparsity, big(48));
        assert_eq!(inst.stats.support, 5); // d5 = 1
        assert_eq!(inst.stats.degree, big(487));
        assert_eq!(inst.f.degree_set().len(), 1);
        assert_eq!(inst.separation().unwrap(), SeparationWitness::Variable(0));
    }

    #[test]
    fn build_setsparse_f3_small() {
        let inst = build_instance(&e1(), &Variant::setsparse(), &fp(3)).unwrap();
        assert_eq!(inst.stats.sparsity, big(190));
        assert_eq!(inst.stats.support, 4);
        assert_eq!(inst.stats.degree, big(728));
        assert_eq!(inst.budget(), &big(94));
        assert_eq!(inst.summands.len(), 8);
        // a single clause block collides with nothing
        assert_eq!(inst.separation().unwrap(), SeparationWitness::TotalDegree);

        // two clause blocks overlap in total degree but sit on distinct
        // x0 rungs
        let psi = formula(3, &[[1, 2, -3], [-1, 2, 3]]);
        let inst = build_instance(&psi, &Variant::setsparse(), &fp(3)).unwrap();
        assert_eq!(inst.stats.sparsity, big(217));
        assert_eq!(inst.separation().unwrap(), SeparationWitness::Variable(0));
    }

    #[test]
    fn build_translations_q_small() {
        let v = Variant::etsparse().with_translations();
        let inst = build_instance(&e1(), &v, &q()).unwrap();
        assert_eq!(inst.stats.sparsity, big(48));
        assert_eq!(inst.stats.support, 4);
        assert_eq!(inst.stats.degree, big(210)); // lead dominates
        assert_eq!(inst.separation().unwrap(), SeparationWitness::TotalDegree);
    }

    #[test]
    fn build_gap_override_q() {
        let v = Variant::etsparse().with_gap(GapSpec {
            epsilon: (1, 4),
            override_base_degree: Some(big(8)),
        });
        let inst = build_instance(&e1(), &v, &q()).unwrap();
        let p = &inst.params;
        assert_eq!(p.d4, d(8));
        assert_eq!(p.d3, d(82));
        assert_eq!(p.d2, d(6725));
        assert_eq!(p.d1, d(6726));
        assert_eq!(p.s0, Some(big(337)));
        assert_eq!(inst.stats.sparsity, big(1231));
        assert_eq!(inst.stats.support, 7); // d4 = 8 keeps interiors
        assert_eq!(inst.budget(), &big(337));
        assert_eq!(inst.separation().unwrap(), SeparationWitness::TotalDegree);
    }

    #[test]
    fn build_etsupport_small() {
        let psi = formula(9, &[[1, 2, 3], [-4, 5, 6]]);
        let inst = build_instance(&psi, &Variant::etsupport(5), &q()).unwrap();
        // flip complements {1,2,3}; clause 2 keeps one complemented literal
        assert_eq!(inst.flip.as_ref().unwrap().flipped_vars, vec![1, 2, 3]);
        assert_eq!(inst.stats.sparsity, big(378 + 64 + 4));
        assert_eq!(inst.stats.support, 6);
        assert_eq!(inst.stats.degree, big(5 * 383));
        assert_eq!(inst.budget(), &big(5));
        // the two clause blocks differ in complement count, hence degree
        assert_eq!(inst.separation().unwrap(), SeparationWitness::TotalDegree);
        assert_eq!(inst.summands.len(), 380);

        // equal complement counts collide in degree; the monomial sets
        // still stay disjoint
        let psi = formula(9, &[[1, 2, 3], [-4, -5, -6]]);
        let inst = build_instance(&psi, &Variant::etsupport(5), &q()).unwrap();
        assert_eq!(inst.stats.sparsity, big(378 + 64 + 64));
        assert_eq!(
            inst.separation().unwrap(),
            SeparationWitness::DistinctMonomials
        );
    }

    #[test]
    fn etsupport_rejects_repeats() {
        let psi = formula(9, &[[1, 2, 3], [1, 2, 3]]);
        assert!(matches!(
            build_instance(&psi, &Variant::etsupport(5), &q()),
            Err(ReductionError::RepeatedClause {
                first: 1,
                second: 2
            })
        ));
        // but repeats are fine outside the support family
        assert!(build_instance(&psi, &Variant::etsparse(), &q()).is_ok());
    }

    #[test]
    fn cap_rejects_uncapped_gap_floor() {
        let v = Variant::etsparse().with_gap(GapSpec {
            epsilon: (1, 4),
            override_base_degree: None,
        });
        let psi = formula(5, &[[1, 2, 3], [-1, 2, 4], [2, -3, 5], [-2, 4, -5]]);
        assert!(matches!(
            build_instance(&psi, &v, &q()),
            Err(ReductionError::TooLarge { .. })
        ));
    }

    #[test]
    fn instance_json_shape() {
        let inst = build_instance(&e1(), &Variant::etsparse(), &q()).unwrap();
        let v = instance_to_json(&inst);
        assert_eq!(v["problem"], "etsparse");
        assert_eq!(v["field"], "q");
        assert_eq!(v["stats"]["sparsity"], "48");
        assert_eq!(v["separation"]["kind"], "total-degree");
        assert_eq!(v["summands"].as_array().unwrap().len(), 11);
        let back = crate::sparsepoly::poly_from_json(&v["poly"]).unwrap();
        assert_eq!(back.sparsity(), 48);
    }
}
