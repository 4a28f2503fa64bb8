//! Sparsifying witnesses: construction from satisfying assignments, exact
//! verification of the post-substitution statistic against the instance
//! budget, assignment extraction, and exhaustive family search.
//!
//! Verification never trusts a closed form blindly: every measured value is
//! an exact count of the substituted polynomial, obtained either by direct
//! expansion or by a decomposition argument (degree layers / variable-disjoint
//! tensor factors) whose preconditions are checked at run time. Anything too
//! large to measure exactly is refused, never estimated.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigUint;
use num_traits::{One, Zero};

use crate::algebra::{
    base_p_digits, binomial_mod, multinomial_support_count, AlgebraError, Exponent, FieldElement,
    FieldSpec,
};
use crate::reductions::{Problem, ReductionInstance, Summand};
use crate::sparsepoly::{
    AffineForm, AffineSubstitution, Monomial, PolyError, SparsePoly, StructuredTag,
};

/// Hard ceiling on terms materialized while measuring a witness.
pub const WITNESS_TERM_CAP: u64 = 2_000_000;
/// Tighter ceiling for characteristic-zero powers of 3+-term forms, whose
/// expansion cost is quadratic in the output size.
const DENSE_POW_CAP: u64 = 20_000;
/// Largest binomial-support set enumerated per ladder layer.
const ACTIVE_ENUM_CAP: u64 = 4_096;
/// Default bound on the number of candidates a search may evaluate.
pub const DEFAULT_SEARCH_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WitnessError {
    #[error("assignment has {got} bits but the instance encodes {expected} variables")]
    AssignmentLength { expected: usize, got: usize },
    #[error("the assignment does not satisfy the encoded formula")]
    NotSatisfying,
    #[error("witness field does not match the instance field")]
    FieldMismatch,
    #[error("witness dimensions do not match the instance variables")]
    UniverseMismatch,
    #[error("affine witness is not invertible; rejected before measurement")]
    NotInvertible,
    #[error("measuring this witness would exceed {cap} terms ({at}); refusing")]
    TooLarge { at: String, cap: u64 },
    #[error("witness passes the budget but lies outside the decodable family: {0}")]
    OutOfFamily(String),
    #[error("witness does not meet the budget; there is nothing to extract")]
    NotPassing,
    #[error("shift enumeration requires a finite field")]
    ShiftsNeedFiniteField,
    #[error("search family is malformed: {0}")]
    BadFamily(String),
    #[error("family has {size} candidates, over the search cap {cap}")]
    FamilyTooLarge { size: String, cap: u64 },
    #[error("witness JSON is malformed: {0}")]
    BadEncoding(String),
    #[error("internal consistency failure: {0}")]
    Internal(String),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

/// A claimed sparsifying change of variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WitnessPayload {
    /// Invertible affine change of variables.
    Affine(AffineSubstitution),
    /// Pure translation, one field element per universe variable (by id).
    Shift(Vec<FieldElement>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    pub payload: WitnessPayload,
    /// The assignment the producer believes this witness encodes. Advisory:
    /// extraction always decodes the payload itself.
    pub claimed_assignment: Option<Vec<bool>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SummandStat {
    pub label: String,
    pub value: BigUint,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifyReport {
    /// "sparsity" for the term-count families, "support" for the support family.
    pub statistic: &'static str,
    pub measured: BigUint,
    pub budget: BigUint,
    pub pass: bool,
    /// The same statistic per transformed summand, in instance order.
    pub per_summand: Vec<SummandStat>,
}

/// True iff the family encodes assignments with {0,1} mixing coefficients
/// rather than {+1,-1}.
fn zero_one_coding(instance: &ReductionInstance) -> bool {
    instance.field.characteristic() == 2 || instance.variant.problem == Problem::EtSupport
}

// ---------------------------------------------------------------------------
// Forward construction
// ---------------------------------------------------------------------------

/// Builds the canonical witness for a satisfying assignment of the *encoded*
/// (normalization-applied) formula. Refuses non-satisfying assignments and
/// re-verifies the result before returning it.
pub fn forward_witness(
    instance: &ReductionInstance,
    u: &[bool],
) -> Result<Witness, WitnessError> {
    let n = instance.n as usize;
    if u.len() != n {
        return Err(WitnessError::AssignmentLength {
            expected: n,
            got: u.len(),
        });
    }
    if !instance.formula.evaluate(u) {
        return Err(WitnessError::NotSatisfying);
    }
    let field = instance.field;
    let payload = match instance.variant.problem {
        Problem::SetSparse => {
            let mut b = vec![field.zero(); instance.universe.len()];
            for i in 1..=instance.n {
                let ui = u[i as usize - 1];
                let c = if field.characteristic() == 2 {
                    field.from_i64(1 - ui as i64)
                } else if ui {
                    field.from_i64(-1)
                } else {
                    field.one()
                };
                b[instance.x_id(i) as usize] = c;
            }
            WitnessPayload::Shift(b)
        }
        _ => {
            let zero_one = zero_one_coding(instance);
            let mut sub = AffineSubstitution::identity(field, instance.universe.clone());
            let mut pair_c = BTreeMap::new();
            for i in 1..=instance.n {
                let ui = u[i as usize - 1];
                let c = if zero_one {
                    field.from_i64(1 - ui as i64)
                } else if ui {
                    field.from_i64(-1)
                } else {
                    field.one()
                };
                let (x, y) = (instance.x_id(i), instance.y_id(i).expect("paired family"));
                if !c.is_zero() {
                    sub.set_image(
                        y,
                        AffineForm::new(vec![(y, field.one()), (x, c.clone())], field.zero()),
                    );
                }
                pair_c.insert(i, c);
            }
            sub.set_structured_tag(StructuredTag { pair_c });
            WitnessPayload::Affine(sub)
        }
    };
    let witness = Witness {
        payload,
        claimed_assignment: Some(u.to_vec()),
    };
    let report = verify_witness(instance, &witness)?;
    if !report.pass {
        return Err(WitnessError::Internal(format!(
            "forward witness measures {} against budget {}",
            report.measured, report.budget
        )));
    }
    Ok(witness)
}

// ---------------------------------------------------------------------------
// Verification
// ---------------------------------------------------------------------------

/// Measures the witness statistic exactly and compares it to the instance
/// budget. Non-invertible affine maps are rejected (an error, not a failed
/// verdict); witnesses too expensive to measure exactly are refused.
pub fn verify_witness(
    instance: &ReductionInstance,
    witness: &Witness,
) -> Result<VerifyReport, WitnessError> {
    let (measured, per_summand) = measure_payload(instance, &witness.payload)?;
    let budget = instance.budget().clone();
    let pass = measured <= budget;
    Ok(VerifyReport {
        statistic: if support_mode(instance) {
            "support"
        } else {
            "sparsity"
        },
        measured,
        budget,
        pass,
        per_summand,
    })
}

fn support_mode(instance: &ReductionInstance) -> bool {
    instance.variant.problem == Problem::EtSupport
}

fn measure_payload(
    instance: &ReductionInstance,
    payload: &WitnessPayload,
) -> Result<(BigUint, Vec<SummandStat>), WitnessError> {
    match payload {
        WitnessPayload::Shift(b) => {
            if b.len() != instance.universe.len() {
                return Err(WitnessError::UniverseMismatch);
            }
            if b.iter().any(|c| c.spec() != instance.field) {
                return Err(WitnessError::FieldMismatch);
            }
            shift_measure(instance, b)
        }
        WitnessPayload::Affine(sub) => {
            if sub.field() != instance.field {
                return Err(WitnessError::FieldMismatch);
            }
            if *sub.universe() != instance.universe {
                return Err(WitnessError::UniverseMismatch);
            }
            if !sub.is_invertible() {
                return Err(WitnessError::NotInvertible);
            }
            if sub.is_shift() {
                let b: Vec<FieldElement> = instance
                    .universe
                    .ids()
                    .map(|v| sub.image(v).constant_part().clone())
                    .collect();
                return shift_measure(instance, &b);
            }
            if sub.is_linear() {
                if let Some(keys) = homogeneous_keys(instance) {
                    return grouped_measure(instance, sub, keys);
                }
                if let Some(keys) = ladder_layer_keys(instance, sub) {
                    return grouped_measure(instance, sub, keys);
                }
            }
            full_assembly(instance, sub)
        }
    }
}

/// Total degrees, if every summand is homogeneous. A linear substitution
/// preserves each summand's degree exactly, so distinct degrees can never
/// merge or cancel across summands.
fn homogeneous_keys(instance: &ReductionInstance) -> Option<Vec<Exponent>> {
    let mut keys = Vec::with_capacity(instance.summands.len());
    for s in &instance.summands {
        let degrees = s.expanded.degree_set();
        if degrees.len() != 1 {
            return None;
        }
        keys.push(degrees.into_iter().next().unwrap());
    }
    Some(keys)
}

/// Ladder exponents, if the substitution maps the ladder variable to a scaled
/// single variable w that no other image touches. Each summand's image then
/// sits at a fixed w-degree, so distinct ladder exponents cannot interact.
fn ladder_layer_keys(
    instance: &ReductionInstance,
    sub: &AffineSubstitution,
) -> Option<Vec<Exponent>> {
    let x0 = instance.x0_id()?;
    let img = sub.image(x0);
    if img.linear_len() != 1 || !img.constant_part().is_zero() {
        return None;
    }
    let w = img.linear_terms().next().unwrap().0;
    for v in instance.universe.ids() {
        if v != x0 && sub.image(v).coefficient_of(w).is_some() {
            return None;
        }
    }
    let mut keys = Vec::with_capacity(instance.summands.len());
    for s in &instance.summands {
        let mut e = Exponent::zero();
        for (form, d) in &s.factors {
            if form.coefficient_of(x0).is_some() {
                if form.linear_len() != 1 || !form.constant_part().is_zero() {
                    return None;
                }
                e += d;
            }
        }
        keys.push(e);
    }
    Some(keys)
}

/// One factor's image under the substitution, combined into a single affine
/// form over the target variables.
fn image_form(
    sub: &AffineSubstitution,
    form: &AffineForm,
) -> (BTreeMap<u32, FieldElement>, FieldElement) {
    let mut linear: BTreeMap<u32, FieldElement> = BTreeMap::new();
    let mut constant = form.constant_part().clone();
    for (v, c) in form.linear_terms() {
        let img = sub.image(v);
        constant = constant.add(&c.mul(img.constant_part()));
        for (w, k) in img.linear_terms() {
            let add = c.mul(k);
            match linear.remove(&w) {
                None => {
                    if !add.is_zero() {
                        linear.insert(w, add);
                    }
                }
                Some(old) => {
                    let s = old.add(&add);
                    if !s.is_zero() {
                        linear.insert(w, s);
                    }
                }
            }
        }
    }
    (linear, constant)
}

fn form_poly(
    instance: &ReductionInstance,
    linear: &BTreeMap<u32, FieldElement>,
    constant: &FieldElement,
) -> Result<SparsePoly, WitnessError> {
    let mut terms: Vec<(Monomial, FieldElement)> = Vec::new();
    if !constant.is_zero() {
        terms.push((Monomial::one(), constant.clone()));
    }
    for (v, c) in linear {
        terms.push((Monomial::var(*v, Exponent::one()), c.clone()));
    }
    Ok(SparsePoly::from_terms(
        instance.field,
        instance.universe.clone(),
        terms,
    )?)
}

/// form^e with an exact size prediction first, refusing anything over the cap
/// instead of expanding it.
fn guarded_pow(
    instance: &ReductionInstance,
    base: &SparsePoly,
    e: &Exponent,
) -> Result<SparsePoly, WitnessError> {
    if e.is_zero() {
        return Ok(SparsePoly::one(instance.field, instance.universe.clone()));
    }
    let t = base.sparsity();
    if t > 1 {
        let bound = multinomial_support_count(e, t as u64, &instance.field)?;
        let limit = if t >= 3 && instance.field.char_p().is_none() {
            DENSE_POW_CAP
        } else {
            WITNESS_TERM_CAP
        };
        if bound > BigUint::from(limit) {
            return Err(WitnessError::TooLarge {
                at: format!("a {t}-term factor image raised to the power {e}"),
                cap: limit,
            });
        }
    }
    Ok(base.pow(e)?)
}

/// Exact per-summand image statistics without expansion where a tensor
/// argument applies: single-variable factor images multiply in as one big
/// monomial (injective on terms, so they never merge anything), and the
/// remaining general factors must be pairwise variable-disjoint, making
/// their sparsities multiply and their variable spreads add. Anything else
/// is expanded under the term cap. `need_poly` forces expansion so same-key
/// summands can be merged.
struct ImageStat {
    sparsity: BigUint,
    support: u64,
    poly: Option<SparsePoly>,
}

fn summand_image_stat(
    instance: &ReductionInstance,
    summand: &Summand,
    sub: &AffineSubstitution,
    need_poly: bool,
) -> Result<ImageStat, WitnessError> {
    let field = instance.field;
    let factors: Vec<(BTreeMap<u32, FieldElement>, FieldElement, &Exponent)> = summand
        .factors
        .iter()
        .map(|(form, e)| {
            let (linear, constant) = image_form(sub, form);
            (linear, constant, e)
        })
        .collect();
    if factors
        .iter()
        .any(|(l, c, e)| l.is_empty() && c.is_zero() && !e.is_zero())
    {
        // A factor image vanished; the whole summand image is zero.
        let zero = SparsePoly::zero(field, instance.universe.clone());
        return Ok(ImageStat {
            sparsity: BigUint::zero(),
            support: 0,
            poly: Some(zero),
        });
    }
    let mut mono_vars: BTreeSet<u32> = BTreeSet::new();
    let mut general: Vec<(&BTreeMap<u32, FieldElement>, &FieldElement, &Exponent)> = Vec::new();
    for (linear, constant, e) in &factors {
        if e.is_zero() || linear.is_empty() {
            continue;
        }
        if linear.len() == 1 && constant.is_zero() {
            mono_vars.insert(*linear.keys().next().unwrap());
        } else {
            general.push((linear, constant, e));
        }
    }
    let mut seen: BTreeSet<u32> = BTreeSet::new();
    let mut disjoint = true;
    for (linear, _, _) in &general {
        for v in linear.keys() {
            if !seen.insert(*v) {
                disjoint = false;
            }
        }
    }
    if disjoint && !need_poly {
        let mut sparsity = BigUint::one();
        // Monomial variables untouched by any general factor are always
        // present; a general factor over k variables, s of them already in
        // the monomial, reaches min(s + spread, k) of its own variables.
        let mut support = mono_vars.difference(&seen).count() as u64;
        for (linear, constant, e) in &general {
            let slots = linear.len() as u64 + (!constant.is_zero()) as u64;
            sparsity *= multinomial_support_count(e, slots, &field)?;
            let k = linear.len() as u64;
            let s = linear.keys().filter(|v| mono_vars.contains(v)).count() as u64;
            let spread = factor_support(k, e, &field)?;
            support += (s + spread).min(k);
        }
        return Ok(ImageStat {
            sparsity,
            support,
            poly: None,
        });
    }
    let mut acc = SparsePoly::one(field, instance.universe.clone());
    for (linear, constant, e) in &factors {
        let base = form_poly(instance, linear, constant)?;
        let powed = guarded_pow(instance, &base, e)?;
        let predicted = acc.sparsity() as u64 * powed.sparsity().max(1) as u64;
        if predicted > WITNESS_TERM_CAP {
            return Err(WitnessError::TooLarge {
                at: "a transformed summand's factor product".into(),
                cap: WITNESS_TERM_CAP,
            });
        }
        acc = acc.mul(&powed)?;
    }
    Ok(ImageStat {
        sparsity: BigUint::from(acc.sparsity() as u64),
        support: acc.support() as u64,
        poly: Some(acc),
    })
}

/// Largest number of distinct variables in a surviving term of
/// (c_1 v_1 + ... + c_k v_k [+ c])^e: the per-digit multinomial freedom lets
/// the exponent spread across min(k, digit sum) variables.
fn factor_support(k: u64, e: &Exponent, field: &FieldSpec) -> Result<u64, WitnessError> {
    if k == 0 || e.is_zero() {
        return Ok(0);
    }
    let spread = match field.char_p() {
        None => {
            if *e >= Exponent::from(k) {
                k
            } else {
                e.try_into().map_err(|_| {
                    WitnessError::Internal("small exponent conversion".into())
                })?
            }
        }
        Some(p) => base_p_digits(e, p)?.iter().sum::<u64>().min(k),
    };
    Ok(spread.min(k))
}

/// Measures under a grouping key that provably isolates summand images:
/// within a group everything is expanded and merged exactly; across groups
/// no interaction is possible, so sparsities add and supports max.
fn grouped_measure(
    instance: &ReductionInstance,
    sub: &AffineSubstitution,
    keys: Vec<Exponent>,
) -> Result<(BigUint, Vec<SummandStat>), WitnessError> {
    let mut groups: BTreeMap<&Exponent, Vec<usize>> = BTreeMap::new();
    for (t, key) in keys.iter().enumerate() {
        groups.entry(key).or_default().push(t);
    }
    let support = support_mode(instance);
    let mut stats: Vec<Option<ImageStat>> = (0..instance.summands.len()).map(|_| None).collect();
    for members in groups.values() {
        let need_poly = members.len() > 1;
        for &t in members {
            stats[t] = Some(summand_image_stat(
                instance,
                &instance.summands[t],
                sub,
                need_poly,
            )?);
        }
    }
    let stats: Vec<ImageStat> = stats.into_iter().map(Option::unwrap).collect();
    let mut total_sparsity = BigUint::zero();
    let mut total_support: u64 = 0;
    for members in groups.values() {
        if members.len() == 1 {
            let s = &stats[members[0]];
            total_sparsity += &s.sparsity;
            total_support = total_support.max(s.support);
        } else {
            let mut merged = SparsePoly::zero(instance.field, instance.universe.clone());
            for &t in members {
                merged = merged.add(stats[t].poly.as_ref().expect("expanded for merge"))?;
            }
            total_sparsity += BigUint::from(merged.sparsity() as u64);
            total_support = total_support.max(merged.support() as u64);
        }
    }
    let per = per_summand_stats(instance, &stats, support);
    let measured = if support {
        BigUint::from(total_support)
    } else {
        total_sparsity
    };
    Ok((measured, per))
}

fn per_summand_stats(
    instance: &ReductionInstance,
    stats: &[ImageStat],
    support: bool,
) -> Vec<SummandStat> {
    instance
        .summands
        .iter()
        .zip(stats)
        .map(|(s, st)| SummandStat {
            label: s.label.clone(),
            value: if support {
                BigUint::from(st.support)
            } else {
                st.sparsity.clone()
            },
        })
        .collect()
}

/// Last resort: expand every summand image and merge the lot. Exact but
/// capped; substitutions with constants on inhomogeneous families land here.
fn full_assembly(
    instance: &ReductionInstance,
    sub: &AffineSubstitution,
) -> Result<(BigUint, Vec<SummandStat>), WitnessError> {
    let support = support_mode(instance);
    let mut total = SparsePoly::zero(instance.field, instance.universe.clone());
    let mut stats = Vec::with_capacity(instance.summands.len());
    for s in &instance.summands {
        let st = summand_image_stat(instance, s, sub, true)?;
        let img = st.poly.as_ref().expect("expanded");
        if (total.sparsity() + img.sparsity()) as u64 > WITNESS_TERM_CAP {
            return Err(WitnessError::TooLarge {
                at: "the merged transformed polynomial".into(),
                cap: WITNESS_TERM_CAP,
            });
        }
        total = total.add(img)?;
        stats.push(st);
    }
    let measured = if support {
        BigUint::from(total.support() as u64)
    } else {
        BigUint::from(total.sparsity() as u64)
    };
    Ok((measured, per_summand_stats(instance, &stats, support)))
}

// ---------------------------------------------------------------------------
// Translation measurement by ladder layers
// ---------------------------------------------------------------------------

/// S(f(z + b)) computed layer by layer in the ladder variable: writing
/// f = sum_t x0^{e_t} g_t with x0-free bodies g_t, the coefficient of x0^j
/// after the shift is h_j = sum_t C(e_t, j) b0^{e_t - j} g_t(x + b), and the
/// total sparsity is the sum of S(h_j) over j. Binomial support sets are
/// enumerated digit-wise; at most one summand may have an unenumerably large
/// set, and its solo layers contribute S(body) each without enumeration.
struct LayerSummand {
    e: Exponent,
    body: SparsePoly,
    sparsity: BigUint,
    g0: FieldElement,
    vars: BTreeSet<u32>,
}

fn shift_measure(
    instance: &ReductionInstance,
    b: &[FieldElement],
) -> Result<(BigUint, Vec<SummandStat>), WitnessError> {
    let field = instance.field;
    let Some(x0) = instance.x0_id() else {
        return full_assembly(instance, &shift_substitution(instance, b));
    };
    let b0 = b[x0 as usize].clone();
    let mut layers = Vec::with_capacity(instance.summands.len());
    for s in &instance.summands {
        let mut e = Exponent::zero();
        let mut body = SparsePoly::one(field, instance.universe.clone());
        for (form, d) in &s.factors {
            if form.coefficient_of(x0).is_some() {
                if form.linear_len() != 1 || !form.constant_part().is_zero() {
                    return full_assembly(instance, &shift_substitution(instance, b));
                }
                e += d;
                continue;
            }
            let mut constant = form.constant_part().clone();
            for (v, c) in form.linear_terms() {
                constant = constant.add(&c.mul(&b[v as usize]));
            }
            let shifted = AffineForm::new(
                form.linear_terms().map(|(v, c)| (v, c.clone())),
                constant,
            );
            let base = SparsePoly::from_terms(
                field,
                instance.universe.clone(),
                shifted
                    .linear_terms()
                    .map(|(v, c)| (Monomial::var(v, Exponent::one()), c.clone()))
                    .chain(
                        (!shifted.constant_part().is_zero())
                            .then(|| (Monomial::one(), shifted.constant_part().clone())),
                    ),
            )?;
            let powed = guarded_pow(instance, &base, d)?;
            let predicted = body.sparsity() as u64 * powed.sparsity().max(1) as u64;
            if predicted > WITNESS_TERM_CAP {
                return Err(WitnessError::TooLarge {
                    at: "a shifted summand body".into(),
                    cap: WITNESS_TERM_CAP,
                });
            }
            body = body.mul(&powed)?;
        }
        if body.variables().contains(&x0) {
            return full_assembly(instance, &shift_substitution(instance, b));
        }
        let sparsity = BigUint::from(body.sparsity() as u64);
        let g0 = body
            .coefficient(&Monomial::one())
            .cloned()
            .unwrap_or_else(|| field.zero());
        let vars = body.variables();
        layers.push(LayerSummand {
            e,
            body,
            sparsity,
            g0,
            vars,
        });
    }

    // Per-summand statistic: the shifted summand is (x0 + b0)^{e_t} * g_t,
    // a tensor of the binomial row and the shifted body.
    let per: Vec<SummandStat> = instance
        .summands
        .iter()
        .zip(&layers)
        .map(|(s, l)| {
            let row = if b0.is_zero() {
                BigUint::one()
            } else {
                multinomial_support_count(&l.e, 2, &field)?
            };
            Ok(SummandStat {
                label: s.label.clone(),
                value: row * &l.sparsity,
            })
        })
        .collect::<Result<_, WitnessError>>()?;

    let mut special: BTreeMap<Exponent, Vec<usize>> = BTreeMap::new();
    let mut dense: Vec<usize> = Vec::new();
    if b0.is_zero() {
        // No mixing between layers: h_{e_t} collects exactly the summands
        // sharing that ladder exponent.
        for (t, l) in layers.iter().enumerate() {
            special.entry(l.e.clone()).or_default().push(t);
        }
    } else {
        for (t, l) in layers.iter().enumerate() {
            let count = multinomial_support_count(&l.e, 2, &field)?;
            if count <= BigUint::from(ACTIVE_ENUM_CAP) {
                for j in enumerate_binomial_support(&l.e, &field)? {
                    special.entry(j).or_default().push(t);
                }
            } else {
                dense.push(t);
            }
        }
        if dense.len() > 1 {
            return full_assembly(instance, &shift_substitution(instance, b));
        }
    }

    let layer_coeff = |e: &Exponent, j: &Exponent| -> Result<FieldElement, WitnessError> {
        let c = binomial_mod(e, j, &field)?;
        if e == j || b0.is_zero() {
            Ok(c)
        } else {
            Ok(c.mul(&b0.pow(&(e - j))?))
        }
    };

    let mut total = BigUint::zero();
    let mut dense_overlap = BigUint::zero();
    for (j, ts) in &special {
        let mut entries: Vec<(usize, FieldElement)> = Vec::with_capacity(ts.len() + 1);
        for &t in ts {
            entries.push((t, layer_coeff(&layers[t].e, j)?));
        }
        if let Some(&td) = dense.first() {
            if *j <= layers[td].e {
                let c = layer_coeff(&layers[td].e, j)?;
                if !c.is_zero() {
                    entries.push((td, c));
                    dense_overlap += 1u32;
                }
            }
        }
        total += layer_stat(instance, &layers, &entries)?;
    }
    if let Some(&td) = dense.first() {
        let count = multinomial_support_count(&layers[td].e, 2, &field)?;
        total += (count - dense_overlap) * &layers[td].sparsity;
    }
    Ok((total, per))
}

fn shift_substitution(instance: &ReductionInstance, b: &[FieldElement]) -> AffineSubstitution {
    AffineSubstitution::shift(
        instance.field,
        instance.universe.clone(),
        b.iter().enumerate().map(|(v, c)| (v as u32, c.clone())),
    )
}

/// Exact sparsity of one layer h = sum c_t g_t. Bodies over pairwise-disjoint
/// variables only share the constant monomial, so the count is closed-form;
/// otherwise the (small) bodies are merged for real.
fn layer_stat(
    instance: &ReductionInstance,
    layers: &[LayerSummand],
    entries: &[(usize, FieldElement)],
) -> Result<BigUint, WitnessError> {
    if entries.len() == 1 {
        return Ok(layers[entries[0].0].sparsity.clone());
    }
    let mut seen: BTreeSet<u32> = BTreeSet::new();
    let mut disjoint = true;
    'outer: for (t, _) in entries {
        for v in &layers[*t].vars {
            if !seen.insert(*v) {
                disjoint = false;
                break 'outer;
            }
        }
    }
    if disjoint {
        let mut total = BigUint::zero();
        let mut const_sum = instance.field.zero();
        for (t, c) in entries {
            let l = &layers[*t];
            total += &l.sparsity;
            if !l.g0.is_zero() {
                total -= 1u32;
                const_sum = const_sum.add(&c.mul(&l.g0));
            }
        }
        if !const_sum.is_zero() {
            total += 1u32;
        }
        Ok(total)
    } else {
        let mut merged = SparsePoly::zero(instance.field, instance.universe.clone());
        for (t, c) in entries {
            merged = merged.add(&layers[*t].body.scale(c))?;
        }
        Ok(BigUint::from(merged.sparsity() as u64))
    }
}

/// All j with C(e, j) nonzero in the field, smallest first: every j <= e in
/// characteristic zero, digit-dominated j by Lucas over F_p.
fn enumerate_binomial_support(
    e: &Exponent,
    field: &FieldSpec,
) -> Result<Vec<Exponent>, WitnessError> {
    match field.char_p() {
        None => {
            let mut out = Vec::new();
            let mut j = Exponent::zero();
            while j <= *e {
                out.push(j.clone());
                j += 1u32;
            }
            Ok(out)
        }
        Some(p) => {
            let digits = base_p_digits(e, p)?;
            let mut weights = Vec::with_capacity(digits.len());
            let mut w = Exponent::one();
            for _ in 0..digits.len() {
                weights.push(w.clone());
                w *= p;
            }
            let mut out = Vec::new();
            let mut choice = vec![0u64; digits.len()];
            loop {
                let mut j = Exponent::zero();
                for (c, w) in choice.iter().zip(&weights) {
                    if *c > 0 {
                        j += w * *c;
                    }
                }
                out.push(j);
                let mut k = 0;
                while k < digits.len() {
                    if choice[k] < digits[k] {
                        choice[k] += 1;
                        break;
                    }
                    choice[k] = 0;
                    k += 1;
                }
                if k == digits.len() {
                    break;
                }
            }
            out.sort();
            Ok(out)
        }
    }
}

// ---------------------------------------------------------------------------
// Extraction
// ---------------------------------------------------------------------------

/// Decodes the assignment a passing witness encodes, undoes the instance's
/// polarity normalization, and evaluation-gates the result against the
/// original formula. Witnesses that pass the budget but do not match the
/// decodable family shape are refused loudly rather than guessed at.
pub fn extract_assignment(
    instance: &ReductionInstance,
    witness: &Witness,
) -> Result<Vec<bool>, WitnessError> {
    let report = verify_witness(instance, witness)?;
    if !report.pass {
        return Err(WitnessError::NotPassing);
    }
    let sub = match &witness.payload {
        WitnessPayload::Affine(sub) => sub.clone(),
        WitnessPayload::Shift(b) => shift_substitution(instance, b),
    };
    let u_work = decode_substitution(instance, &sub)?;
    let u = match &instance.flip {
        Some(flip) => flip.apply(&u_work),
        None => u_work,
    };
    if !instance.source_formula.evaluate(&u) {
        return Err(WitnessError::Internal(
            "decoded assignment fails the source formula".into(),
        ));
    }
    Ok(u)
}

fn single_var(form: &AffineForm) -> Option<(u32, &FieldElement)> {
    if form.linear_len() != 1 || !form.constant_part().is_zero() {
        return None;
    }
    form.linear_terms().next()
}

fn decode_substitution(
    instance: &ReductionInstance,
    sub: &AffineSubstitution,
) -> Result<Vec<bool>, WitnessError> {
    let n = instance.n;
    let zero_one = zero_one_coding(instance);
    let one = instance.field.one();
    let minus_one = instance.field.from_i64(-1);

    if let Some(x0) = instance.x0_id() {
        let (w, _) = single_var(sub.image(x0)).ok_or_else(|| {
            WitnessError::OutOfFamily("the ladder variable image is not a scaled variable".into())
        })?;
        if w != x0 {
            return Err(WitnessError::OutOfFamily(
                "the ladder variable is not fixed".into(),
            ));
        }
    }
    if let Some(y0) = instance.y0_id() {
        let (w, _) = single_var(sub.image(y0)).ok_or_else(|| {
            WitnessError::OutOfFamily("the degree-filler image is not a scaled variable".into())
        })?;
        if w != y0 {
            return Err(WitnessError::OutOfFamily(
                "the degree-filler variable is not fixed".into(),
            ));
        }
    }
    if instance.variant.problem == Problem::EtSupport {
        let sigma = instance.variant.sigma.expect("sigma set");
        let z_ids: BTreeSet<u32> = (1..=(sigma as u32 - 5))
            .map(|j| instance.z_id(j).expect("z range"))
            .collect();
        for &z in &z_ids {
            let (w, _) = single_var(sub.image(z)).ok_or_else(|| {
                WitnessError::OutOfFamily("a prefix variable image is not a scaled variable".into())
            })?;
            if !z_ids.contains(&w) {
                return Err(WitnessError::OutOfFamily(
                    "a prefix variable leaves the prefix block".into(),
                ));
            }
        }
    }

    let pair_of_x: BTreeMap<u32, u32> = (1..=n).map(|i| (instance.x_id(i), i)).collect();
    let mut u = Vec::with_capacity(n as usize);

    if instance.variant.problem == Problem::SetSparse {
        for i in 1..=n {
            let img = sub.image(instance.x_id(i));
            if img.linear_len() != 1 {
                return Err(WitnessError::OutOfFamily(format!(
                    "pair {i}: image mixes several variables"
                )));
            }
            let (w, beta) = img.linear_terms().next().unwrap();
            if !pair_of_x.contains_key(&w) || beta.is_zero() {
                return Err(WitnessError::OutOfFamily(format!(
                    "pair {i}: image leaves the variable block"
                )));
            }
            let b = img.constant_part();
            let bit = decode_offset(b, zero_one, &one, &minus_one).ok_or_else(|| {
                WitnessError::OutOfFamily(format!(
                    "pair {i}: shift offset {} is not a valid encoding",
                    b.to_coeff_string()
                ))
            })?;
            u.push(bit);
        }
        return Ok(u);
    }

    for i in 1..=n {
        let xi = instance.x_id(i);
        let yi = instance.y_id(i).expect("paired family");
        let (w, beta) = single_var(sub.image(xi)).ok_or_else(|| {
            WitnessError::OutOfFamily(format!("pair {i}: x-image is not a scaled variable"))
        })?;
        let Some(&j) = pair_of_x.get(&w) else {
            return Err(WitnessError::OutOfFamily(format!(
                "pair {i}: x-image leaves the pair block"
            )));
        };
        let (xj, yj) = (instance.x_id(j), instance.y_id(j).expect("paired family"));
        let y_img = sub.image(yi);
        if !y_img.constant_part().is_zero() {
            return Err(WitnessError::OutOfFamily(format!(
                "pair {i}: y-image has a constant part"
            )));
        }
        let gamma = y_img.coefficient_of(yj).cloned().unwrap_or_else(|| {
            instance.field.zero()
        });
        if gamma.is_zero() {
            return Err(WitnessError::OutOfFamily(format!(
                "pair {i}: y-image misses the partner variable"
            )));
        }
        if y_img
            .linear_terms()
            .any(|(v, _)| v != yj && v != xj)
        {
            return Err(WitnessError::OutOfFamily(format!(
                "pair {i}: y-image mixes foreign variables"
            )));
        }
        let delta = y_img
            .coefficient_of(xj)
            .cloned()
            .unwrap_or_else(|| instance.field.zero());
        let c = delta.mul(&beta.inverse().map_err(|_| {
            WitnessError::OutOfFamily(format!("pair {i}: x-image coefficient is zero"))
        })?);
        let bit = decode_offset(&c, zero_one, &one, &minus_one).ok_or_else(|| {
            WitnessError::OutOfFamily(format!(
                "pair {i}: mixing coefficient {} is not a valid encoding",
                c.to_coeff_string()
            ))
        })?;
        u.push(bit);
    }
    Ok(u)
}

/// {+1 -> false, -1 -> true} in the signed coding, {1 -> false, 0 -> true}
/// in the {0,1} coding.
fn decode_offset(
    c: &FieldElement,
    zero_one: bool,
    one: &FieldElement,
    minus_one: &FieldElement,
) -> Option<bool> {
    if zero_one {
        if c == one {
            Some(false)
        } else if c.is_zero() {
            Some(true)
        } else {
            None
        }
    } else if c == one {
        Some(false)
    } else if c == minus_one {
        Some(true)
    } else {
        None
    }
}

// ---------------------------------------------------------------------------
// Exhaustive search
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyKind {
    /// Pair maps x_i -> a x_{pi(i)}, y_i -> a (y_{pi(i)} + c_i x_{pi(i)}).
    StructuredTransforms,
    /// Every translation vector over a finite field.
    AllShifts,
    /// The structured pair maps, measured on the support statistic.
    SupportTransforms,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PermutationPolicy {
    IdentityOnly,
    AllPairPermutations,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchFamily {
    pub kind: FamilyKind,
    /// Mixing coefficients c_i tried per pair (structured kinds).
    pub coefficient_pool: Vec<FieldElement>,
    pub permutation_policy: PermutationPolicy,
    /// Uniform pair scalings a tried per candidate; empty means a = 1 only.
    pub scaling_pool: Vec<FieldElement>,
    /// Maximum family size this search is willing to enumerate.
    pub cap: u64,
}

impl SearchFamily {
    pub fn structured(coefficient_pool: Vec<FieldElement>) -> SearchFamily {
        SearchFamily {
            kind: FamilyKind::StructuredTransforms,
            coefficient_pool,
            permutation_policy: PermutationPolicy::IdentityOnly,
            scaling_pool: Vec::new(),
            cap: DEFAULT_SEARCH_CAP,
        }
    }

    pub fn all_shifts() -> SearchFamily {
        SearchFamily {
            kind: FamilyKind::AllShifts,
            coefficient_pool: Vec::new(),
            permutation_policy: PermutationPolicy::IdentityOnly,
            scaling_pool: Vec::new(),
            cap: DEFAULT_SEARCH_CAP,
        }
    }

    pub fn support_transforms(coefficient_pool: Vec<FieldElement>) -> SearchFamily {
        SearchFamily {
            kind: FamilyKind::SupportTransforms,
            coefficient_pool,
            ..SearchFamily::structured(Vec::new())
        }
    }

    /// Number of candidates, reported before any are evaluated.
    pub fn family_size(&self, instance: &ReductionInstance) -> Result<BigUint, WitnessError> {
        match self.kind {
            FamilyKind::AllShifts => {
                let p = instance
                    .field
                    .char_p()
                    .ok_or(WitnessError::ShiftsNeedFiniteField)?;
                Ok(BigUint::from(p).pow(instance.universe.len() as u32))
            }
            FamilyKind::StructuredTransforms | FamilyKind::SupportTransforms => {
                let (pool, scalings) = self.canonical_pools(&instance.field)?;
                let mut size = BigUint::from(pool.len() as u64)
                    .pow(instance.n)
                    * BigUint::from(scalings.len() as u64);
                if self.permutation_policy == PermutationPolicy::AllPairPermutations {
                    for k in 2..=instance.n as u64 {
                        size *= k;
                    }
                }
                Ok(size)
            }
        }
    }

    /// Deduplicated pools in canonical element order; scalings must be
    /// nonzero and default to {1}.
    fn canonical_pools(
        &self,
        field: &FieldSpec,
    ) -> Result<(Vec<FieldElement>, Vec<FieldElement>), WitnessError> {
        if self.kind != FamilyKind::AllShifts && self.coefficient_pool.is_empty() {
            return Err(WitnessError::BadFamily("empty coefficient pool".into()));
        }
        let canon = |pool: &[FieldElement]| -> Result<Vec<FieldElement>, WitnessError> {
            let mut out = pool.to_vec();
            if out.iter().any(|c| c.spec() != *field) {
                return Err(WitnessError::FieldMismatch);
            }
            out.sort_by(|a, b| a.canonical_cmp(b));
            out.dedup();
            Ok(out)
        };
        let pool = canon(&self.coefficient_pool)?;
        let mut scalings = canon(&self.scaling_pool)?;
        scalings.retain(|c| !c.is_zero());
        if scalings.is_empty() {
            scalings.push(field.one());
        }
        Ok((pool, scalings))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchOutcome {
    pub family_size: BigUint,
    pub evaluated: u64,
    pub min: BigUint,
    pub argmin: Witness,
}

/// Evaluates every candidate in the family and returns the exact minimum of
/// the instance statistic with the first (lexicographically smallest)
/// minimizer. Refuses families larger than the cap up front.
pub fn brute_force_search(
    instance: &ReductionInstance,
    family: &SearchFamily,
) -> Result<SearchOutcome, WitnessError> {
    let size = family.family_size(instance)?;
    if size > BigUint::from(family.cap) {
        return Err(WitnessError::FamilyTooLarge {
            size: size.to_string(),
            cap: family.cap,
        });
    }
    let mut best: Option<(BigUint, Witness)> = None;
    let mut evaluated: u64 = 0;
    let mut consider = |payload: WitnessPayload| -> Result<(), WitnessError> {
        let (measured, _) = measure_payload(instance, &payload)?;
        evaluated += 1;
        let better = best.as_ref().is_none_or(|(m, _)| measured < *m);
        if better {
            best = Some((
                measured,
                Witness {
                    payload,
                    claimed_assignment: None,
                },
            ));
        }
        Ok(())
    };

    match family.kind {
        FamilyKind::AllShifts => {
            let p = instance
                .field
                .char_p()
                .ok_or(WitnessError::ShiftsNeedFiniteField)?;
            let elements: Vec<FieldElement> = (0..p)
                .map(|r| instance.field.from_biguint(&BigUint::from(r)))
                .collect();
            let slots = instance.universe.len();
            let mut idx = vec![0usize; slots];
            loop {
                let b: Vec<FieldElement> = idx.iter().map(|&i| elements[i].clone()).collect();
                consider(WitnessPayload::Shift(b))?;
                let mut k = slots;
                while k > 0 {
                    idx[k - 1] += 1;
                    if idx[k - 1] < elements.len() {
                        break;
                    }
                    idx[k - 1] = 0;
                    k -= 1;
                }
                if k == 0 {
                    break;
                }
            }
        }
        FamilyKind::StructuredTransforms | FamilyKind::SupportTransforms => {
            let n = instance.n as usize;
            let (pool, scalings) = family.canonical_pools(&instance.field)?;
            let perms: Vec<Vec<u32>> = match family.permutation_policy {
                PermutationPolicy::IdentityOnly => vec![(1..=instance.n).collect()],
                PermutationPolicy::AllPairPermutations => {
                    use itertools::Itertools;
                    (1..=instance.n).permutations(n).collect()
                }
            };
            for perm in &perms {
                for a in &scalings {
                    let mut idx = vec![0usize; n];
                    loop {
                        let sub = structured_candidate(instance, perm, a, &idx, &pool);
                        consider(WitnessPayload::Affine(sub))?;
                        let mut k = n;
                        while k > 0 {
                            idx[k - 1] += 1;
                            if idx[k - 1] < pool.len() {
                                break;
                            }
                            idx[k - 1] = 0;
                            k -= 1;
                        }
                        if k == 0 {
                            break;
                        }
                    }
                }
            }
        }
    }
    let (min, argmin) = best.ok_or_else(|| WitnessError::BadFamily("no candidates".into()))?;
    Ok(SearchOutcome {
        family_size: size,
        evaluated,
        min,
        argmin,
    })
}

fn structured_candidate(
    instance: &ReductionInstance,
    perm: &[u32],
    a: &FieldElement,
    idx: &[usize],
    pool: &[FieldElement],
) -> AffineSubstitution {
    let field = instance.field;
    let mut sub = AffineSubstitution::identity(field, instance.universe.clone());
    for i in 1..=instance.n {
        let j = perm[i as usize - 1];
        let c = &pool[idx[i as usize - 1]];
        let (xi, xj) = (instance.x_id(i), instance.x_id(j));
        sub.set_image(xi, AffineForm::new(vec![(xj, a.clone())], field.zero()));
        if let (Some(yi), Some(yj)) = (instance.y_id(i), instance.y_id(j)) {
            sub.set_image(
                yi,
                AffineForm::new(
                    vec![(yj, a.clone()), (xj, a.mul(c))],
                    field.zero(),
                ),
            );
        }
    }
    sub
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

pub fn witness_to_json(instance: &ReductionInstance, w: &Witness) -> serde_json::Value {
    let assignment = match &w.claimed_assignment {
        Some(u) => serde_json::Value::Array(
            u.iter()
                .map(|b| serde_json::Value::from(*b as u64))
                .collect(),
        ),
        None => serde_json::Value::Null,
    };
    match &w.payload {
        WitnessPayload::Affine(sub) => {
            let mut images = serde_json::Map::new();
            for v in instance.universe.ids() {
                let form = sub.image(v);
                let linear: Vec<serde_json::Value> = form
                    .linear_terms()
                    .map(|(w, c)| {
                        serde_json::json!([
                            instance.universe.name(w),
                            c.to_coeff_string()
                        ])
                    })
                    .collect();
                images.insert(
                    instance.universe.name(v).to_string(),
                    serde_json::json!({
                        "linear": linear,
                        "constant": form.constant_part().to_coeff_string(),
                    }),
                );
            }
            serde_json::json!({
                "kind": "affine_transform",
                "images": images,
                "assignment": assignment,
            })
        }
        WitnessPayload::Shift(b) => {
            let mut shift = serde_json::Map::new();
            for v in instance.universe.ids() {
                shift.insert(
                    instance.universe.name(v).to_string(),
                    serde_json::Value::String(b[v as usize].to_coeff_string()),
                );
            }
            serde_json::json!({
                "kind": "shift_vector",
                "shift": shift,
                "assignment": assignment,
            })
        }
    }
}

pub fn witness_from_json(
    instance: &ReductionInstance,
    v: &serde_json::Value,
) -> Result<Witness, WitnessError> {
    let bad = |msg: &str| WitnessError::BadEncoding(msg.to_string());
    let field = instance.field;
    let kind = v
        .get("kind")
        .and_then(serde_json::Value::as_str)
        .ok_or_else(|| bad("missing kind"))?;
    let claimed_assignment = match v.get("assignment") {
        None | Some(serde_json::Value::Null) => None,
        Some(serde_json::Value::Array(bits)) => Some(
            bits.iter()
                .map(|b| match b.as_u64() {
                    Some(0) => Ok(false),
                    Some(1) => Ok(true),
                    _ => Err(bad("assignment entries must be 0 or 1")),
                })
                .collect::<Result<Vec<bool>, _>>()?,
        ),
        Some(_) => return Err(bad("assignment must be an array")),
    };
    let var_id = |name: &str| {
        instance
            .universe
            .id(name)
            .ok_or_else(|| bad(&format!("unknown variable {name}")))
    };
    let coeff = |s: &str| {
        FieldElement::parse(&field, s)
            .ok_or_else(|| bad(&format!("unparsable coefficient {s}")))
    };
    let payload = match kind {
        "affine_transform" => {
            let images = v
                .get("images")
                .and_then(serde_json::Value::as_object)
                .ok_or_else(|| bad("missing images"))?;
            let mut sub = AffineSubstitution::identity(field, instance.universe.clone());
            for (name, entry) in images {
                let target = var_id(name)?;
                let linear = entry
                    .get("linear")
                    .and_then(serde_json::Value::as_array)
                    .ok_or_else(|| bad("image missing linear part"))?;
                let mut terms = Vec::with_capacity(linear.len());
                for pair in linear {
                    let (w, c) = match pair.as_array().map(Vec::as_slice) {
                        Some([w, c]) => (
                            w.as_str().ok_or_else(|| bad("linear term variable"))?,
                            c.as_str().ok_or_else(|| bad("linear term coefficient"))?,
                        ),
                        _ => return Err(bad("linear terms must be [var, coeff] pairs")),
                    };
                    terms.push((var_id(w)?, coeff(c)?));
                }
                let constant = entry
                    .get("constant")
                    .and_then(serde_json::Value::as_str)
                    .map(coeff)
                    .transpose()?
                    .unwrap_or_else(|| field.zero());
                sub.set_image(target, AffineForm::new(terms, constant));
            }
            WitnessPayload::Affine(sub)
        }
        "shift_vector" => {
            let shift = v
                .get("shift")
                .and_then(serde_json::Value::as_object)
                .ok_or_else(|| bad("missing shift"))?;
            let mut b = vec![field.zero(); instance.universe.len()];
            for (name, val) in shift {
                let target = var_id(name)?;
                let s = val.as_str().ok_or_else(|| bad("shift coefficient"))?;
                b[target as usize] = coeff(s)?;
            }
            WitnessPayload::Shift(b)
        }
        other => return Err(bad(&format!("unknown witness kind {other}"))),
    };
    Ok(Witness {
        payload,
        claimed_assignment,
    })
}

pub fn report_to_json(report: &VerifyReport) -> serde_json::Value {
    serde_json::json!({
        "statistic": report.statistic,
        "measured": report.measured.to_string(),
        "budget": report.budget.to_string(),
        "pass": report.pass,
        "per_summand": report
            .per_summand
            .iter()
            .map(|s| serde_json::json!({"label": s.label, "value": s.value.to_string()}))
            .collect::<Vec<_>>(),
    })
}
