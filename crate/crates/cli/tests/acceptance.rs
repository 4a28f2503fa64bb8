//! Release acceptance suite. Each criterion prints one PASS/FAIL line with
//! its runtime and a short summary; the process exits nonzero if any
//! criterion fails. Sampling is seeded, so two runs check the same cases.

use std::process::Command;
use std::time::Instant;

use num_bigint::BigUint;
use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use satpoly_core::algebra::{exp, FieldElement, FieldSpec};
use satpoly_core::cnf::{Clause, CnfFormula, Literal};
use satpoly_core::reductions::{
    build_instance, GapSpec, ReductionInstance, SeparationWitness, Variant,
};
use satpoly_core::sparsepoly::{
    check_degree_separated, linear_power_sparsity, AffineForm, AffineSubstitution, Monomial,
    SparsePoly, VarUniverse,
};
use satpoly_core::witness::{
    brute_force_search, extract_assignment, forward_witness, verify_witness, SearchFamily,
    Witness, WitnessPayload,
};

fn main() {
    let mut all_pass = true;
    let mut record = |number: usize, name: &str, limit: Option<f64>, body: &mut dyn FnMut() -> (bool, String)| {
        let start = Instant::now();
        let (pass, detail) = body();
        let elapsed = start.elapsed().as_secs_f64();
        let in_time = limit.is_none_or(|l| elapsed < l);
        let ok = pass && in_time;
        println!(
            "criterion {number} ({name}): {} ({elapsed:.1}s) - {detail}{}",
            if ok { "PASS" } else { "FAIL" },
            if in_time { "" } else { " [over time limit]" },
        );
        all_pass &= ok;
    };

    record(1, "closed-form power counts", Some(60.0), &mut closed_form_powers);
    let mut suite = Vec::new();
    record(2, "built-instance statistics", Some(300.0), &mut || {
        suite = build_suite();
        instance_statistics(&suite)
    });
    record(3, "forward witnesses", Some(300.0), &mut || forward_witnesses(&suite));
    record(4, "exhaustive shift search", Some(600.0), &mut exhaustive_shift_search);
    record(5, "structured-family search", Some(600.0), &mut structured_family_search);
    record(6, "witness round trips", None, &mut || witness_round_trips(&suite));
    record(7, "gap floor", Some(600.0), &mut gap_floor);
    record(8, "algebra property suite", Some(120.0), &mut algebra_properties);
    record(9, "selftest determinism", None, &mut selftest_determinism);

    if all_pass {
        println!("acceptance: PASS");
    } else {
        println!("acceptance: FAIL");
        std::process::exit(1);
    }
}

// ---------------------------------------------------------------------------
// shared helpers
// ---------------------------------------------------------------------------

fn q() -> FieldSpec {
    FieldSpec::RATIONAL
}

fn fp(p: u64) -> FieldSpec {
    FieldSpec::prime(p).unwrap()
}

fn formula(n: u32, clauses: &[[i64; 3]]) -> CnfFormula {
    let clauses = clauses
        .iter()
        .map(|c| {
            Clause::new([
                Literal::from_dimacs(c[0], n).unwrap(),
                Literal::from_dimacs(c[1], n).unwrap(),
                Literal::from_dimacs(c[2], n).unwrap(),
            ])
            .unwrap()
        })
        .collect();
    CnfFormula::new(n, clauses).unwrap()
}

/// Random formula with `m` distinct three-distinct-variable clauses.
fn random_formula(rng: &mut ChaCha8Rng, n: u32, m: usize) -> CnfFormula {
    let mut picked: Vec<[i64; 3]> = Vec::new();
    while picked.len() < m {
        let vars = sample(rng, n as usize, 3);
        let mut lits: Vec<i64> = vars
            .iter()
            .map(|v| {
                let var = v as i64 + 1;
                if rng.gen::<bool>() {
                    -var
                } else {
                    var
                }
            })
            .collect();
        lits.sort_by_key(|l| l.abs());
        let clause = [lits[0], lits[1], lits[2]];
        if !picked.contains(&clause) {
            picked.push(clause);
        }
    }
    formula(n, &picked)
}

/// All eight sign patterns over variables 1,2,3; together unsatisfiable.
fn three_var_clauses() -> Vec<[i64; 3]> {
    (0..8u8)
        .map(|bits| {
            let sign = |i: u8| if bits >> i & 1 == 1 { -1 } else { 1 };
            [sign(0), 2 * sign(1), 3 * sign(2)]
        })
        .collect()
}

fn source_to_work(instance: &ReductionInstance, u: &[bool]) -> Vec<bool> {
    match &instance.flip {
        Some(flip) => flip.apply(u),
        None => u.to_vec(),
    }
}

struct SuiteEntry {
    label: String,
    instance: ReductionInstance,
}

/// Thirty random normalized formulas per variant, eleven variants.
fn build_suite() -> Vec<SuiteEntry> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5017);
    let variants: Vec<(&str, Variant, FieldSpec)> = vec![
        ("etsparse/q", Variant::etsparse(), q()),
        ("etsparse/fp:3", Variant::etsparse(), fp(3)),
        ("etsparse/fp:2", Variant::etsparse(), fp(2)),
        ("etsparse-hom/q", Variant::etsparse_hom(), q()),
        ("etsparse-hom/fp:3", Variant::etsparse_hom(), fp(3)),
        ("etsparse-hom/fp:2", Variant::etsparse_hom(), fp(2)),
        ("setsparse/q", Variant::setsparse(), q()),
        ("setsparse/fp:3", Variant::setsparse(), fp(3)),
        ("setsparse/fp:2", Variant::setsparse(), fp(2)),
        ("etsparse+translations/q", Variant::etsparse().with_translations(), q()),
        ("etsupport+sigma=5/q", Variant::etsupport(5), q()),
    ];
    let mut suite = Vec::new();
    for (label, variant, field) in variants {
        for case in 0..30 {
            let (n, m) = if variant.problem == satpoly_core::reductions::Problem::EtSupport {
                (9, rng.gen_range(1usize..=4))
            } else {
                (rng.gen_range(3u32..=5), rng.gen_range(1usize..=4))
            };
            let psi = random_formula(&mut rng, n, m);
            let instance = build_instance(&psi, &variant, &field)
                .unwrap_or_else(|e| panic!("{label} case {case} failed to build: {e}"));
            suite.push(SuiteEntry {
                label: format!("{label}#{case}"),
                instance,
            });
        }
    }
    suite
}

// ---------------------------------------------------------------------------
// criterion 1
// ---------------------------------------------------------------------------

fn closed_form_powers() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC1);
    let fields = [q(), fp(2), fp(3), fp(5)];
    let cases = 1000u32;
    for case in 0..cases {
        let m = rng.gen_range(1u64..=4);
        let d = rng.gen_range(0u64..=50);
        let field = fields[rng.gen_range(0..fields.len())];
        let universe = VarUniverse::new((1..=m).map(|i| format!("x{i}")).collect()).unwrap();
        let terms: Vec<(Monomial, FieldElement)> = (0..m as u32)
            .map(|v| {
                let c = loop {
                    let c = field.from_i64(rng.gen_range(-3i64..=3));
                    if !c.is_zero() {
                        break c;
                    }
                };
                (Monomial::var(v, exp(1)), c)
            })
            .collect();
        let base = SparsePoly::from_terms(field, universe, terms).unwrap();
        let expanded = base.pow(&exp(d)).unwrap().sparsity();
        let predicted = linear_power_sparsity(m, &exp(d), &field).unwrap();
        if predicted != BigUint::from(expanded as u64) {
            return (
                false,
                format!("case {case}: m={m} d={d} field={field}: predicted {predicted}, expanded {expanded}"),
            );
        }
    }
    (true, format!("{cases} randomized cases agree (m<=4, d<=50, q/fp:2/fp:3/fp:5)"))
}

// ---------------------------------------------------------------------------
// criterion 2
// ---------------------------------------------------------------------------

fn instance_statistics(suite: &[SuiteEntry]) -> (bool, String) {
    for entry in suite {
        let inst = &entry.instance;
        let cf = &inst.closed_form;
        let st = &inst.stats;
        if cf.sparsity != st.sparsity || cf.support != st.support || cf.degree != st.degree {
            return (
                false,
                format!(
                    "{}: closed form ({}, {}, {}) vs measured ({}, {}, {})",
                    entry.label, cf.sparsity, cf.support, cf.degree, st.sparsity, st.support, st.degree
                ),
            );
        }
        if let Some(bound) = &cf.sparsity_bound {
            if st.sparsity > *bound {
                return (
                    false,
                    format!("{}: sparsity {} over the blind bound {bound}", entry.label, st.sparsity),
                );
            }
        }
        // Re-verify the classified separation witness independently.
        let polys: Vec<&SparsePoly> = inst.summands.iter().map(|s| &s.expanded).collect();
        let confirmed = match inst.separation() {
            Err(e) => return (false, format!("{}: degree separation failed: {e}", entry.label)),
            Ok(SeparationWitness::TotalDegree) => check_degree_separated(&polys, None),
            Ok(SeparationWitness::Variable(v)) => check_degree_separated(&polys, Some(v)),
            Ok(SeparationWitness::DistinctMonomials) => {
                let total: usize = polys.iter().map(|p| p.sparsity()).sum();
                total == inst.f.sparsity()
            }
        };
        if !confirmed {
            return (
                false,
                format!("{}: separation witness did not re-verify", entry.label),
            );
        }
    }
    (true, format!("{} instances: statistics exact, bounds hold, summands separated", suite.len()))
}

// ---------------------------------------------------------------------------
// criterion 3
// ---------------------------------------------------------------------------

fn forward_witnesses(suite: &[SuiteEntry]) -> (bool, String) {
    let mut verified = 0;
    for entry in suite {
        let inst = &entry.instance;
        let Some(u_src) = inst.source_formula.solve_small().unwrap() else {
            continue;
        };
        let u_work = source_to_work(inst, &u_src);
        let witness = match forward_witness(inst, &u_work) {
            Ok(w) => w,
            Err(e) => return (false, format!("{}: forward failed: {e}", entry.label)),
        };
        let report = match verify_witness(inst, &witness) {
            Ok(r) => r,
            Err(e) => return (false, format!("{}: verify failed: {e}", entry.label)),
        };
        if !report.pass {
            return (
                false,
                format!(
                    "{}: measured {} ({}) over budget {}",
                    entry.label, report.measured, report.statistic, report.budget
                ),
            );
        }
        verified += 1;
    }
    (true, format!("{verified} satisfiable cases verified within budget"))
}

// ---------------------------------------------------------------------------
// criterion 4
// ---------------------------------------------------------------------------

fn exhaustive_shift_search() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC4);
    let pool = three_var_clauses();
    let mut unsat = pool.clone();
    unsat.sort();
    let mut formulas: Vec<Vec<[i64; 3]>> = vec![unsat];
    while formulas.len() < 50 {
        let m = rng.gen_range(1usize..=8);
        let mut idx: Vec<usize> = (0..8).collect();
        idx.shuffle(&mut rng);
        let mut clauses: Vec<[i64; 3]> = idx[..m].iter().map(|&i| pool[i]).collect();
        clauses.sort();
        if !formulas.contains(&clauses) {
            formulas.push(clauses);
        }
    }
    let family = SearchFamily::all_shifts();
    let mut sat_count = 0;
    for clauses in &formulas {
        let psi = formula(3, clauses);
        let inst = build_instance(&psi, &Variant::setsparse(), &fp(3)).unwrap();
        let outcome = match brute_force_search(&inst, &family) {
            Ok(o) => o,
            Err(e) => return (false, format!("m={}: search failed: {e}", clauses.len())),
        };
        if outcome.family_size != BigUint::from(81u32) {
            return (false, format!("family size {} instead of 81", outcome.family_size));
        }
        let sat = psi.solve_small().unwrap().is_some();
        let found = outcome.min <= *inst.budget();
        if sat != found {
            return (
                false,
                format!(
                    "m={}: sat={sat} but shift minimum {} vs budget {}",
                    clauses.len(),
                    outcome.min,
                    inst.budget()
                ),
            );
        }
        sat_count += usize::from(sat);
    }
    (
        true,
        format!(
            "{} formulas over 3 variables ({} sat, {} unsat): shift minimum <= budget iff satisfiable",
            formulas.len(),
            sat_count,
            formulas.len() - sat_count
        ),
    )
}

// ---------------------------------------------------------------------------
// criterion 5
// ---------------------------------------------------------------------------

fn structured_family_search() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC5);
    let pool_clauses = three_var_clauses();
    let coeffs: Vec<FieldElement> = (-2..=2).map(|c| q().from_i64(c)).collect();
    let family = SearchFamily::structured(coeffs);

    let unsat = formula(3, &pool_clauses);
    let inst = build_instance(&unsat, &Variant::etsparse(), &q()).unwrap();
    let outcome = brute_force_search(&inst, &family).unwrap();
    if outcome.min <= *inst.budget() {
        return (
            false,
            format!(
                "unsatisfiable 8-clause formula: structured minimum {} within budget {}",
                outcome.min,
                inst.budget()
            ),
        );
    }
    let unsat_min = outcome.min.clone();
    let budget = inst.budget().clone();

    for _ in 0..10 {
        let m = rng.gen_range(1usize..=7);
        let mut idx: Vec<usize> = (0..8).collect();
        idx.shuffle(&mut rng);
        let clauses: Vec<[i64; 3]> = idx[..m].iter().map(|&i| pool_clauses[i]).collect();
        let psi = formula(3, &clauses);
        assert!(psi.solve_small().unwrap().is_some(), "proper subsets are satisfiable");
        let inst = build_instance(&psi, &Variant::etsparse(), &q()).unwrap();
        let outcome = brute_force_search(&inst, &family).unwrap();
        if outcome.min > *inst.budget() {
            return (
                false,
                format!(
                    "satisfiable m={m}: structured minimum {} over budget {}",
                    outcome.min,
                    inst.budget()
                ),
            );
        }
    }
    (
        true,
        format!("unsat minimum {unsat_min} > budget {budget}; 10 satisfiable formulas within budget"),
    )
}

// ---------------------------------------------------------------------------
// criterion 6
// ---------------------------------------------------------------------------

fn witness_round_trips(suite: &[SuiteEntry]) -> (bool, String) {
    let mut round_trips = 0;
    for entry in suite {
        let inst = &entry.instance;
        let Some(u_src) = inst.source_formula.solve_small().unwrap() else {
            continue;
        };
        let u_work = source_to_work(inst, &u_src);
        let witness = match forward_witness(inst, &u_work) {
            Ok(w) => w,
            Err(e) => return (false, format!("{}: forward failed: {e}", entry.label)),
        };
        match extract_assignment(inst, &witness) {
            Ok(u) if u == u_src => round_trips += 1,
            Ok(u) => {
                return (
                    false,
                    format!("{}: extracted {u:?}, expected {u_src:?}", entry.label),
                )
            }
            Err(e) => return (false, format!("{}: extract failed: {e}", entry.label)),
        }
    }

    // Composed witnesses: relabel the pairs by a 3-cycle and rescale, then
    // check the decoder still recovers the original assignment.
    let e1 = formula(3, &[[1, -2, 3]]);
    let u = vec![true, false, false];

    let inst = build_instance(&e1, &Variant::etsparse(), &q()).unwrap();
    let w = forward_witness(&inst, &source_to_work(&inst, &u)).unwrap();
    let WitnessPayload::Affine(forward) = &w.payload else {
        return (false, "affine family expected".into());
    };
    let field = inst.field;
    let mut relabel = AffineSubstitution::identity(field, inst.universe.clone());
    for i in 1..=3u32 {
        let j = i % 3 + 1;
        relabel.set_image(
            inst.x_id(i),
            AffineForm::new(vec![(inst.x_id(j), field.from_i64(2))], field.zero()),
        );
        relabel.set_image(
            inst.y_id(i).unwrap(),
            AffineForm::new(vec![(inst.y_id(j).unwrap(), field.from_i64(3))], field.zero()),
        );
    }
    let composed = Witness {
        payload: WitnessPayload::Affine(forward.then(&relabel).unwrap()),
        claimed_assignment: None,
    };
    let report = verify_witness(&inst, &composed).unwrap();
    if !report.pass || extract_assignment(&inst, &composed).unwrap() != u {
        return (false, "permuted and rescaled pair witness did not decode".into());
    }

    let inst = build_instance(&e1, &Variant::setsparse(), &fp(3)).unwrap();
    let w = forward_witness(&inst, &source_to_work(&inst, &u)).unwrap();
    let WitnessPayload::Shift(b) = &w.payload else {
        return (false, "shift family expected".into());
    };
    let field = inst.field;
    let mut composed = AffineSubstitution::identity(field, inst.universe.clone());
    for i in 1..=3u32 {
        let j = i % 3 + 1;
        composed.set_image(
            inst.x_id(i),
            AffineForm::new(
                vec![(inst.x_id(j), field.from_i64(2))],
                b[inst.x_id(i) as usize].clone(),
            ),
        );
    }
    let composed = Witness {
        payload: WitnessPayload::Affine(composed),
        claimed_assignment: None,
    };
    let report = verify_witness(&inst, &composed).unwrap();
    if !report.pass || extract_assignment(&inst, &composed).unwrap() != u {
        return (false, "permuted and rescaled shift witness did not decode".into());
    }

    (
        true,
        format!("{round_trips} forward witnesses decoded back; composed witnesses decode too"),
    )
}

// ---------------------------------------------------------------------------
// criterion 7
// ---------------------------------------------------------------------------

fn gap_floor() -> (bool, String) {
    let unsat = formula(3, &three_var_clauses());
    let gap = GapSpec {
        epsilon: (1, 4),
        override_base_degree: Some(exp(8)),
    };

    // Pair-degree family over the rationals, structured candidates.
    let nh = build_instance(&unsat, &Variant::etsparse().with_gap(gap.clone()), &q()).unwrap();
    let coeffs: Vec<FieldElement> = (-2..=2).map(|c| q().from_i64(c)).collect();
    let nh_out = brute_force_search(&nh, &SearchFamily::structured(coeffs)).unwrap();
    let nh_s0 = nh.params.s0.clone().expect("gap instance has a pair budget");
    let nh_floor = (nh.params.d4.clone().unwrap() + 1u32).pow(3);

    // Shift-only family over F_3, exhaustive shifts.
    let ss = build_instance(&unsat, &Variant::setsparse().with_gap(gap), &fp(3)).unwrap();
    let ss_out = brute_force_search(&ss, &SearchFamily::all_shifts()).unwrap();
    let ss_s0 = ss.params.s0.clone().expect("gap instance has a pair budget");
    let ss_floor = (ss.params.d3.clone().unwrap() + 1u32).pow(3);

    let nh_above_floor = nh_out.min >= nh_floor;
    let nh_floor_covers = nh_floor > nh_s0;
    let ss_above_floor = ss_out.min >= ss_floor;
    let ss_floor_covers = ss_floor > ss_s0;

    // The same arithmetic with the default (non-overridden) base degree,
    // for context: the floor exceeds the pair budget once the base degree
    // scales with n*m.
    let (n, m) = (3u64, 8u64);
    let d4_default = 4 * m * n;
    let d3_default = m * (d4_default + 1) * (d4_default + 1) + 1;
    let s0_default = 1 + n * (d3_default + 3) + m * (d4_default + 1) * (d4_default + 1);
    let floor_default = (d4_default + 1).pow(3);

    let pass = nh_above_floor && nh_floor_covers && ss_above_floor && ss_floor_covers;
    let detail = format!(
        "pair family: unsat min {} vs floor {} vs pair budget {} (min>=floor {}, floor>budget {}, realized ratio {}/{}); \
         shift family: unsat min {} vs floor {} vs pair budget {} (min>=floor {}, floor>budget {}, realized ratio {}/{}); \
         default base degree {}: floor {} > pair budget {} = {}",
        nh_out.min, nh_floor, nh_s0, nh_above_floor, nh_floor_covers, nh_out.min, nh_s0,
        ss_out.min, ss_floor, ss_s0, ss_above_floor, ss_floor_covers, ss_out.min, ss_s0,
        d4_default, floor_default, s0_default, floor_default > s0_default,
    );
    (pass, detail)
}

// ---------------------------------------------------------------------------
// criterion 8
// ---------------------------------------------------------------------------

fn algebra_properties() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC8);
    let checks = [
        degree_set_invariance(&mut rng),
        additivity_under_separation(&mut rng),
        affine_power_lower_bound(&mut rng),
        divisibility_lower_bound(&mut rng),
        product_support_lower_bound(&mut rng),
    ];
    for (pass, detail) in &checks {
        if !pass {
            return (false, detail.clone());
        }
    }
    (
        true,
        checks
            .iter()
            .map(|(_, d)| d.as_str())
            .collect::<Vec<_>>()
            .join("; "),
    )
}

fn three_var_universe() -> VarUniverse {
    VarUniverse::new(vec!["x1".to_string(), "x2".to_string(), "x3".to_string()]).unwrap()
}

fn random_poly(rng: &mut ChaCha8Rng, field: &FieldSpec, max_exp: u64, terms: usize) -> SparsePoly {
    let universe = three_var_universe();
    loop {
        let term_list: Vec<(Monomial, FieldElement)> = (0..terms)
            .map(|_| {
                let mono = Monomial::from_pairs(
                    (0..3u32).map(|v| (v, exp(rng.gen_range(0..=max_exp)))),
                );
                let c = loop {
                    let c = field.from_i64(rng.gen_range(-3i64..=3));
                    if !c.is_zero() {
                        break c;
                    }
                };
                (mono, c)
            })
            .collect();
        let poly = SparsePoly::from_terms(*field, universe.clone(), term_list).unwrap();
        if !poly.is_zero() {
            return poly;
        }
    }
}

fn random_invertible_linear(rng: &mut ChaCha8Rng, field: &FieldSpec) -> AffineSubstitution {
    let universe = three_var_universe();
    loop {
        let mut sub = AffineSubstitution::identity(*field, universe.clone());
        for v in 0..3u32 {
            let terms: Vec<(u32, FieldElement)> = (0..3u32)
                .map(|w| (w, field.from_i64(rng.gen_range(-2i64..=2))))
                .collect();
            sub.set_image(v, AffineForm::new(terms, field.zero()));
        }
        if sub.is_invertible() {
            return sub;
        }
    }
}

/// Degree sets survive invertible linear changes of variables.
fn degree_set_invariance(rng: &mut ChaCha8Rng) -> (bool, String) {
    for field in [q(), fp(3)] {
        for _ in 0..15 {
            let terms = rng.gen_range(1..=6);
            let f = random_poly(rng, &field, 3, terms);
            let a = random_invertible_linear(rng, &field);
            let g = f.substitute(&a).unwrap();
            if f.degree_set() != g.degree_set() {
                return (
                    false,
                    format!("degree set changed under an invertible map over {field}"),
                );
            }
        }
    }
    (true, "degree sets invariant (30 cases)".into())
}

/// Degree-separated sums add sparsities exactly.
fn additivity_under_separation(rng: &mut ChaCha8Rng) -> (bool, String) {
    for field in [q(), fp(3)] {
        for _ in 0..15 {
            let f_terms = rng.gen_range(1..=5);
            let f = random_poly(rng, &field, 2, f_terms);
            let spacer = Monomial::var(0, f.degree().unwrap() + 1u32);
            let g_terms = rng.gen_range(1..=5);
            let g = random_poly(rng, &field, 2, g_terms)
                .mul(&SparsePoly::monomial(field, three_var_universe(), spacer, field.one()).unwrap())
                .unwrap();
            if !check_degree_separated(&[&f, &g], None) {
                return (false, "spacer construction failed to separate degrees".into());
            }
            let sum = f.add(&g).unwrap();
            if sum.sparsity() != f.sparsity() + g.sparsity() {
                return (false, format!("sparsity not additive over {field}"));
            }
        }
    }
    (true, "separated sums additive (30 cases)".into())
}

/// Adding a constant to a linear form makes the power strictly denser,
/// and at least d+1 terms deep.
fn affine_power_lower_bound(rng: &mut ChaCha8Rng) -> (bool, String) {
    // Exponent menu per field: below the characteristic or one under a
    // prime power.
    let menus: [(FieldSpec, Vec<u64>); 3] = [
        (q(), (1..=30).collect()),
        (fp(3), vec![1, 2, 8, 26]),
        (fp(5), vec![1, 2, 3, 4, 24]),
    ];
    for (field, menu) in &menus {
        for _ in 0..10 {
            let vars = rng.gen_range(1u32..=3);
            let universe = three_var_universe();
            let terms: Vec<(u32, FieldElement)> = (0..vars)
                .map(|v| {
                    let c = loop {
                        let c = field.from_i64(rng.gen_range(-3i64..=3));
                        if !c.is_zero() {
                            break c;
                        }
                    };
                    (v, c)
                })
                .collect();
            let c = loop {
                let c = field.from_i64(rng.gen_range(-3i64..=3));
                if !c.is_zero() {
                    break c;
                }
            };
            let linear = SparsePoly::from_terms(
                *field,
                universe.clone(),
                terms
                    .iter()
                    .map(|(v, c)| (Monomial::var(*v, exp(1)), c.clone()))
                    .collect::<Vec<_>>(),
            )
            .unwrap();
            let affine = linear
                .add(&SparsePoly::constant(*field, universe, c))
                .unwrap();
            let d = menu[rng.gen_range(0..menu.len())];
            let dense = affine.pow(&exp(d)).unwrap().sparsity();
            let base = linear.pow(&exp(d)).unwrap().sparsity();
            if dense < base + 1 || dense < d as usize + 1 {
                return (
                    false,
                    format!("affine power of degree {d} over {field}: {dense} terms vs linear {base}"),
                );
            }
        }
    }
    (true, "affine powers strictly denser and >= d+1 (30 cases)".into())
}

/// A d-th linear power dividing f forces at least d+1 terms.
fn divisibility_lower_bound(rng: &mut ChaCha8Rng) -> (bool, String) {
    for field in [q(), fp(101)] {
        for _ in 0..15 {
            let universe = three_var_universe();
            let a = loop {
                let a = field.from_i64(rng.gen_range(-3i64..=3));
                if !a.is_zero() {
                    break a;
                }
            };
            let b = loop {
                let b = field.from_i64(rng.gen_range(-3i64..=3));
                if !b.is_zero() {
                    break b;
                }
            };
            let linear = SparsePoly::from_terms(
                field,
                universe,
                vec![
                    (Monomial::var(0, exp(1)), a),
                    (Monomial::var(1, exp(1)), b),
                ],
            )
            .unwrap();
            let d = rng.gen_range(1u64..=10);
            let h_terms = rng.gen_range(1..=4);
            let h = random_poly(rng, &field, 2, h_terms);
            let product = linear.pow(&exp(d)).unwrap().mul(&h).unwrap();
            if product.is_zero() {
                return (false, format!("product vanished over {field}"));
            }
            if product.sparsity() < d as usize + 1 {
                return (
                    false,
                    format!(
                        "divisible by a degree-{d} linear power but only {} terms over {field}",
                        product.sparsity()
                    ),
                );
            }
        }
    }
    (true, "linear-power divisors force >= d+1 terms (30 cases)".into())
}

/// Products of independent linear forms covering sigma variables keep
/// support at least sigma.
fn product_support_lower_bound(rng: &mut ChaCha8Rng) -> (bool, String) {
    for field in [q(), fp(13)] {
        for _ in 0..10 {
            let sigma = rng.gen_range(3u64..=5);
            let universe =
                VarUniverse::new((1..=sigma).map(|i| format!("x{i}")).collect()).unwrap();
            let forms = rng.gen_range(1u32..=3).min(sigma as u32);
            let d = rng.gen_range(sigma..=7);
            let mut product = SparsePoly::one(field, universe.clone());
            for i in 0..forms {
                // Triangular with nonzero diagonal: independent by
                // construction; the first form covers every variable.
                let terms: Vec<(Monomial, FieldElement)> = (i..sigma as u32)
                    .map(|v| {
                        let c = if v == i || i == 0 {
                            field.one()
                        } else {
                            field.from_i64(rng.gen_range(0i64..=2))
                        };
                        (Monomial::var(v, exp(1)), c)
                    })
                    .filter(|(_, c)| !c.is_zero())
                    .collect();
                let form = SparsePoly::from_terms(field, universe.clone(), terms).unwrap();
                product = product.mul(&form.pow(&exp(d)).unwrap()).unwrap();
            }
            if product.support() < sigma as usize {
                return (
                    false,
                    format!(
                        "support {} below {sigma} for {forms} forms of degree {d} over {field}",
                        product.support()
                    ),
                );
            }
        }
    }
    (true, "products keep support >= sigma (20 cases)".into())
}

// ---------------------------------------------------------------------------
// criterion 9
// ---------------------------------------------------------------------------

fn selftest_determinism() -> (bool, String) {
    let exe = env!("CARGO_BIN_EXE_satpoly");
    let mut outputs = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        let status = Command::new(exe)
            .args(["selftest", "--seed", "42", "--out"])
            .arg(dir.path())
            .output()
            .unwrap();
        if !status.status.success() {
            return (
                false,
                format!(
                    "selftest exited nonzero: {}",
                    String::from_utf8_lossy(&status.stderr)
                ),
            );
        }
        let selftest = std::fs::read(dir.path().join("selftest.json")).unwrap();
        let manifest = std::fs::read(dir.path().join("manifest.json")).unwrap();
        outputs.push((selftest, manifest));
    }
    if outputs[0] != outputs[1] {
        return (false, "two seeded selftest runs produced different bytes".into());
    }
    (true, "two seed-42 runs byte-identical (selftest.json, manifest.json)".into())
}
