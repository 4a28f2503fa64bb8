//! Built-in check suite: a reduced-scale, deterministically seeded mirror of
//! the release acceptance run. Same seed, same machine or not — same bytes.

use std::path::Path;

use num_bigint::BigUint;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use satpoly_core::algebra::{exp, FieldSpec};
use satpoly_core::cnf::{Clause, CnfFormula, Literal};
use satpoly_core::reductions::{build_instance, instance_to_json, ReductionInstance, Variant};
use satpoly_core::sparsepoly::{linear_power_sparsity, Monomial, SparsePoly, VarUniverse};
use satpoly_core::witness::{
    brute_force_search, extract_assignment, forward_witness, verify_witness, witness_from_json,
    witness_to_json, SearchFamily,
};

use crate::{write_json, Failure, Manifest};

struct Check {
    name: &'static str,
    pass: bool,
    detail: String,
}

pub fn run(seed: u64, out: &Path) -> Result<(), Failure> {
    let mut manifest = Manifest::new("selftest");
    manifest.seed(seed);

    let checks = vec![
        closed_form_powers(seed),
        instance_statistics(seed),
        forward_witnesses(seed),
        witness_round_trip(),
        search_minima(),
        json_determinism(),
    ];
    let pass = checks.iter().all(|c| c.pass);
    for c in &checks {
        println!("selftest: check={} pass={} detail={}", c.name, c.pass, c.detail);
    }
    println!("selftest: seed={seed} pass={pass}");

    let value = serde_json::json!({
        "seed": seed,
        "checks": checks
            .iter()
            .map(|c| serde_json::json!({"check": c.name, "pass": c.pass, "detail": c.detail}))
            .collect::<Vec<_>>(),
        "pass": pass,
    });
    write_json(out, "selftest.json", &value)?;
    manifest.output("selftest.json");
    manifest.write(out)?;
    if !pass {
        let failed = checks.iter().filter(|c| !c.pass).count();
        return Err(Failure::verification(format!(
            "{failed} of {} selftest checks failed",
            checks.len()
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// helpers
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

fn e1() -> CnfFormula {
    formula(3, &[[1, -2, 3]])
}

/// Random formula with `m` distinct clauses over `n >= 3` variables.
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

fn source_to_work(instance: &ReductionInstance, u: &[bool]) -> Vec<bool> {
    match &instance.flip {
        Some(flip) => flip.apply(u),
        None => u.to_vec(),
    }
}

// ---------------------------------------------------------------------------
// checks
// ---------------------------------------------------------------------------

/// Closed-form power counts vs direct expansion on seeded small cases.
fn closed_form_powers(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x01);
    let fields = [q(), fp(2), fp(3)];
    let cases = 60u32;
    for _ in 0..cases {
        let m = rng.gen_range(1u64..=3);
        let d = rng.gen_range(0u64..=25);
        for field in &fields {
            let universe =
                VarUniverse::new((1..=m).map(|i| format!("x{i}")).collect()).unwrap();
            let terms: Vec<(Monomial, _)> = (0..m as u32)
                .map(|v| (Monomial::var(v, exp(1)), field.one()))
                .collect();
            let base = SparsePoly::from_terms(*field, universe, terms).unwrap();
            let expanded = base.pow(&exp(d)).unwrap().sparsity();
            let predicted = linear_power_sparsity(m, &exp(d), field).unwrap();
            if predicted != BigUint::from(expanded as u64) {
                return Check {
                    name: "closed-form-powers",
                    pass: false,
                    detail: format!("mismatch at m={m} d={d} field={field}"),
                };
            }
        }
    }
    Check {
        name: "closed-form-powers",
        pass: true,
        detail: format!("{cases} cases, m<=3, d<=25, fields q/fp:2/fp:3"),
    }
}

/// Predicted statistics equal the measured ones on pinned and seeded inputs.
fn instance_statistics(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x02);
    let mut instances: Vec<(String, ReductionInstance)> = vec![
        (
            "etsparse/q/e1".into(),
            build_instance(&e1(), &Variant::etsparse(), &q()).unwrap(),
        ),
        (
            "etsparse-hom/q/e1".into(),
            build_instance(&e1(), &Variant::etsparse_hom(), &q()).unwrap(),
        ),
        (
            "setsparse/fp:3/e1".into(),
            build_instance(&e1(), &Variant::setsparse(), &fp(3)).unwrap(),
        ),
    ];
    for i in 0..4 {
        let n = rng.gen_range(3u32..=4);
        let m = rng.gen_range(1usize..=2);
        let psi = random_formula(&mut rng, n, m);
        let (label, variant, field) = match i {
            0 => ("etsparse/q", Variant::etsparse(), q()),
            1 => ("etsparse/fp:3", Variant::etsparse(), fp(3)),
            2 => ("etsparse-hom/fp:3", Variant::etsparse_hom(), fp(3)),
            _ => ("setsparse/q", Variant::setsparse(), q()),
        };
        instances.push((
            format!("{label}/n={n},m={m}"),
            build_instance(&psi, &variant, &field).unwrap(),
        ));
    }
    for (label, instance) in &instances {
        let cf = &instance.closed_form;
        let st = &instance.stats;
        if cf.sparsity != st.sparsity || cf.support != st.support || cf.degree != st.degree {
            return Check {
                name: "instance-statistics",
                pass: false,
                detail: format!("closed form disagrees with expansion on {label}"),
            };
        }
    }
    // Pinned values for the single-clause formula over x1..x3.
    let pinned = &instances[0].1;
    let ok = pinned.stats.sparsity == BigUint::from(48u32)
        && pinned.stats.degree == exp(293)
        && *pinned.budget() == BigUint::from(29u32);
    if !ok {
        return Check {
            name: "instance-statistics",
            pass: false,
            detail: "pinned etsparse/q values drifted".into(),
        };
    }
    Check {
        name: "instance-statistics",
        pass: true,
        detail: format!("{} instances, closed form == expansion", instances.len()),
    }
}

/// Forward witnesses verify within budget for satisfiable inputs.
fn forward_witnesses(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x03);
    let mut cases: Vec<(String, ReductionInstance)> = vec![
        (
            "etsparse/q/e1".into(),
            build_instance(&e1(), &Variant::etsparse(), &q()).unwrap(),
        ),
        (
            "etsparse/fp:2/e1".into(),
            build_instance(&e1(), &Variant::etsparse(), &fp(2)).unwrap(),
        ),
        (
            "etsparse-hom/fp:3/e1".into(),
            build_instance(&e1(), &Variant::etsparse_hom(), &fp(3)).unwrap(),
        ),
        (
            "setsparse/fp:3/e1".into(),
            build_instance(&e1(), &Variant::setsparse(), &fp(3)).unwrap(),
        ),
        (
            "etsupport/q/sigma=5".into(),
            build_instance(
                &formula(9, &[[1, 2, 3], [-4, 5, 6]]),
                &Variant::etsupport(5),
                &q(),
            )
            .unwrap(),
        ),
    ];
    for _ in 0..2 {
        let psi = random_formula(&mut rng, 4, 2);
        cases.push((
            "etsparse/q/random".into(),
            build_instance(&psi, &Variant::etsparse(), &q()).unwrap(),
        ));
    }
    let mut verified = 0;
    for (label, instance) in &cases {
        let Some(u_src) = instance.source_formula.solve_small().unwrap() else {
            continue;
        };
        let u_work = source_to_work(instance, &u_src);
        let witness = match forward_witness(instance, &u_work) {
            Ok(w) => w,
            Err(e) => {
                return Check {
                    name: "forward-witnesses",
                    pass: false,
                    detail: format!("{label}: forward failed: {e}"),
                }
            }
        };
        let report = verify_witness(instance, &witness).unwrap();
        if !report.pass {
            return Check {
                name: "forward-witnesses",
                pass: false,
                detail: format!(
                    "{label}: measured {} exceeds budget {}",
                    report.measured, report.budget
                ),
            };
        }
        verified += 1;
    }
    // Pinned: the canonical witness for (x1 or !x2 or x3) under 1,0,0.
    let e1q = &cases[0].1;
    let w = forward_witness(e1q, &source_to_work(e1q, &[true, false, false])).unwrap();
    let measured = verify_witness(e1q, &w).unwrap().measured;
    if measured != BigUint::from(27u32) {
        return Check {
            name: "forward-witnesses",
            pass: false,
            detail: format!("pinned etsparse/q measurement drifted: {measured}"),
        };
    }
    Check {
        name: "forward-witnesses",
        pass: true,
        detail: format!("{verified} witnesses verified within budget"),
    }
}

/// Witness JSON encodes canonically and decodes to the same behavior.
fn witness_round_trip() -> Check {
    let cases = [
        ("etsparse/q", build_instance(&e1(), &Variant::etsparse(), &q()).unwrap()),
        ("setsparse/fp:3", build_instance(&e1(), &Variant::setsparse(), &fp(3)).unwrap()),
    ];
    for (label, instance) in &cases {
        let u_src = vec![true, false, false];
        let u_work = source_to_work(instance, &u_src);
        let mut witness = forward_witness(instance, &u_work).unwrap();
        witness.claimed_assignment = Some(u_src.clone());
        let encoded = witness_to_json(instance, &witness);
        let decoded = witness_from_json(instance, &encoded).unwrap();
        let re_encoded = witness_to_json(instance, &decoded);
        if serde_json::to_string(&encoded).unwrap() != serde_json::to_string(&re_encoded).unwrap()
        {
            return Check {
                name: "witness-round-trip",
                pass: false,
                detail: format!("{label}: re-encoding changed bytes"),
            };
        }
        match extract_assignment(instance, &decoded) {
            Ok(u) if u == u_src => {}
            Ok(u) => {
                return Check {
                    name: "witness-round-trip",
                    pass: false,
                    detail: format!("{label}: extracted {u:?}, expected {u_src:?}"),
                }
            }
            Err(e) => {
                return Check {
                    name: "witness-round-trip",
                    pass: false,
                    detail: format!("{label}: extract failed: {e}"),
                }
            }
        }
    }
    Check {
        name: "witness-round-trip",
        pass: true,
        detail: format!("{} families: bytes stable, assignments recovered", cases.len()),
    }
}

/// Exhaustive searches land on the known minima.
fn search_minima() -> Check {
    let shifts = build_instance(&e1(), &Variant::setsparse(), &fp(3)).unwrap();
    let outcome = brute_force_search(&shifts, &SearchFamily::all_shifts()).unwrap();
    if outcome.family_size != BigUint::from(81u32) || outcome.min > *shifts.budget() {
        return Check {
            name: "search-minima",
            pass: false,
            detail: format!(
                "all-shifts: size={} min={} budget={}",
                outcome.family_size,
                outcome.min,
                shifts.budget()
            ),
        };
    }
    if extract_assignment(&shifts, &outcome.argmin).is_err() {
        return Check {
            name: "search-minima",
            pass: false,
            detail: "all-shifts: argmin did not decode".into(),
        };
    }

    let structured = build_instance(&e1(), &Variant::etsparse(), &q()).unwrap();
    let pool = (-2i64..=2).map(|c| q().from_i64(c)).collect();
    let outcome = brute_force_search(&structured, &SearchFamily::structured(pool)).unwrap();
    let decoded = extract_assignment(&structured, &outcome.argmin).ok();
    if outcome.evaluated != 125
        || outcome.min != BigUint::from(26u32)
        || decoded.as_deref() != Some(&[true, false, true][..])
    {
        return Check {
            name: "search-minima",
            pass: false,
            detail: format!(
                "structured: evaluated={} min={} decoded={decoded:?}",
                outcome.evaluated, outcome.min
            ),
        };
    }
    Check {
        name: "search-minima",
        pass: true,
        detail: "all-shifts min within budget; structured min=26 at 1,0,1".into(),
    }
}

/// The same instance renders to the same bytes, render after render.
fn json_determinism() -> Check {
    let instance = build_instance(&e1(), &Variant::etsparse(), &q()).unwrap();
    let a = serde_json::to_string_pretty(&instance_to_json(&instance)).unwrap();
    let b = serde_json::to_string_pretty(&instance_to_json(&instance)).unwrap();
    if a != b {
        return Check {
            name: "json-determinism",
            pass: false,
            detail: "two renders of one instance differ".into(),
        };
    }
    let rebuilt = build_instance(&e1(), &Variant::etsparse(), &q()).unwrap();
    let c = serde_json::to_string_pretty(&instance_to_json(&rebuilt)).unwrap();
    if a != c {
        return Check {
            name: "json-determinism",
            pass: false,
            detail: "two builds of one instance render differently".into(),
        };
    }
    Check {
        name: "json-determinism",
        pass: true,
        detail: "instance renders are byte-stable across builds".into(),
    }
}
