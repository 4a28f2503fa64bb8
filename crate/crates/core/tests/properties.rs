//! Randomized cross-checks of the closed-form counting helpers against
//! direct polynomial expansion.

use num_bigint::BigUint;
use proptest::prelude::*;
use satpoly_core::algebra::{exp, FieldSpec};
use satpoly_core::sparsepoly::{linear_power_sparsity, Monomial, SparsePoly, VarUniverse};

fn fields() -> Vec<FieldSpec> {
    vec![
        FieldSpec::RATIONAL,
        FieldSpec::prime(2).unwrap(),
        FieldSpec::prime(3).unwrap(),
        FieldSpec::prime(5).unwrap(),
    ]
}

/// (x_1 + ... + x_m)^d expanded the slow way.
fn expanded_sparsity(m: u64, d: u64, field: &FieldSpec) -> usize {
    let universe = VarUniverse::new((1..=m).map(|i| format!("x{i}")).collect()).unwrap();
    let terms: Vec<(Monomial, _)> = (0..m as u32)
        .map(|v| (Monomial::var(v, exp(1)), field.one()))
        .collect();
    let base = SparsePoly::from_terms(*field, universe, terms).unwrap();
    base.pow(&exp(d)).unwrap().sparsity()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn linear_power_sparsity_matches_expansion(m in 1u64..=4, d in 0u64..=40) {
        for field in fields() {
            let predicted = linear_power_sparsity(m, &exp(d), &field).unwrap();
            let expanded = expanded_sparsity(m, d, &field);
            prop_assert_eq!(
                predicted,
                BigUint::from(expanded as u64),
                "m={} d={} field={}", m, d, field
            );
        }
    }

    #[test]
    fn binomial_powers_of_mixed_coefficients(c in 1u64..=4, d in 0u64..=60) {
        // (y + c x)^d keeps the full binomial row over Q; over F_p the row
        // thins by Lucas but the count is coefficient-independent.
        for field in fields() {
            let universe = VarUniverse::new(vec!["x".to_string(), "y".to_string()]).unwrap();
            let coeff = field.from_i64(c as i64);
            if coeff.is_zero() {
                continue;
            }
            let base = SparsePoly::from_terms(
                field,
                universe,
                vec![
                    (Monomial::var(0, exp(1)), coeff),
                    (Monomial::var(1, exp(1)), field.one()),
                ],
            )
            .unwrap();
            let expanded = base.pow(&exp(d)).unwrap().sparsity();
            let predicted = linear_power_sparsity(2, &exp(d), &field).unwrap();
            prop_assert_eq!(predicted, BigUint::from(expanded as u64));
        }
    }
}
