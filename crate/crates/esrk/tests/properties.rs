//! Property tests for the structural invariants.

#![allow(clippy::needless_range_loop)]

use esrk::heuristics::{
    apply_heuristics, format_expression, gen_random_expression, mutate, parse_expression,
};
use esrk::order_conditions::order_residual_jacobian;
use esrk::stability::{validate_scheme, StabilityConfig};
use esrk::tableau::{apply_constraints, CoefficientRef, ReducedParameters};
use esrk::{order_residuals, rng};
use proptest::prelude::*;

fn reduced_params(s: usize) -> impl Strategy<Value = ReducedParameters> {
    (
        proptest::collection::vec(-1.0f64..1.0, s - 1),
        proptest::collection::vec(-1.0f64..1.0, s),
    )
        .prop_map(move |(a_sub, b)| ReducedParameters::new(s, a_sub, b).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn apply_constraints_round_trips(p in (2usize..12).prop_flat_map(reduced_params)) {
        let t = apply_constraints(&p).unwrap();
        prop_assert_eq!(ReducedParameters::from_tableau(&t), p);
    }

    #[test]
    fn non_free_entries_equal_their_column_weight(p in (3usize..12).prop_flat_map(reduced_params)) {
        let t = apply_constraints(&p).unwrap();
        for i in 0..t.s {
            for j in 0..t.s {
                if j + 1 < i {
                    prop_assert_eq!(t.a[i][j], p.b[j]);
                } else if j + 1 != i {
                    prop_assert_eq!(t.a[i][j], 0.0);
                }
            }
        }
    }

    #[test]
    fn built_tableaus_validate_clean(p in (2usize..12).prop_flat_map(reduced_params)) {
        let t = apply_constraints(&p).unwrap();
        prop_assert!(esrk::tableau::validate_tableau(&t).is_empty());
    }

    #[test]
    fn residuals_are_recomputation_stable(p in (2usize..10).prop_flat_map(reduced_params)) {
        // Fixed summation order makes repeated evaluation bit-identical.
        let t = apply_constraints(&p).unwrap();
        let a = order_residuals(&t);
        let b = order_residuals(&t);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn doubling_weights_shifts_condition_one(p in (2usize..10).prop_flat_map(reduced_params)) {
        // Normalize so sum b = 1 first, then double every weight.
        let total: f64 = p.b.iter().sum();
        prop_assume!(total.abs() > 1e-3);
        let normalized = ReducedParameters::new(
            p.s,
            p.a_sub.clone(),
            p.b.iter().map(|v| v / total).collect(),
        ).unwrap();
        let mut t = apply_constraints(&normalized).unwrap();
        let before = order_residuals(&t).r[0];
        prop_assert!(before.abs() < 1e-12);
        for w in &mut t.b {
            *w *= 2.0;
        }
        let after = order_residuals(&t).r[0];
        prop_assert!((after - (before + 1.0)).abs() < 1e-12);
    }
}

#[test]
fn jacobian_matches_finite_differences_on_100_points() {
    let mut stream = rng::seeded(0x1ACB);
    use rand::Rng;
    for trial in 0..100 {
        let s = stream.random_range(3..=16);
        let a_sub: Vec<f64> = (0..s - 1).map(|_| stream.random_range(-0.6..0.6)).collect();
        let b: Vec<f64> = (0..s).map(|_| stream.random_range(-0.6..0.6)).collect();
        let p = ReducedParameters::new(s, a_sub, b).unwrap();
        let jac = order_residual_jacobian(&p, &[]).unwrap();
        let h = 1e-7;
        for m in 0..p.len() {
            let r = CoefficientRef::from_reduced_index(s, m);
            let mut plus = p.clone();
            plus.set(r, plus.get(r) + h);
            let mut minus = p.clone();
            minus.set(r, minus.get(r) - h);
            let rp = order_residuals(&apply_constraints(&plus).unwrap());
            let rm = order_residuals(&apply_constraints(&minus).unwrap());
            for k in 0..8 {
                let fd = (rp.r[k] - rm.r[k]) / (2.0 * h);
                let an = jac[k][m];
                let denom = fd.abs().max(an.abs()).max(1.0);
                assert!(
                    (fd - an).abs() / denom < 1e-6,
                    "trial {trial} s {s} row {k} col {m}: {fd} vs {an}"
                );
            }
        }
    }
}

#[test]
fn jacobian_respects_heuristic_substitution() {
    // With b(5) tied to a(2,1)^2, the column for a(2,1) must absorb the
    // chain-rule contribution through b(5).
    let s = 16;
    let expr = parse_expression("b(5) = a(2,1)^2", s).unwrap();
    let mut stream = rng::seeded(77);
    use rand::Rng;
    let a_sub: Vec<f64> = (0..s - 1).map(|_| stream.random_range(0.05..0.5)).collect();
    let b: Vec<f64> = (0..s).map(|_| stream.random_range(0.05..0.5)).collect();
    let p = ReducedParameters::new(s, a_sub, b).unwrap();
    let jac = order_residual_jacobian(&p, std::slice::from_ref(&expr)).unwrap();
    assert_eq!(jac[0].len(), 30);

    // Finite differences through the substituted system.
    let substituted = |params: &ReducedParameters| {
        let applied = apply_heuristics(params, std::slice::from_ref(&expr)).unwrap();
        order_residuals(&apply_constraints(&applied).unwrap())
    };
    let h = 1e-7;
    // Free order: subdiagonals a(1,0)..a(15,14) then weights minus b(5).
    let free: Vec<CoefficientRef> = CoefficientRef::all(s)
        .filter(|r| *r != expr.target())
        .collect();
    for (m, r) in free.iter().enumerate() {
        let mut plus = p.clone();
        plus.set(*r, plus.get(*r) + h);
        let mut minus = p.clone();
        minus.set(*r, minus.get(*r) - h);
        let rp = substituted(&plus);
        let rm = substituted(&minus);
        for k in 0..8 {
            let fd = (rp.r[k] - rm.r[k]) / (2.0 * h);
            let an = jac[k][m];
            let denom = fd.abs().max(an.abs()).max(1.0);
            assert!(
                (fd - an).abs() / denom < 1e-6,
                "row {k} col {m} ({r}): {fd} vs {an}"
            );
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn parser_never_panics(text in ".{0,64}") {
        // Arbitrary input must produce a value or an error, never a panic.
        let _ = parse_expression(&text, 16);
    }

    #[test]
    fn parser_accepts_whatever_it_formats(
        seed in 0u64..10_000,
        max_terms in 1usize..5,
    ) {
        let e = gen_random_expression(16, &mut rng::seeded(seed), max_terms);
        let text = format_expression(&e);
        prop_assert_eq!(parse_expression(&text, 16).unwrap(), e);
    }
}

#[test]
fn published_power_heuristic_is_reachable_by_generation() {
    // Single-term generation with a power draw can produce
    // "b(5) = a(2,1)^2"; scan a seeded population until it appears.
    let mut stream = rng::seeded(0x9E4);
    let target = parse_expression("b(5) = a(2,1)^2", 16).unwrap();
    let found = (0..200_000).any(|_| gen_random_expression(16, &mut stream, 1) == target);
    assert!(
        found,
        "expression space does not reach the published heuristic"
    );
}

#[test]
fn expression_population_formats_and_parses_to_fixpoint() {
    let mut stream = rng::seeded(0xF0F0);
    for _ in 0..10_000 {
        let e = gen_random_expression(16, &mut stream, 3);
        let text = format_expression(&e);
        let parsed = parse_expression(&text, 16).unwrap();
        assert_eq!(parsed, e, "round trip of {text}");
        assert_eq!(format_expression(&parsed), text);
    }
}

#[test]
fn mutation_chains_never_leave_the_reduced_set() {
    let mut stream = rng::seeded(0xCAFE);
    let mut e = gen_random_expression(16, &mut stream, 3);
    for _ in 0..5_000 {
        e = mutate(&e, &mut stream, 4);
        assert!(e.target().in_range(16));
        assert!(e.terms().len() <= 4 && !e.terms().is_empty());
        for t in e.terms() {
            assert!(t.coefficient.in_range(16));
            assert_ne!(t.coefficient, e.target());
        }
    }
}

#[test]
fn stability_gate_is_monotone() {
    // is_stable never flips false -> true as the requirements tighten.
    let t = esrk::ButcherTableau::classical_rk4();
    let mut last = true;
    for extent in [1.0, 2.0, 2.5, 2.8, 3.0, 4.0] {
        let report = validate_scheme(&t, &StabilityConfig::for_stages(4, extent));
        assert!(
            !report.is_stable || last,
            "gate flipped back on at extent {extent}"
        );
        last = report.is_stable;
    }
    // Tightening beta_tol on a slightly perturbed tableau.
    let mut perturbed = esrk::ButcherTableau::classical_rk4();
    perturbed.b[1] += 1e-8;
    let mut last = true;
    for beta_tol in [1e-2, 1e-4, 1e-6, 1e-8, 1e-10, 1e-12] {
        let mut cfg = StabilityConfig::for_stages(4, 2.0);
        cfg.beta_tol = beta_tol;
        let report = validate_scheme(&perturbed, &cfg);
        assert!(!report.is_stable || last);
        last = report.is_stable;
    }
}

#[test]
fn nilpotency_means_high_beta_terms_vanish_for_small_schemes() {
    // Degree can never exceed the stage count: beta has exactly s + 1
    // entries and the top entry is the product of the subdiagonal times
    // the last weight.
    let p = ReducedParameters::new(3, vec![0.5, 0.25], vec![0.1, 0.2, 0.7]).unwrap();
    let t = apply_constraints(&p).unwrap();
    let beta = esrk::stability::stability_coefficients(&t);
    assert_eq!(beta.len(), 4);
    // beta_3 = b^T A^2 1 = b_2 * a_21 * a_10.
    assert!((beta[3] - 0.7 * 0.25 * 0.5).abs() < 1e-15);
}
