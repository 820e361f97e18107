use proptest::prelude::*;
use smtad_core::analysis::{sample_entanglement, single_site_rdms, von_neumann_entropy};
use smtad_core::model::frequency;
use smtad_core::ModelParams;

fn instance(max_sites: usize, max_m: usize, max_p: usize) -> impl Strategy<Value = (ModelParams, Vec<f64>)> {
    (1..=max_sites, 1..=max_m, 1..=max_p).prop_flat_map(|(l, m, p)| {
        let k = m * p;
        (
            prop::collection::vec(-std::f64::consts::PI..std::f64::consts::PI, k * l),
            prop::collection::vec(-1.0..1.0f64, k),
            prop::collection::vec(0.0..=1.0f64, l),
        )
            .prop_filter("non-trivial coefficients", |(_, c, _)| c.iter().map(|v| v * v).sum::<f64>() > 1e-6)
            .prop_map(move |(theta, coeff, x)| (ModelParams::from_parts(l, m, p, theta, coeff).unwrap(), x))
    })
}

proptest! {
    #[test]
    fn score_is_a_probability((params, x) in instance(32, 4, 4)) {
        if let Ok(s) = params.normality_score(&x) {
            prop_assert!((0.0..=1.0).contains(&s.score));
            prop_assert!(s.log_score <= 0.0);
        }
    }

    #[test]
    fn score_ignores_coefficient_scale((params, x) in instance(12, 4, 3), lambda in prop_oneof![-50.0..-1e-3f64, 1e-3..50.0f64]) {
        let mut scaled = params.clone();
        scaled.coeff_mut().iter_mut().for_each(|c| *c *= lambda);
        if let (Ok(a), Ok(b)) = (params.normality_score(&x), scaled.normality_score(&x)) {
            prop_assert!((a.score - b.score).abs() <= 1e-12);
        }
    }

    #[test]
    fn single_component_score_is_product_of_squared_cosines((params, x) in instance(16, 1, 4), which in 0usize..4) {
        // keep only one resolution term with a nonzero weight
        let p = which % params.resolutions();
        let mut one = params.clone();
        one.coeff_mut().iter_mut().enumerate().for_each(|(i, c)| *c = if i == p { 0.7 } else { 0.0 });
        let omega = frequency(p + 1);
        let expect: f64 = (0..params.sites())
            .map(|l| libm::cos(params.theta()[p * params.sites() + l] + omega * x[l]).powi(2))
            .product();
        if let Ok(s) = one.normality_score(&x) {
            prop_assert!((s.score - expect).abs() <= 1e-12);
        }
    }

    #[test]
    fn entropies_are_bounded((params, x) in instance(6, 3, 3)) {
        if let Ok(rdms) = single_site_rdms(&params, &x) {
            for rho in &rdms {
                prop_assert!((rho.trace() - 1.0).abs() < 1e-10);
                let s = von_neumann_entropy(rho);
                prop_assert!((0.0..=std::f64::consts::LN_2 + 1e-10).contains(&s));
            }
        }
    }

    #[test]
    fn one_term_states_are_unentangled((params, x) in instance(8, 1, 1)) {
        let e = sample_entanglement(&params, &x).unwrap();
        prop_assert!(e.entropies.iter().all(|s| s.abs() <= 1e-12));
        prop_assert!(e.mutual_information.as_slice().iter().all(|v| v.abs() <= 1e-12));
    }
}
