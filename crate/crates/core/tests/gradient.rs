mod common;

use common::{random_input, random_params, rng};
use smtad_core::training::{gradient, loss, regularizer_gradient, sample_gradient, Gradient};
use smtad_core::ModelParams;

const H: f64 = 1e-5;

fn neg_log_score(params: &ModelParams, x: &[f64]) -> f64 {
    -params.normality_score(x).unwrap().log_score
}

fn central_difference(params: &ModelParams, x: &[f64], theta: bool, i: usize) -> f64 {
    let mut plus = params.clone();
    let mut minus = params.clone();
    if theta {
        plus.theta_mut()[i] += H;
        minus.theta_mut()[i] -= H;
    } else {
        plus.coeff_mut()[i] += H;
        minus.coeff_mut()[i] -= H;
    }
    (neg_log_score(&plus, x) - neg_log_score(&minus, x)) / (2.0 * H)
}

fn agrees(analytic: f64, numeric: f64) -> bool {
    (analytic - numeric).abs() <= 1e-5 * numeric.abs().max(analytic.abs()) + 1e-8
}

#[test]
fn analytic_gradient_matches_central_differences() {
    let mut r = rng(21);
    let mut checked = 0;
    for &(l, m, p) in &[(1, 1, 1), (2, 2, 1), (3, 2, 2), (5, 3, 2), (7, 2, 3)] {
        for _ in 0..5 {
            let params = random_params(&mut r, l, m, p);
            let x = random_input(&mut r, l);
            let s = params.normality_score(&x).unwrap();
            // near-zero numerators make the finite difference itself unreliable
            if s.score < 1e-6 {
                continue;
            }
            let (_, g) = sample_gradient(&params, &x).unwrap();
            for i in 0..params.theta().len() {
                let fd = central_difference(&params, &x, true, i);
                assert!(agrees(g.theta[i], fd), "theta[{i}] at {:?}: {} vs {fd}", (l, m, p), g.theta[i]);
            }
            for i in 0..params.terms() {
                let fd = central_difference(&params, &x, false, i);
                assert!(agrees(g.coeff[i], fd), "coeff[{i}] at {:?}: {} vs {fd}", (l, m, p), g.coeff[i]);
            }
            checked += 1;
        }
    }
    assert!(checked >= 15);
}

#[test]
fn gradient_handles_exact_zero_factors() {
    // θ = π/2 − ω_p x̃ puts one cos factor at (numerically) zero
    let mut r = rng(22);
    let mut params = random_params(&mut r, 3, 2, 2);
    let x = [0.5, 0.25, 0.75];
    let shift = params.term_frequency(1) * x[1];
    params.theta_mut()[3 + 1] = std::f64::consts::FRAC_PI_2 - shift;
    let (_, g) = sample_gradient(&params, &x).unwrap();
    for i in 0..params.theta().len() {
        let fd = central_difference(&params, &x, true, i);
        assert!(agrees(g.theta[i], fd), "theta[{i}]: {} vs {fd}", g.theta[i]);
    }
}

#[test]
fn batch_gradient_is_mean_of_samples_plus_regularizer() {
    let mut r = rng(23);
    let params = random_params(&mut r, 4, 3, 2);
    let batch: Vec<Vec<f64>> = (0..9).map(|_| random_input(&mut r, 4)).collect();
    let (lc, lt) = (0.02, 0.003);
    let g = gradient(&params, batch.iter().map(|v| v.as_slice()), lc, lt).unwrap();
    let mut expect = regularizer_gradient(&params, lc, lt);
    for x in &batch {
        let (_, s) = sample_gradient(&params, x).unwrap();
        add_scaled(&mut expect, &s, 1.0 / batch.len() as f64);
    }
    for (a, b) in g.theta.iter().chain(&g.coeff).zip(expect.theta.iter().chain(&expect.coeff)) {
        assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
    }
}

#[test]
fn batch_loss_gradient_matches_finite_differences() {
    let mut r = rng(24);
    let params = random_params(&mut r, 3, 2, 2);
    let batch: Vec<Vec<f64>> = (0..5).map(|_| random_input(&mut r, 3)).collect();
    let (lc, lt) = (0.01, 0.001);
    let total = |p: &ModelParams| loss(p, batch.iter().map(|v| v.as_slice()), lc, lt).unwrap().total;
    let g = gradient(&params, batch.iter().map(|v| v.as_slice()), lc, lt).unwrap();
    for i in 0..params.terms() {
        let (mut a, mut b) = (params.clone(), params.clone());
        a.coeff_mut()[i] += H;
        b.coeff_mut()[i] -= H;
        assert!(agrees(g.coeff[i], (total(&a) - total(&b)) / (2.0 * H)));
    }
    for i in 0..params.theta().len() {
        let (mut a, mut b) = (params.clone(), params.clone());
        a.theta_mut()[i] += H;
        b.theta_mut()[i] -= H;
        assert!(agrees(g.theta[i], (total(&a) - total(&b)) / (2.0 * H)));
    }
}

fn add_scaled(acc: &mut Gradient, g: &Gradient, k: f64) {
    acc.theta.iter_mut().zip(&g.theta).for_each(|(a, b)| *a += k * b);
    acc.coeff.iter_mut().zip(&g.coeff).for_each(|(a, b)| *a += k * b);
}
