mod common;

use common::{kron_state, random_input, random_params, rng};
use smtad_core::analysis::{mutual_information, sample_entanglement, single_site_rdm, two_site_rdm, von_neumann_entropy};
use smtad_core::oracle::{build_dense_state, dense_partial_trace, dense_score};

const SHAPES: [(usize, usize, usize); 6] = [(1, 1, 1), (2, 2, 1), (3, 1, 3), (4, 3, 2), (5, 2, 2), (8, 2, 3)];

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

#[test]
fn dense_state_matches_kronecker_expansion() {
    let mut r = rng(11);
    for &(l, m, p) in &SHAPES {
        let params = random_params(&mut r, l, m, p);
        let x = random_input(&mut r, l);
        let dense = build_dense_state(&params, &x).unwrap();
        for (a, b) in dense.amplitudes().iter().zip(kron_state(&params, &x)) {
            assert!(close(*a, b, 1e-12), "{a} vs {b}");
        }
    }
}

#[test]
fn factorized_score_matches_dense() {
    let mut r = rng(12);
    for &(l, m, p) in &SHAPES {
        for _ in 0..20 {
            let params = random_params(&mut r, l, m, p);
            let x = random_input(&mut r, l);
            let dense = build_dense_state(&params, &x).unwrap();
            let s = params.normality_score(&x).unwrap();
            assert!(close(s.numerator, dense.amplitudes()[0], 1e-12));
            assert!(close(s.z, dense.norm_sq(), 1e-10), "{} vs {}", s.z, dense.norm_sq());
            assert!(close(s.score, dense_score(&dense).unwrap(), 1e-10));
        }
    }
}

#[test]
fn gram_matrix_quadratic_form_is_norm() {
    let mut r = rng(13);
    for &(l, m, p) in &SHAPES {
        let params = random_params(&mut r, l, m, p);
        let x = random_input(&mut r, l);
        let g = params.gram_matrix(&x).unwrap();
        let c = params.coeff();
        let mut q = 0.0;
        for i in 0..c.len() {
            for j in 0..c.len() {
                q += c[i] * g.get(i, j) * c[j];
            }
        }
        assert!(q >= -1e-12);
        assert!(close(q, params.gram(&x).unwrap(), 1e-10));
    }
}

#[test]
fn reduced_density_matrices_match_partial_trace() {
    let mut r = rng(14);
    for &(l, m, p) in &SHAPES {
        let params = random_params(&mut r, l, m, p);
        let x = random_input(&mut r, l);
        let dense = build_dense_state(&params, &x).unwrap();
        for site in 0..l {
            let rho = single_site_rdm(&params, &x, site).unwrap();
            let reference = dense_partial_trace(&dense, &[site]).unwrap();
            for (a, b) in rho.entries().iter().zip(reference.entries()) {
                assert!((a - b).abs() < 1e-10, "site {site}: {a} vs {b}");
            }
            assert!((von_neumann_entropy(&rho) - von_neumann_entropy(&reference)).abs() < 1e-8);
        }
        for k in 0..l {
            for j in (k + 1)..l {
                let rho = two_site_rdm(&params, &x, k, j).unwrap();
                let reference = dense_partial_trace(&dense, &[k, j]).unwrap();
                for (a, b) in rho.entries().iter().zip(reference.entries()) {
                    assert!((a - b).abs() < 1e-10, "pair ({k},{j}): {a} vs {b}");
                }
            }
        }
    }
}

#[test]
fn sample_entanglement_matches_pairwise_calls() {
    let mut r = rng(15);
    for &(l, m, p) in &SHAPES {
        let params = random_params(&mut r, l, m, p);
        let x = random_input(&mut r, l);
        let all = sample_entanglement(&params, &x).unwrap();
        for k in 0..l {
            let s = von_neumann_entropy(&single_site_rdm(&params, &x, k).unwrap());
            assert!((all.entropies[k] - s).abs() < 1e-12);
            assert_eq!(all.mutual_information.get(k, k), 0.0);
            for j in (k + 1)..l {
                let mi = mutual_information(&params, &x, k, j).unwrap();
                assert!((all.mutual_information.get(k, j) - mi).abs() < 1e-9);
                assert_eq!(all.mutual_information.get(k, j), all.mutual_information.get(j, k));
            }
        }
    }
}

#[test]
fn rdm_invariants() {
    let mut r = rng(16);
    for &(l, m, p) in &SHAPES {
        for _ in 0..10 {
            let params = random_params(&mut r, l, m, p);
            let x = random_input(&mut r, l);
            for site in 0..l {
                let rho = single_site_rdm(&params, &x, site).unwrap();
                assert!((rho.trace() - 1.0).abs() < 1e-12);
                assert!(rho.asymmetry() < 1e-14);
                assert!(rho.eigenvalues().iter().all(|&e| e > -1e-12 && e < 1.0 + 1e-12));
                let s = von_neumann_entropy(&rho);
                assert!((0.0..=std::f64::consts::LN_2 + 1e-12).contains(&s));
            }
            for k in 0..l {
                for j in (k + 1)..l {
                    let rho = two_site_rdm(&params, &x, k, j).unwrap();
                    assert!((rho.trace() - 1.0).abs() < 1e-12);
                    let first = rho.reduce(true).unwrap();
                    let second = rho.reduce(false).unwrap();
                    let rk = single_site_rdm(&params, &x, k).unwrap();
                    let rj = single_site_rdm(&params, &x, j).unwrap();
                    for (a, b) in first.entries().iter().zip(rk.entries()) {
                        assert!((a - b).abs() < 1e-12);
                    }
                    for (a, b) in second.entries().iter().zip(rj.entries()) {
                        assert!((a - b).abs() < 1e-12);
                    }
                    let mi = mutual_information(&params, &x, k, j).unwrap();
                    assert!((0.0..=2.0 * std::f64::consts::LN_2 + 1e-10).contains(&mi));
                }
            }
        }
    }
}

#[test]
fn product_state_has_no_entanglement() {
    let mut r = rng(17);
    let params = random_params(&mut r, 5, 1, 1);
    let x = random_input(&mut r, 5);
    let e = sample_entanglement(&params, &x).unwrap();
    assert!(e.entropies.iter().all(|&s| s.abs() < 1e-12));
    assert!(e.mutual_information.as_slice().iter().all(|&v| v.abs() < 1e-12));
}
