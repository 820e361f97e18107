#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smtad_core::ModelParams;

pub fn random_params(rng: &mut ChaCha8Rng, sites: usize, m: usize, p: usize) -> ModelParams {
    let k = m * p;
    let theta = (0..k * sites).map(|_| rng.random_range(-1.5..1.5)).collect();
    let coeff = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
    ModelParams::from_parts(sites, m, p, theta, coeff).unwrap()
}

pub fn random_input(rng: &mut ChaCha8Rng, sites: usize) -> Vec<f64> {
    (0..sites).map(|_| rng.random_range(0.0..=1.0)).collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Hand-rolled Kronecker expansion: amplitude of basis state `i` (site 0 is the
/// high bit) is Σ_α c_α Π_l v_αl[bit_l(i)].
pub fn kron_state(params: &ModelParams, x: &[f64]) -> Vec<f64> {
    let l = params.sites();
    let mut psi = vec![0.0; 1 << l];
    for m in 0..params.components() {
        for p in 1..=params.resolutions() {
            let c = params.coeff_at(m, p).unwrap();
            for (i, amp) in psi.iter_mut().enumerate() {
                let mut prod = c;
                for site in 0..l {
                    let v = params.component_site_vector(m, p, site, x[site]).unwrap();
                    prod *= v[(i >> (l - 1 - site)) & 1];
                }
                *amp += prod;
            }
        }
    }
    psi
}
