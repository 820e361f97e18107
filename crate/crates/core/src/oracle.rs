//! Dense `2^L` state-vector reference, for verification at small `L` only.
//!
//! Amplitude index bits run from site 0 (most significant) to site `L − 1`.

use alloc::vec::Vec;

use crate::analysis::ReducedDensityMatrix;
use crate::error::{Error, Result};
use crate::model::{frequency, ModelParams};

pub const MAX_DENSE_SITES: usize = 16;

/// Explicit real amplitudes of an `L`-site state.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseState {
    sites: usize,
    amplitudes: Vec<f64>,
}

impl DenseState {
    pub fn from_amplitudes(sites: usize, amplitudes: Vec<f64>) -> Result<Self> {
        if sites > MAX_DENSE_SITES {
            return Err(Error::TooManySites { sites, max: MAX_DENSE_SITES });
        }
        if amplitudes.len() != 1 << sites {
            return Err(Error::LengthMismatch { expected: 1 << sites, found: amplitudes.len() });
        }
        if amplitudes.iter().any(|a| !a.is_finite()) {
            return Err(Error::domain("non-finite amplitude"));
        }
        Ok(DenseState { sites, amplitudes })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn norm_sq(&self) -> f64 {
        self.amplitudes.iter().map(|a| a * a).sum()
    }
}

/// Expands `Σ_α c_α ⊗_l v^α_l` into an explicit (unnormalized) vector.
pub fn build_dense_state(params: &ModelParams, x_tilde: &[f64]) -> Result<DenseState> {
    let sites = params.sites();
    if sites > MAX_DENSE_SITES {
        return Err(Error::TooManySites { sites, max: MAX_DENSE_SITES });
    }
    if x_tilde.len() != sites {
        return Err(Error::LengthMismatch { expected: sites, found: x_tilde.len() });
    }
    let mut state = alloc::vec![0.0; 1 << sites];
    let mut product = Vec::with_capacity(1 << sites);
    let mut next = Vec::with_capacity(1 << sites);
    for m in 0..params.components() {
        for p in 1..=params.resolutions() {
            product.clear();
            product.push(params.coeff_at(m, p)?);
            for (l, &x) in x_tilde.iter().enumerate() {
                let angle = params.theta_at(m, p, l)? + frequency(p) * x;
                let v = [libm::cos(angle), libm::sin(angle)];
                next.clear();
                for &amp in &product {
                    next.push(amp * v[0]);
                    next.push(amp * v[1]);
                }
                core::mem::swap(&mut product, &mut next);
            }
            for (s, a) in state.iter_mut().zip(&product) {
                *s += a;
            }
        }
    }
    DenseState::from_amplitudes(sites, state)
}

/// `|ψ_0|² / ‖ψ‖²`.
pub fn dense_score(state: &DenseState) -> Result<f64> {
    let norm = state.norm_sq();
    if norm == 0.0 {
        return Err(Error::Degenerate { z: 0.0 });
    }
    Ok(state.amplitudes[0] * state.amplitudes[0] / norm)
}

/// Reduced density matrix of the normalized state on one or two kept sites,
/// by explicit summation over the traced-out indices. With two sites the lower
/// one is the slow index.
pub fn dense_partial_trace(state: &DenseState, keep: &[usize]) -> Result<ReducedDensityMatrix> {
    let mut keep = keep.to_vec();
    keep.sort_unstable();
    keep.dedup();
    if keep.is_empty() || keep.len() > 2 {
        return Err(Error::domain("keep one or two distinct sites"));
    }
    if keep.iter().any(|&s| s >= state.sites) {
        return Err(Error::domain("kept site out of range"));
    }
    let norm = state.norm_sq();
    if norm == 0.0 {
        return Err(Error::Degenerate { z: 0.0 });
    }
    let shifts: Vec<usize> = keep.iter().map(|&s| state.sites - 1 - s).collect();
    let mask: usize = shifts.iter().map(|&b| 1 << b).sum();
    let kept_index = |i: usize| shifts.iter().fold(0, |acc, &b| (acc << 1) | ((i >> b) & 1));
    let with_kept = |i: usize, k: usize| {
        let mut j = i & !mask;
        for (pos, &b) in shifts.iter().enumerate() {
            let bit = (k >> (shifts.len() - 1 - pos)) & 1;
            j |= bit << b;
        }
        j
    };
    let dim = 1 << keep.len();
    let mut rho = alloc::vec![0.0; dim * dim];
    for (i, &amp) in state.amplitudes.iter().enumerate() {
        let a = kept_index(i);
        for b in 0..dim {
            rho[a * dim + b] += amp * state.amplitudes[with_kept(i, b)];
        }
    }
    rho.iter_mut().for_each(|r| *r /= norm);
    ReducedDensityMatrix::from_entries(dim, rho)
}
