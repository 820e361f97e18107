//! Model parameters and the closed-form quantities of the superposed output state.
//!
//! For a normalized sample `x̃`, term `α = (m, p)` contributes the product state
//! `⊗_l (cos φ_αl, sin φ_αl)` with `φ_αl = θ^α_l + ω_p x̃_l` and `ω_p = π / 2^p`.
//! The output state is `Σ_α c_α ⊗_l v^α_l`; its overlap with `|0…0⟩` is the
//! numerator, its squared norm is `Z`, and the normality score is `numerator² / Z`.
//!
//! Index conventions: mixture index `m` and site `l` are 0-based, resolution `p`
//! is 1-based (so `ω_1 = π/2`). Terms are laid out `m`-major: `α = m·P + (p − 1)`.

use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Below this the normalization constant is treated as a collapsed state.
pub const Z_FLOOR: f64 = 1e-30;

/// Log-score assigned to an exactly vanishing numerator; roughly `ln` of the
/// smallest positive double.
pub const LOG_FLOOR: f64 = -745.0;

/// Normalization constants within this distance of zero are clamped to zero.
pub const Z_EPSILON: f64 = 1e-12;

/// Highest resolution index whose frequency is still distinguishable from zero
/// when added to angles of order one.
pub const MAX_RESOLUTION: usize = 52;

/// Fourier frequency `ω_p = π / 2^p` of resolution `p` (1-based).
pub fn frequency(p: usize) -> f64 {
    PI / (1u64 << p) as f64
}

/// Embeds one normalized feature at resolution `p`: `(cos ω_p x̃, sin ω_p x̃)`.
pub fn embed_site(x_tilde: f64, p: usize) -> Result<[f64; 2]> {
    if p == 0 || p > MAX_RESOLUTION {
        return Err(Error::domain(alloc::format!("resolution index {p} out of range")));
    }
    if !x_tilde.is_finite() {
        return Err(Error::domain("non-finite feature value"));
    }
    let (s, c) = libm::sincos(frequency(p) * x_tilde);
    Ok([c, s])
}

/// A product of factors held as `(sign, Σ ln|factor|)` so that long products of
/// cosines neither underflow nor lose relative precision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedLogProduct {
    /// −1, 0 or +1. Zero iff some factor was exactly zero.
    pub sign: i8,
    /// `Σ ln|factor|` over the factors; meaningless when `sign == 0`.
    pub log_magnitude: f64,
}

impl SignedLogProduct {
    pub const ONE: SignedLogProduct = SignedLogProduct { sign: 1, log_magnitude: 0.0 };

    pub fn from_factors(factors: impl IntoIterator<Item = f64>) -> Self {
        let mut acc = Self::ONE;
        for f in factors {
            acc.push(f);
        }
        acc
    }

    pub fn push(&mut self, factor: f64) {
        if self.sign == 0 {
            return;
        }
        if factor == 0.0 {
            self.sign = 0;
            self.log_magnitude = f64::NEG_INFINITY;
            return;
        }
        if factor < 0.0 {
            self.sign = -self.sign;
        }
        self.log_magnitude += libm::log(factor.abs());
    }

    pub fn is_zero(&self) -> bool {
        self.sign == 0
    }

    /// The represented value; underflows to ±0 for very negative log magnitudes.
    pub fn value(&self) -> f64 {
        match self.sign {
            0 => 0.0,
            s => f64::from(s) * libm::exp(self.log_magnitude),
        }
    }
}

/// Learnable parameters `{c_mp, θ^mp_l}` of an `(L, M, P)` model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    sites: usize,
    components: usize,
    resolutions: usize,
    /// `θ`, indexed `(α, l)` row-major, radians.
    theta: Vec<f64>,
    /// `c`, indexed by term `α`.
    coeff: Vec<f64>,
}

impl ModelParams {
    /// All rotations zero, coefficients equal to `1/√(MP)`.
    pub fn new(sites: usize, components: usize, resolutions: usize) -> Result<Self> {
        check_shape(sites, components, resolutions)?;
        let terms = components * resolutions;
        let c = 1.0 / libm::sqrt(terms as f64);
        Ok(ModelParams {
            sites,
            components,
            resolutions,
            theta: alloc::vec![0.0; terms * sites],
            coeff: alloc::vec![c; terms],
        })
    }

    pub fn from_parts(
        sites: usize,
        components: usize,
        resolutions: usize,
        theta: Vec<f64>,
        coeff: Vec<f64>,
    ) -> Result<Self> {
        check_shape(sites, components, resolutions)?;
        let terms = components * resolutions;
        if theta.len() != terms * sites {
            return Err(Error::LengthMismatch { expected: terms * sites, found: theta.len() });
        }
        if coeff.len() != terms {
            return Err(Error::LengthMismatch { expected: terms, found: coeff.len() });
        }
        let params = ModelParams { sites, components, resolutions, theta, coeff };
        params.validate()?;
        Ok(params)
    }

    /// Checks the value invariants: finite entries, coefficients not all zero.
    pub fn validate(&self) -> Result<()> {
        if let Some(i) = self.theta.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(alloc::format!("theta[{i}] is not finite")));
        }
        if let Some(i) = self.coeff.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(alloc::format!("coeff[{i}] is not finite")));
        }
        if self.coeff.iter().all(|&c| c == 0.0) {
            return Err(Error::domain("coefficients are identically zero"));
        }
        Ok(())
    }

    /// Number of features `L`.
    pub fn sites(&self) -> usize {
        self.sites
    }

    /// Mixture count `M`.
    pub fn components(&self) -> usize {
        self.components
    }

    /// Embedding resolutions `P`.
    pub fn resolutions(&self) -> usize {
        self.resolutions
    }

    /// `M·P`, the number of superposed product terms.
    pub fn terms(&self) -> usize {
        self.coeff.len()
    }

    /// Learnable parameter count `M·P·(L+1)`.
    pub fn n_learnable(&self) -> usize {
        self.theta.len() + self.coeff.len()
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn coeff(&self) -> &[f64] {
        &self.coeff
    }

    pub fn theta_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    pub fn coeff_mut(&mut self) -> &mut [f64] {
        &mut self.coeff
    }

    /// Term index `α` of `(m, p)`.
    pub fn term_index(&self, m: usize, p: usize) -> Result<usize> {
        if m >= self.components || p == 0 || p > self.resolutions {
            return Err(Error::domain(alloc::format!(
                "term (m={m}, p={p}) outside M={}, P={}",
                self.components,
                self.resolutions
            )));
        }
        Ok(m * self.resolutions + (p - 1))
    }

    /// Frequency of term `α`.
    pub fn term_frequency(&self, term: usize) -> f64 {
        frequency(term % self.resolutions + 1)
    }

    pub fn theta_at(&self, m: usize, p: usize, l: usize) -> Result<f64> {
        let a = self.term_index(m, p)?;
        self.check_site(l)?;
        Ok(self.theta[a * self.sites + l])
    }

    pub fn set_theta(&mut self, m: usize, p: usize, l: usize, value: f64) -> Result<()> {
        let a = self.term_index(m, p)?;
        self.check_site(l)?;
        self.theta[a * self.sites + l] = value;
        Ok(())
    }

    pub fn coeff_at(&self, m: usize, p: usize) -> Result<f64> {
        Ok(self.coeff[self.term_index(m, p)?])
    }

    pub fn set_coeff(&mut self, m: usize, p: usize, value: f64) -> Result<()> {
        let a = self.term_index(m, p)?;
        self.coeff[a] = value;
        Ok(())
    }

    fn check_site(&self, l: usize) -> Result<()> {
        if l >= self.sites {
            return Err(Error::domain(alloc::format!("site {l} outside L={}", self.sites)));
        }
        Ok(())
    }

    pub(crate) fn check_input(&self, x_tilde: &[f64]) -> Result<()> {
        if x_tilde.len() != self.sites {
            return Err(Error::LengthMismatch { expected: self.sites, found: x_tilde.len() });
        }
        if x_tilde.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("non-finite feature value"));
        }
        Ok(())
    }

    /// Site vector of term `(m, p)` at site `l`: `(cos(θ + ω_p x̃_l), sin(θ + ω_p x̃_l))`.
    pub fn component_site_vector(&self, m: usize, p: usize, l: usize, x_tilde_l: f64) -> Result<[f64; 2]> {
        let theta = self.theta_at(m, p, l)?;
        if !x_tilde_l.is_finite() {
            return Err(Error::domain("non-finite feature value"));
        }
        let (s, c) = libm::sincos(theta + frequency(p) * x_tilde_l);
        Ok([c, s])
    }

    /// `Σ_α c_α Π_l cos φ_αl`, the overlap of the unnormalized output state with `|0…0⟩`.
    pub fn numerator(&self, x_tilde: &[f64]) -> Result<f64> {
        self.check_input(x_tilde)?;
        let table = SiteTable::new(self, x_tilde);
        let num = ScaledNumerator::new(&table, &self.coeff);
        Ok(num.value())
    }

    /// Normalization constant `Z`, the squared norm of the output state.
    pub fn gram(&self, x_tilde: &[f64]) -> Result<f64> {
        self.check_input(x_tilde)?;
        let table = SiteTable::new(self, x_tilde);
        Ok(clamp_z(table.gram(&self.coeff)))
    }

    /// The `(MP)×(MP)` matrix of pairwise term overlaps `G_αβ = Π_l cos(φ_αl − φ_βl)`,
    /// so that `Z = cᵀ G c`.
    pub fn gram_matrix(&self, x_tilde: &[f64]) -> Result<Matrix> {
        self.check_input(x_tilde)?;
        let table = SiteTable::new(self, x_tilde);
        let k = self.terms();
        let mut g = Matrix::zeros(k, k);
        for a in 0..k {
            g.row_mut(a)[a] = 1.0;
            for b in (a + 1)..k {
                let q = table.overlap(a, b);
                g.row_mut(a)[b] = q;
                g.row_mut(b)[a] = q;
            }
        }
        Ok(g)
    }

    /// Normality score with its numerator, normalization constant and stabilized log.
    pub fn normality_score(&self, x_tilde: &[f64]) -> Result<ScoreBreakdown> {
        self.check_input(x_tilde)?;
        let table = SiteTable::new(self, x_tilde);
        let z = clamp_z(table.gram(&self.coeff));
        let num = ScaledNumerator::new(&table, &self.coeff);
        ScoreBreakdown::from_parts(&num, z)
    }
}

fn check_shape(sites: usize, components: usize, resolutions: usize) -> Result<()> {
    if sites == 0 || components == 0 || resolutions == 0 {
        return Err(Error::domain("model dimensions L, M and P must be positive"));
    }
    if resolutions > MAX_RESOLUTION {
        return Err(Error::domain(alloc::format!("P={resolutions} exceeds {MAX_RESOLUTION}")));
    }
    Ok(())
}

fn clamp_z(z: f64) -> f64 {
    if z.abs() < Z_EPSILON {
        0.0
    } else {
        z
    }
}

/// Numerator, normalization constant and score of one sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreBreakdown {
    pub numerator: f64,
    pub z: f64,
    /// Normality score in `[0, 1]`.
    pub score: f64,
    /// `2 ln|numerator| − ln Z`, bounded to `[LOG_FLOOR, 0]`.
    pub log_score: f64,
}

impl ScoreBreakdown {
    pub(crate) fn from_parts(num: &ScaledNumerator, z: f64) -> Result<Self> {
        if !(z > Z_FLOOR) {
            return Err(Error::Degenerate { z });
        }
        let numerator = num.value();
        let (score, log_score) = match num.ln_abs() {
            None => (0.0, LOG_FLOOR),
            Some(ln_abs) => {
                let raw = 2.0 * ln_abs - libm::log(z);
                let raw = raw.min(0.0);
                (libm::exp(raw), raw.max(LOG_FLOOR))
            }
        };
        Ok(ScoreBreakdown { numerator, z, score, log_score })
    }
}

/// Per-sample cosines and sines of every term angle, `(α, l)` row-major.
pub(crate) struct SiteTable {
    pub sites: usize,
    pub terms: usize,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl SiteTable {
    pub fn new(params: &ModelParams, x_tilde: &[f64]) -> Self {
        let mut table = SiteTable { sites: 0, terms: 0, cos: Vec::new(), sin: Vec::new() };
        table.fill(params, x_tilde);
        table
    }

    /// Refills the table in place, reusing its buffers.
    pub fn fill(&mut self, params: &ModelParams, x_tilde: &[f64]) {
        let (sites, terms) = (params.sites, params.terms());
        self.sites = sites;
        self.terms = terms;
        self.cos.resize(terms * sites, 0.0);
        self.sin.resize(terms * sites, 0.0);
        for a in 0..terms {
            let w = params.term_frequency(a);
            let row = a * sites;
            for (l, &x) in x_tilde.iter().enumerate() {
                let (s, c) = libm::sincos(params.theta[row + l] + w * x);
                self.cos[row + l] = c;
                self.sin[row + l] = s;
            }
        }
    }

    #[inline]
    pub fn cos_row(&self, a: usize) -> &[f64] {
        &self.cos[a * self.sites..(a + 1) * self.sites]
    }

    #[inline]
    pub fn sin_row(&self, a: usize) -> &[f64] {
        &self.sin[a * self.sites..(a + 1) * self.sites]
    }

    /// `Π_l cos(φ_al − φ_bl)`.
    pub fn overlap(&self, a: usize, b: usize) -> f64 {
        let (ca, sa, cb, sb) = (self.cos_row(a), self.sin_row(a), self.cos_row(b), self.sin_row(b));
        let mut q = 1.0;
        for l in 0..self.sites {
            q *= ca[l] * cb[l] + sa[l] * sb[l];
        }
        q
    }

    /// `cᵀ G c`, unclamped.
    pub fn gram(&self, coeff: &[f64]) -> f64 {
        let mut diag = 0.0;
        let mut off = 0.0;
        for a in 0..self.terms {
            diag += coeff[a] * coeff[a];
            for b in (a + 1)..self.terms {
                off += coeff[a] * coeff[b] * self.overlap(a, b);
            }
        }
        diag + 2.0 * off
    }
}

/// Numerator represented as `scaled · e^shift` with every per-term product in
/// signed-log form, so that long chains of small cosines keep their ratios.
pub(crate) struct ScaledNumerator {
    /// Per-term product `Π_l cos φ_αl`.
    pub products: Vec<SignedLogProduct>,
    /// Per-term product divided by `e^shift`; each lies in `[−1, 1]`.
    pub scaled_products: Vec<f64>,
    pub shift: f64,
    /// `Σ_α c_α · scaled_products[α]`.
    pub scaled: f64,
}

impl ScaledNumerator {
    pub fn new(table: &SiteTable, coeff: &[f64]) -> Self {
        let mut num = ScaledNumerator { products: Vec::new(), scaled_products: Vec::new(), shift: 0.0, scaled: 0.0 };
        num.fill(table, coeff);
        num
    }

    /// Recomputes in place, reusing the buffers.
    pub fn fill(&mut self, table: &SiteTable, coeff: &[f64]) {
        self.products.clear();
        self.products
            .extend((0..table.terms).map(|a| SignedLogProduct::from_factors(table.cos_row(a).iter().copied())));
        let shift = self
            .products
            .iter()
            .filter(|p| !p.is_zero())
            .map(|p| p.log_magnitude)
            .fold(f64::NEG_INFINITY, f64::max);
        self.shift = if shift.is_finite() { shift } else { 0.0 };
        let shift = self.shift;
        self.scaled_products.clear();
        self.scaled_products.extend(self.products.iter().map(|p| match p.sign {
            0 => 0.0,
            s => f64::from(s) * libm::exp(p.log_magnitude - shift),
        }));
        self.scaled = coeff.iter().zip(&self.scaled_products).map(|(c, p)| c * p).sum();
    }

    pub fn value(&self) -> f64 {
        self.scaled * libm::exp(self.shift)
    }

    /// `ln|numerator|`, or `None` when the numerator is exactly zero.
    pub fn ln_abs(&self) -> Option<f64> {
        if self.scaled == 0.0 {
            None
        } else {
            Some(libm::log(self.scaled.abs()) + self.shift)
        }
    }
}
