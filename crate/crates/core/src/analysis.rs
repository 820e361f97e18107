//! Entanglement diagnostics of the normalized output state: one- and two-site
//! reduced density matrices, von Neumann entropies, pairwise mutual information,
//! cohort averages and entropy-driven feature selection.
//!
//! The output state is a superposition of product states, so tracing out every
//! site but `l` leaves
//!
//! ```text
//! ρ_l = (1/Z) Σ_αβ c_α c_β (Π_{l'≠l} ⟨v^β_l', v^α_l'⟩) v^α_l (v^β_l)ᵀ
//! ```
//!
//! and the overlaps `⟨v^β_l', v^α_l'⟩ = cos(φ_αl' − φ_βl')` are shared with the
//! normalization constant. Prefix/suffix products give every site's weights in
//! one pass per term pair.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::symmetric_eigenvalues;
use crate::matrix::Matrix;
use crate::model::{ModelParams, SiteTable, Z_EPSILON, Z_FLOOR};
use crate::seed::{stream_rng, Stream};

/// Denominator floor of the amplification ratio.
pub const AMPLIFICATION_FLOOR: f64 = 1e-12;

/// Eigenvalues this close to 0 or 1 are snapped before the entropy sum.
pub const EIGEN_SNAP: f64 = 1e-14;

/// Default number of rows drawn from each cohort.
pub const DEFAULT_COHORT_SIZE: usize = 200;

/// Real symmetric density matrix on one site (`dim = 2`) or two sites (`dim = 4`).
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedDensityMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl ReducedDensityMatrix {
    pub fn from_entries(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if dim != 2 && dim != 4 {
            return Err(Error::domain("reduced density matrices are 2×2 or 4×4"));
        }
        if entries.len() != dim * dim {
            return Err(Error::LengthMismatch { expected: dim * dim, found: entries.len() });
        }
        Ok(ReducedDensityMatrix { dim, entries })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> Vec<f64> {
        symmetric_eigenvalues(&self.entries, self.dim)
    }

    /// Largest `|ρ_ij − ρ_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            for j in 0..i {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// For a two-site matrix, traces out the first (`keep_first = false`) or
    /// second (`keep_first = true`) site.
    pub fn reduce(&self, keep_first: bool) -> Result<ReducedDensityMatrix> {
        if self.dim != 4 {
            return Err(Error::domain("only two-site matrices can be reduced"));
        }
        let mut out = alloc::vec![0.0; 4];
        for a in 0..2 {
            for b in 0..2 {
                out[a * 2 + b] = (0..2)
                    .map(|t| {
                        if keep_first {
                            self.get(a * 2 + t, b * 2 + t)
                        } else {
                            self.get(t * 2 + a, t * 2 + b)
                        }
                    })
                    .sum();
            }
        }
        ReducedDensityMatrix::from_entries(2, out)
    }

    fn symmetrize(&mut self) {
        for i in 0..self.dim {
            for j in 0..i {
                let m = 0.5 * (self.entries[i * self.dim + j] + self.entries[j * self.dim + i]);
                self.entries[i * self.dim + j] = m;
                self.entries[j * self.dim + i] = m;
            }
        }
    }
}

/// `−Tr ρ ln ρ` in nats. Eigenvalues are clamped to `[0, 1]` (and snapped within
/// [`EIGEN_SNAP`] of either end) so round-off never produces a negative entropy.
pub fn von_neumann_entropy(rho: &ReducedDensityMatrix) -> f64 {
    let mut s = 0.0;
    for lambda in rho.eigenvalues() {
        let lambda = lambda.clamp(0.0, 1.0);
        if lambda <= EIGEN_SNAP || lambda >= 1.0 - EIGEN_SNAP {
            continue;
        }
        s -= lambda * libm::log(lambda);
    }
    s
}

fn normalization(params: &ModelParams, table: &SiteTable) -> Result<f64> {
    let mut z = table.gram(params.coeff());
    if z.abs() < Z_EPSILON {
        z = 0.0;
    }
    if !(z > Z_FLOOR) {
        return Err(Error::Degenerate { z });
    }
    Ok(z)
}

/// Per-site overlaps of a term pair with their prefix and suffix products.
struct PairScan {
    overlaps: Vec<f64>,
    prefix: Vec<f64>,
    suffix: Vec<f64>,
}

impl PairScan {
    fn new(sites: usize) -> Self {
        PairScan {
            overlaps: alloc::vec![1.0; sites],
            prefix: alloc::vec![1.0; sites + 1],
            suffix: alloc::vec![1.0; sites + 1],
        }
    }

    fn fill(&mut self, table: &SiteTable, a: usize, b: usize) {
        let sites = table.sites;
        let (ca, sa, cb, sb) = (table.cos_row(a), table.sin_row(a), table.cos_row(b), table.sin_row(b));
        for l in 0..sites {
            self.overlaps[l] = ca[l] * cb[l] + sa[l] * sb[l];
        }
        self.prefix[0] = 1.0;
        for l in 0..sites {
            self.prefix[l + 1] = self.prefix[l] * self.overlaps[l];
        }
        self.suffix[sites] = 1.0;
        for l in (0..sites).rev() {
            self.suffix[l] = self.suffix[l + 1] * self.overlaps[l];
        }
    }
}

fn site_vector(table: &SiteTable, a: usize, l: usize) -> [f64; 2] {
    [table.cos_row(a)[l], table.sin_row(a)[l]]
}

fn pair_vector(table: &SiteTable, a: usize, k: usize, l: usize) -> [f64; 4] {
    let (u, v) = (site_vector(table, a, k), site_vector(table, a, l));
    [u[0] * v[0], u[0] * v[1], u[1] * v[0], u[1] * v[1]]
}

/// Adds `w (x yᵀ + y xᵀ)` (or `w x xᵀ` when `same`) into a row-major `n × n` block.
fn add_outer<const N: usize>(acc: &mut [f64], w: f64, x: &[f64; N], y: &[f64; N], same: bool) {
    for i in 0..N {
        for j in 0..N {
            let v = if same { x[i] * x[j] } else { x[i] * y[j] + y[i] * x[j] };
            acc[i * N + j] += w * v;
        }
    }
}

fn finish(dim: usize, mut entries: Vec<f64>, z: f64) -> ReducedDensityMatrix {
    entries.iter_mut().for_each(|e| *e /= z);
    let mut rho = ReducedDensityMatrix { dim, entries };
    rho.symmetrize();
    rho
}

/// Every single-site reduced density matrix of the normalized output state.
pub fn single_site_rdms(params: &ModelParams, x_tilde: &[f64]) -> Result<Vec<ReducedDensityMatrix>> {
    params.check_input(x_tilde)?;
    let table = SiteTable::new(params, x_tilde);
    let z = normalization(params, &table)?;
    let (sites, terms, coeff) = (params.sites(), params.terms(), params.coeff());
    let mut acc = alloc::vec![0.0; sites * 4];
    let mut scan = PairScan::new(sites);
    for a in 0..terms {
        for l in 0..sites {
            let v = site_vector(&table, a, l);
            add_outer(&mut acc[l * 4..(l + 1) * 4], coeff[a] * coeff[a], &v, &v, true);
        }
        for b in (a + 1)..terms {
            scan.fill(&table, a, b);
            let cc = coeff[a] * coeff[b];
            for l in 0..sites {
                let w = cc * scan.prefix[l] * scan.suffix[l + 1];
                let (va, vb) = (site_vector(&table, a, l), site_vector(&table, b, l));
                add_outer(&mut acc[l * 4..(l + 1) * 4], w, &va, &vb, false);
            }
        }
    }
    Ok(acc.chunks(4).map(|c| finish(2, c.to_vec(), z)).collect())
}

/// Reduced density matrix of site `l` (0-based).
pub fn single_site_rdm(params: &ModelParams, x_tilde: &[f64], l: usize) -> Result<ReducedDensityMatrix> {
    if l >= params.sites() {
        return Err(Error::domain(alloc::format!("site {l} outside L={}", params.sites())));
    }
    Ok(single_site_rdms(params, x_tilde)?.swap_remove(l))
}

/// Two-site reduced density matrix of sites `k ≠ l` (0-based). The lower site is
/// the slow index of the 4-dimensional pair space.
pub fn two_site_rdm(params: &ModelParams, x_tilde: &[f64], k: usize, l: usize) -> Result<ReducedDensityMatrix> {
    params.check_input(x_tilde)?;
    let sites = params.sites();
    if k == l || k >= sites || l >= sites {
        return Err(Error::domain(alloc::format!("invalid site pair ({k}, {l})")));
    }
    let (k, l) = if k < l { (k, l) } else { (l, k) };
    let table = SiteTable::new(params, x_tilde);
    let z = normalization(params, &table)?;
    let (terms, coeff) = (params.terms(), params.coeff());
    let mut acc = alloc::vec![0.0; 16];
    let mut scan = PairScan::new(sites);
    for a in 0..terms {
        let ua = pair_vector(&table, a, k, l);
        add_outer(&mut acc, coeff[a] * coeff[a], &ua, &ua, true);
        for b in (a + 1)..terms {
            scan.fill(&table, a, b);
            let middle: f64 = scan.overlaps[k + 1..l].iter().product();
            let w = coeff[a] * coeff[b] * scan.prefix[k] * middle * scan.suffix[l + 1];
            add_outer(&mut acc, w, &ua, &pair_vector(&table, b, k, l), false);
        }
    }
    Ok(finish(4, acc, z))
}

/// `S_k + S_l − S_kl`, clamped at zero.
pub fn mutual_information(params: &ModelParams, x_tilde: &[f64], k: usize, l: usize) -> Result<f64> {
    let rho_kl = two_site_rdm(params, x_tilde, k, l)?;
    let singles = single_site_rdms(params, x_tilde)?;
    let s = von_neumann_entropy(&singles[k]) + von_neumann_entropy(&singles[l]) - von_neumann_entropy(&rho_kl);
    Ok(s.max(0.0))
}

/// All single-site entropies and the full mutual-information matrix of one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleEntanglement {
    pub entropies: Vec<f64>,
    /// `L × L`, symmetric, zero diagonal.
    pub mutual_information: Matrix,
}

/// Computes every `S_l` and `I_kl` of one sample in `O(L²·(MP)²)`.
pub fn sample_entanglement(params: &ModelParams, x_tilde: &[f64]) -> Result<SampleEntanglement> {
    params.check_input(x_tilde)?;
    let singles = single_site_rdms(params, x_tilde)?;
    let entropies: Vec<f64> = singles.iter().map(von_neumann_entropy).collect();

    let table = SiteTable::new(params, x_tilde);
    let z = normalization(params, &table)?;
    let (sites, terms, coeff) = (params.sites(), params.terms(), params.coeff());
    let pair_slot = |k: usize, l: usize| (k * sites + l) * 16;
    let mut acc = alloc::vec![0.0; sites * sites * 16];
    let mut scan = PairScan::new(sites);
    for a in 0..terms {
        for k in 0..sites {
            for l in (k + 1)..sites {
                let ua = pair_vector(&table, a, k, l);
                let slot = pair_slot(k, l);
                add_outer(&mut acc[slot..slot + 16], coeff[a] * coeff[a], &ua, &ua, true);
            }
        }
        for b in (a + 1)..terms {
            scan.fill(&table, a, b);
            let cc = coeff[a] * coeff[b];
            for k in 0..sites {
                let mut middle = 1.0;
                for l in (k + 1)..sites {
                    let w = cc * scan.prefix[k] * middle * scan.suffix[l + 1];
                    let (ua, ub) = (pair_vector(&table, a, k, l), pair_vector(&table, b, k, l));
                    let slot = pair_slot(k, l);
                    add_outer(&mut acc[slot..slot + 16], w, &ua, &ub, false);
                    middle *= scan.overlaps[l];
                }
            }
        }
    }

    let mut mi = Matrix::zeros(sites, sites);
    for k in 0..sites {
        for l in (k + 1)..sites {
            let slot = pair_slot(k, l);
            let rho = finish(4, acc[slot..slot + 16].to_vec(), z);
            let value = (entropies[k] + entropies[l] - von_neumann_entropy(&rho)).max(0.0);
            mi.row_mut(k)[l] = value;
            mi.row_mut(l)[k] = value;
        }
    }
    Ok(SampleEntanglement { entropies, mutual_information: mi })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cohort {
    Normal,
    Anomalous,
}

/// Cohort-averaged single-site entropies, in nats.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyProfile {
    pub entropies: Vec<f64>,
    pub samples: usize,
    pub cohort: Cohort,
}

/// Cohort-averaged mutual information.
#[derive(Debug, Clone, PartialEq)]
pub struct MiMatrix {
    pub values: Matrix,
    pub samples: usize,
    pub cohort: Cohort,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CohortProfiles {
    pub normal: EntropyProfile,
    pub anomalous: EntropyProfile,
    pub mi_normal: MiMatrix,
    pub mi_anomalous: MiMatrix,
    /// `S̄_l^anomalous / max(S̄_l^normal, floor)`, zero when the numerator is zero.
    pub amplification: Vec<f64>,
}

fn cohort_average(params: &ModelParams, rows: &Matrix, cohort: Cohort) -> Result<(EntropyProfile, MiMatrix)> {
    let name = match cohort {
        Cohort::Normal => "normal",
        Cohort::Anomalous => "anomalous",
    };
    if rows.rows() == 0 {
        return Err(Error::EmptyCohort(name));
    }
    let sites = params.sites();
    let mut entropies = alloc::vec![0.0; sites];
    let mut mi = alloc::vec![0.0; sites * sites];
    for x in rows.iter_rows() {
        let sample = sample_entanglement(params, x)?;
        entropies.iter_mut().zip(&sample.entropies).for_each(|(a, s)| *a += s);
        mi.iter_mut().zip(sample.mutual_information.as_slice()).for_each(|(a, s)| *a += s);
    }
    let n = rows.rows() as f64;
    entropies.iter_mut().for_each(|v| *v /= n);
    mi.iter_mut().for_each(|v| *v /= n);
    Ok((
        EntropyProfile { entropies, samples: rows.rows(), cohort },
        MiMatrix { values: Matrix::from_vec(sites, sites, mi)?, samples: rows.rows(), cohort },
    ))
}

/// Averages entropies and mutual information over both cohorts.
pub fn cohort_profiles(params: &ModelParams, normal: &Matrix, anomalous: &Matrix) -> Result<CohortProfiles> {
    let (normal, mi_normal) = cohort_average(params, normal, Cohort::Normal)?;
    let (anomalous, mi_anomalous) = cohort_average(params, anomalous, Cohort::Anomalous)?;
    let amplification = amplification(&normal.entropies, &anomalous.entropies);
    Ok(CohortProfiles { normal, anomalous, mi_normal, mi_anomalous, amplification })
}

/// Elementwise `anomalous / max(normal, AMPLIFICATION_FLOOR)`; a zero numerator gives zero.
pub fn amplification(normal: &[f64], anomalous: &[f64]) -> Vec<f64> {
    normal
        .iter()
        .zip(anomalous)
        .map(|(&n, &a)| if a == 0.0 { 0.0 } else { a / n.max(AMPLIFICATION_FLOOR) })
        .collect()
}

/// 1-based site numbers whose amplification reaches `threshold`, ascending.
pub fn select_features(amplification: &[f64], threshold: f64) -> Result<Vec<usize>> {
    if !(threshold > 0.0) {
        return Err(Error::domain("selection threshold must be positive"));
    }
    let selected: Vec<usize> =
        amplification.iter().enumerate().filter(|(_, &a)| a >= threshold).map(|(i, _)| i + 1).collect();
    if selected.is_empty() {
        return Err(Error::EmptySelection { threshold });
    }
    Ok(selected)
}

/// Up to `count` distinct row indices out of `n_rows`, drawn from the subsample
/// stream of `seed` and returned in ascending order.
pub fn subsample(n_rows: usize, count: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n_rows).collect();
    if count < n_rows {
        let mut rng = stream_rng(seed, Stream::Subsample);
        let (chosen, _) = idx.partial_shuffle(&mut rng, count);
        let mut chosen = chosen.to_vec();
        chosen.sort_unstable();
        return chosen;
    }
    idx.truncate(n_rows);
    idx
}
