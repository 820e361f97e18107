//! Regularized negative log-likelihood, its analytic gradient, Adam, and the
//! mini-batch epoch schedule.
//!
//! Per sample the loss term is `−ln a = −2 ln|n| + ln Z`. Derivatives of the
//! `L`-fold products replace one factor: `∂/∂θ_αl cos φ_αl = −sin φ_αl` for the
//! numerator and `−sin(φ_αl − φ_βl)` for each overlap in `Z`. Leave-one-out
//! products of the overlaps come from prefix/suffix scans, so one sample costs
//! `O(L·MP·(MP+1))`.

use alloc::boxed::Box;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{ModelParams, ScaledNumerator, SiteTable, LOG_FLOOR, Z_EPSILON, Z_FLOOR};
use crate::seed::{stream_rng, Stream};

/// Constant in the automatic epoch rule `⌊15000·|B| / |T|⌋`.
pub const EPOCH_BUDGET: usize = 15_000;

/// Training sets at least this large default to the large batch size.
pub const LARGE_DATASET: usize = 10_000;

/// Half-width of the uniform initialization of `θ`.
pub const INIT_THETA_RANGE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Epochs {
    Auto,
    Fixed(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// `None` picks 64 below [`LARGE_DATASET`] training rows and 512 above.
    pub batch_size: Option<usize>,
    pub epochs: Epochs,
    pub lambda_c: f64,
    pub lambda_theta: f64,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Decoupled (AdamW-style) decay rate; 0 leaves all shrinkage to the regularizer.
    #[serde(default)]
    pub weight_decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            batch_size: None,
            epochs: Epochs::Auto,
            lambda_c: 0.01,
            lambda_theta: 0.001,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::domain("learning rate must be positive"));
        }
        if self.batch_size == Some(0) {
            return Err(Error::domain("batch size must be at least 1"));
        }
        if self.epochs == Epochs::Fixed(0) {
            return Err(Error::domain("epoch count must be at least 1"));
        }
        if !(self.lambda_c >= 0.0 && self.lambda_theta >= 0.0) {
            return Err(Error::domain("regularization weights must be non-negative"));
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2) && self.epsilon > 0.0) {
            return Err(Error::domain("Adam constants out of range"));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::domain("weight decay must be non-negative"));
        }
        Ok(())
    }

    pub fn resolved_batch_size(&self, n_train: usize) -> usize {
        self.batch_size.unwrap_or_else(|| default_batch_size(n_train))
    }

    pub fn resolved_epochs(&self, n_train: usize) -> usize {
        match self.epochs {
            Epochs::Fixed(n) => n,
            Epochs::Auto => auto_epochs(self.resolved_batch_size(n_train), n_train),
        }
    }
}

pub fn default_batch_size(n_train: usize) -> usize {
    if n_train < LARGE_DATASET {
        64
    } else {
        512
    }
}

/// `⌊15000·batch / n_train⌋`, at least one.
pub fn auto_epochs(batch_size: usize, n_train: usize) -> usize {
    if n_train == 0 {
        return 1;
    }
    ((EPOCH_BUDGET * batch_size) / n_train).max(1)
}

/// Loss of one batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub nll: f64,
    pub reg: f64,
    pub total: f64,
    pub mean_log_score: f64,
}

/// Derivatives shaped like [`ModelParams`]: `theta` is `(α, l)` row-major, `coeff` by `α`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub theta: Vec<f64>,
    pub coeff: Vec<f64>,
}

impl Gradient {
    pub fn zeros_like(params: &ModelParams) -> Self {
        Gradient { theta: alloc::vec![0.0; params.theta().len()], coeff: alloc::vec![0.0; params.terms()] }
    }

    fn clear(&mut self) {
        self.theta.iter_mut().for_each(|v| *v = 0.0);
        self.coeff.iter_mut().for_each(|v| *v = 0.0);
    }

    fn scale(&mut self, k: f64) {
        self.theta.iter_mut().for_each(|v| *v *= k);
        self.coeff.iter_mut().for_each(|v| *v *= k);
    }
}

/// `λ_c‖c‖² + λ_θ‖θ‖²`.
pub fn regularizer(params: &ModelParams, lambda_c: f64, lambda_theta: f64) -> f64 {
    let c2: f64 = params.coeff().iter().map(|c| c * c).sum();
    let t2: f64 = params.theta().iter().map(|t| t * t).sum();
    lambda_c * c2 + lambda_theta * t2
}

/// `(2λ_c c, 2λ_θ θ)`.
pub fn regularizer_gradient(params: &ModelParams, lambda_c: f64, lambda_theta: f64) -> Gradient {
    Gradient {
        theta: params.theta().iter().map(|t| 2.0 * lambda_theta * t).collect(),
        coeff: params.coeff().iter().map(|c| 2.0 * lambda_c * c).collect(),
    }
}

/// Batch loss `−mean ln a + R`, using the stabilized log-score.
pub fn loss<'a>(
    params: &ModelParams,
    batch: impl IntoIterator<Item = &'a [f64]>,
    lambda_c: f64,
    lambda_theta: f64,
) -> Result<LossReport> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for x in batch {
        sum += params.normality_score(x)?.log_score;
        n += 1;
    }
    if n == 0 {
        return Err(Error::domain("empty batch"));
    }
    Ok(report(sum / n as f64, regularizer(params, lambda_c, lambda_theta)))
}

fn report(mean_log_score: f64, reg: f64) -> LossReport {
    let nll = -mean_log_score;
    LossReport { nll, reg, total: nll + reg, mean_log_score }
}

/// Analytic gradient of the batch loss.
pub fn gradient<'a>(
    params: &ModelParams,
    batch: impl IntoIterator<Item = &'a [f64]>,
    lambda_c: f64,
    lambda_theta: f64,
) -> Result<Gradient> {
    Ok(loss_and_gradient(params, batch, lambda_c, lambda_theta)?.1)
}

pub fn loss_and_gradient<'a>(
    params: &ModelParams,
    batch: impl IntoIterator<Item = &'a [f64]>,
    lambda_c: f64,
    lambda_theta: f64,
) -> Result<(LossReport, Gradient)> {
    let mut ws = Workspace::new(params);
    let mut grad = Gradient::zeros_like(params);
    let report = ws.batch(params, batch, lambda_c, lambda_theta, &mut grad)?;
    Ok((report, grad))
}

/// Gradient of `−ln a(x̃)` for a single sample, with its log-score. Samples whose
/// log-score sits at [`LOG_FLOOR`] have a zero gradient.
pub fn sample_gradient(params: &ModelParams, x_tilde: &[f64]) -> Result<(f64, Gradient)> {
    params.check_input(x_tilde)?;
    let mut ws = Workspace::new(params);
    let mut grad = Gradient::zeros_like(params);
    let log_score = ws.accumulate(params, x_tilde, 1.0, &mut grad)?;
    Ok((log_score, grad))
}

/// Scratch buffers reused across samples.
struct Workspace {
    table: SiteTable,
    num: ScaledNumerator,
    overlaps: Vec<f64>,
    suffix: Vec<f64>,
    dz_theta: Vec<f64>,
    dz_coeff: Vec<f64>,
}

impl Workspace {
    fn new(params: &ModelParams) -> Self {
        let (sites, terms) = (params.sites(), params.terms());
        Workspace {
            table: SiteTable { sites, terms, cos: Vec::new(), sin: Vec::new() },
            num: ScaledNumerator { products: Vec::new(), scaled_products: Vec::new(), shift: 0.0, scaled: 0.0 },
            overlaps: alloc::vec![0.0; sites],
            suffix: alloc::vec![0.0; sites + 1],
            dz_theta: alloc::vec![0.0; terms * sites],
            dz_coeff: alloc::vec![0.0; terms],
        }
    }

    fn batch<'a>(
        &mut self,
        params: &ModelParams,
        batch: impl IntoIterator<Item = &'a [f64]>,
        lambda_c: f64,
        lambda_theta: f64,
        grad: &mut Gradient,
    ) -> Result<LossReport> {
        grad.clear();
        let mut sum = 0.0;
        let mut n = 0usize;
        for x in batch {
            params.check_input(x)?;
            sum += self.accumulate(params, x, 1.0, grad)?;
            n += 1;
        }
        if n == 0 {
            return Err(Error::domain("empty batch"));
        }
        grad.scale(1.0 / n as f64);
        for (g, t) in grad.theta.iter_mut().zip(params.theta()) {
            *g += 2.0 * lambda_theta * t;
        }
        for (g, c) in grad.coeff.iter_mut().zip(params.coeff()) {
            *g += 2.0 * lambda_c * c;
        }
        Ok(report(sum / n as f64, regularizer(params, lambda_c, lambda_theta)))
    }

    /// Adds `weight · ∇(−ln a(x̃))` into `grad` and returns the log-score.
    fn accumulate(&mut self, params: &ModelParams, x: &[f64], weight: f64, grad: &mut Gradient) -> Result<f64> {
        let (sites, terms) = (params.sites(), params.terms());
        let coeff = params.coeff();
        self.table.fill(params, x);
        self.num.fill(&self.table, coeff);

        // Z and its derivatives, same summation order as SiteTable::gram
        self.dz_theta.iter_mut().for_each(|v| *v = 0.0);
        self.dz_coeff.iter_mut().for_each(|v| *v = 0.0);
        let mut diag = 0.0;
        let mut off = 0.0;
        let table = &self.table;
        for a in 0..terms {
            diag += coeff[a] * coeff[a];
            self.dz_coeff[a] += 2.0 * coeff[a];
            let (ca, sa) = (table.cos_row(a), table.sin_row(a));
            for b in (a + 1)..terms {
                let (cb, sb) = (table.cos_row(b), table.sin_row(b));
                for l in 0..sites {
                    self.overlaps[l] = ca[l] * cb[l] + sa[l] * sb[l];
                }
                self.suffix[sites] = 1.0;
                for l in (0..sites).rev() {
                    self.suffix[l] = self.suffix[l + 1] * self.overlaps[l];
                }
                let mut prefix = 1.0;
                let w = 2.0 * coeff[a] * coeff[b];
                for l in 0..sites {
                    let loo = prefix * self.suffix[l + 1];
                    // sin(φ_al − φ_bl)
                    let d = sa[l] * cb[l] - ca[l] * sb[l];
                    self.dz_theta[a * sites + l] -= w * d * loo;
                    self.dz_theta[b * sites + l] += w * d * loo;
                    prefix *= self.overlaps[l];
                }
                off += coeff[a] * coeff[b] * prefix;
                self.dz_coeff[a] += 2.0 * coeff[b] * prefix;
                self.dz_coeff[b] += 2.0 * coeff[a] * prefix;
            }
        }
        let mut z = diag + 2.0 * off;
        if z.abs() < Z_EPSILON {
            z = 0.0;
        }
        if !(z > Z_FLOOR) {
            return Err(Error::Degenerate { z });
        }

        let num = &self.num;
        if num.scaled == 0.0 {
            return Ok(LOG_FLOOR);
        }
        let raw = 2.0 * (libm::log(num.scaled.abs()) + num.shift) - libm::log(z);
        if raw < LOG_FLOOR {
            return Ok(LOG_FLOOR);
        }
        let log_score = raw.min(0.0);

        let inv_n = 1.0 / num.scaled;
        let inv_z = 1.0 / z;
        #[allow(clippy::needless_range_loop)]
        for a in 0..terms {
            grad.coeff[a] += weight * (-2.0 * num.scaled_products[a] * inv_n + self.dz_coeff[a] * inv_z);
            let (ca, sa) = (table.cos_row(a), table.sin_row(a));
            let row = a * sites;
            let zeros = ca.iter().filter(|&&c| c == 0.0).count();
            for l in 0..sites {
                // ∂n/∂θ_al = c_a · (−sin φ_al) · Π_{l'≠l} cos φ_al', scaled by e^-shift
                let loo = match zeros {
                    0 => num.scaled_products[a] / ca[l],
                    1 if ca[l] == 0.0 => leave_one_out_scaled(ca, l, num.shift),
                    _ => 0.0,
                };
                let dn = -coeff[a] * sa[l] * loo;
                grad.theta[row + l] += weight * (-2.0 * dn * inv_n + self.dz_theta[row + l] * inv_z);
            }
        }
        Ok(log_score)
    }
}

/// `Π_{l'≠l} cos φ_l' · e^-shift` for a term whose only zero factor is at `l`.
fn leave_one_out_scaled(cos_row: &[f64], l: usize, shift: f64) -> f64 {
    let mut sign = 1.0;
    let mut log_mag = 0.0;
    for (j, &c) in cos_row.iter().enumerate() {
        if j != l {
            if c < 0.0 {
                sign = -sign;
            }
            log_mag += libm::log(c.abs());
        }
    }
    sign * libm::exp(log_mag - shift)
}

/// Adam moment buffers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub m_theta: Vec<f64>,
    pub v_theta: Vec<f64>,
    pub m_coeff: Vec<f64>,
    pub v_coeff: Vec<f64>,
    pub step: u64,
}

impl OptimizerState {
    pub fn new(params: &ModelParams) -> Self {
        let (nt, nc) = (params.theta().len(), params.terms());
        OptimizerState {
            m_theta: alloc::vec![0.0; nt],
            v_theta: alloc::vec![0.0; nt],
            m_coeff: alloc::vec![0.0; nc],
            v_coeff: alloc::vec![0.0; nc],
            step: 0,
        }
    }
}

/// One bias-corrected Adam update. With the default `weight_decay = 0` all
/// shrinkage comes from the regularizer inside the loss.
pub fn adam_step(
    params: &mut ModelParams,
    grad: &Gradient,
    state: &mut OptimizerState,
    config: &TrainConfig,
) -> Result<()> {
    if grad.theta.len() != params.theta().len() || state.m_theta.len() != params.theta().len() {
        return Err(Error::LengthMismatch { expected: params.theta().len(), found: grad.theta.len() });
    }
    if grad.coeff.len() != params.terms() || state.m_coeff.len() != params.terms() {
        return Err(Error::LengthMismatch { expected: params.terms(), found: grad.coeff.len() });
    }
    if let Some(index) = grad.theta.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient { which: "theta", index });
    }
    if let Some(index) = grad.coeff.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient { which: "coeff", index });
    }
    state.step += 1;
    let t = state.step as f64;
    let bc1 = 1.0 - libm::pow(config.beta1, t);
    let bc2 = 1.0 - libm::pow(config.beta2, t);
    let update = |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
        for i in 0..p.len() {
            m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
            v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            p[i] -= config.learning_rate * config.weight_decay * p[i];
            p[i] -= config.learning_rate * m_hat / (libm::sqrt(v_hat) + config.epsilon);
        }
    };
    update(params.theta_mut(), &grad.theta, &mut state.m_theta, &mut state.v_theta);
    update(params.coeff_mut(), &grad.coeff, &mut state.m_coeff, &mut state.v_coeff);
    Ok(())
}

/// `θ ~ U(−0.1, 0.1)` and `c = 1/√(MP)`, drawn from the init stream of `seed`.
pub fn init_params(sites: usize, components: usize, resolutions: usize, seed: u64) -> Result<ModelParams> {
    let mut params = ModelParams::new(sites, components, resolutions)?;
    let mut rng = stream_rng(seed, Stream::Init);
    for t in params.theta_mut() {
        *t = rng.random_range(-INIT_THETA_RANGE..INIT_THETA_RANGE);
    }
    Ok(params)
}

/// Mean losses over one epoch, weighted by batch size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    /// 1-based.
    pub epoch: usize,
    pub nll: f64,
    pub reg: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub history: Vec<EpochLoss>,
    pub epochs: usize,
    pub batch_size: usize,
}

/// Errors raised by [`train`].
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error(transparent)]
    Core(#[from] Error),

    /// Loss or gradient became non-finite; `last_good` are the parameters
    /// before the offending step.
    #[error("training diverged in epoch {epoch}: {reason}")]
    Diverged { epoch: usize, reason: Error, last_good: Box<ModelParams> },
}

/// Trains an `(L, M, P)` model on the rows of `train_rows` (all normal).
///
/// Each epoch shuffles the training rows and runs Adam over consecutive
/// mini-batches, keeping the final short batch.
pub fn train(
    train_rows: &Matrix,
    components: usize,
    resolutions: usize,
    config: &TrainConfig,
) -> core::result::Result<TrainOutcome, TrainError> {
    train_with_progress(train_rows, components, resolutions, config, |_| {})
}

/// [`train`] with a callback after every epoch.
pub fn train_with_progress(
    train_rows: &Matrix,
    components: usize,
    resolutions: usize,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLoss),
) -> core::result::Result<TrainOutcome, TrainError> {
    config.validate()?;
    let n = train_rows.rows();
    if n == 0 {
        return Err(Error::EmptyTraining.into());
    }
    let batch_size = config.resolved_batch_size(n);
    let epochs = config.resolved_epochs(n);

    let mut params = init_params(train_rows.cols(), components, resolutions, config.seed)?;
    let mut state = OptimizerState::new(&params);
    let mut ws = Workspace::new(&params);
    let mut grad = Gradient::zeros_like(&params);
    let mut rng = stream_rng(config.seed, Stream::Shuffle);
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(epochs);

    for epoch in 1..=epochs {
        order.shuffle(&mut rng);
        let (mut nll, mut reg, mut total) = (0.0, 0.0, 0.0);
        for chunk in order.chunks(batch_size) {
            let rows = chunk.iter().map(|&i| train_rows.row(i));
            let report = ws.batch(&params, rows, config.lambda_c, config.lambda_theta, &mut grad)?;
            if !report.total.is_finite() {
                let reason = Error::domain("non-finite loss");
                return Err(TrainError::Diverged { epoch, reason, last_good: Box::new(params) });
            }
            if let Err(reason) = adam_step(&mut params, &grad, &mut state, config) {
                return Err(TrainError::Diverged { epoch, reason, last_good: Box::new(params) });
            }
            let w = chunk.len() as f64 / n as f64;
            nll += w * report.nll;
            reg += w * report.reg;
            total += w * report.total;
        }
        let record = EpochLoss { epoch, nll, reg, total };
        on_epoch(&record);
        history.push(record);
    }
    Ok(TrainOutcome { params, history, epochs, batch_size })
}
