//! Proposal adaptation for the samplers.
//!
//! Covariance parameters are proposed jointly on an unconstrained scale
//! (log for positive parameters, interval-logit for bounded ones) by a
//! random walk whose scale `λ`, mean `μ_ad`, and shape `Σ_ad` adapt with
//! diminishing step sizes `b^{−ξ}`:
//!
//! ```text
//! log λ ← log λ + b^{−ξ} (α_mh − d_ad)
//! μ_ad  ← μ_ad + b^{−ξ} (x* − μ_ad)
//! Σ_ad  ← Σ_ad + b^{−ξ} ((x* − μ_ad)(x* − μ_ad)ᵀ − Σ_ad)
//! ```
//!
//! where `x*` is the accepted value (or the retained current value on
//! rejection) and `α_mh` the min(1, ratio) of that iteration. Proposals
//! draw from a normal with covariance `λ Σ_ad + 0.0001 I`, so the walk
//! never degenerates even if `Σ_ad` collapses.
//!
//! Latent radii use per-site scalar adaptation in batches: every
//! `n_batch` in-window iterations, `log sd_i ← log sd_i + b^{−ξ}(ᾱ_i −
//! d_ad)` with `ᾱ_i` the mean MH ratio of the batch and `b` the batch
//! counter.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::gauss::factorize;

/// Floor added to the proposal covariance so the walk keeps moving when
/// `λ Σ_ad` degenerates.
const PROPOSAL_JITTER: f64 = 1e-4;
/// Clamp for `λ` so the recursion cannot overflow under a pathological
/// acceptance stream.
const LAMBDA_MIN: f64 = 1e-10;
const LAMBDA_MAX: f64 = 1e10;

/// Monotone map between an unconstrained real and a parameter domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParamTransform {
    /// `x ↦ exp(x)` onto `(0, ∞)`.
    LogPositive,
    /// `x ↦ (lo + hi eˣ)/(1 + eˣ)` onto `(lo, hi)`.
    LogitInterval { lo: f64, hi: f64 },
}

impl ParamTransform {
    pub fn to_constrained(&self, x: f64) -> f64 {
        match *self {
            ParamTransform::LogPositive => x.exp(),
            ParamTransform::LogitInterval { lo, hi } => {
                // Evaluate from the stable side to avoid inf/inf.
                if x >= 0.0 {
                    let e = (-x).exp();
                    (lo * e + hi) / (e + 1.0)
                } else {
                    let e = x.exp();
                    (lo + hi * e) / (1.0 + e)
                }
            }
        }
    }

    /// Inverse of [`Self::to_constrained`]; errors outside the domain.
    pub fn to_unconstrained(&self, v: f64) -> Result<f64> {
        if !v.is_finite() {
            return Err(Error::NonFinite("transform input"));
        }
        match *self {
            ParamTransform::LogPositive => {
                if v <= 0.0 {
                    return Err(Error::Numeric(format!("value {v} not in (0, ∞)")));
                }
                Ok(v.ln())
            }
            ParamTransform::LogitInterval { lo, hi } => {
                if v <= lo || v >= hi {
                    return Err(Error::Numeric(format!("value {v} not in ({lo}, {hi})")));
                }
                Ok(((v - lo) / (hi - v)).ln())
            }
        }
    }

    /// `log |d constrained / d unconstrained|` at unconstrained `x`;
    /// enters MH ratios as the change-of-variables correction.
    pub fn log_jacobian(&self, x: f64) -> f64 {
        match *self {
            ParamTransform::LogPositive => x,
            ParamTransform::LogitInterval { lo, hi } => {
                // log(hi−lo) + x − 2 log(1+eˣ), with a stable softplus.
                let softplus = if x > 0.0 { x + (-x).exp().ln_1p() } else { x.exp().ln_1p() };
                (hi - lo).ln() + x - 2.0 * softplus
            }
        }
    }
}

/// Whether iteration `b` (1-based) lies in the adaptation window
/// `[start, end]` (both inclusive).
pub fn adaptation_window(b: u64, start: u64, end: u64) -> bool {
    b >= start && b <= end
}

/// Adaptation state for the joint covariance-parameter proposal.
#[derive(Debug, Clone)]
pub struct BlockAdaptState {
    pub lambda: f64,
    pub mu: DVector<f64>,
    pub sigma: DMatrix<f64>,
    /// Update counter; the next update uses step size `b^{−ξ}`.
    pub b: u64,
    pub target_accept: f64,
    pub decay_exp: f64,
}

impl BlockAdaptState {
    /// `sigma0_diag` seeds `Σ_ad` as a diagonal matrix of initial
    /// proposal variances (unconstrained scale).
    pub fn new(sigma0_diag: &[f64], lambda0: f64, target_accept: f64, decay_exp: f64) -> Self {
        let d = sigma0_diag.len();
        let mut sigma = DMatrix::zeros(d, d);
        for (i, &v) in sigma0_diag.iter().enumerate() {
            sigma[(i, i)] = v;
        }
        Self {
            lambda: lambda0,
            mu: DVector::zeros(d),
            sigma,
            b: 1,
            target_accept,
            decay_exp,
        }
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// Proposal covariance `λ Σ_ad + 0.0001 I`.
    fn proposal_cov(&self) -> DMatrix<f64> {
        let d = self.dim();
        let mut cov = &self.sigma * self.lambda;
        for i in 0..d {
            cov[(i, i)] += PROPOSAL_JITTER;
        }
        cov
    }

    /// Draws a symmetric random-walk proposal around `current`
    /// (unconstrained scale).
    pub fn propose<R: Rng + ?Sized>(&self, rng: &mut R, current: &DVector<f64>) -> DVector<f64> {
        let cov = self.proposal_cov();
        // The jitter floor keeps this SPD for any PSD Σ_ad.
        let f = factorize(&cov).expect("proposal covariance with jitter floor is SPD");
        let z = DVector::from_fn(self.dim(), |_, _| StandardNormal.sample(rng));
        current + f.lower() * z
    }

    /// One adaptation step with this iteration's MH ratio `α_mh` and
    /// `x*` (the accepted proposal, or the retained current value).
    pub fn update(&mut self, alpha_mh: f64, x_star: &DVector<f64>) {
        let gamma = (self.b as f64).powf(-self.decay_exp);
        self.lambda = (self.lambda.ln() + gamma * (alpha_mh - self.target_accept))
            .exp()
            .clamp(LAMBDA_MIN, LAMBDA_MAX);
        let diff = x_star - &self.mu;
        // Σ first, with the pre-update mean.
        let outer = &diff * diff.transpose();
        self.sigma = &self.sigma + (outer - &self.sigma) * gamma;
        self.mu += &diff * gamma;
        self.b += 1;
        // Symmetrize rounding drift so Σ_ad stays exactly symmetric.
        let d = self.dim();
        for i in 0..d {
            for j in (i + 1)..d {
                let v = 0.5 * (self.sigma[(i, j)] + self.sigma[(j, i)]);
                self.sigma[(i, j)] = v;
                self.sigma[(j, i)] = v;
            }
        }
    }

    /// Row-major copy of `Σ_ad`, for serialization into an end state.
    pub fn sigma_rows(&self) -> Vec<f64> {
        let d = self.dim();
        let mut out = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                out.push(self.sigma[(i, j)]);
            }
        }
        out
    }

    /// Restores a serialized adaptation state (warm start).
    pub fn restore(&mut self, mu: &[f64], sigma_rows: &[f64], lambda: f64, b: u64) -> Result<()> {
        let d = self.dim();
        if mu.len() != d {
            return Err(Error::DimensionMismatch { what: "adapt mean", expected: d, got: mu.len() });
        }
        if sigma_rows.len() != d * d {
            return Err(Error::DimensionMismatch {
                what: "adapt covariance",
                expected: d * d,
                got: sigma_rows.len(),
            });
        }
        if !(lambda.is_finite() && lambda > 0.0) || b == 0 {
            return Err(Error::Config(format!(
                "invalid adaptation snapshot: lambda = {lambda}, b = {b}"
            )));
        }
        self.mu = DVector::from_column_slice(mu);
        self.sigma = DMatrix::from_fn(d, d, |i, j| sigma_rows[i * d + j]);
        self.lambda = lambda;
        self.b = b;
        Ok(())
    }
}

/// Per-component scalar proposal adaptation in batches.
#[derive(Debug, Clone)]
pub struct ScalarAdaptState {
    pub log_sd: Vec<f64>,
    batch_sum: Vec<f64>,
    batch_len: u32,
    pub n_batch: u32,
    /// Batch counter; the next batch update uses step size `b^{−ξ}`.
    pub b: u64,
    pub target_accept: f64,
    pub decay_exp: f64,
}

impl ScalarAdaptState {
    pub fn new(n: usize, sd0: f64, n_batch: u32, target_accept: f64, decay_exp: f64) -> Self {
        Self {
            log_sd: vec![sd0.ln(); n],
            batch_sum: vec![0.0; n],
            batch_len: 0,
            n_batch,
            b: 1,
            target_accept,
            decay_exp,
        }
    }

    /// Current proposal standard deviation for component `i`.
    pub fn sd(&self, i: usize) -> f64 {
        self.log_sd[i].exp()
    }

    /// Records component `i`'s MH ratio for the current iteration.
    pub fn record(&mut self, i: usize, alpha_mh: f64) {
        self.batch_sum[i] += alpha_mh.min(1.0);
    }

    /// Ends one in-window iteration; at batch boundaries applies the
    /// log-sd update and resets the accumulators. Do not call outside
    /// the adaptation window — the state is frozen there.
    pub fn end_iteration(&mut self) {
        self.batch_len += 1;
        if self.batch_len < self.n_batch {
            return;
        }
        let gamma = (self.b as f64).powf(-self.decay_exp);
        for (ls, sum) in self.log_sd.iter_mut().zip(self.batch_sum.iter_mut()) {
            let mean_alpha = *sum / self.n_batch as f64;
            *ls = (*ls + gamma * (mean_alpha - self.target_accept)).clamp(-23.0, 23.0);
            *sum = 0.0;
        }
        self.batch_len = 0;
        self.b += 1;
    }

    /// (batch accumulator, iterations into the current batch) — exposed
    /// so a warm start can resume mid-batch.
    pub fn batch_progress(&self) -> (&[f64], u32) {
        (&self.batch_sum, self.batch_len)
    }

    pub fn restore_batch_progress(&mut self, sums: Vec<f64>, len: u32) {
        self.batch_sum = sums;
        self.batch_len = len;
    }
}
