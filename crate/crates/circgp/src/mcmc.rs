//! Shared plumbing for the two model fitters: run settings, correlation
//! parameter priors/transforms, per-chain output, and the end-of-chain
//! state that makes warm starts exact.

use nalgebra::DVector;

use crate::adapt::ParamTransform;
use crate::error::{Error, Result};
use crate::kernel::CorrelationSpec;
use crate::priors::{BetaPrior, UniformPrior};

/// Iteration counts and adaptation constants for one MCMC run.
#[derive(Debug, Clone)]
pub struct McmcSettings {
    /// Total iterations per chain (including burn-in).
    pub iters: u64,
    /// Iterations discarded before storage.
    pub burnin: u64,
    /// Keep every `thin`-th post-burn-in iteration.
    pub thin: u64,
    /// Adaptation window `[start, end]`, 1-based and inclusive; the
    /// proposal state is frozen outside it.
    pub adapt_start: u64,
    pub adapt_end: u64,
    /// Batch length for the per-site scalar adaptation.
    pub n_batch: u32,
    /// Target acceptance for the block proposal.
    pub target_block: f64,
    /// Target acceptance for scalar proposals.
    pub target_scalar: f64,
    /// Step-size decay exponent ξ.
    pub decay_exp: f64,
    /// Initial block scale λ.
    pub lambda0: f64,
    /// Initial diagonal of `Σ_ad` (unconstrained scale); broadcast if a
    /// single value is given.
    pub prop_var: Vec<f64>,
    /// Initial per-site proposal sd for latent radii.
    pub radius_sd0: f64,
}

impl Default for McmcSettings {
    fn default() -> Self {
        Self {
            iters: 10_000,
            burnin: 5_000,
            thin: 10,
            adapt_start: 100,
            adapt_end: 5_000,
            n_batch: 50,
            target_block: 0.234,
            target_scalar: 0.44,
            decay_exp: 0.7,
            lambda0: 1.0,
            prop_var: vec![0.1],
            radius_sd0: 0.5,
        }
    }
}

impl McmcSettings {
    /// Checks the fields a single chain needs to run. Deliberately does
    /// not require `burnin < iters` or `adapt_end ≤ burnin`: a run that
    /// stops early (to be resumed from its end state) legitimately halts
    /// before burn-in or mid-adaptation. [`full_run_validate`] adds the
    /// strict whole-plan rules.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.iters == 0 {
            problems.push("iters must be ≥ 1".to_string());
        }
        if self.thin == 0 {
            problems.push("thin must be ≥ 1".to_string());
        }
        if self.adapt_start == 0 {
            problems.push("adapt start is 1-based and must be ≥ 1".to_string());
        }
        if self.adapt_start > self.adapt_end {
            problems.push(format!(
                "adapt window start ({}) must be ≤ end ({})",
                self.adapt_start, self.adapt_end
            ));
        }
        if self.n_batch == 0 {
            problems.push("n_batch must be ≥ 1".to_string());
        }
        for (v, what) in [
            (self.target_block, "block target acceptance"),
            (self.target_scalar, "scalar target acceptance"),
        ] {
            if !(v > 0.0 && v < 1.0) {
                problems.push(format!("{what} must lie in (0, 1), got {v}"));
            }
        }
        if !(self.decay_exp > 0.0 && self.decay_exp <= 1.0) {
            problems.push(format!(
                "adaptation decay exponent must lie in (0, 1], got {}",
                self.decay_exp
            ));
        }
        if !(self.lambda0 > 0.0) {
            problems.push(format!("lambda0 must be > 0, got {}", self.lambda0));
        }
        if self.prop_var.is_empty() || self.prop_var.iter().any(|&v| !(v > 0.0)) {
            problems.push("prop_var entries must be > 0".to_string());
        }
        if !(self.radius_sd0 > 0.0) {
            problems.push(format!("radius_sd0 must be > 0, got {}", self.radius_sd0));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }

    /// Strict validation for a complete sampling plan: draws must exist
    /// and adaptation must finish within burn-in so every stored draw
    /// comes from a frozen transition kernel.
    pub fn full_run_validate(&self) -> Result<()> {
        self.validate()?;
        if self.burnin >= self.iters {
            return Err(Error::Config(format!(
                "burnin ({}) must be smaller than iters ({})",
                self.burnin, self.iters
            )));
        }
        if self.adapt_end > self.burnin {
            return Err(Error::Config(format!(
                "adaptation must finish within burn-in: end ({}) > burnin ({})",
                self.adapt_end, self.burnin
            )));
        }
        Ok(())
    }

    /// Whether iteration `it` (1-based) is stored after burn-in and
    /// thinning.
    pub fn stores(&self, it: u64) -> bool {
        it > self.burnin && (it - self.burnin) % self.thin == 0
    }

    /// Number of stored draws for a full run.
    pub fn n_stored(&self) -> u64 {
        self.iters.saturating_sub(self.burnin) / self.thin
    }

    /// The initial `Σ_ad` diagonal for a block of `d` parameters:
    /// `prop_var` broadcast if scalar, else length-checked.
    pub fn prop_var_for(&self, d: usize) -> Result<Vec<f64>> {
        if self.prop_var.len() == 1 {
            Ok(vec![self.prop_var[0]; d])
        } else if self.prop_var.len() == d {
            Ok(self.prop_var.clone())
        } else {
            Err(Error::Config(format!(
                "prop_var has {} entries but the block has {d} parameters",
                self.prop_var.len()
            )))
        }
    }
}

/// Priors for the correlation parameters, shared by both models.
///
/// Decay/range parameters are uniform on their supports and are proposed
/// through interval-logit transforms, so they can never leave the prior
/// support; η has a beta prior on (0, 1).
#[derive(Debug, Clone)]
pub struct CorrPriors {
    pub rho: UniformPrior,
    pub rho_t: Option<UniformPrior>,
    pub eta: Option<BetaPrior>,
}

impl CorrPriors {
    pub fn validate(&self, space_time: bool) -> Result<()> {
        self.rho.validate("rho")?;
        if self.rho.lo < 0.0 {
            return Err(Error::Config(format!(
                "rho support must be nonnegative, got lo = {}",
                self.rho.lo
            )));
        }
        if space_time {
            let rho_t = self
                .rho_t
                .ok_or_else(|| Error::Config("gneiting kernel needs a rho_t prior".into()))?;
            rho_t.validate("rho_t")?;
            if rho_t.lo < 0.0 {
                return Err(Error::Config(format!(
                    "rho_t support must be nonnegative, got lo = {}",
                    rho_t.lo
                )));
            }
            self.eta
                .ok_or_else(|| Error::Config("gneiting kernel needs an eta prior".into()))?
                .validate()?;
        }
        Ok(())
    }

    /// Number of correlation parameters in the sampler block.
    pub fn n_params(&self, space_time: bool) -> usize {
        if space_time {
            3
        } else {
            1
        }
    }

    pub fn transforms(&self, space_time: bool) -> Vec<ParamTransform> {
        let mut t = vec![ParamTransform::LogitInterval { lo: self.rho.lo, hi: self.rho.hi }];
        if space_time {
            let rt = self.rho_t.expect("validated");
            t.push(ParamTransform::LogitInterval { lo: rt.lo, hi: rt.hi });
            t.push(ParamTransform::LogitInterval { lo: 0.0, hi: 1.0 });
        }
        t
    }

    /// Starting values: support midpoints for decays, prior mean for η.
    pub fn init(&self, space_time: bool) -> Vec<f64> {
        let mut v = vec![self.rho.midpoint()];
        if space_time {
            v.push(self.rho_t.expect("validated").midpoint());
            v.push(self.eta.expect("validated").mean());
        }
        v
    }

    /// Log prior density of the correlation parameters.
    pub fn log_pdf(&self, corr: &[f64], space_time: bool) -> f64 {
        let mut lp = self.rho.log_pdf(corr[0]);
        if space_time {
            lp += self.rho_t.expect("validated").log_pdf(corr[1]);
            lp += self.eta.expect("validated").log_pdf(corr[2]);
        }
        lp
    }

    pub fn names(&self, space_time: bool) -> Vec<&'static str> {
        if space_time {
            vec!["rho_sp", "rho_t", "eta"]
        } else {
            vec!["rho"]
        }
    }
}

/// Correlation family selector with the fixed Matérn smoothness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelFamily {
    Exponential,
    Gaussian,
    Matern { nu: f64 },
    Gneiting,
}

impl KernelFamily {
    pub fn is_space_time(&self) -> bool {
        matches!(self, KernelFamily::Gneiting)
    }

    /// Draw-column names of the correlation parameters this family
    /// samples, in block order.
    pub fn corr_names(&self) -> &'static [&'static str] {
        if self.is_space_time() {
            &["rho_sp", "rho_t", "eta"]
        } else {
            &["rho"]
        }
    }

    /// Builds the [`CorrelationSpec`] from the sampled correlation
    /// parameters (`[rho]` or `[rho_sp, rho_t, eta]`).
    pub fn make_spec(&self, corr: &[f64]) -> CorrelationSpec {
        match *self {
            KernelFamily::Exponential => CorrelationSpec::Exponential { rho: corr[0] },
            KernelFamily::Gaussian => CorrelationSpec::Gaussian { rho: corr[0] },
            KernelFamily::Matern { nu } => CorrelationSpec::Matern { nu, rho: corr[0] },
            KernelFamily::Gneiting => CorrelationSpec::Gneiting {
                rho_sp: corr[0],
                rho_t: corr[1],
                eta: corr[2],
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let KernelFamily::Matern { nu } = self {
            if !(nu.is_finite() && *nu > 0.0) {
                return Err(Error::Config(format!("matern smoothness nu must be > 0, got {nu}")));
            }
        }
        Ok(())
    }
}

/// Snapshot of the adaptation state, serialized into the end-state
/// sidecar so a warm start resumes the exact proposal process.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptSnapshot {
    pub lambda: f64,
    pub mu: Vec<f64>,
    /// Row-major `d × d`.
    pub sigma: Vec<f64>,
    pub block_b: u64,
    /// Empty for the wrapped model (no latent-radius adaptation).
    pub log_sd: Vec<f64>,
    pub batch_b: u64,
    pub batch_sums: Vec<f64>,
    pub batch_len: u32,
}

/// Final state of one chain: enough to continue the chain as if it had
/// never stopped (parameters, latents, adaptation, RNG position).
#[derive(Debug, Clone, PartialEq)]
pub struct EndState {
    /// Iterations completed so far (absolute count).
    pub completed_iters: u64,
    /// Final values in the same column layout as the stored draws.
    pub values: Vec<f64>,
    pub adapt: AdaptSnapshot,
    /// ChaCha stream position.
    pub rng_word_pos: u128,
}

/// Acceptance-rate bookkeeping reported per chain.
#[derive(Debug, Clone, Copy, Default)]
pub struct AcceptanceSummary {
    /// Covariance-parameter block acceptance rate.
    pub block_rate: f64,
    /// Mean per-site acceptance across winding or radius proposals.
    pub site_rate: f64,
}

/// Output of fitting one chain.
#[derive(Debug, Clone)]
pub struct ChainRun {
    /// Column names: parameters first, then per-site latents.
    pub names: Vec<String>,
    /// Stored draws, one row per retained iteration.
    pub draws: Vec<Vec<f64>>,
    pub end_state: EndState,
    pub accept: AcceptanceSummary,
    /// Rotation applied by π-centering (0 for the projected model);
    /// needed to map posterior draws back to the data scale.
    pub shift: f64,
}

/// Helper for building a column vector of `n` copies of a scalar.
pub(crate) fn constant_vector(n: usize, v: f64) -> DVector<f64> {
    DVector::from_element(n, v)
}
