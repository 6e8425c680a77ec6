//! Run configuration: a TOML file selecting the model family, kernel,
//! priors, MCMC/adaptation settings, chain count, and seed, plus an
//! optional generative block for the `simulate` subcommand.
//!
//! Validation is exhaustive — every detectable problem is listed in one
//! error before any compute starts. A documented set of `CIRCGP_*`
//! environment variables overrides the corresponding keys.

use std::path::{Path, PathBuf};

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::dataset::{AngleUnit, IngestOptions};
use crate::error::{Error, Result};
use crate::mcmc::{CorrPriors, KernelFamily, McmcSettings};
use crate::priors::{BetaPrior, InverseGamma, UniformPrior};
use crate::projected::PnPriors;
use crate::wrapped::WnPriors;

/// Which likelihood/domain combination to fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    WnSpatial,
    PnSpatial,
    WnSt,
    PnSt,
}

impl ModelKind {
    pub fn is_projected(self) -> bool {
        matches!(self, ModelKind::PnSpatial | ModelKind::PnSt)
    }

    pub fn is_space_time(self) -> bool {
        matches!(self, ModelKind::WnSt | ModelKind::PnSt)
    }

    pub fn label(self) -> &'static str {
        match self {
            ModelKind::WnSpatial => "wn_spatial",
            ModelKind::PnSpatial => "pn_spatial",
            ModelKind::WnSt => "wn_st",
            ModelKind::PnSt => "pn_st",
        }
    }
}

/// Correlation kernel selector; `matern` additionally needs the
/// top-level `matern_nu` key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelName {
    Exponential,
    Gaussian,
    Matern,
    Gneiting,
}

impl KernelName {
    pub fn label(self) -> &'static str {
        match self {
            KernelName::Exponential => "exponential",
            KernelName::Gaussian => "gaussian",
            KernelName::Matern => "matern",
            KernelName::Gneiting => "gneiting",
        }
    }
}

/// A value that is scalar for the wrapped model and a pair for the
/// projected model (e.g. the α prior mean).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScalarOrPair {
    Scalar(f64),
    Pair([f64; 2]),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    /// Dataset path; the `--data` flag overrides it.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub angle_unit: Option<AngleUnit>,
    #[serde(default)]
    pub rotate_half_turn: bool,
    #[serde(default)]
    pub assert_planar: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McmcSection {
    pub iters: u64,
    pub burnin: u64,
    #[serde(default = "default_thin")]
    pub thin: u64,
}

fn default_thin() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdaptSection {
    pub start: u64,
    /// Last adapting iteration; defaults to the burn-in boundary.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub end: Option<u64>,
    pub n_batch: u32,
    pub target_block: f64,
    pub target_scalar: f64,
    pub decay_exp: f64,
    pub lambda0: f64,
    pub prop_var: Vec<f64>,
    pub radius_sd0: f64,
}

impl Default for AdaptSection {
    fn default() -> Self {
        let d = McmcSettings::default();
        Self {
            start: d.adapt_start,
            end: None,
            n_batch: d.n_batch,
            target_block: d.target_block,
            target_scalar: d.target_scalar,
            decay_exp: d.decay_exp,
            lambda0: d.lambda0,
            prop_var: d.prop_var,
            radius_sd0: d.radius_sd0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphaPriorSection {
    /// Scalar (wrapped model) or pair (projected model).
    pub mean: ScalarOrPair,
    /// Prior variance: scalar for wrapped, pair = diagonal for projected.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub var: Option<ScalarOrPair>,
    /// Full 2×2 prior covariance for the projected model; overrides `var`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cov: Option<[[f64; 2]; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorsSection {
    pub alpha: AlphaPriorSection,
    pub sigma2: InverseGamma,
    pub rho: UniformPrior,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_t: Option<UniformPrior>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<BetaPrior>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<UniformPrior>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SiteLayout {
    Uniform,
    Grid,
}

/// Generative block for the `simulate` subcommand: ground-truth
/// parameter values plus a site layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    #[serde(default = "default_layout")]
    pub layout: SiteLayout,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_sites: Option<usize>,
    #[serde(default = "default_extent")]
    pub xmax: f64,
    #[serde(default = "default_extent")]
    pub ymax: f64,
    /// Upper bound of the time axis; must be positive for *_st models.
    #[serde(default)]
    pub tmax: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nx: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ny: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spacing: Option<f64>,
    pub alpha: ScalarOrPair,
    pub sigma2: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    pub rho: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
}

fn default_layout() -> SiteLayout {
    SiteLayout::Uniform
}

fn default_extent() -> f64 {
    10.0
}

fn default_n_chains() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelKind,
    pub kernel: KernelName,
    /// Matérn smoothness; required iff `kernel = "matern"`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matern_nu: Option<f64>,
    pub seed: u64,
    #[serde(default = "default_n_chains")]
    pub n_chains: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<DataSection>,
    pub mcmc: McmcSection,
    #[serde(default)]
    pub adapt: AdaptSection,
    pub priors: PriorsSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateSection>,
}

impl RunConfig {
    /// Parse a TOML config file.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Apply `CIRCGP_*` environment overrides. Recognized keys:
    /// `CIRCGP_SEED`, `CIRCGP_N_CHAINS`, `CIRCGP_MCMC_ITERS`,
    /// `CIRCGP_MCMC_BURNIN`, `CIRCGP_MCMC_THIN`, `CIRCGP_ADAPT_START`,
    /// `CIRCGP_ADAPT_END`. Any other `CIRCGP_*` key is rejected so a
    /// typo cannot silently change nothing — except the
    /// `CIRCGP_DATA_*` namespace, which is reserved for pointers to
    /// external dataset files (read by benchmarks and test suites, not
    /// config overrides) and is ignored here.
    pub fn apply_env_overrides<I>(&mut self, vars: I) -> Result<()>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        fn int(key: &str, val: &str) -> Result<u64> {
            val.parse::<u64>().map_err(|_| {
                Error::Config(format!("{key}: cannot parse '{val}' as an integer"))
            })
        }
        for (key, val) in vars {
            match key.as_str() {
                "CIRCGP_SEED" => self.seed = int(&key, &val)?,
                "CIRCGP_N_CHAINS" => self.n_chains = int(&key, &val)? as u32,
                "CIRCGP_MCMC_ITERS" => self.mcmc.iters = int(&key, &val)?,
                "CIRCGP_MCMC_BURNIN" => self.mcmc.burnin = int(&key, &val)?,
                "CIRCGP_MCMC_THIN" => self.mcmc.thin = int(&key, &val)?,
                "CIRCGP_ADAPT_START" => self.adapt.start = int(&key, &val)?,
                "CIRCGP_ADAPT_END" => self.adapt.end = Some(int(&key, &val)?),
                k if k.starts_with("CIRCGP_DATA_") => {}
                k if k.starts_with("CIRCGP_") => {
                    return Err(Error::Config(format!(
                        "unrecognized environment override '{k}'"
                    )));
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Assembled kernel family (Matérn smoothness folded in).
    pub fn family(&self) -> Result<KernelFamily> {
        match self.kernel {
            KernelName::Exponential => Ok(KernelFamily::Exponential),
            KernelName::Gaussian => Ok(KernelFamily::Gaussian),
            KernelName::Matern => {
                let nu = self.matern_nu.ok_or_else(|| {
                    Error::Config("matern kernel needs the matern_nu key".into())
                })?;
                Ok(KernelFamily::Matern { nu })
            }
            KernelName::Gneiting => Ok(KernelFamily::Gneiting),
        }
    }

    /// Assembled per-chain MCMC settings.
    pub fn mcmc_settings(&self) -> McmcSettings {
        McmcSettings {
            iters: self.mcmc.iters,
            burnin: self.mcmc.burnin,
            thin: self.mcmc.thin,
            adapt_start: self.adapt.start,
            adapt_end: self.adapt.end.unwrap_or(self.mcmc.burnin),
            n_batch: self.adapt.n_batch,
            target_block: self.adapt.target_block,
            target_scalar: self.adapt.target_scalar,
            decay_exp: self.adapt.decay_exp,
            lambda0: self.adapt.lambda0,
            prop_var: self.adapt.prop_var.clone(),
            radius_sd0: self.adapt.radius_sd0,
        }
    }

    pub fn corr_priors(&self) -> CorrPriors {
        CorrPriors {
            rho: self.priors.rho,
            rho_t: self.priors.rho_t,
            eta: self.priors.eta,
        }
    }

    /// Priors for the wrapped model.
    pub fn wn_priors(&self) -> Result<WnPriors> {
        let mean = match self.priors.alpha.mean {
            ScalarOrPair::Scalar(v) => v,
            ScalarOrPair::Pair(_) => {
                return Err(Error::Config(
                    "priors.alpha.mean must be a scalar for wrapped models".into(),
                ));
            }
        };
        let var = match self.priors.alpha.var {
            Some(ScalarOrPair::Scalar(v)) => v,
            Some(ScalarOrPair::Pair(_)) => {
                return Err(Error::Config(
                    "priors.alpha.var must be a scalar for wrapped models".into(),
                ));
            }
            None => {
                return Err(Error::Config("priors.alpha.var is required".into()));
            }
        };
        if self.priors.alpha.cov.is_some() {
            return Err(Error::Config(
                "priors.alpha.cov only applies to projected models".into(),
            ));
        }
        Ok(WnPriors {
            alpha_mean: mean,
            alpha_var: var,
            sigma2: self.priors.sigma2,
            corr: self.corr_priors(),
        })
    }

    /// Priors for the projected model.
    pub fn pn_priors(&self) -> Result<PnPriors> {
        let mean = match self.priors.alpha.mean {
            ScalarOrPair::Pair(p) => Vector2::new(p[0], p[1]),
            ScalarOrPair::Scalar(_) => {
                return Err(Error::Config(
                    "priors.alpha.mean must be a pair for projected models".into(),
                ));
            }
        };
        let cov = match (self.priors.alpha.cov, self.priors.alpha.var) {
            (Some(c), _) => Matrix2::new(c[0][0], c[0][1], c[1][0], c[1][1]),
            (None, Some(ScalarOrPair::Pair(v))) => Matrix2::new(v[0], 0.0, 0.0, v[1]),
            (None, Some(ScalarOrPair::Scalar(_))) => {
                return Err(Error::Config(
                    "priors.alpha.var must be a pair (diagonal) for projected models"
                        .into(),
                ));
            }
            (None, None) => {
                return Err(Error::Config(
                    "projected models need priors.alpha.cov or priors.alpha.var".into(),
                ));
            }
        };
        let tau = self.priors.tau.ok_or_else(|| {
            Error::Config("projected models need the priors.tau section".into())
        })?;
        Ok(PnPriors {
            alpha_mean: mean,
            alpha_cov: cov,
            sigma2: self.priors.sigma2,
            tau,
            corr: self.corr_priors(),
        })
    }

    pub fn ingest_options(&self) -> IngestOptions {
        match &self.data {
            Some(d) => IngestOptions {
                angle_unit: d.angle_unit,
                rotate_half_turn: d.rotate_half_turn,
                assert_planar: d.assert_planar,
            },
            None => IngestOptions::default(),
        }
    }

    /// Every detectable problem, listed in one config error; `Ok` means
    /// the fit accessors above cannot fail.
    pub fn validate(&self) -> Result<()> {
        let mut problems: Vec<String> = Vec::new();
        fn note(problems: &mut Vec<String>, r: Result<()>) {
            if let Err(e) = r {
                problems.push(e.to_string());
            }
        }

        let st = self.model.is_space_time();
        if st && self.kernel != KernelName::Gneiting {
            problems.push(format!(
                "space-time model {} needs the gneiting kernel, got {}",
                self.model.label(),
                self.kernel.label()
            ));
        }
        if !st && self.kernel == KernelName::Gneiting {
            problems.push(format!(
                "gneiting kernel needs a space-time model, got {}",
                self.model.label()
            ));
        }
        if self.kernel != KernelName::Matern && self.matern_nu.is_some() {
            problems.push("matern_nu only applies to the matern kernel".into());
        }
        match self.family() {
            Ok(f) => note(&mut problems, f.validate()),
            Err(e) => problems.push(e.to_string()),
        }
        if self.n_chains == 0 {
            problems.push("n_chains must be at least 1".into());
        }
        note(&mut problems, self.mcmc_settings().full_run_validate());
        if self.model.is_projected() {
            note(&mut problems, self.pn_priors().and_then(|p| p.validate(st)));
        } else {
            note(&mut problems, self.wn_priors().and_then(|p| p.validate(st)));
        }
        if self.priors.tau.is_some() && !self.model.is_projected() {
            problems.push("priors.tau only applies to projected models".into());
        }
        if let Some(sim) = &self.simulate {
            if let Err(e) = self.validate_simulate(sim) {
                problems.push(e.to_string());
            }
        }

        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "{} problem(s): {}",
                problems.len(),
                problems.join("; ")
            )))
        }
    }

    fn validate_simulate(&self, sim: &SimulateSection) -> Result<()> {
        let mut problems: Vec<String> = Vec::new();
        match sim.layout {
            SiteLayout::Uniform => {
                if sim.n_sites.map_or(true, |n| n == 0) {
                    problems.push("simulate.n_sites must be positive".into());
                }
                if !(sim.xmax > 0.0 && sim.ymax > 0.0) {
                    problems.push("simulate extents must be positive".into());
                }
            }
            SiteLayout::Grid => {
                if self.model.is_space_time() {
                    problems.push(
                        "grid layout is spatial-only; use the uniform layout for space-time simulation"
                            .into(),
                    );
                }
                if sim.nx.map_or(true, |n| n == 0)
                    || sim.ny.map_or(true, |n| n == 0)
                    || sim.spacing.map_or(true, |s| !(s > 0.0))
                {
                    problems.push(
                        "grid layout needs positive simulate.nx, simulate.ny, simulate.spacing"
                            .into(),
                    );
                }
            }
        }
        if self.model.is_space_time() && !(sim.tmax > 0.0) {
            problems.push("space-time simulation needs simulate.tmax > 0".into());
        }
        if !(sim.sigma2 > 0.0 && sim.sigma2.is_finite()) {
            problems.push("simulate.sigma2 must be positive".into());
        }
        if !(sim.rho > 0.0 && sim.rho.is_finite()) {
            problems.push("simulate.rho must be positive".into());
        }
        match (self.model.is_projected(), sim.alpha) {
            (false, ScalarOrPair::Pair(_)) => {
                problems.push("simulate.alpha must be a scalar for wrapped models".into())
            }
            (true, ScalarOrPair::Scalar(_)) => {
                problems.push("simulate.alpha must be a pair for projected models".into())
            }
            _ => {}
        }
        if self.model.is_projected() {
            match sim.tau {
                Some(t) if t.abs() < 1.0 => {}
                _ => problems.push("projected simulation needs simulate.tau in (−1, 1)".into()),
            }
        } else if sim.tau.is_some() {
            problems.push("simulate.tau only applies to projected models".into());
        }
        if self.model.is_space_time() {
            if sim.rho_t.map_or(true, |v| !(v > 0.0)) {
                problems.push("space-time simulation needs simulate.rho_t > 0".into());
            }
            if sim.eta.map_or(true, |v| !(0.0..=1.0).contains(&v)) {
                problems.push("space-time simulation needs simulate.eta in [0, 1]".into());
            }
        } else if sim.rho_t.is_some() || sim.eta.is_some() {
            problems.push("simulate.rho_t/eta only apply to space-time models".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }
}
