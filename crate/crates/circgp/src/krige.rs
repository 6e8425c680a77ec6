//! Posterior predictive interpolation (kriging) for both models.
//!
//! For every stored posterior draw, the joint Gaussian field over
//! observed ∪ target sites is assembled with that draw's covariance
//! parameters, conditioned on the reconstructed latent values at the
//! observed sites, and sampled at the targets; the sampled linear (or
//! bivariate) values are mapped back to angles. Draws whose covariance
//! fails to factorize are skipped and counted rather than imputed, so
//! the retained ensemble stays unbiased.
//!
//! Work is parallel over posterior draws; each draw derives its own RNG
//! from the prediction seed and the draw index, so results are
//! independent of the thread schedule.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::circ::{atan_star, circular_summary, wrap_raw, Angle};
use crate::error::{Error, Result};
use crate::gauss::condition;
use crate::kernel::{build_covariance, distance_matrix, CrossCovarianceScale, SiteCoord};
use crate::mcmc::KernelFamily;

/// Pooled posterior draws with resolved column names, as read back from
/// a fit's output (or taken straight from [`crate::mcmc::ChainRun`]s).
#[derive(Debug, Clone)]
pub struct PosteriorDraws<'a> {
    pub names: &'a [String],
    /// All chains concatenated, one row per stored draw.
    pub rows: &'a [Vec<f64>],
}

impl<'a> PosteriorDraws<'a> {
    fn col(&self, name: &str) -> Result<usize> {
        self.names.iter().position(|n| n == name).ok_or_else(|| {
            Error::Data(format!("posterior draws have no column named '{name}'"))
        })
    }

    /// Index of `prefix_1`, verifying that `n` consecutive per-site
    /// columns follow.
    fn site_block(&self, prefix: &str, n: usize) -> Result<usize> {
        let first = self.col(&format!("{prefix}_1"))?;
        if first + n > self.names.len()
            || self.names[first + n - 1] != format!("{prefix}_{n}")
        {
            return Err(Error::Data(format!(
                "draws hold fewer than {n} '{prefix}_*' columns; was the fit run on different data?"
            )));
        }
        Ok(first)
    }
}

/// Predictive angles at a set of targets: `draws[d][t]` is the angle (on
/// the data scale) sampled at target `t` from posterior draw `d`.
#[derive(Debug, Clone)]
pub struct PredictionSet {
    pub draws: Vec<Vec<f64>>,
    pub n_skipped: usize,
    pub per_target: Vec<TargetSummary>,
}

/// Posterior predictive summary for one target.
#[derive(Debug, Clone)]
pub struct TargetSummary {
    pub mean_direction: f64,
    pub resultant_length: f64,
    pub circular_variance: f64,
    /// Central 90% arc around the mean direction.
    pub arc_lo: f64,
    pub arc_hi: f64,
}

impl PredictionSet {
    /// Fraction of posterior draws skipped because their covariance
    /// could not be factorized.
    pub fn skip_rate(&self) -> f64 {
        let total = self.draws.len() + self.n_skipped;
        if total == 0 {
            0.0
        } else {
            self.n_skipped as f64 / total as f64
        }
    }
}

fn summarize_targets(draws: &[Vec<f64>], n_targets: usize) -> Result<Vec<TargetSummary>> {
    let mut out = Vec::with_capacity(n_targets);
    for t in 0..n_targets {
        let angles: Vec<Angle> = draws
            .iter()
            .map(|row| Angle::from_radians(row[t]))
            .collect::<Result<_>>()?;
        let s = circular_summary(&angles)?;
        // Central arc: quantiles of the signed deviation from the mean
        // direction, folded back around it.
        let mut dev: Vec<f64> = angles
            .iter()
            .map(|a| {
                let d = a.rad() - s.mean_direction.rad();
                (d + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU) - std::f64::consts::PI
            })
            .collect();
        dev.sort_by(|a, b| a.total_cmp(b));
        let q = |p: f64| -> f64 {
            let idx = ((dev.len() as f64 - 1.0) * p).round() as usize;
            dev[idx]
        };
        out.push(TargetSummary {
            mean_direction: s.mean_direction.rad(),
            resultant_length: s.resultant_length,
            circular_variance: s.circular_variance,
            arc_lo: wrap_raw(s.mean_direction.rad() + q(0.05)),
            arc_hi: wrap_raw(s.mean_direction.rad() + q(0.95)),
        });
    }
    Ok(out)
}

/// Everything predict needs about a wrapped-model fit.
#[derive(Debug, Clone)]
pub struct WnFitContext<'a> {
    pub family: KernelFamily,
    /// π-centering rotation recorded by the fit.
    pub shift: f64,
    pub sites: &'a [SiteCoord],
    /// Observed angles on the data scale.
    pub angles: &'a [Angle],
}

/// Kriging for the wrapped model: per posterior draw, rebuild the linear
/// field `y = θ_centered + 2πk`, condition the joint normal over
/// observed ∪ target sites, sample the target block, and wrap back to
/// the data scale.
pub fn predict_wn(
    ctx: &WnFitContext,
    post: &PosteriorDraws,
    targets: &[SiteCoord],
    seed: u64,
) -> Result<PredictionSet> {
    let n = ctx.sites.len();
    let m = targets.len();
    if m == 0 {
        return Err(Error::EmptyInput("prediction targets"));
    }
    if ctx.angles.len() != n {
        return Err(Error::DimensionMismatch {
            what: "sites vs angles",
            expected: n,
            got: ctx.angles.len(),
        });
    }
    if post.rows.is_empty() {
        return Err(Error::EmptyInput("posterior draws"));
    }
    let alpha_col = post.col("alpha_lin")?;
    let sigma2_col = post.col("sigma2")?;
    let corr_cols: Vec<usize> = ctx
        .family
        .corr_names()
        .iter()
        .map(|nm| post.col(nm))
        .collect::<Result<_>>()?;
    let k_col = post.site_block("k", n)?;

    let theta_c: Vec<f64> = ctx.angles.iter().map(|a| wrap_raw(a.rad() + ctx.shift)).collect();
    let mut joint: Vec<SiteCoord> = ctx.sites.to_vec();
    joint.extend_from_slice(targets);
    let dist = distance_matrix(&joint);
    let observed: Vec<usize> = (0..n).collect();

    let results: Vec<Option<Vec<f64>>> = post
        .rows
        .par_iter()
        .enumerate()
        .map(|(d, row)| {
            let alpha = row[alpha_col];
            let sigma2 = row[sigma2_col];
            let corr: Vec<f64> = corr_cols.iter().map(|&c| row[c]).collect();
            let spec = ctx.family.make_spec(&corr);
            let y_obs = DVector::from_iterator(
                n,
                (0..n).map(|i| theta_c[i] + std::f64::consts::TAU * row[k_col + i]),
            );
            let sigma =
                match build_covariance(&dist, &spec, &CrossCovarianceScale::Scalar { sigma2 }) {
                    Ok(s) => s,
                    Err(_) => return None,
                };
            let mean = DVector::from_element(n + m, alpha);
            let cond = match condition(&mean, &sigma, &observed, y_obs.as_slice()) {
                Ok(c) => c,
                Err(_) => return None,
            };
            let mut rng = ChaCha20Rng::seed_from_u64(seed.wrapping_add(d as u64));
            let y_t = match cond.sample(&mut rng) {
                Ok(v) => v,
                Err(_) => return None,
            };
            Some(y_t.iter().map(|&y| wrap_raw(y - ctx.shift)).collect())
        })
        .collect();

    let mut draws = Vec::with_capacity(results.len());
    let mut n_skipped = 0;
    for r in results {
        match r {
            Some(v) => draws.push(v),
            None => n_skipped += 1,
        }
    }
    if draws.is_empty() {
        return Err(Error::Numeric(
            "every posterior draw failed to factorize during prediction".into(),
        ));
    }
    let per_target = summarize_targets(&draws, m)?;
    Ok(PredictionSet { draws, n_skipped, per_target })
}

/// Everything predict needs about a projected-model fit.
#[derive(Debug, Clone)]
pub struct PnFitContext<'a> {
    pub family: KernelFamily,
    pub sites: &'a [SiteCoord],
    pub angles: &'a [Angle],
}

/// Kriging for the projected model: per posterior draw, rebuild the 2n
/// latent values from `(θ, r)`, condition the 2(n+m) joint normal, draw
/// the 2m target block, and map each pair to its direction.
pub fn predict_pn(
    ctx: &PnFitContext,
    post: &PosteriorDraws,
    targets: &[SiteCoord],
    seed: u64,
) -> Result<PredictionSet> {
    let n = ctx.sites.len();
    let m = targets.len();
    if m == 0 {
        return Err(Error::EmptyInput("prediction targets"));
    }
    if ctx.angles.len() != n {
        return Err(Error::DimensionMismatch {
            what: "sites vs angles",
            expected: n,
            got: ctx.angles.len(),
        });
    }
    if post.rows.is_empty() {
        return Err(Error::EmptyInput("posterior draws"));
    }
    let a1_col = post.col("alpha1")?;
    let a2_col = post.col("alpha2")?;
    let sigma2_col = post.col("sigma2")?;
    let tau_col = post.col("tau")?;
    let corr_cols: Vec<usize> = ctx
        .family
        .corr_names()
        .iter()
        .map(|nm| post.col(nm))
        .collect::<Result<_>>()?;
    let r_col = post.site_block("r", n)?;

    let u_cos: Vec<f64> = ctx.angles.iter().map(|a| a.cos()).collect();
    let u_sin: Vec<f64> = ctx.angles.iter().map(|a| a.sin()).collect();
    let mut joint: Vec<SiteCoord> = ctx.sites.to_vec();
    joint.extend_from_slice(targets);
    let dist = distance_matrix(&joint);
    let observed: Vec<usize> = (0..2 * n).collect();

    let results: Vec<Option<Vec<f64>>> = post
        .rows
        .par_iter()
        .enumerate()
        .map(|(d, row)| {
            let sigma2 = row[sigma2_col];
            let tau = row[tau_col];
            let corr: Vec<f64> = corr_cols.iter().map(|&c| row[c]).collect();
            let spec = ctx.family.make_spec(&corr);
            let sigma = match build_covariance(
                &dist,
                &spec,
                &CrossCovarianceScale::Bivariate { sigma2, tau },
            ) {
                Ok(s) => s,
                Err(_) => return None,
            };
            let mut y_obs = DVector::zeros(2 * n);
            for i in 0..n {
                let r = row[r_col + i];
                y_obs[2 * i] = r * u_cos[i];
                y_obs[2 * i + 1] = r * u_sin[i];
            }
            let mut mean = DVector::zeros(2 * (n + m));
            for i in 0..(n + m) {
                mean[2 * i] = row[a1_col];
                mean[2 * i + 1] = row[a2_col];
            }
            let cond = match condition(&mean, &sigma, &observed, y_obs.as_slice()) {
                Ok(c) => c,
                Err(_) => return None,
            };
            let mut rng = ChaCha20Rng::seed_from_u64(seed.wrapping_add(d as u64));
            let y_t = match cond.sample(&mut rng) {
                Ok(v) => v,
                Err(_) => return None,
            };
            let mut angles = Vec::with_capacity(m);
            for j in 0..m {
                match atan_star(y_t[2 * j + 1], y_t[2 * j]) {
                    Ok(a) => angles.push(a.rad()),
                    Err(_) => return None,
                }
            }
            Some(angles)
        })
        .collect();

    let mut draws = Vec::with_capacity(results.len());
    let mut n_skipped = 0;
    for r in results {
        match r {
            Some(v) => draws.push(v),
            None => n_skipped += 1,
        }
    }
    if draws.is_empty() {
        return Err(Error::Numeric(
            "every posterior draw failed to factorize during prediction".into(),
        ));
    }
    let per_target = summarize_targets(&draws, m)?;
    Ok(PredictionSet { draws, n_skipped, per_target })
}
