//! Wrapped-normal Gaussian process sampler.
//!
//! The model treats an observed angle as a latent Gaussian field value
//! reduced modulo 2π: `Θ_i = Y_i mod 2π`, with `Y ~ N(α·1, σ²C(ρ))`.
//! Each site carries an integer winding number `K_i` so that
//! `Y_i = Θ_i + 2π·K_i`, and the sampler alternates
//!
//! 1. a Metropolis sweep over the winding numbers (uniform proposals on
//!    `{k−1, k, k+1}`),
//! 2. a conjugate Gibbs draw of the mean direction α on the linear scale,
//! 3. an adaptive block Metropolis update of `(σ², ρ, …)` on
//!    unconstrained scales.
//!
//! Before sampling, the data are rotated so their mean direction sits at
//! π, which keeps the wrapping discontinuity away from the bulk of the
//! sample; draws are rotated back on output. The winding sweep runs in
//! O(n) per accepted flip by maintaining `Q = Σ⁻¹` products instead of
//! refactorizing.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::adapt::{adaptation_window, BlockAdaptState, ParamTransform};
use crate::circ::{circular_summary, wrap_raw, Angle};
use crate::error::{Error, Result};
use crate::gauss::{factorize, mvn_logpdf, SpdFactor};
use crate::kernel::{build_covariance, distance_matrix, CrossCovarianceScale, SiteCoord};
use crate::mcmc::{
    constant_vector, AcceptanceSummary, AdaptSnapshot, ChainRun, CorrPriors, EndState,
    KernelFamily, McmcSettings,
};
use crate::priors::InverseGamma;

/// Priors for the wrapped-normal model.
#[derive(Debug, Clone)]
pub struct WnPriors {
    /// Normal prior mean for α, in radians on the data scale.
    pub alpha_mean: f64,
    /// Normal prior variance for α; `0` pins α at the prior mean.
    pub alpha_var: f64,
    pub sigma2: InverseGamma,
    pub corr: CorrPriors,
}

impl WnPriors {
    pub fn validate(&self, space_time: bool) -> Result<()> {
        if !self.alpha_mean.is_finite() {
            return Err(Error::Config(format!(
                "alpha prior mean must be finite, got {}",
                self.alpha_mean
            )));
        }
        if !(self.alpha_var.is_finite() && self.alpha_var >= 0.0) {
            return Err(Error::Config(format!(
                "alpha prior variance must be ≥ 0, got {}",
                self.alpha_var
            )));
        }
        self.sigma2.validate()?;
        self.corr.validate(space_time)
    }
}

/// Inputs for one wrapped-model chain.
#[derive(Debug, Clone)]
pub struct WnModel<'a> {
    pub sites: &'a [SiteCoord],
    pub angles: &'a [Angle],
    pub family: KernelFamily,
    pub priors: &'a WnPriors,
}

/// Joint log density of the latent field at `y = θ + 2πk` under
/// `N(α·1, Σ)` with `Σ` already factorized.
pub fn wn_log_joint(y: &DVector<f64>, alpha: f64, factor: &SpdFactor) -> f64 {
    mvn_logpdf(y, &constant_vector(y.len(), alpha), factor)
}

/// Full conditional of α given the linear field `y` and `Σ`: a normal
/// with precision `1ᵀΣ⁻¹1 + 1/v_p` and mean
/// `(1ᵀΣ⁻¹y + μ_p/v_p) / (1ᵀΣ⁻¹1 + 1/v_p)`.
///
/// Returns `(mean, variance)`. A zero prior variance returns the
/// degenerate `(μ_p, 0)`.
pub fn wn_alpha_conditional(
    y: &DVector<f64>,
    factor: &SpdFactor,
    prior_mean: f64,
    prior_var: f64,
) -> (f64, f64) {
    if prior_var == 0.0 {
        return (prior_mean, 0.0);
    }
    let one = constant_vector(y.len(), 1.0);
    let q_one = factor.solve(&one);
    let quad_one = one.dot(&q_one);
    let lin = q_one.dot(y);
    let prec = quad_one + 1.0 / prior_var;
    ((lin + prior_mean / prior_var) / prec, 1.0 / prec)
}

/// One Gibbs draw of α from its full conditional, parameterized by the
/// sufficient statistics `1ᵀQy` and `1ᵀQ1` (the fit loop maintains both
/// incrementally). A zero prior variance pins α at the prior mean
/// without consuming randomness.
pub fn draw_alpha_wn<R: Rng + ?Sized>(
    one_t_q_y: f64,
    one_t_q_one: f64,
    prior_mean: f64,
    prior_var: f64,
    rng: &mut R,
) -> f64 {
    if prior_var == 0.0 {
        return prior_mean;
    }
    let prec = one_t_q_one + 1.0 / prior_var;
    let mean = (one_t_q_y + prior_mean / prior_var) / prec;
    let z: f64 = rng.sample(StandardNormal);
    mean + z / prec.sqrt()
}

/// Column names for the stored draws: the original-scale mean direction,
/// its linear (centered) representative, the covariance parameters, then
/// one winding number per site.
fn column_names(corr_names: &[&'static str], n: usize) -> Vec<String> {
    let mut names = vec!["alpha".to_string(), "alpha_lin".to_string(), "sigma2".to_string()];
    names.extend(corr_names.iter().map(|s| s.to_string()));
    names.extend((1..=n).map(|i| format!("k_{i}")));
    names
}

struct WnState {
    alpha: f64,
    sigma2: f64,
    corr: Vec<f64>,
    k: Vec<i64>,
    /// Latent field, `y_i = θ_i + 2π k_i` on the centered scale.
    y: DVector<f64>,
}

impl WnState {
    fn draw_row(&self, shift: f64) -> Vec<f64> {
        let mut row = Vec::with_capacity(3 + self.corr.len() + self.k.len());
        row.push(wrap_raw(self.alpha - shift));
        row.push(self.alpha);
        row.push(self.sigma2);
        row.extend_from_slice(&self.corr);
        row.extend(self.k.iter().map(|&k| k as f64));
        row
    }
}

/// Fits one chain of the wrapped-normal GP model.
///
/// `seed` is the run seed; the chain RNG is seeded with
/// `seed + chain_index` so chains are independent but reproducible.
/// With `warm`, the chain resumes from a previous end state and runs up
/// to `mcmc.iters` total iterations, reproducing an unbroken run
/// bit-for-bit.
pub fn fit_wn(
    model: &WnModel,
    mcmc: &McmcSettings,
    seed: u64,
    chain_index: u32,
    warm: Option<&EndState>,
) -> Result<ChainRun> {
    let n = model.angles.len();
    if n == 0 {
        return Err(Error::EmptyInput("wrapped model data"));
    }
    if model.sites.len() != n {
        return Err(Error::DimensionMismatch {
            what: "sites vs angles",
            expected: n,
            got: model.sites.len(),
        });
    }
    model.family.validate()?;
    let space_time = model.family.is_space_time();
    model.priors.validate(space_time)?;
    mcmc.validate()?;

    // Rotate the data so the mean direction sits at π. When the resultant
    // length is zero the mean direction is undefined; fall back to the
    // raw scale rather than refusing to fit.
    let (centered, shift) = match circular_summary(model.angles) {
        Ok(s) => {
            let target = std::f64::consts::PI - s.mean_direction.rad();
            (
                model
                    .angles
                    .iter()
                    .map(|a| Angle::from_radians(a.rad() + target).expect("finite rotation"))
                    .collect::<Vec<_>>(),
                target,
            )
        }
        Err(Error::ZeroResultant) => (model.angles.to_vec(), 0.0),
        Err(e) => return Err(e),
    };
    let theta_c: Vec<f64> = centered.iter().map(|a| a.rad()).collect();
    let prior_mean_c = wrap_raw(model.priors.alpha_mean + shift);

    let corr_names = model.priors.corr.names(space_time);
    let names = column_names(&corr_names, n);
    let n_corr = model.priors.corr.n_params(space_time);
    let d_block = 1 + n_corr;

    let mut transforms = vec![ParamTransform::LogPositive];
    transforms.extend(model.priors.corr.transforms(space_time));

    let dist = distance_matrix(model.sites);

    // --- initial state (fresh or restored) ---------------------------------
    let mut rng = ChaCha20Rng::seed_from_u64(seed.wrapping_add(chain_index as u64));
    let mut block = BlockAdaptState::new(
        &mcmc.prop_var_for(d_block)?,
        mcmc.lambda0,
        mcmc.target_block,
        mcmc.decay_exp,
    );
    let mut state;
    let start_iter;
    match warm {
        None => {
            state = WnState {
                alpha: std::f64::consts::PI,
                sigma2: model.priors.sigma2.init_value(),
                corr: model.priors.corr.init(space_time),
                k: vec![0; n],
                y: DVector::from_row_slice(&theta_c),
            };
            start_iter = 1;
        }
        Some(end) => {
            if end.values.len() != names.len() {
                return Err(Error::Config(format!(
                    "end state has {} values but this model stores {}",
                    end.values.len(),
                    names.len()
                )));
            }
            if end.completed_iters >= mcmc.iters {
                return Err(Error::Config(format!(
                    "warm start already covers {} iterations; iters = {} adds nothing",
                    end.completed_iters, mcmc.iters
                )));
            }
            let alpha = end.values[1];
            let sigma2 = end.values[2];
            let corr = end.values[3..3 + n_corr].to_vec();
            let k: Vec<i64> = end.values[3 + n_corr..].iter().map(|&v| v.round() as i64).collect();
            let y = DVector::from_iterator(
                n,
                theta_c.iter().zip(&k).map(|(&t, &ki)| t + std::f64::consts::TAU * ki as f64),
            );
            state = WnState { alpha, sigma2, corr, k, y };
            block.restore(&end.adapt.mu, &end.adapt.sigma, end.adapt.lambda, end.adapt.block_b)?;
            rng.set_word_pos(end.rng_word_pos);
            start_iter = end.completed_iters + 1;
        }
    }

    // Unconstrained block coordinates kept in sync with the state.
    let mut x_block: DVector<f64> = {
        let mut v = vec![transforms[0].to_unconstrained(state.sigma2)?];
        for (t, &c) in transforms[1..].iter().zip(&state.corr) {
            v.push(t.to_unconstrained(c)?);
        }
        DVector::from_vec(v)
    };

    let spec = model.family.make_spec(&state.corr);
    let sigma = build_covariance(&dist, &spec, &CrossCovarianceScale::Scalar { sigma2: state.sigma2 })?;
    let mut factor = factorize(&sigma)?;
    let mut q: DMatrix<f64> = factor.inverse();
    let mut q_one: DVector<f64> = &q * constant_vector(n, 1.0);

    let mut block_accepted = 0u64;
    let mut block_proposed = 0u64;
    let mut winding_accepted = 0u64;
    let mut winding_proposed = 0u64;
    let mut draws: Vec<Vec<f64>> = Vec::with_capacity(mcmc.n_stored() as usize);

    for it in start_iter..=mcmc.iters {
        let adapting = adaptation_window(it, mcmc.adapt_start, mcmc.adapt_end);

        // --- winding sweep --------------------------------------------------
        // Maintain v = Q(y − α1); a flip of k_i by ±1 changes the quadratic
        // form by 2δ·v_i + δ²·Q_ii with δ = ±2π.
        let e = &state.y - constant_vector(n, state.alpha);
        let mut v: DVector<f64> = &q * e;
        for i in 0..n {
            winding_proposed += 1;
            let u: f64 = rng.random();
            let dk: i64 = if u < 1.0 / 3.0 {
                -1
            } else if u < 2.0 / 3.0 {
                0
            } else {
                1
            };
            let delta = std::f64::consts::TAU * dk as f64;
            let dlog = -(delta * v[i] + 0.5 * delta * delta * q[(i, i)]);
            let accept = rng.random::<f64>().ln() < dlog;
            if accept {
                winding_accepted += 1;
                if dk != 0 {
                    state.k[i] += dk;
                    // Rebuild from k instead of accumulating ±2π so the
                    // value stays bit-identical to what a warm start
                    // reconstructs from the stored winding numbers.
                    state.y[i] = theta_c[i] + std::f64::consts::TAU * state.k[i] as f64;
                    v.axpy(delta, &q.column(i).into_owned(), 1.0);
                }
            }
        }

        // --- mean direction (conjugate Gibbs on the linear scale) -----------
        let q1s = q_one.sum();
        // 1ᵀQy from the maintained v: v = Q(y − α1) ⇒ 1ᵀQy = Σv + α·1ᵀQ1.
        let lin = v.sum() + state.alpha * q1s;
        state.alpha = draw_alpha_wn(lin, q1s, prior_mean_c, model.priors.alpha_var, &mut rng);

        // --- covariance block (adaptive Metropolis) --------------------------
        block_proposed += 1;
        let cur_ll = wn_log_joint(&state.y, state.alpha, &factor);
        let cur_lp = model.priors.sigma2.log_pdf(state.sigma2)
            + model.priors.corr.log_pdf(&state.corr, space_time);
        let cur_jac: f64 =
            transforms.iter().zip(x_block.iter()).map(|(t, &x)| t.log_jacobian(x)).sum();

        let x_prop = block.propose(&mut rng, &x_block);
        let sigma2_prop = transforms[0].to_constrained(x_prop[0]);
        let corr_prop: Vec<f64> = transforms[1..]
            .iter()
            .zip(x_prop.iter().skip(1))
            .map(|(t, &x)| t.to_constrained(x))
            .collect();
        let spec_prop = model.family.make_spec(&corr_prop);
        let sigma_prop = build_covariance(
            &dist,
            &spec_prop,
            &CrossCovarianceScale::Scalar { sigma2: sigma2_prop },
        )?;
        let mut alpha_mh = 0.0;
        if let Ok(factor_prop) = factorize(&sigma_prop) {
            let prop_ll = wn_log_joint(&state.y, state.alpha, &factor_prop);
            let prop_lp = model.priors.sigma2.log_pdf(sigma2_prop)
                + model.priors.corr.log_pdf(&corr_prop, space_time);
            let prop_jac: f64 =
                transforms.iter().zip(x_prop.iter()).map(|(t, &x)| t.log_jacobian(x)).sum();
            let dlog = (prop_ll + prop_lp + prop_jac) - (cur_ll + cur_lp + cur_jac);
            alpha_mh = dlog.exp().min(1.0);
            if rng.random::<f64>().ln() < dlog {
                block_accepted += 1;
                state.sigma2 = sigma2_prop;
                state.corr = corr_prop;
                // Re-derive the unconstrained coordinates from the natural
                // scale instead of keeping x_prop: the natural values are
                // what an end state stores, so a resumed chain must see the
                // same bits as an unbroken one.
                x_block[0] = transforms[0].to_unconstrained(state.sigma2)?;
                for (j, (t, &c)) in transforms[1..].iter().zip(&state.corr).enumerate() {
                    x_block[j + 1] = t.to_unconstrained(c)?;
                }
                factor = factor_prop;
                q = factor.inverse();
                q_one = &q * constant_vector(n, 1.0);
            }
        }
        if adapting {
            block.update(alpha_mh, &x_block);
        }

        if mcmc.stores(it) {
            draws.push(state.draw_row(shift));
        }
    }

    let end_state = EndState {
        completed_iters: mcmc.iters,
        values: state.draw_row(shift),
        adapt: AdaptSnapshot {
            lambda: block.lambda,
            mu: block.mu.as_slice().to_vec(),
            sigma: block.sigma_rows(),
            block_b: block.b,
            log_sd: Vec::new(),
            batch_b: 1,
            batch_sums: Vec::new(),
            batch_len: 0,
        },
        rng_word_pos: rng.get_word_pos(),
    };

    Ok(ChainRun {
        names,
        draws,
        end_state,
        accept: AcceptanceSummary {
            block_rate: block_accepted as f64 / block_proposed.max(1) as f64,
            site_rate: winding_accepted as f64 / winding_proposed.max(1) as f64,
        },
        shift,
    })
}
