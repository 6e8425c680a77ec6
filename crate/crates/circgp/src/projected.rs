//! Projected-normal Gaussian process sampler.
//!
//! Each observed angle is the direction of a latent bivariate Gaussian
//! field: `Θ_i = atan*(Y_{i2} / Y_{i1})` with
//! `vec(Y) ~ N(α ⊗ 1, C(ρ) ⊗ Ξ)` and cross-covariance
//! `Ξ = [[σ², τσ], [τσ, 1]]` (unit second diagonal for identifiability).
//! The latent radii `R_i = ‖Y_i‖` are augmented, giving the joint
//! density `Π r_i · φ_{2n}(y(θ, r))`, and the sampler alternates
//!
//! 1. per-site Metropolis updates of the radii on the log scale with
//!    batch-adapted proposal scales,
//! 2. a conjugate Gibbs draw of the bivariate mean α,
//! 3. an adaptive block Metropolis update of `(σ², τ, ρ, …)`.
//!
//! All Gaussian evaluations exploit the Kronecker structure: with
//! `E = Y − 1αᵀ` (n×2),
//!
//! ```text
//! log φ_{2n} = −½ (2n·log 2π + 2·log|C| + n·log|Ξ| + tr(Ξ⁻¹ Eᵀ C⁻¹ E))
//! ```
//!
//! so one n×n factorization serves both latent columns, and a radius
//! flip costs O(n) through the maintained product `H = C⁻¹E`.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::adapt::{adaptation_window, BlockAdaptState, ParamTransform, ScalarAdaptState};
use crate::circ::{circular_summary, Angle};
use crate::error::{Error, Result};
use crate::gauss::{factorize, normal_cdf, SpdFactor, LN_2PI};
use crate::kernel::{correlation_matrix, distance_matrix, SiteCoord};
use crate::mcmc::{
    AcceptanceSummary, AdaptSnapshot, ChainRun, CorrPriors, EndState, KernelFamily, McmcSettings,
};
use crate::priors::{InverseGamma, UniformPrior};

/// Priors for the projected-normal model.
#[derive(Debug, Clone)]
pub struct PnPriors {
    /// Bivariate normal prior mean for α.
    pub alpha_mean: Vector2<f64>,
    /// Bivariate normal prior covariance for α (SPD).
    pub alpha_cov: Matrix2<f64>,
    pub sigma2: InverseGamma,
    /// Uniform prior for the cross-correlation τ, support inside (−1, 1).
    pub tau: UniformPrior,
    pub corr: CorrPriors,
}

impl PnPriors {
    pub fn validate(&self, space_time: bool) -> Result<()> {
        if !(self.alpha_mean[0].is_finite() && self.alpha_mean[1].is_finite()) {
            return Err(Error::Config("alpha prior mean must be finite".into()));
        }
        let c = &self.alpha_cov;
        let spd = c[(0, 1)] == c[(1, 0)]
            && c[(0, 0)] > 0.0
            && c[(0, 0)] * c[(1, 1)] - c[(0, 1)] * c[(1, 0)] > 0.0;
        if !spd || !c.iter().all(|v| v.is_finite()) {
            return Err(Error::Config(
                "alpha prior covariance must be symmetric positive definite".into(),
            ));
        }
        self.sigma2.validate()?;
        self.tau.validate("tau")?;
        if self.tau.lo < -1.0 || self.tau.hi > 1.0 {
            return Err(Error::Config(format!(
                "tau support must lie within (-1, 1), got ({}, {})",
                self.tau.lo, self.tau.hi
            )));
        }
        self.corr.validate(space_time)
    }
}

/// Inputs for one projected-model chain.
#[derive(Debug, Clone)]
pub struct PnModel<'a> {
    pub sites: &'a [SiteCoord],
    pub angles: &'a [Angle],
    pub family: KernelFamily,
    pub priors: &'a PnPriors,
}

/// `(Ξ⁻¹, log|Ξ|)` for `Ξ = [[σ², τσ], [τσ, 1]]`.
pub fn xi_inverse_logdet(sigma2: f64, tau: f64) -> (Matrix2<f64>, f64) {
    let sigma = sigma2.sqrt();
    let det = sigma2 * (1.0 - tau * tau);
    let xi_inv = Matrix2::new(1.0, -tau * sigma, -tau * sigma, sigma2) / det;
    (xi_inv, det.ln())
}

/// Marginal density of a projected-normal angle with mean α and
/// cross-covariance `Ξ = [[σ², τσ], [τσ, 1]]`, obtained by integrating
/// the radius out of the bivariate normal:
///
/// ```text
/// f(θ) = [φ₂(α; 0, Ξ) + D·Φ(D)·φ₁(z)/ (σ√(1−τ²))] / A(θ)
/// A(θ) = uᵀΞ⁻¹u,  B(θ) = uᵀΞ⁻¹α,  D = B/√A,  z² = αᵀΞ⁻¹α − D²
/// ```
///
/// with `u = (cos θ, sin θ)`; `Φ` and `φ₁` are the standard normal cdf
/// and pdf.
pub fn pn_density(theta: Angle, alpha: &Vector2<f64>, sigma2: f64, tau: f64) -> Result<f64> {
    if !(sigma2.is_finite() && sigma2 > 0.0) {
        return Err(Error::Config(format!("sigma2 must be > 0, got {sigma2}")));
    }
    if !(tau.is_finite() && tau.abs() < 1.0) {
        return Err(Error::Config(format!("tau must lie in (-1, 1), got {tau}")));
    }
    let (xi_inv, log_det) = xi_inverse_logdet(sigma2, tau);
    let u = Vector2::new(theta.cos(), theta.sin());
    let a = (u.transpose() * xi_inv * u)[(0, 0)];
    let b = (u.transpose() * xi_inv * alpha)[(0, 0)];
    let g = (alpha.transpose() * xi_inv * alpha)[(0, 0)];
    let d = b / a.sqrt();
    // First term: the bivariate normal at the origin offset, φ₂(α; 0, Ξ).
    let phi2 = (-0.5 * g).exp() / (std::f64::consts::TAU * (0.5 * log_det).exp());
    // Second term: the mean-shifted mass along the ray.
    let z2 = (g - d * d).max(0.0);
    let phi1 = (-0.5 * z2).exp() / (std::f64::consts::TAU).sqrt();
    let ray = d * normal_cdf(d) * phi1 / (0.5 * log_det).exp();
    Ok((phi2 + ray) / a)
}

/// Gaussian part of the joint latent density via the Kronecker identity,
/// with `E = Y − 1αᵀ` and `C` factorized once.
pub fn pn_log_gauss(e: &DMatrix<f64>, c_factor: &SpdFactor, sigma2: f64, tau: f64) -> f64 {
    let n = e.nrows() as f64;
    let (xi_inv, log_det_xi) = xi_inverse_logdet(sigma2, tau);
    let w0 = c_factor.half_solve(&e.column(0).into_owned());
    let w1 = c_factor.half_solve(&e.column(1).into_owned());
    let s00 = w0.dot(&w0);
    let s01 = w0.dot(&w1);
    let s11 = w1.dot(&w1);
    let quad = xi_inv[(0, 0)] * s00 + 2.0 * xi_inv[(0, 1)] * s01 + xi_inv[(1, 1)] * s11;
    -0.5 * (2.0 * n * LN_2PI + 2.0 * c_factor.log_det() + n * log_det_xi + quad)
}

/// Joint log density of `(θ, r)` under the augmented model: the radius
/// Jacobian `Σ log r_i` plus the latent Gaussian log density.
pub fn pn_log_joint(
    theta: &[Angle],
    r: &[f64],
    alpha: &Vector2<f64>,
    c_factor: &SpdFactor,
    sigma2: f64,
    tau: f64,
) -> Result<f64> {
    if theta.len() != r.len() {
        return Err(Error::DimensionMismatch {
            what: "angles vs radii",
            expected: theta.len(),
            got: r.len(),
        });
    }
    let n = theta.len();
    let mut e = DMatrix::zeros(n, 2);
    let mut log_r = 0.0;
    for i in 0..n {
        e[(i, 0)] = r[i] * theta[i].cos() - alpha[0];
        e[(i, 1)] = r[i] * theta[i].sin() - alpha[1];
        log_r += r[i].ln();
    }
    Ok(log_r + pn_log_gauss(&e, c_factor, sigma2, tau))
}

/// Full conditional of α given the latent field: a bivariate normal with
/// precision `V₀⁻¹ + (1ᵀC⁻¹1)·Ξ⁻¹` and linear term
/// `V₀⁻¹μ₀ + Ξ⁻¹Yᵀ(C⁻¹1)`. Returns `(mean, covariance)`.
pub fn pn_alpha_conditional(
    y: &DMatrix<f64>,
    c_factor: &SpdFactor,
    sigma2: f64,
    tau: f64,
    prior_mean: &Vector2<f64>,
    prior_cov: &Matrix2<f64>,
) -> Result<(Vector2<f64>, Matrix2<f64>)> {
    let n = y.nrows();
    let (xi_inv, _) = xi_inverse_logdet(sigma2, tau);
    let w = c_factor.solve(&DVector::from_element(n, 1.0));
    let csum = w.sum();
    let ytw = Vector2::new(y.column(0).dot(&w), y.column(1).dot(&w));
    let v0_inv = inv2(prior_cov)?;
    let p = v0_inv + xi_inv * csum;
    let cov = inv2(&p)?;
    let b = v0_inv * prior_mean + xi_inv * ytw;
    Ok((cov * b, cov))
}

/// One Gibbs draw of the bivariate α from its full conditional,
/// parameterized by the sufficient statistics `1ᵀC⁻¹1` and `YᵀC⁻¹1`
/// (the fit loop maintains both incrementally).
pub fn draw_alpha_pn<R: Rng + ?Sized>(
    one_t_c_inv_one: f64,
    yt_c_inv_one: &Vector2<f64>,
    v0_inv: &Matrix2<f64>,
    xi_inv: &Matrix2<f64>,
    prior_mean: &Vector2<f64>,
    rng: &mut R,
) -> Result<Vector2<f64>> {
    let p = v0_inv + xi_inv * one_t_c_inv_one;
    let cov = inv2(&p)?;
    let mean = cov * (v0_inv * prior_mean + xi_inv * yt_c_inv_one);
    let l = chol2(&cov)?;
    let z = Vector2::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
    Ok(mean + l * z)
}

/// Inverse of a symmetric 2×2 matrix.
fn inv2(m: &Matrix2<f64>) -> Result<Matrix2<f64>> {
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    if !(det.is_finite() && det > 0.0) {
        return Err(Error::Numeric(format!("2x2 matrix not invertible, determinant {det}")));
    }
    Ok(Matrix2::new(m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)]) / det)
}

/// Lower Cholesky factor of a symmetric positive definite 2×2 matrix.
fn chol2(m: &Matrix2<f64>) -> Result<Matrix2<f64>> {
    if m[(0, 0)] <= 0.0 {
        return Err(Error::NotPositiveDefinite { pivot: 0 });
    }
    let l11 = m[(0, 0)].sqrt();
    let l21 = m[(1, 0)] / l11;
    let rest = m[(1, 1)] - l21 * l21;
    if rest <= 0.0 {
        return Err(Error::NotPositiveDefinite { pivot: 1 });
    }
    Ok(Matrix2::new(l11, 0.0, l21, rest.sqrt()))
}

fn column_names(corr_names: &[&'static str], n: usize) -> Vec<String> {
    let mut names = vec![
        "alpha1".to_string(),
        "alpha2".to_string(),
        "sigma2".to_string(),
        "tau".to_string(),
    ];
    names.extend(corr_names.iter().map(|s| s.to_string()));
    names.extend((1..=n).map(|i| format!("r_{i}")));
    names
}

struct PnState {
    alpha: Vector2<f64>,
    sigma2: f64,
    tau: f64,
    corr: Vec<f64>,
    r: Vec<f64>,
}

impl PnState {
    fn draw_row(&self) -> Vec<f64> {
        let mut row = Vec::with_capacity(4 + self.corr.len() + self.r.len());
        row.push(self.alpha[0]);
        row.push(self.alpha[1]);
        row.push(self.sigma2);
        row.push(self.tau);
        row.extend_from_slice(&self.corr);
        row.extend_from_slice(&self.r);
        row
    }
}

/// Fits one chain of the projected-normal GP model. Seeding, warm-start
/// and storage semantics match [`crate::wrapped::fit_wn`].
pub fn fit_pn(
    model: &PnModel,
    mcmc: &McmcSettings,
    seed: u64,
    chain_index: u32,
    warm: Option<&EndState>,
) -> Result<ChainRun> {
    let n = model.angles.len();
    if n == 0 {
        return Err(Error::EmptyInput("projected model data"));
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

    let u_cos: Vec<f64> = model.angles.iter().map(|a| a.cos()).collect();
    let u_sin: Vec<f64> = model.angles.iter().map(|a| a.sin()).collect();

    let corr_names = model.priors.corr.names(space_time);
    let names = column_names(&corr_names, n);
    let n_corr = model.priors.corr.n_params(space_time);
    let d_block = 2 + n_corr;

    let mut transforms = vec![
        ParamTransform::LogPositive,
        ParamTransform::LogitInterval { lo: model.priors.tau.lo, hi: model.priors.tau.hi },
    ];
    transforms.extend(model.priors.corr.transforms(space_time));

    let dist = distance_matrix(model.sites);
    let v0_inv = inv2(&model.priors.alpha_cov)?;

    let mut rng = ChaCha20Rng::seed_from_u64(seed.wrapping_add(chain_index as u64));
    let mut block = BlockAdaptState::new(
        &mcmc.prop_var_for(d_block)?,
        mcmc.lambda0,
        mcmc.target_block,
        mcmc.decay_exp,
    );
    let mut scalar =
        ScalarAdaptState::new(n, mcmc.radius_sd0, mcmc.n_batch, mcmc.target_scalar, mcmc.decay_exp);

    let mut state;
    let start_iter;
    match warm {
        None => {
            // Point α at the data's mean direction (unit length); with a
            // zero resultant there is no preferred direction.
            let alpha = match circular_summary(model.angles) {
                Ok(s) => Vector2::new(s.mean_direction.cos(), s.mean_direction.sin()),
                Err(Error::ZeroResultant) => Vector2::zeros(),
                Err(e) => return Err(e),
            };
            let tau0 = if model.priors.tau.contains(0.0) { 0.0 } else { model.priors.tau.midpoint() };
            state = PnState {
                alpha,
                sigma2: model.priors.sigma2.init_value(),
                tau: tau0,
                corr: model.priors.corr.init(space_time),
                r: vec![1.0; n],
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
            state = PnState {
                alpha: Vector2::new(end.values[0], end.values[1]),
                sigma2: end.values[2],
                tau: end.values[3],
                corr: end.values[4..4 + n_corr].to_vec(),
                r: end.values[4 + n_corr..].to_vec(),
            };
            block.restore(&end.adapt.mu, &end.adapt.sigma, end.adapt.lambda, end.adapt.block_b)?;
            if end.adapt.log_sd.len() != n {
                return Err(Error::DimensionMismatch {
                    what: "radius proposal scales",
                    expected: n,
                    got: end.adapt.log_sd.len(),
                });
            }
            scalar.log_sd = end.adapt.log_sd.clone();
            scalar.b = end.adapt.batch_b;
            scalar.restore_batch_progress(end.adapt.batch_sums.clone(), end.adapt.batch_len);
            rng.set_word_pos(end.rng_word_pos);
            start_iter = end.completed_iters + 1;
        }
    }

    let mut x_block: DVector<f64> = {
        let mut v = vec![
            transforms[0].to_unconstrained(state.sigma2)?,
            transforms[1].to_unconstrained(state.tau)?,
        ];
        for (t, &c) in transforms[2..].iter().zip(&state.corr) {
            v.push(t.to_unconstrained(c)?);
        }
        DVector::from_vec(v)
    };

    let spec = model.family.make_spec(&state.corr);
    let c = correlation_matrix(&dist, &spec);
    let mut c_factor = factorize(&c)?;
    let mut c_inv = c_factor.inverse();
    let mut w: DVector<f64> = &c_inv * DVector::from_element(n, 1.0);
    let (mut xi_inv, _) = xi_inverse_logdet(state.sigma2, state.tau);

    let mut block_accepted = 0u64;
    let mut block_proposed = 0u64;
    let mut radius_accepted = 0u64;
    let mut radius_proposed = 0u64;
    let mut draws: Vec<Vec<f64>> = Vec::with_capacity(mcmc.n_stored() as usize);

    for it in start_iter..=mcmc.iters {
        let adapting = adaptation_window(it, mcmc.adapt_start, mcmc.adapt_end);

        // Rebuild E = Y − 1αᵀ and H = C⁻¹E fresh each sweep; per-site
        // flips then update both in O(n).
        let mut e = DMatrix::zeros(n, 2);
        for i in 0..n {
            e[(i, 0)] = state.r[i] * u_cos[i] - state.alpha[0];
            e[(i, 1)] = state.r[i] * u_sin[i] - state.alpha[1];
        }
        let mut h = &c_inv * &e;

        // --- latent radii (log-scale random walk, batch-adapted) -----------
        for i in 0..n {
            radius_proposed += 1;
            let z: f64 = rng.sample(StandardNormal);
            let u_cur = state.r[i].ln();
            let u_prop = u_cur + scalar.sd(i) * z;
            let r_prop = u_prop.exp();
            let mut alpha_mh = 0.0;
            if r_prop.is_finite() && r_prop > 0.0 {
                let d0 = (r_prop - state.r[i]) * u_cos[i];
                let d1 = (r_prop - state.r[i]) * u_sin[i];
                // Δ of tr(Ξ⁻¹EᵀC⁻¹E) for a rank-one change of row i.
                let hx = xi_inv[(0, 0)] * h[(i, 0)] + xi_inv[(0, 1)] * h[(i, 1)];
                let hy = xi_inv[(1, 0)] * h[(i, 0)] + xi_inv[(1, 1)] * h[(i, 1)];
                let dxd = xi_inv[(0, 0)] * d0 * d0
                    + 2.0 * xi_inv[(0, 1)] * d0 * d1
                    + xi_inv[(1, 1)] * d1 * d1;
                let dquad = 2.0 * (d0 * hx + d1 * hy) + c_inv[(i, i)] * dxd;
                let dlog = 2.0 * (u_prop - u_cur) - 0.5 * dquad;
                if dlog.is_finite() {
                    alpha_mh = dlog.exp().min(1.0);
                    if rng.random::<f64>().ln() < dlog {
                        radius_accepted += 1;
                        state.r[i] = r_prop;
                        e[(i, 0)] += d0;
                        e[(i, 1)] += d1;
                        let col = c_inv.column(i).into_owned();
                        for j in 0..n {
                            h[(j, 0)] += col[j] * d0;
                            h[(j, 1)] += col[j] * d1;
                        }
                    }
                }
            }
            if adapting {
                scalar.record(i, alpha_mh);
            }
        }

        // --- mean vector (conjugate Gibbs) -----------------------------------
        {
            let csum = w.sum();
            let ytw = Vector2::new(
                (0..n).map(|i| state.r[i] * u_cos[i] * w[i]).sum::<f64>(),
                (0..n).map(|i| state.r[i] * u_sin[i] * w[i]).sum::<f64>(),
            );
            state.alpha =
                draw_alpha_pn(csum, &ytw, &v0_inv, &xi_inv, &model.priors.alpha_mean, &mut rng)?;
        }

        // --- covariance block (adaptive Metropolis) --------------------------
        block_proposed += 1;
        {
            let mut e_cur = DMatrix::zeros(n, 2);
            for i in 0..n {
                e_cur[(i, 0)] = state.r[i] * u_cos[i] - state.alpha[0];
                e_cur[(i, 1)] = state.r[i] * u_sin[i] - state.alpha[1];
            }
            let cur_ll = pn_log_gauss(&e_cur, &c_factor, state.sigma2, state.tau);
            let cur_lp = model.priors.sigma2.log_pdf(state.sigma2)
                + model.priors.tau.log_pdf(state.tau)
                + model.priors.corr.log_pdf(&state.corr, space_time);
            let cur_jac: f64 =
                transforms.iter().zip(x_block.iter()).map(|(t, &x)| t.log_jacobian(x)).sum();

            let x_prop = block.propose(&mut rng, &x_block);
            let sigma2_prop = transforms[0].to_constrained(x_prop[0]);
            let tau_prop = transforms[1].to_constrained(x_prop[1]);
            let corr_prop: Vec<f64> = transforms[2..]
                .iter()
                .zip(x_prop.iter().skip(2))
                .map(|(t, &x)| t.to_constrained(x))
                .collect();
            let spec_prop = model.family.make_spec(&corr_prop);
            let c_prop = correlation_matrix(&dist, &spec_prop);
            let mut alpha_mh = 0.0;
            if let Ok(factor_prop) = factorize(&c_prop) {
                let prop_ll = pn_log_gauss(&e_cur, &factor_prop, sigma2_prop, tau_prop);
                let prop_lp = model.priors.sigma2.log_pdf(sigma2_prop)
                    + model.priors.tau.log_pdf(tau_prop)
                    + model.priors.corr.log_pdf(&corr_prop, space_time);
                let prop_jac: f64 =
                    transforms.iter().zip(x_prop.iter()).map(|(t, &x)| t.log_jacobian(x)).sum();
                let dlog = (prop_ll + prop_lp + prop_jac) - (cur_ll + cur_lp + cur_jac);
                if dlog.is_finite() {
                    alpha_mh = dlog.exp().min(1.0);
                }
                if rng.random::<f64>().ln() < dlog {
                    block_accepted += 1;
                    state.sigma2 = sigma2_prop;
                    state.tau = tau_prop;
                    state.corr = corr_prop;
                    // Re-derive the unconstrained coordinates from the
                    // natural scale instead of keeping x_prop: the natural
                    // values are what an end state stores, so a resumed
                    // chain must see the same bits as an unbroken one.
                    x_block[0] = transforms[0].to_unconstrained(state.sigma2)?;
                    x_block[1] = transforms[1].to_unconstrained(state.tau)?;
                    for (j, (t, &c)) in transforms[2..].iter().zip(&state.corr).enumerate() {
                        x_block[j + 2] = t.to_unconstrained(c)?;
                    }
                    c_factor = factor_prop;
                    c_inv = c_factor.inverse();
                    w = &c_inv * DVector::from_element(n, 1.0);
                    xi_inv = xi_inverse_logdet(state.sigma2, state.tau).0;
                }
            }
            if adapting {
                block.update(alpha_mh, &x_block);
            }
        }

        if adapting {
            scalar.end_iteration();
        }
        if mcmc.stores(it) {
            draws.push(state.draw_row());
        }
    }

    let (batch_sums, batch_len) = scalar.batch_progress();
    let end_state = EndState {
        completed_iters: mcmc.iters,
        values: state.draw_row(),
        adapt: AdaptSnapshot {
            lambda: block.lambda,
            mu: block.mu.as_slice().to_vec(),
            sigma: block.sigma_rows(),
            block_b: block.b,
            log_sd: scalar.log_sd.clone(),
            batch_b: scalar.b,
            batch_sums: batch_sums.to_vec(),
            batch_len,
        },
        rng_word_pos: rng.get_word_pos(),
    };

    Ok(ChainRun {
        names,
        draws,
        end_state,
        accept: AcceptanceSummary {
            block_rate: block_accepted as f64 / block_proposed.max(1) as f64,
            site_rate: radius_accepted as f64 / radius_proposed.max(1) as f64,
        },
        shift: 0.0,
    })
}
