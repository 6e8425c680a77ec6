//! Dense Gaussian linear algebra: Cholesky factorization, multivariate
//! normal log-density and sampling, and conditioning.
//!
//! The factorization is written out rather than delegated so that a
//! non-positive-definite input reports *which* pivot failed — the MCMC
//! and kriging layers use that to reject proposals and to count skipped
//! prediction draws.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// `ln(2π)`, shared by every Gaussian log-density in the crate.
pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Lower-triangular Cholesky factor `L` of an SPD matrix `Σ = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    l: DMatrix<f64>,
    log_det: f64,
}

impl SpdFactor {
    /// The lower-triangular factor.
    pub fn lower(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    /// `log |Σ|`.
    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// Solves `Σ x = b`.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = b.clone();
        self.solve_in_place(&mut x);
        x
    }

    fn solve_in_place(&self, x: &mut DVector<f64>) {
        self.l.solve_lower_triangular_mut(x);
        self.l.tr_solve_lower_triangular_mut(x);
    }

    /// `Σ⁻¹`, materialized. Used where many single entries or columns of
    /// the precision matrix are needed per sweep.
    pub fn inverse(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut inv = DMatrix::identity(n, n);
        self.l.solve_lower_triangular_mut(&mut inv);
        self.l.tr_solve_lower_triangular_mut(&mut inv);
        // Clean up asymmetry from rounding.
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (inv[(i, j)] + inv[(j, i)]);
                inv[(i, j)] = v;
                inv[(j, i)] = v;
            }
        }
        inv
    }

    /// `L⁻¹ b` (a half-solve; the squared norm of the result is the
    /// Mahalanobis distance).
    pub fn half_solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = b.clone();
        self.l.solve_lower_triangular_mut(&mut x);
        x
    }
}

/// Cholesky-factorizes a symmetric positive definite matrix.
///
/// Fails with the 0-based index of the first non-positive pivot; for a
/// covariance built from distinct sites this indicates a numerically
/// degenerate parameter proposal rather than a bug.
pub fn factorize(sigma: &DMatrix<f64>) -> Result<SpdFactor> {
    cholesky(sigma, None)
}

/// Like [`factorize`], but tolerates positive *semi*-definite input:
/// pivots within `tol` of zero (relative to the largest diagonal entry)
/// clamp the corresponding column of `L` to zero instead of failing.
/// Conditional covariances at duplicated sites are exactly semi-definite,
/// which is the intended use.
pub fn factorize_psd(sigma: &DMatrix<f64>, tol: f64) -> Result<SpdFactor> {
    cholesky(sigma, Some(tol))
}

fn cholesky(sigma: &DMatrix<f64>, psd_tol: Option<f64>) -> Result<SpdFactor> {
    let n = sigma.nrows();
    if sigma.ncols() != n {
        return Err(Error::DimensionMismatch {
            what: "factorize (square matrix)",
            expected: n,
            got: sigma.ncols(),
        });
    }
    let max_diag = (0..n).map(|i| sigma[(i, i)].abs()).fold(0.0f64, f64::max);
    let clamp_below = psd_tol.map(|t| t * max_diag.max(1e-300));

    let mut l = DMatrix::zeros(n, n);
    let mut log_det = 0.0;
    for j in 0..n {
        let mut d = sigma[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !d.is_finite() {
            return Err(Error::NonFinite("factorize pivot"));
        }
        let pivot_ok = d > 0.0 && (clamp_below.is_none() || d > clamp_below.unwrap());
        if !pivot_ok {
            match clamp_below {
                Some(c) if d <= c && d > -c => {
                    // Semi-definite direction: zero the column.
                    continue;
                }
                Some(_) => return Err(Error::NotPositiveDefinite { pivot: j }),
                None => return Err(Error::NotPositiveDefinite { pivot: j }),
            }
        }
        let root = d.sqrt();
        l[(j, j)] = root;
        log_det += 2.0 * root.ln();
        for i in (j + 1)..n {
            let mut v = sigma[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = v / root;
        }
    }
    Ok(SpdFactor { l, log_det })
}

/// Log-density of `N(mean, Σ)` at `x`, with `Σ` pre-factorized.
pub fn mvn_logpdf(x: &DVector<f64>, mean: &DVector<f64>, factor: &SpdFactor) -> f64 {
    let w = factor.half_solve(&(x - mean));
    -0.5 * (factor.log_det() + factor.dim() as f64 * LN_2PI + w.norm_squared())
}

/// Draws from `N(mean, Σ)` as `mean + L z` with `z` standard normal.
pub fn mvn_sample<R: Rng + ?Sized>(
    rng: &mut R,
    mean: &DVector<f64>,
    factor: &SpdFactor,
) -> DVector<f64> {
    let n = factor.dim();
    let z = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
    mean + factor.lower() * z
}

/// Standard normal log-density.
pub fn log_normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (LN_2PI + var.ln() + d * d / var)
}

/// Standard normal CDF `Φ(x)`.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Conditional distribution of the unobserved coordinates of a joint
/// normal given the observed ones. The covariance may be positive
/// *semi*-definite (exactly so when a target duplicates an observed
/// site).
#[derive(Debug, Clone)]
pub struct ConditionalNormal {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl ConditionalNormal {
    /// Draws one sample, tolerating semi-definite directions.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<DVector<f64>> {
        let f = factorize_psd(&self.cov, 1e-12)?;
        Ok(mvn_sample(rng, &self.mean, &f))
    }
}

/// Conditions `N(mean, cov)` on `x[observed[i]] = observed_values[i]`.
///
/// Returns the conditional law of the remaining coordinates, in their
/// original relative order. Only the observed block is factorized; a
/// factorization failure there propagates (kriging counts such draws as
/// skipped).
pub fn condition(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    observed: &[usize],
    observed_values: &[f64],
) -> Result<ConditionalNormal> {
    let n = mean.len();
    if cov.nrows() != n || cov.ncols() != n {
        return Err(Error::DimensionMismatch {
            what: "condition (cov)",
            expected: n,
            got: cov.nrows(),
        });
    }
    if observed.len() != observed_values.len() {
        return Err(Error::DimensionMismatch {
            what: "condition (observed values)",
            expected: observed.len(),
            got: observed_values.len(),
        });
    }
    let mut is_obs = vec![false; n];
    for &i in observed {
        if i >= n {
            return Err(Error::DimensionMismatch {
                what: "condition (observed index)",
                expected: n,
                got: i,
            });
        }
        if is_obs[i] {
            return Err(Error::Numeric(format!("condition: index {i} observed twice")));
        }
        is_obs[i] = true;
    }
    let unobs: Vec<usize> = (0..n).filter(|&i| !is_obs[i]).collect();
    let (no, nu) = (observed.len(), unobs.len());

    let mut sigma_oo = DMatrix::zeros(no, no);
    for (a, &i) in observed.iter().enumerate() {
        for (b, &j) in observed.iter().enumerate() {
            sigma_oo[(a, b)] = cov[(i, j)];
        }
    }
    let mut sigma_uo = DMatrix::zeros(nu, no);
    for (a, &i) in unobs.iter().enumerate() {
        for (b, &j) in observed.iter().enumerate() {
            sigma_uo[(a, b)] = cov[(i, j)];
        }
    }
    let factor = factorize(&sigma_oo)?;

    // w = Σ_oo⁻¹ (v − μ_o);  gain = Σ_uo Σ_oo⁻¹ (via half-solves).
    let resid = DVector::from_fn(no, |a, _| observed_values[a] - mean[observed[a]]);
    let w = factor.solve(&resid);

    let mut cond_mean = DVector::zeros(nu);
    for (a, &i) in unobs.iter().enumerate() {
        cond_mean[a] = mean[i] + sigma_uo.row(a).transpose().dot(&w);
    }

    // Σ_uu − (L⁻¹ Σ_ou)ᵀ (L⁻¹ Σ_ou), computed column-block-wise.
    let mut half = sigma_uo.transpose(); // no × nu
    factor.l.solve_lower_triangular_mut(&mut half);
    let mut cond_cov = DMatrix::zeros(nu, nu);
    for (a, &i) in unobs.iter().enumerate() {
        for (b, &j) in unobs.iter().enumerate() {
            cond_cov[(a, b)] = cov[(i, j)];
        }
    }
    cond_cov -= half.transpose() * &half;
    // Symmetrize rounding drift.
    for a in 0..nu {
        for b in (a + 1)..nu {
            let v = 0.5 * (cond_cov[(a, b)] + cond_cov[(b, a)]);
            cond_cov[(a, b)] = v;
            cond_cov[(b, a)] = v;
        }
    }
    // A coordinate whose conditional variance has collapsed relative to
    // its unconditional variance (e.g. a target duplicating an observed
    // site) is determined by the data; what remains on its row is
    // cancellation noise, possibly negative. Snap it to an exact point
    // mass so sampling degrades gracefully instead of failing on a
    // noise-scale non-PD matrix.
    for a in 0..nu {
        let scale = cov[(unobs[a], unobs[a])].abs().max(1e-300);
        if cond_cov[(a, a)] <= 1e-10 * scale {
            for b in 0..nu {
                cond_cov[(a, b)] = 0.0;
                cond_cov[(b, a)] = 0.0;
            }
        }
    }
    Ok(ConditionalNormal { mean: cond_mean, cov: cond_cov })
}
