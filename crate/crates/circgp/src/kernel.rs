//! Correlation kernels and covariance assembly.
//!
//! Four correlation families over spatial (or space-time) separations:
//! exponential, Gaussian, Matérn, and the Gneiting non-separable
//! space-time kernel. Note the parameter conventions differ by family
//! and are kept exactly as implemented by the reference method:
//!
//! * exponential `exp(−ρ h)` and Gaussian `exp(−ρ² h)` take ρ as a
//!   *decay* (it multiplies the distance; in the Gaussian family the
//!   decay is squared, the distance is not);
//! * Matérn takes ρ as a *range* (it divides the distance);
//! * Gneiting `(ρ_t h_t² + 1)^{−1} exp(−ρ_sp h_sp / (ρ_t h_t² + 1)^{η/2})`
//!   takes spatial and temporal decays plus an interaction η ∈ [0, 1].
//!
//! The cross-covariance over the process components is a scalar σ² for
//! the univariate (wrapped) process and the 2×2 matrix
//! `Ξ = [[σ², τσ], [τσ, 1]]` for the bivariate (projected) process; the
//! unit (2,2) entry is the identifiability constraint and is fixed by
//! construction.

use nalgebra::{DMatrix, Matrix2};

use crate::bessel::bessel_k;
use crate::error::{Error, Result};

/// Spatial (and optionally temporal) coordinates of one observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiteCoord {
    pub x: f64,
    pub y: f64,
    /// Observation time; 0 for purely spatial data.
    pub t: f64,
}

impl SiteCoord {
    pub fn spatial(x: f64, y: f64) -> Self {
        Self { x, y, t: 0.0 }
    }
}

/// Spatial and temporal separation between two sites.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistancePair {
    /// Euclidean distance in the plane, ≥ 0.
    pub sp: f64,
    /// Absolute time difference, ≥ 0 (0 for purely spatial data).
    pub t: f64,
}

/// A correlation family with its current parameter values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CorrelationSpec {
    /// `exp(−ρ h)`; ρ is a decay.
    Exponential { rho: f64 },
    /// `exp(−ρ² h)`; the decay is squared, the distance enters linearly.
    Gaussian { rho: f64 },
    /// `(2^{1−ν}/Γ(ν)) (√(2ν) h/ρ)^ν K_ν(√(2ν) h/ρ)`; ρ is a range,
    /// ν is a fixed smoothness (not sampled).
    Matern { nu: f64, rho: f64 },
    /// Non-separable space-time kernel
    /// `(ρ_t h_t² + 1)^{−1} exp(−ρ_sp h_sp / (ρ_t h_t² + 1)^{η/2})`.
    Gneiting { rho_sp: f64, rho_t: f64, eta: f64 },
}

impl CorrelationSpec {
    /// Checks parameter admissibility: decays/ranges/smoothness strictly
    /// positive and finite, η ∈ [0, 1].
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64, what: &str| -> Result<()> {
            if !v.is_finite() {
                return Err(Error::NonFinite("correlation parameter"));
            }
            if v <= 0.0 {
                return Err(Error::Numeric(format!(
                    "correlation parameter {what} must be > 0, got {v}"
                )));
            }
            Ok(())
        };
        match *self {
            CorrelationSpec::Exponential { rho } | CorrelationSpec::Gaussian { rho } => {
                pos(rho, "rho")
            }
            CorrelationSpec::Matern { nu, rho } => {
                pos(nu, "nu")?;
                pos(rho, "rho")
            }
            CorrelationSpec::Gneiting { rho_sp, rho_t, eta } => {
                pos(rho_sp, "rho_sp")?;
                pos(rho_t, "rho_t")?;
                if !eta.is_finite() || !(0.0..=1.0).contains(&eta) {
                    return Err(Error::Numeric(format!("eta must lie in [0, 1], got {eta}")));
                }
                Ok(())
            }
        }
    }

    /// Whether this family uses the temporal component of distances.
    pub fn is_space_time(&self) -> bool {
        matches!(self, CorrelationSpec::Gneiting { .. })
    }

    /// Correlation at separation `h`. Parameters are assumed validated;
    /// `h` components are assumed ≥ 0 (they come from `distance_matrix`).
    pub fn correlation(&self, h: DistancePair) -> f64 {
        debug_assert!(h.sp >= 0.0 && h.t >= 0.0);
        match *self {
            CorrelationSpec::Exponential { rho } => (-rho * h.sp).exp(),
            CorrelationSpec::Gaussian { rho } => (-rho * rho * h.sp).exp(),
            CorrelationSpec::Matern { nu, rho } => {
                if h.sp == 0.0 {
                    return 1.0;
                }
                let u = (2.0 * nu).sqrt() * h.sp / rho;
                match bessel_k(nu, u) {
                    // 2^{1−ν}/Γ(ν) · u^ν · K_ν(u)
                    Ok(k) => (1.0 - nu).exp2() / libm::tgamma(nu) * u.powf(nu) * k,
                    // Underflow region: correlation is numerically 0.
                    Err(_) => 0.0,
                }
            }
            CorrelationSpec::Gneiting { rho_sp, rho_t, eta } => {
                let psi = rho_t * h.t * h.t + 1.0;
                (-rho_sp * h.sp / psi.powf(0.5 * eta)).exp() / psi
            }
        }
    }
}

/// Pairwise separations for a list of sites, split into spatial and
/// temporal components. Symmetric with zero diagonals.
#[derive(Debug, Clone)]
pub struct DistanceMatrix {
    pub sp: DMatrix<f64>,
    pub t: DMatrix<f64>,
}

impl DistanceMatrix {
    pub fn n(&self) -> usize {
        self.sp.nrows()
    }
}

/// Builds the pairwise [`DistanceMatrix`] of a site list.
pub fn distance_matrix(sites: &[SiteCoord]) -> DistanceMatrix {
    let n = sites.len();
    let mut sp = DMatrix::zeros(n, n);
    let mut t = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = (sites[i].x - sites[j].x).hypot(sites[i].y - sites[j].y);
            let dt = (sites[i].t - sites[j].t).abs();
            sp[(i, j)] = d;
            sp[(j, i)] = d;
            t[(i, j)] = dt;
            t[(j, i)] = dt;
        }
    }
    DistanceMatrix { sp, t }
}

/// Cross-covariance scale over process components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CrossCovarianceScale {
    /// Univariate process: plain variance σ² > 0.
    Scalar { sigma2: f64 },
    /// Bivariate process: `Ξ = [[σ², τσ], [τσ, 1]]` with σ² > 0 and
    /// |τ| < 1; the (2,2) entry is pinned to 1 for identifiability.
    Bivariate { sigma2: f64, tau: f64 },
}

impl CrossCovarianceScale {
    pub fn validate(&self) -> Result<()> {
        let (sigma2, tau) = match *self {
            CrossCovarianceScale::Scalar { sigma2 } => (sigma2, 0.0),
            CrossCovarianceScale::Bivariate { sigma2, tau } => (sigma2, tau),
        };
        if !sigma2.is_finite() || !tau.is_finite() {
            return Err(Error::NonFinite("cross-covariance parameter"));
        }
        if sigma2 <= 0.0 {
            return Err(Error::Numeric(format!("sigma2 must be > 0, got {sigma2}")));
        }
        if tau.abs() >= 1.0 {
            return Err(Error::Numeric(format!("tau must lie in (-1, 1), got {tau}")));
        }
        Ok(())
    }

    /// Number of process components (1 or 2).
    pub fn p(&self) -> usize {
        match self {
            CrossCovarianceScale::Scalar { .. } => 1,
            CrossCovarianceScale::Bivariate { .. } => 2,
        }
    }

    /// The 2×2 `Ξ` for the bivariate case. The unit (2,2) entry is a
    /// structural constant here: no code path can perturb it.
    pub fn xi(&self) -> Matrix2<f64> {
        match *self {
            CrossCovarianceScale::Scalar { sigma2 } => {
                // Degenerate use; keeps the method total.
                Matrix2::new(sigma2, 0.0, 0.0, 1.0)
            }
            CrossCovarianceScale::Bivariate { sigma2, tau } => {
                let ts = tau * sigma2.sqrt();
                Matrix2::new(sigma2, ts, ts, 1.0)
            }
        }
    }
}

/// Builds the correlation matrix `C` over a distance matrix.
pub fn correlation_matrix(dist: &DistanceMatrix, spec: &CorrelationSpec) -> DMatrix<f64> {
    let n = dist.n();
    let mut c = DMatrix::zeros(n, n);
    for i in 0..n {
        c[(i, i)] = 1.0;
        for j in (i + 1)..n {
            let v = spec.correlation(DistancePair {
                sp: dist.sp[(i, j)],
                t: dist.t[(i, j)],
            });
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    c
}

/// Assembles the full covariance `C ⊗ Ξ` (site-major interleaving for
/// the bivariate case: rows `2i, 2i+1` belong to site `i`), or `σ²·C`
/// for the univariate case.
pub fn build_covariance(
    dist: &DistanceMatrix,
    spec: &CorrelationSpec,
    scale: &CrossCovarianceScale,
) -> Result<DMatrix<f64>> {
    spec.validate()?;
    scale.validate()?;
    let c = correlation_matrix(dist, spec);
    let n = dist.n();
    match *scale {
        CrossCovarianceScale::Scalar { sigma2 } => Ok(sigma2 * c),
        CrossCovarianceScale::Bivariate { .. } => {
            let xi = scale.xi();
            let mut out = DMatrix::zeros(2 * n, 2 * n);
            for i in 0..n {
                for j in 0..n {
                    let cij = c[(i, j)];
                    out[(2 * i, 2 * j)] = cij * xi[(0, 0)];
                    out[(2 * i, 2 * j + 1)] = cij * xi[(0, 1)];
                    out[(2 * i + 1, 2 * j)] = cij * xi[(1, 0)];
                    out[(2 * i + 1, 2 * j + 1)] = cij * xi[(1, 1)];
                }
            }
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauss::factorize;
    use approx::assert_abs_diff_eq;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn d(sp: f64, t: f64) -> DistancePair {
        DistancePair { sp, t }
    }

    #[test]
    fn exponential_is_verbatim() {
        let k = CorrelationSpec::Exponential { rho: 2.0 };
        assert_abs_diff_eq!(k.correlation(d(0.5, 0.0)), (-1.0f64).exp());
        assert_abs_diff_eq!(k.correlation(d(0.0, 0.0)), 1.0);
    }

    #[test]
    fn gaussian_squares_decay_not_distance() {
        let k = CorrelationSpec::Gaussian { rho: 2.0 };
        // exp(−ρ² h) = exp(−4·0.5), not exp(−(ρh)²).
        assert_abs_diff_eq!(k.correlation(d(0.5, 0.0)), (-2.0f64).exp());
    }

    #[test]
    fn matern_half_equals_exponential_range_form() {
        let rho = 3.0;
        let k = CorrelationSpec::Matern { nu: 0.5, rho };
        for i in 0..=100 {
            let h = 0.1 * i as f64;
            let want = (-h / rho).exp();
            assert!(
                (k.correlation(d(h, 0.0)) - want).abs() < 1e-10,
                "h={h}"
            );
        }
    }

    #[test]
    fn matern_three_halves_closed_form() {
        let rho = 2.0;
        let k = CorrelationSpec::Matern { nu: 1.5, rho };
        for i in 1..=50 {
            let h = 0.2 * i as f64;
            let u = 3.0_f64.sqrt() * h / rho;
            let want = (1.0 + u) * (-u).exp();
            assert!((k.correlation(d(h, 0.0)) - want).abs() < 1e-12, "h={h}");
        }
    }

    #[test]
    fn matern_five_halves_closed_form() {
        let rho = 1.5;
        let k = CorrelationSpec::Matern { nu: 2.5, rho };
        for i in 1..=50 {
            let h = 0.2 * i as f64;
            let u = 5.0_f64.sqrt() * h / rho;
            let want = (1.0 + u + u * u / 3.0) * (-u).exp();
            assert!((k.correlation(d(h, 0.0)) - want).abs() < 1e-12, "h={h}");
        }
    }

    #[test]
    fn gneiting_limits() {
        let k = CorrelationSpec::Gneiting { rho_sp: 0.7, rho_t: 0.3, eta: 0.5 };
        // Purely spatial separation: reduces to exp(−ρ_sp h_sp).
        assert_abs_diff_eq!(k.correlation(d(2.0, 0.0)), (-1.4f64).exp(), epsilon = 1e-15);
        // Purely temporal separation: 1/(ρ_t h_t² + 1).
        assert_abs_diff_eq!(k.correlation(d(0.0, 2.0)), 1.0 / (0.3 * 4.0 + 1.0), epsilon = 1e-15);
        assert_abs_diff_eq!(k.correlation(d(0.0, 0.0)), 1.0);
        // Worked value: h_sp = 1, h_t = 1 → exp(−0.7/1.3^0.25)/1.3.
        let want = (-0.7 / 1.3f64.powf(0.25)).exp() / 1.3;
        assert_abs_diff_eq!(k.correlation(d(1.0, 1.0)), want, epsilon = 1e-15);
    }

    #[test]
    fn correlations_nonincreasing_in_distance() {
        let kernels = [
            CorrelationSpec::Exponential { rho: 1.3 },
            CorrelationSpec::Gaussian { rho: 0.9 },
            CorrelationSpec::Matern { nu: 1.7, rho: 2.0 },
        ];
        for k in kernels {
            let mut prev = k.correlation(d(0.0, 0.0));
            assert_abs_diff_eq!(prev, 1.0);
            for i in 1..=200 {
                let v = k.correlation(d(0.05 * i as f64, 0.0));
                assert!(v <= prev + 1e-14, "{k:?} increased at step {i}");
                assert!(v >= 0.0);
                prev = v;
            }
        }
    }

    #[test]
    fn validation_rejects_bad_parameters() {
        assert!(CorrelationSpec::Exponential { rho: 0.0 }.validate().is_err());
        assert!(CorrelationSpec::Matern { nu: -1.0, rho: 1.0 }.validate().is_err());
        assert!(CorrelationSpec::Gneiting { rho_sp: 1.0, rho_t: 1.0, eta: 1.5 }
            .validate()
            .is_err());
        assert!(CorrelationSpec::Gneiting { rho_sp: 1.0, rho_t: 1.0, eta: 1.0 }
            .validate()
            .is_ok());
        assert!(CrossCovarianceScale::Scalar { sigma2: -1.0 }.validate().is_err());
        assert!(CrossCovarianceScale::Bivariate { sigma2: 1.0, tau: 1.0 }
            .validate()
            .is_err());
    }

    #[test]
    fn distance_matrix_is_symmetric_zero_diagonal() {
        let sites = [
            SiteCoord { x: 0.0, y: 0.0, t: 0.0 },
            SiteCoord { x: 3.0, y: 4.0, t: 2.0 },
            SiteCoord { x: -1.0, y: 1.0, t: 5.0 },
        ];
        let dm = distance_matrix(&sites);
        assert_abs_diff_eq!(dm.sp[(0, 1)], 5.0);
        assert_abs_diff_eq!(dm.t[(0, 1)], 2.0);
        for i in 0..3 {
            assert_eq!(dm.sp[(i, i)], 0.0);
            for j in 0..3 {
                assert_eq!(dm.sp[(i, j)], dm.sp[(j, i)]);
                assert_eq!(dm.t[(i, j)], dm.t[(j, i)]);
            }
        }
    }

    #[test]
    fn xi_has_unit_corner_and_correct_offdiagonal() {
        let scale = CrossCovarianceScale::Bivariate { sigma2: 4.0, tau: 0.5 };
        let xi = scale.xi();
        assert_eq!(xi[(1, 1)], 1.0);
        assert_abs_diff_eq!(xi[(0, 0)], 4.0);
        assert_abs_diff_eq!(xi[(0, 1)], 0.5 * 2.0);
        assert_eq!(xi[(0, 1)], xi[(1, 0)]);
    }

    #[test]
    fn covariance_kronecker_layout() {
        let sites = [SiteCoord::spatial(0.0, 0.0), SiteCoord::spatial(1.0, 0.0)];
        let dm = distance_matrix(&sites);
        let spec = CorrelationSpec::Exponential { rho: 0.5 };
        let scale = CrossCovarianceScale::Bivariate { sigma2: 2.0, tau: 0.3 };
        let cov = build_covariance(&dm, &spec, &scale).unwrap();
        let c01 = (-0.5f64).exp();
        let xi = scale.xi();
        assert_eq!(cov.nrows(), 4);
        for a in 0..2 {
            for b in 0..2 {
                assert_abs_diff_eq!(cov[(a, b)], xi[(a, b)], epsilon = 1e-15);
                assert_abs_diff_eq!(cov[(2 + a, b)], c01 * xi[(a, b)], epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn covariance_of_distinct_sites_is_positive_definite() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let sites: Vec<SiteCoord> = (0..25)
            .map(|_| SiteCoord {
                x: rng.random::<f64>() * 50.0,
                y: rng.random::<f64>() * 50.0,
                t: (rng.random::<f64>() * 4.0).floor(),
            })
            .collect();
        let dm = distance_matrix(&sites);
        let cases: Vec<(CorrelationSpec, CrossCovarianceScale)> = vec![
            (
                CorrelationSpec::Exponential { rho: 0.1 },
                CrossCovarianceScale::Scalar { sigma2: 1.5 },
            ),
            (
                CorrelationSpec::Matern { nu: 1.5, rho: 10.0 },
                CrossCovarianceScale::Bivariate { sigma2: 2.0, tau: -0.4 },
            ),
            (
                CorrelationSpec::Gneiting { rho_sp: 0.08, rho_t: 0.5, eta: 0.7 },
                CrossCovarianceScale::Scalar { sigma2: 0.7 },
            ),
        ];
        for (spec, scale) in cases {
            let cov = build_covariance(&dm, &spec, &scale).unwrap();
            assert!(factorize(&cov).is_ok(), "{spec:?} not PD");
        }
    }
}
