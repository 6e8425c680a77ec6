//! Synthetic data generation: latent Gaussian fields pushed through the
//! wrapping and projection constructions, plus simple site layouts.

use nalgebra::{DVector, Vector2};
use rand::{Rng, RngExt};

use crate::circ::{atan_star, wrap_to_circle, Angle};
use crate::error::{Error, Result};
use crate::gauss::{factorize, mvn_sample};
use crate::kernel::{build_covariance, distance_matrix, CorrelationSpec, CrossCovarianceScale, SiteCoord};

/// A simulated wrapped-normal field: the observable angles plus the
/// latent linear values and true winding numbers.
#[derive(Debug, Clone)]
pub struct WnSimulation {
    pub angles: Vec<Angle>,
    pub winding: Vec<i64>,
    pub linear: Vec<f64>,
}

/// Draws one realization of `Y ~ N(α·1, σ²C)` and wraps it to the circle.
pub fn simulate_wn_field<R: Rng + ?Sized>(
    sites: &[SiteCoord],
    spec: &CorrelationSpec,
    sigma2: f64,
    alpha: f64,
    rng: &mut R,
) -> Result<WnSimulation> {
    if sites.is_empty() {
        return Err(Error::EmptyInput("simulation sites"));
    }
    if !alpha.is_finite() {
        return Err(Error::NonFinite("simulation mean direction"));
    }
    let dist = distance_matrix(sites);
    let sigma = build_covariance(&dist, spec, &CrossCovarianceScale::Scalar { sigma2 })?;
    let factor = factorize(&sigma)?;
    let mean = DVector::from_element(sites.len(), alpha);
    let y = mvn_sample(rng, &mean, &factor);
    let mut angles = Vec::with_capacity(sites.len());
    let mut winding = Vec::with_capacity(sites.len());
    for &v in y.iter() {
        let (a, k) = wrap_to_circle(v)?;
        angles.push(a);
        winding.push(k);
    }
    Ok(WnSimulation { angles, winding, linear: y.as_slice().to_vec() })
}

/// A simulated projected-normal field: angles plus the latent bivariate
/// values and true radii.
#[derive(Debug, Clone)]
pub struct PnSimulation {
    pub angles: Vec<Angle>,
    pub radii: Vec<f64>,
    /// Latent pairs `(y₁, y₂)` per site.
    pub latent: Vec<(f64, f64)>,
}

/// Draws one realization of `vec(Y) ~ N(α ⊗ 1, C ⊗ Ξ)` and projects each
/// bivariate value to its direction.
pub fn simulate_pn_field<R: Rng + ?Sized>(
    sites: &[SiteCoord],
    spec: &CorrelationSpec,
    sigma2: f64,
    tau: f64,
    alpha: &Vector2<f64>,
    rng: &mut R,
) -> Result<PnSimulation> {
    if sites.is_empty() {
        return Err(Error::EmptyInput("simulation sites"));
    }
    let n = sites.len();
    let dist = distance_matrix(sites);
    let sigma = build_covariance(&dist, spec, &CrossCovarianceScale::Bivariate { sigma2, tau })?;
    let factor = factorize(&sigma)?;
    let mut mean = DVector::zeros(2 * n);
    for i in 0..n {
        mean[2 * i] = alpha[0];
        mean[2 * i + 1] = alpha[1];
    }
    let y = mvn_sample(rng, &mean, &factor);
    let mut angles = Vec::with_capacity(n);
    let mut radii = Vec::with_capacity(n);
    let mut latent = Vec::with_capacity(n);
    for i in 0..n {
        let (y1, y2) = (y[2 * i], y[2 * i + 1]);
        angles.push(atan_star(y2, y1)?);
        radii.push(y1.hypot(y2));
        latent.push((y1, y2));
    }
    Ok(PnSimulation { angles, radii, latent })
}

/// A regular `nx × ny` grid of purely spatial sites with the given
/// spacing, row-major from the origin.
pub fn grid_sites(nx: usize, ny: usize, spacing: f64) -> Vec<SiteCoord> {
    let mut sites = Vec::with_capacity(nx * ny);
    for iy in 0..ny {
        for ix in 0..nx {
            sites.push(SiteCoord::spatial(ix as f64 * spacing, iy as f64 * spacing));
        }
    }
    sites
}

/// `n` sites uniform on `[0, xmax] × [0, ymax]`.
pub fn uniform_sites<R: Rng + ?Sized>(n: usize, xmax: f64, ymax: f64, rng: &mut R) -> Vec<SiteCoord> {
    (0..n)
        .map(|_| SiteCoord::spatial(rng.random::<f64>() * xmax, rng.random::<f64>() * ymax))
        .collect()
}

/// `n` sites uniform in space with times uniform on `[0, tmax]`.
pub fn uniform_space_time_sites<R: Rng + ?Sized>(
    n: usize,
    xmax: f64,
    ymax: f64,
    tmax: f64,
    rng: &mut R,
) -> Vec<SiteCoord> {
    (0..n)
        .map(|_| SiteCoord {
            x: rng.random::<f64>() * xmax,
            y: rng.random::<f64>() * ymax,
            t: rng.random::<f64>() * tmax,
        })
        .collect()
}
