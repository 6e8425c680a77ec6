//! Forecast verification for circular predictions: average prediction
//! error (APE) and the circular continuous ranked probability score
//! (CRPS), each computed under two angular distances.
//!
//! * cosine distance `d(a, b) = 1 − cos(a − b)`, range [0, 2];
//! * angular separation `d(a, b) = π − |π − |a − b||`, range [0, π].
//!
//! APE at a target is the posterior-mean distance to the truth; the CRPS
//! uses the ensemble estimator `E[d(Θ, truth)] − ½·E[d(Θ, Θ′)]`, the
//! second expectation over all ordered sample pairs including the
//! diagonal. Headline scores follow the conventional pairing — APE with
//! cosine distance, CRPS with angular separation — but both variants are
//! reported so results can be compared under either reading.

use crate::circ::{angular_separation, circular_distance, Angle};
use crate::error::{Error, Result};

/// Which angular distance backs a score.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AngularDistance {
    /// `1 − cos(a − b)`.
    Cosine,
    /// Shorter arc length, in radians.
    Separation,
}

impl AngularDistance {
    pub fn eval(&self, a: Angle, b: Angle) -> f64 {
        match self {
            AngularDistance::Cosine => circular_distance(a, b),
            AngularDistance::Separation => angular_separation(a, b),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            AngularDistance::Cosine => "cosine",
            AngularDistance::Separation => "separation",
        }
    }
}

/// Mean distance within an ensemble over all ordered pairs, including
/// the diagonal, by direct double loop. The reference implementation —
/// quadratic, but unarguable.
pub fn pair_term_brute(samples: &[Angle], metric: AngularDistance) -> f64 {
    let m = samples.len() as f64;
    let mut acc = 0.0;
    for &a in samples {
        for &b in samples {
            acc += metric.eval(a, b);
        }
    }
    acc / (m * m)
}

/// Mean pairwise distance; for the cosine metric this uses the
/// resultant-length identity
/// `mean_{ij} (1 − cos(θ_i − θ_j)) = 1 − R̄²`,
/// which is O(m) instead of O(m²).
fn pair_term(samples: &[Angle], metric: AngularDistance) -> f64 {
    match metric {
        AngularDistance::Cosine => {
            let m = samples.len() as f64;
            let c: f64 = samples.iter().map(|a| a.cos()).sum();
            let s: f64 = samples.iter().map(|a| a.sin()).sum();
            1.0 - (c * c + s * s) / (m * m)
        }
        AngularDistance::Separation => pair_term_brute(samples, metric),
    }
}

/// Ensemble CRPS of a single target:
/// `mean_i d(θ_i, truth) − ½ · mean_{ij} d(θ_i, θ_j)`.
pub fn crps_circular(samples: &[Angle], truth: Angle, metric: AngularDistance) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::Data(format!(
            "CRPS needs at least 2 predictive samples, got {}",
            samples.len()
        )));
    }
    let to_truth: f64 =
        samples.iter().map(|&a| metric.eval(a, truth)).sum::<f64>() / samples.len() as f64;
    Ok(to_truth - 0.5 * pair_term(samples, metric))
}

/// Mean distance of an ensemble to the truth (the APE contribution of
/// one target).
pub fn ape_single(samples: &[Angle], truth: Angle, metric: AngularDistance) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("predictive samples"));
    }
    Ok(samples.iter().map(|&a| metric.eval(a, truth)).sum::<f64>() / samples.len() as f64)
}

/// Scores of one target under both distance conventions.
#[derive(Debug, Clone, Copy)]
pub struct TargetScore {
    pub ape_cos: f64,
    pub ape_sep: f64,
    pub crps_cos: f64,
    pub crps_sep: f64,
}

/// Per-target scores plus their plain means.
#[derive(Debug, Clone)]
pub struct ScoreReport {
    pub per_target: Vec<TargetScore>,
    pub ape_cos: f64,
    pub ape_sep: f64,
    pub crps_cos: f64,
    pub crps_sep: f64,
}

impl ScoreReport {
    /// Headline APE (cosine-distance convention).
    pub fn ape(&self) -> f64 {
        self.ape_cos
    }

    /// Headline CRPS (angular-separation convention).
    pub fn crps(&self) -> f64 {
        self.crps_sep
    }
}

/// Scores a predictive ensemble against aligned truths. `draws[d][t]`
/// is the predicted angle (radians) for target `t` in posterior draw
/// `d`; `truth[t]` is the held-out observation at that target.
pub fn score_predictions(draws: &[Vec<f64>], truth: &[Angle]) -> Result<ScoreReport> {
    if draws.is_empty() {
        return Err(Error::EmptyInput("predictive draws"));
    }
    let n_targets = truth.len();
    if n_targets == 0 {
        return Err(Error::EmptyInput("truth angles"));
    }
    if draws.iter().any(|row| row.len() != n_targets) {
        return Err(Error::DimensionMismatch {
            what: "predictive draws vs truth targets",
            expected: n_targets,
            got: draws.iter().map(|r| r.len()).find(|&l| l != n_targets).unwrap_or(0),
        });
    }
    let mut per_target = Vec::with_capacity(n_targets);
    for t in 0..n_targets {
        let samples: Vec<Angle> = draws
            .iter()
            .map(|row| Angle::from_radians(row[t]))
            .collect::<Result<_>>()?;
        per_target.push(TargetScore {
            ape_cos: ape_single(&samples, truth[t], AngularDistance::Cosine)?,
            ape_sep: ape_single(&samples, truth[t], AngularDistance::Separation)?,
            crps_cos: crps_circular(&samples, truth[t], AngularDistance::Cosine)?,
            crps_sep: crps_circular(&samples, truth[t], AngularDistance::Separation)?,
        });
    }
    let m = n_targets as f64;
    Ok(ScoreReport {
        ape_cos: per_target.iter().map(|s| s.ape_cos).sum::<f64>() / m,
        ape_sep: per_target.iter().map(|s| s.ape_sep).sum::<f64>() / m,
        crps_cos: per_target.iter().map(|s| s.crps_cos).sum::<f64>() / m,
        crps_sep: per_target.iter().map(|s| s.crps_sep).sum::<f64>() / m,
        per_target,
    })
}
