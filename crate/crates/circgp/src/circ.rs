//! Primitives for working on the circle.
//!
//! Angles live in `[0, 2π)`. A real number decomposes as `y = θ + 2πk`
//! with `θ` the wrapped angle and `k ∈ ℤ` the winding number; both halves
//! of that decomposition are used heavily by the wrapped-process sampler,
//! so [`wrap_to_circle`] returns them together. Directions of 2-vectors
//! are taken with [`atan_star`], the quadrant-aware arctangent mapped to
//! `[0, 2π)`.

use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};

/// An angle in radians, canonicalized to `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Angle(f64);

impl Angle {
    /// Wraps `rad` into `[0, 2π)`. Rejects NaN and ±∞.
    pub fn from_radians(rad: f64) -> Result<Self> {
        if !rad.is_finite() {
            return Err(Error::NonFinite("angle"));
        }
        Ok(Self(wrap_raw(rad)))
    }

    /// Converts from degrees, wrapping into `[0, 2π)`.
    pub fn from_degrees(deg: f64) -> Result<Self> {
        Self::from_radians(deg.to_radians())
    }

    /// The canonical radian value in `[0, 2π)`.
    pub fn rad(self) -> f64 {
        self.0
    }

    pub fn sin(self) -> f64 {
        self.0.sin()
    }

    pub fn cos(self) -> f64 {
        self.0.cos()
    }
}

/// Wraps a finite `y` into `[0, 2π)` without constructing an [`Angle`].
pub fn wrap_raw(y: f64) -> f64 {
    let mut t = y.rem_euclid(TAU);
    // rem_euclid can round up to exactly 2π for tiny negative inputs.
    if t >= TAU {
        t = 0.0;
    }
    t
}

/// Decomposes `y = θ + 2πk` into the wrapped angle `θ ∈ [0, 2π)` and the
/// winding number `k`. Reconstruction is exact to a few ulps of `y`.
pub fn wrap_to_circle(y: f64) -> Result<(Angle, i64)> {
    if !y.is_finite() {
        return Err(Error::NonFinite("linear value"));
    }
    let theta = wrap_raw(y);
    let k = ((y - theta) / TAU).round() as i64;
    Ok((Angle(theta), k))
}

/// Quadrant-aware arctangent of `y2 / y1` mapped to `[0, 2π)`.
///
/// This is the direction of the vector `(y1, y2)`; the origin has no
/// direction and is rejected.
pub fn atan_star(y2: f64, y1: f64) -> Result<Angle> {
    if !y1.is_finite() || !y2.is_finite() {
        return Err(Error::NonFinite("direction component"));
    }
    if y1 == 0.0 && y2 == 0.0 {
        return Err(Error::OriginDirection);
    }
    Ok(Angle(wrap_raw(y2.atan2(y1))))
}

/// The distance `1 − cos(a − b)`, in `[0, 2]`.
///
/// This is the convention used for average prediction error.
pub fn circular_distance(a: Angle, b: Angle) -> f64 {
    1.0 - (a.0 - b.0).cos()
}

/// Arc-length separation in `[0, π]`: the shorter way around the circle.
pub fn angular_separation(a: Angle, b: Angle) -> f64 {
    let d = (a.0 - b.0).abs();
    (PI - (PI - d).abs()).abs()
}

/// Sample summary of a set of angles via the resultant vector.
#[derive(Debug, Clone, Copy)]
pub struct CircularSummary {
    /// Direction of the resultant vector.
    pub mean_direction: Angle,
    /// Length of the mean resultant vector, in `[0, 1]`.
    pub resultant_length: f64,
    /// `1 − resultant_length`, in `[0, 1]`.
    pub circular_variance: f64,
    /// `sqrt(−2 ln R)`; `+∞` when the resultant length is 0.
    pub circular_sd: f64,
}

/// Computes the circular summary of a non-empty sample.
///
/// Errors if the sample is empty or if the resultant vector vanishes
/// (antipodal mass), in which case the mean direction is undefined.
/// "Vanishes" means below 1e-12: perfectly balanced samples land at
/// rounding-noise scale, never exactly at zero.
pub fn circular_summary(angles: &[Angle]) -> Result<CircularSummary> {
    if angles.is_empty() {
        return Err(Error::EmptyInput("circular_summary"));
    }
    let n = angles.len() as f64;
    let (mut s, mut c) = (0.0, 0.0);
    for a in angles {
        s += a.sin();
        c += a.cos();
    }
    s /= n;
    c /= n;
    let r = s.hypot(c);
    if r < 1e-12 {
        return Err(Error::ZeroResultant);
    }
    let r = r.min(1.0);
    Ok(CircularSummary {
        mean_direction: Angle(wrap_raw(s.atan2(c))),
        resultant_length: r,
        circular_variance: 1.0 - r,
        circular_sd: (-2.0 * r.ln()).sqrt(),
    })
}

/// Rotates every angle by `delta`, wrapping back into `[0, 2π)`.
pub fn shift_angles(angles: &[Angle], delta: f64) -> Vec<Angle> {
    angles.iter().map(|a| Angle(wrap_raw(a.0 + delta))).collect()
}

/// Rotates the sample so its mean direction lands on π.
///
/// Returns the rotated angles and the applied shift; undo the rotation
/// with [`recenter_from_pi`]. The wrapped-process sampler runs on the
/// π-centered scale so that the data sit far from the 0/2π seam.
pub fn recenter_to_pi(angles: &[Angle]) -> Result<(Vec<Angle>, f64)> {
    let summary = circular_summary(angles)?;
    let shift = PI - summary.mean_direction.rad();
    Ok((shift_angles(angles, shift), shift))
}

/// Undoes a [`recenter_to_pi`] rotation with the stored shift.
pub fn recenter_from_pi(angles: &[Angle], shift: f64) -> Vec<Angle> {
    shift_angles(angles, -shift)
}
