//! Angles on the circle, circular means, centring and the sample type
//! consumed by every test.
//!
//! All angles are kept in radians in the half-open range `[-π, π)`.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Resultant lengths at or below this are treated as zero.
const RESULTANT_EPS: f64 = 1e-12;

/// An angle in radians, always in `[-π, π)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Angle(f64);

impl Angle {
    pub fn new(x: f64) -> Result<Self> {
        wrap_angle(x)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl From<Angle> for f64 {
    fn from(a: Angle) -> f64 {
        a.0
    }
}

/// Wraps a finite value into `[-π, π)`. Values already in range are
/// returned unchanged, bit for bit.
pub fn wrap_angle(x: f64) -> Result<Angle> {
    if !x.is_finite() {
        return Err(Error::NonFinite(x));
    }
    Ok(Angle(wrap(x)))
}

#[inline]
pub(crate) fn wrap(x: f64) -> f64 {
    if (-PI..PI).contains(&x) {
        return x;
    }
    let mut y = (x + PI).rem_euclid(TAU) - PI;
    // rem_euclid may round up to TAU
    if y >= PI {
        y -= TAU;
    }
    if y < -PI {
        y = -PI;
    }
    y
}

/// Ordered pairs of angles `(θ¹ᵢ, θ²ᵢ)`, stored column-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSample {
    first: Vec<f64>,
    second: Vec<f64>,
}

impl PairedSample {
    /// Builds a sample from two equally long columns of radians, wrapping
    /// each value into `[-π, π)`.
    pub fn new(first: Vec<f64>, second: Vec<f64>) -> Result<Self> {
        if first.len() != second.len() {
            return Err(Error::invalid(format!("column lengths differ: {} vs {}", first.len(), second.len())));
        }
        if first.is_empty() {
            return Err(Error::invalid("sample must contain at least one pair"));
        }
        let wrap_all =
            |v: Vec<f64>| -> Result<Vec<f64>> { v.into_iter().map(|x| wrap_angle(x).map(f64::from)).collect() };
        Ok(Self { first: wrap_all(first)?, second: wrap_all(second)? })
    }

    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        let (a, b) = pairs.iter().copied().unzip();
        Self::new(a, b)
    }

    /// Columns must already be wrapped.
    pub(crate) fn from_wrapped(first: Vec<f64>, second: Vec<f64>) -> Self {
        debug_assert_eq!(first.len(), second.len());
        debug_assert!(first.iter().chain(&second).all(|x| (-PI..PI).contains(x)));
        Self { first, second }
    }

    pub fn len(&self) -> usize {
        self.first.len()
    }

    pub fn is_empty(&self) -> bool {
        self.first.is_empty()
    }

    pub fn first(&self) -> &[f64] {
        &self.first
    }

    pub fn second(&self) -> &[f64] {
        &self.second
    }

    pub fn pairs(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.first.iter().copied().zip(self.second.iter().copied())
    }

    /// Adds constants to each margin (rotation on the torus).
    pub fn rotated(&self, a: f64, b: f64) -> Self {
        Self {
            first: self.first.iter().map(|&x| wrap(x + a)).collect(),
            second: self.second.iter().map(|&x| wrap(x + b)).collect(),
        }
    }

    /// Pairs the first column of `self` with the second column of `other`.
    pub fn cross_paired(&self, other: &PairedSample) -> Result<Self> {
        if self.len() != other.len() {
            return Err(Error::invalid("cross-pairing needs equal sample sizes"));
        }
        Ok(Self { first: self.first.clone(), second: other.second.clone() })
    }

    /// Keeps the first column and reorders the second by `perm`.
    pub fn with_second_permuted(&self, perm: &[usize]) -> Self {
        Self { first: self.first.clone(), second: perm.iter().map(|&i| self.second[i]).collect() }
    }
}

/// Sample circular mean `atan2(Σ sin θ, Σ cos θ)`.
pub fn circular_mean(angles: &[f64]) -> Result<Angle> {
    if angles.is_empty() {
        return Err(Error::invalid("circular mean of an empty list"));
    }
    let n = angles.len() as f64;
    let (s, c) = angles.iter().fold((0.0, 0.0), |(s, c), &x| {
        let (sx, cx) = x.sin_cos();
        (s + sx, c + cx)
    });
    resultant_direction(s / n, c / n)
}

/// Weighted circular mean `atan2(Σ wᵢ sin θᵢ, Σ wᵢ cos θᵢ)`.
pub fn weighted_circular_mean(angles: &[f64], weights: &[f64]) -> Result<Angle> {
    if angles.len() != weights.len() {
        return Err(Error::invalid("angles and weights differ in length"));
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(Error::invalid(format!("weight {w} is not a non-negative number")));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::invalid("at least one weight must be positive"));
    }
    let (s, c) = angles.iter().zip(weights).fold((0.0, 0.0), |(s, c), (&x, &w)| {
        let (sx, cx) = x.sin_cos();
        (s + w * sx, c + w * cx)
    });
    resultant_direction(s / total, c / total)
}

fn resultant_direction(s: f64, c: f64) -> Result<Angle> {
    if !(s.is_finite() && c.is_finite()) {
        return Err(Error::NonFinite(if s.is_finite() { c } else { s }));
    }
    if s.hypot(c) <= RESULTANT_EPS {
        return Err(Error::UndefinedMean);
    }
    wrap_angle(s.atan2(c))
}

/// Subtracts the sample circular mean of each margin.
pub fn center_sample(s: &PairedSample) -> Result<PairedSample> {
    let m1 = circular_mean(s.first())?.value();
    let m2 = circular_mean(s.second())?.value();
    Ok(s.rotated(-m1, -m2))
}

/// Lag-`k` pairs `(θᵢ, θᵢ₊ₖ)` of a circular series.
pub fn lag_pairs(series: &[f64], k: usize) -> Result<PairedSample> {
    if k == 0 {
        return Err(Error::invalid("lag must be at least 1"));
    }
    if k >= series.len() {
        return Err(Error::invalid(format!("lag {k} leaves no pairs in a series of length {}", series.len())));
    }
    let m = series.len() - k;
    PairedSample::new(series[..m].to_vec(), series[k..].to_vec())
}

/// Maps an axial angle in `[0, π)` to a circular one by doubling.
pub fn axial_to_circular(x: f64) -> Result<Angle> {
    if !x.is_finite() {
        return Err(Error::NonFinite(x));
    }
    if !(0.0..PI).contains(&x) {
        return Err(Error::invalid(format!("axial angle {x} outside [0, π)")));
    }
    wrap_angle(2.0 * x)
}
