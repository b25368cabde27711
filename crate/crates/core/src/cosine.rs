//! Single-order cosine test.
//!
//! `D_c(r1, r2) = Ĵ_c(r1, r2) − Ĵ_1c(r1) Ĵ_2c(r2) + Ĵ_1s(r1) Ĵ_2s(r2)` is the
//! real part of the empirical characteristic-function difference
//! `φ̂(r1, r2) − φ̂₁(r1) φ̂₂(r2)`, and `D_s` its imaginary part. Under
//! independence `√n D_c` is asymptotically normal, so
//! `T_n = n D_c² / V̂` is referred to χ²₁.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::circ::{center_sample, PairedSample};
use crate::error::{Error, Result};
use crate::result::{chisq_sf, Method, TestResult};

/// Variance estimates below this are rejected as degenerate.
pub const DEGENERATE_VARIANCE: f64 = 1e-12;

/// Integer frequency pair `(r1, r2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FrequencyPair {
    pub r1: i64,
    pub r2: i64,
}

impl FrequencyPair {
    pub const fn new(r1: i64, r2: i64) -> Self {
        Self { r1, r2 }
    }

    pub fn is_zero(&self) -> bool {
        self.r1 == 0 && self.r2 == 0
    }
}

impl std::ops::Neg for FrequencyPair {
    type Output = Self;

    fn neg(self) -> Self {
        Self::new(-self.r1, -self.r2)
    }
}

impl fmt::Display for FrequencyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.r1, self.r2)
    }
}

impl From<(i64, i64)> for FrequencyPair {
    fn from((r1, r2): (i64, i64)) -> Self {
        Self::new(r1, r2)
    }
}

/// Per-sample sums needed by `D_c`, `D_s` and `V̂` at one frequency pair.
struct PairSums {
    joint_c: f64,
    joint_s: f64,
    c1: f64,
    s1: f64,
    c2: f64,
    s2: f64,
}

fn pair_sums(s: &PairedSample, f: FrequencyPair) -> PairSums {
    let (a, b) = (f.r1 as f64, f.r2 as f64);
    let mut acc = PairSums { joint_c: 0.0, joint_s: 0.0, c1: 0.0, s1: 0.0, c2: 0.0, s2: 0.0 };
    for (x, y) in s.pairs() {
        let (sj, cj) = (a * x + b * y).sin_cos();
        let (sx, cx) = (a * x).sin_cos();
        let (sy, cy) = (b * y).sin_cos();
        acc.joint_c += cj;
        acc.joint_s += sj;
        acc.c1 += cx;
        acc.s1 += sx;
        acc.c2 += cy;
        acc.s2 += sy;
    }
    let n = s.len() as f64;
    for v in [&mut acc.joint_c, &mut acc.joint_s, &mut acc.c1, &mut acc.s1, &mut acc.c2, &mut acc.s2] {
        *v /= n;
    }
    acc
}

/// Cosine statistic `D_c(r1, r2)`.
pub fn d_cos(s: &PairedSample, f: FrequencyPair) -> f64 {
    let m = pair_sums(s, f);
    m.joint_c - m.c1 * m.c2 + m.s1 * m.s2
}

/// Sine statistic `D_s(r1, r2)`.
pub fn d_sin(s: &PairedSample, f: FrequencyPair) -> f64 {
    let m = pair_sums(s, f);
    m.joint_s - m.s1 * m.c2 - m.c1 * m.s2
}

/// Plug-in estimate of the asymptotic variance of `√n D_c(r1, r2)`.
///
/// This is the empirical variance of
/// `cos(r1θ¹ + r2θ²) − Ĵ_2c cos(r1θ¹) − Ĵ_1c cos(r2θ²) + Ĵ_2s sin(r1θ¹) + Ĵ_1s sin(r2θ²)`,
/// i.e. the mean square taken about the term's sample mean.
pub fn v_hat(s: &PairedSample, f: FrequencyPair) -> f64 {
    let m = pair_sums(s, f);
    let (a, b) = (f.r1 as f64, f.r2 as f64);
    let terms = s.pairs().map(|(x, y)| {
        let (sx, cx) = (a * x).sin_cos();
        let (sy, cy) = (b * y).sin_cos();
        (a * x + b * y).cos() - m.c2 * cx - m.c1 * cy + m.s2 * sx + m.s1 * sy
    });
    let n = s.len() as f64;
    let (sum, sum_sq) = terms.fold((0.0, 0.0), |(s1, s2), t| (s1 + t, s2 + t * t));
    let mean = sum / n;
    (sum_sq / n - mean * mean).max(0.0)
}

/// Asymptotic χ²₁ test based on `T_n = n D_c² / V̂`.
///
/// With `center` set (the usual choice) both margins are first rotated so
/// their sample circular means are zero, which makes `T_n` rotation
/// invariant.
pub fn cosine_test(s: &PairedSample, f: FrequencyPair, center: bool) -> Result<TestResult> {
    if s.len() < 2 {
        return Err(Error::invalid("cosine test needs at least two pairs"));
    }
    if f.is_zero() {
        return Err(Error::invalid("frequency pair (0,0) gives an identically zero statistic"));
    }
    let centred;
    let work = if center {
        centred = center_sample(s)?;
        &centred
    } else {
        s
    };
    let statistic = t_stat(work, f)?;
    let mut params = BTreeMap::new();
    params.insert("r".to_string(), f.to_string());
    params.insert("center".to_string(), center.to_string());
    Ok(TestResult {
        statistic,
        p_value: chisq_sf(statistic, 1),
        method: Method::AsymptoticChiSquare,
        df_or_b: 1,
        n: s.len(),
        params,
    })
}

/// `T_n` on a sample taken as-is.
pub(crate) fn t_stat(s: &PairedSample, f: FrequencyPair) -> Result<f64> {
    let v = v_hat(s, f);
    if v < DEGENERATE_VARIANCE {
        return Err(Error::DegenerateVariance(v));
    }
    let d = d_cos(s, f);
    Ok(s.len() as f64 * d * d / v)
}
