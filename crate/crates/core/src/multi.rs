//! Multi-order quadratic-form test.
//!
//! Stacks cosine parts `D_c` at the pairs in `cos` and sine parts `D_s` at
//! the pairs in `sin` into `Δ_n`, estimates the asymptotic covariance `Σ` of
//! `√n Δ_n` by plug-in, and refers `Q = n Δ' Σ̂⁻¹ Δ` to χ² with `J + K`
//! degrees of freedom.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::circ::{center_sample, PairedSample};
use crate::cosine::{d_cos, d_sin, FrequencyPair};
use crate::error::{Error, Result};
use crate::moments::TrigMoments;
use crate::result::{chisq_sf, Method, TestResult};

/// Largest accepted condition number of `Σ̂`.
pub const MAX_CONDITION: f64 = 1e12;

/// Frequency pairs entering the cosine and sine parts of `Δ_n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultiOrderSpec {
    cos: Vec<FrequencyPair>,
    sin: Vec<FrequencyPair>,
}

impl MultiOrderSpec {
    /// Requires at least one pair and no `(0, 0)`. Duplicated pairs are
    /// accepted here and rejected by the covariance gate of [`multi_test`].
    pub fn new(cos: Vec<FrequencyPair>, sin: Vec<FrequencyPair>) -> Result<Self> {
        if cos.is_empty() && sin.is_empty() {
            return Err(Error::invalid("multi-order spec needs at least one pair"));
        }
        if cos.iter().chain(&sin).any(FrequencyPair::is_zero) {
            return Err(Error::invalid("frequency pair (0,0) is not allowed"));
        }
        Ok(Self { cos, sin })
    }

    /// Cosine-only spec from a flat list `r11, r12, r21, r22, …`.
    pub fn cosine_only(flat: &[i64]) -> Result<Self> {
        Self::new(pairs_from_flat(flat)?, Vec::new())
    }

    pub fn cos(&self) -> &[FrequencyPair] {
        &self.cos
    }

    pub fn sin(&self) -> &[FrequencyPair] {
        &self.sin
    }

    pub fn dim(&self) -> usize {
        self.cos.len() + self.sin.len()
    }

    fn has_duplicates(&self) -> bool {
        let dup = |v: &[FrequencyPair]| {
            let mut seen = HashSet::new();
            v.iter().any(|p| !seen.insert(*p))
        };
        dup(&self.cos) || dup(&self.sin)
    }
}

fn pairs_from_flat(flat: &[i64]) -> Result<Vec<FrequencyPair>> {
    if !flat.len().is_multiple_of(2) {
        return Err(Error::invalid("frequency list must have even length"));
    }
    Ok(flat.chunks(2).map(|c| FrequencyPair::new(c[0], c[1])).collect())
}

/// Formats as `1,-1,1,1` or `1,-1,1,1/2,1` (cosine pairs, then sine pairs).
impl fmt::Display for MultiOrderSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[FrequencyPair]| v.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(",");
        write!(f, "{}", join(&self.cos))?;
        if !self.sin.is_empty() {
            write!(f, "/{}", join(&self.sin))?;
        }
        Ok(())
    }
}

impl FromStr for MultiOrderSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parse = |part: &str| -> Result<Vec<FrequencyPair>> {
            let part = part.trim();
            if part.is_empty() {
                return Ok(Vec::new());
            }
            let flat = part
                .split(',')
                .map(|t| t.trim().parse::<i64>().map_err(|_| Error::invalid(format!("bad frequency `{t}` in `{s}`"))))
                .collect::<Result<Vec<_>>>()?;
            pairs_from_flat(&flat)
        };
        let (c, sn) = s.split_once('/').unwrap_or((s, ""));
        Self::new(parse(c)?, parse(sn)?)
    }
}

/// Symmetric estimate of `Σ`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovMatrix(DMatrix<f64>);

impl CovMatrix {
    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// `Δ_n`: cosine parts at `spec.cos()`, then sine parts at `spec.sin()`.
pub fn delta_vec(s: &PairedSample, spec: &MultiOrderSpec) -> Vec<f64> {
    spec.cos.iter().map(|&f| d_cos(s, f)).chain(spec.sin.iter().map(|&f| d_sin(s, f))).collect()
}

/// Which part of the characteristic function a row or column refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Cos,
    Sin,
}

/// Entry of the 2×2 covariance matrix `V(r, t)` of
/// `(cos(r·θ), sin(r·θ))` against `(cos(t·θ), sin(t·θ))`, from empirical
/// moments. Fails if a needed moment was not computed.
pub fn v_entry(m: &TrigMoments, row: Part, col: Part, r: FrequencyPair, t: FrequencyPair) -> Result<f64> {
    let get = |p: (i64, i64)| {
        m.joint(p.0, p.1).ok_or_else(|| Error::invalid(format!("moment at ({},{}) was not computed", p.0, p.1)))
    };
    let plus = get((r.r1 + t.r1, r.r2 + t.r2))?;
    let minus = get((r.r1 - t.r1, r.r2 - t.r2))?;
    let jr = get((r.r1, r.r2))?;
    let jt = get((t.r1, t.r2))?;
    Ok(0.5
        * match (row, col) {
            (Part::Cos, Part::Cos) => plus.re + minus.re - 2.0 * jr.re * jt.re,
            (Part::Cos, Part::Sin) => plus.im - minus.im - 2.0 * jr.re * jt.im,
            (Part::Sin, Part::Cos) => plus.im + minus.im - 2.0 * jt.re * jr.im,
            (Part::Sin, Part::Sin) => minus.re - plus.re - 2.0 * jr.im * jt.im,
        })
}

/// Frequency `r` restricted to margin `k` (the other component zeroed).
fn on_margin(r: FrequencyPair, k: usize) -> FrequencyPair {
    match k {
        0 => FrequencyPair::new(r.r1, 0),
        _ => FrequencyPair::new(0, r.r2),
    }
}

/// Plug-in covariance of `√n Δ_n`, every population moment replaced by its
/// empirical counterpart on the full paired sample.
pub fn sigma_hat(s: &PairedSample, spec: &MultiOrderSpec) -> CovMatrix {
    let rows: Vec<(Part, FrequencyPair)> =
        spec.cos.iter().map(|&f| (Part::Cos, f)).chain(spec.sin.iter().map(|&f| (Part::Sin, f))).collect();

    let mut freqs = Vec::new();
    for &(_, r) in &rows {
        for &(_, t) in &rows {
            for a in [r, on_margin(r, 0), on_margin(r, 1)] {
                for b in [t, on_margin(t, 0), on_margin(t, 1)] {
                    freqs.push((a.r1 + b.r1, a.r2 + b.r2));
                    freqs.push((a.r1 - b.r1, a.r2 - b.r2));
                    freqs.push((a.r1, a.r2));
                    freqs.push((b.r1, b.r2));
                }
            }
        }
    }
    let m = TrigMoments::compute(s, &freqs);

    let d = rows.len();
    let mut out = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let (pi, r) = rows[i];
            let (pj, t) = rows[j];
            let v = match (pi, pj) {
                (Part::Cos, Part::Cos) => cov_cc(&m, r, t),
                (Part::Cos, Part::Sin) => cov_cs(&m, r, t),
                (Part::Sin, Part::Cos) => cov_cs(&m, t, r),
                (Part::Sin, Part::Sin) => cov_ss(&m, r, t),
            };
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    CovMatrix(out)
}

/// Real and imaginary parts of the product of the marginal characteristic
/// functions other than margin `k`, at `r`.
fn others(m: &TrigMoments, r: FrequencyPair, k: usize) -> (f64, f64) {
    let z = match k {
        0 => m.second(r.r2),
        _ => m.first(r.r1),
    }
    .expect("marginal moment computed");
    (z.re, z.im)
}

fn v(m: &TrigMoments, row: Part, col: Part, r: FrequencyPair, t: FrequencyPair) -> f64 {
    v_entry(m, row, col, r, t).expect("moments computed for every sigma entry")
}

fn cov_cc(m: &TrigMoments, r: FrequencyPair, t: FrequencyPair) -> f64 {
    use Part::{Cos as C, Sin as S};
    let mut out = v(m, C, C, r, t);
    for k in 0..2 {
        let (tc, ts) = others(m, t, k);
        let tk = on_margin(t, k);
        out -= tc * v(m, C, C, r, tk) - ts * v(m, C, S, r, tk);
        let (rc, rs) = others(m, r, k);
        let rk = on_margin(r, k);
        out -= rc * v(m, C, C, t, rk) - rs * v(m, C, S, t, rk);
    }
    for k in 0..2 {
        let (rc, rs) = others(m, r, k);
        let rk = on_margin(r, k);
        for q in 0..2 {
            let (tc, ts) = others(m, t, q);
            let tq = on_margin(t, q);
            out += rc * tc * v(m, C, C, rk, tq) - rc * ts * v(m, C, S, rk, tq) - rs * tc * v(m, C, S, tq, rk)
                + rs * ts * v(m, S, S, rk, tq);
        }
    }
    out
}

fn cov_cs(m: &TrigMoments, r: FrequencyPair, t: FrequencyPair) -> f64 {
    use Part::{Cos as C, Sin as S};
    let mut out = v(m, C, S, r, t);
    for k in 0..2 {
        let (tc, ts) = others(m, t, k);
        let tk = on_margin(t, k);
        out -= ts * v(m, C, C, r, tk) + tc * v(m, C, S, r, tk);
        let (rc, rs) = others(m, r, k);
        let rk = on_margin(r, k);
        out -= rc * v(m, C, S, rk, t) - rs * v(m, S, S, rk, t);
    }
    for k in 0..2 {
        let (rc, rs) = others(m, r, k);
        let rk = on_margin(r, k);
        for q in 0..2 {
            let (tc, ts) = others(m, t, q);
            let tq = on_margin(t, q);
            out += rc * ts * v(m, C, C, rk, tq) + rc * tc * v(m, C, S, rk, tq)
                - rs * ts * v(m, C, S, tq, rk)
                - rs * tc * v(m, S, S, rk, tq);
        }
    }
    out
}

fn cov_ss(m: &TrigMoments, r: FrequencyPair, t: FrequencyPair) -> f64 {
    use Part::{Cos as C, Sin as S};
    let mut out = v(m, S, S, r, t);
    for k in 0..2 {
        let (tc, ts) = others(m, t, k);
        let tk = on_margin(t, k);
        out -= ts * v(m, C, S, tk, r) + tc * v(m, S, S, r, tk);
        let (rc, rs) = others(m, r, k);
        let rk = on_margin(r, k);
        out -= rs * v(m, C, S, rk, t) + rc * v(m, S, S, rk, t);
    }
    for k in 0..2 {
        let (rc, rs) = others(m, r, k);
        let rk = on_margin(r, k);
        for q in 0..2 {
            let (tc, ts) = others(m, t, q);
            let tq = on_margin(t, q);
            out += rs * ts * v(m, C, C, rk, tq)
                + rs * tc * v(m, C, S, rk, tq)
                + rc * ts * v(m, C, S, tq, rk)
                + rc * tc * v(m, S, S, rk, tq);
        }
    }
    out
}

/// `n Δ' Σ̂⁻¹ Δ` on a sample taken as-is.
pub(crate) fn quadratic_form(s: &PairedSample, spec: &MultiOrderSpec) -> Result<f64> {
    if spec.has_duplicates() {
        return Err(Error::SingularCovariance(format!("spec {spec} repeats a frequency pair")));
    }
    let sigma = sigma_hat(s, spec).0;
    let eig = sigma.clone().symmetric_eigen();
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    // NaN eigenvalues must also fail
    if min.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) || max / min > MAX_CONDITION {
        return Err(Error::SingularCovariance(format!("eigenvalues in [{min:e}, {max:e}]")));
    }
    let chol = sigma.cholesky().ok_or_else(|| Error::SingularCovariance("non-positive pivot".into()))?;
    let delta = DVector::from_vec(delta_vec(s, spec));
    let x = chol.solve(&delta);
    Ok((s.len() as f64 * delta.dot(&x)).max(0.0))
}

/// Quadratic-form test with χ²_{J+K} calibration.
pub fn multi_test(s: &PairedSample, spec: &MultiOrderSpec, center: bool) -> Result<TestResult> {
    let dim = spec.dim();
    if s.len() < dim + 2 {
        return Err(Error::invalid(format!("multi-order test with {dim} components needs at least {} pairs", dim + 2)));
    }
    let centred;
    let work = if center {
        centred = center_sample(s)?;
        &centred
    } else {
        s
    };
    let statistic = quadratic_form(work, spec)?;
    let mut params = BTreeMap::new();
    params.insert("spec".to_string(), spec.to_string());
    params.insert("center".to_string(), center.to_string());
    Ok(TestResult {
        statistic,
        p_value: chisq_sf(statistic, dim as u64),
        method: Method::AsymptoticChiSquare,
        df_or_b: dim as u64,
        n: s.len(),
        params,
    })
}
