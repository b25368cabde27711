//! Omnibus characteristic-function test with the Poisson kernel.
//!
//! `T_{n,λ} = n Σ_{r1,r2} |φ̂(r1,r2) − φ̂₁(r1)φ̂₂(r2)|² v(r1) v(r2)`, with `v`
//! the symmetrised Poisson(λ) mass function, has the closed form
//!
//! ```text
//! T = (1/n) Σ_jk K¹_jk K²_jk + (1/n³) (Σ_jk K¹_jk)(Σ_jk K²_jk) − (2/n²) Σ_j R¹_j R²_j
//! ```
//!
//! where `Kᵐ_jk = cos(λ sin θ) e^{λ(cos θ − 1)}` at `θ = θᵐ_j − θᵐ_k` and `Rᵐ`
//! are the row sums of `Kᵐ`. It depends on the sample only through pairwise
//! differences and is calibrated by permuting the second margin.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circ::PairedSample;
use crate::error::{Error, Result};
use crate::moments::{joint_ecf, marginal_ecf};
use crate::result::{Method, TestResult};
use crate::rng::substream;

/// Negative statistic values down to this are rounding noise.
const CLAMP_TOL: f64 = 1e-10;

/// Poisson kernel with parameter `λ > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct PoissonKernel {
    lambda: f64,
}

impl PoissonKernel {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::invalid(format!("Poisson parameter {lambda} must be positive")));
        }
        Ok(Self { lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Whether the kernel is non-negative on the whole circle (`λ ≤ π/2`).
    pub fn is_nonnegative(&self) -> bool {
        self.lambda <= FRAC_PI_2
    }

    #[inline]
    pub fn eval(&self, theta: f64) -> f64 {
        let (s, c) = theta.sin_cos();
        self.eval_sc(s, c)
    }

    #[inline]
    fn eval_sc(&self, sin: f64, cos: f64) -> f64 {
        (self.lambda * sin).cos() * (self.lambda * (cos - 1.0)).exp()
    }

    /// Symmetrised weight `v(r)`: `f(0)` at zero, `f(|r|)/2` elsewhere, `f`
    /// the Poisson(λ) mass function.
    pub fn weight(&self, r: i64) -> f64 {
        let k = r.unsigned_abs();
        let pmf = poisson_pmf(self.lambda, k);
        if k == 0 {
            pmf
        } else {
            0.5 * pmf
        }
    }
}

impl TryFrom<f64> for PoissonKernel {
    type Error = Error;
    fn try_from(x: f64) -> Result<Self> {
        Self::new(x)
    }
}

impl From<PoissonKernel> for f64 {
    fn from(k: PoissonKernel) -> f64 {
        k.lambda
    }
}

/// `cos(λ sin θ) e^{λ(cos θ − 1)}`.
pub fn poisson_kernel(theta: f64, kernel: PoissonKernel) -> f64 {
    kernel.eval(theta)
}

fn poisson_pmf(lambda: f64, k: u64) -> f64 {
    let kf = k as f64;
    (kf * lambda.ln() - lambda - ln_factorial(k)).exp()
}

fn ln_factorial(k: u64) -> f64 {
    (1..=k).map(|i| (i as f64).ln()).sum()
}

/// Poisson(λ) mass strictly above `r`.
pub fn poisson_tail(lambda: f64, r: usize) -> f64 {
    let mut k = r as u64 + 1;
    let mut p = poisson_pmf(lambda, k);
    let mut tail = 0.0;
    while p > 0.0 && (p > tail * 1e-17 || (k as f64) < lambda) {
        tail += p;
        k += 1;
        p *= lambda / k as f64;
    }
    tail
}

/// Kernel matrices of both margins with their row sums.
struct KernelPair {
    n: usize,
    k1: Vec<f64>,
    k2: Vec<f64>,
    row1: Vec<f64>,
    row2: Vec<f64>,
    /// `(1/n³)(Σ K¹)(Σ K²)`, unchanged by permutations of either margin.
    cross_term: f64,
}

fn kernel_matrix(angles: &[f64], kernel: PoissonKernel) -> Vec<f64> {
    let n = angles.len();
    let sc: Vec<(f64, f64)> = angles.iter().map(|x| x.sin_cos()).collect();
    let mut k = vec![0.0; n * n];
    for j in 0..n {
        k[j * n + j] = 1.0;
        let (sj, cj) = sc[j];
        for l in (j + 1)..n {
            let (sl, cl) = sc[l];
            // sin/cos of θ_j − θ_l
            let v = kernel.eval_sc(sj * cl - cj * sl, cj * cl + sj * sl);
            k[j * n + l] = v;
            k[l * n + j] = v;
        }
    }
    k
}

fn row_sums(k: &[f64], n: usize) -> Vec<f64> {
    k.chunks(n).map(|row| row.iter().sum()).collect()
}

impl KernelPair {
    fn new(s: &PairedSample, kernel: PoissonKernel) -> Self {
        let n = s.len();
        let k1 = kernel_matrix(s.first(), kernel);
        let k2 = kernel_matrix(s.second(), kernel);
        let row1 = row_sums(&k1, n);
        let row2 = row_sums(&k2, n);
        let nf = n as f64;
        let cross_term = row1.iter().sum::<f64>() * row2.iter().sum::<f64>() / (nf * nf * nf);
        Self { n, k1, k2, row1, row2, cross_term }
    }

    /// Statistic with the second margin re-indexed by `perm`.
    fn statistic(&self, perm: &[usize]) -> f64 {
        let n = self.n;
        let nf = n as f64;
        let mut matched = 0.0;
        let mut rows = 0.0;
        for j in 0..n {
            let r1 = &self.k1[j * n..(j + 1) * n];
            let pj = perm[j];
            let r2 = &self.k2[pj * n..(pj + 1) * n];
            let mut acc = 0.0;
            for (a, &pk) in r1.iter().zip(perm) {
                acc += a * r2[pk];
            }
            matched += acc;
            rows += self.row1[j] * self.row2[pj];
        }
        let t = matched / nf + self.cross_term - 2.0 * rows / (nf * nf);
        debug_assert!(t >= -CLAMP_TOL, "statistic {t} below clamp tolerance");
        t.max(0.0)
    }
}

/// Closed-form `T_{n,λ}`.
pub fn t_omnibus(s: &PairedSample, kernel: PoissonKernel) -> f64 {
    let pair = KernelPair::new(s, kernel);
    let identity: Vec<usize> = (0..s.len()).collect();
    pair.statistic(&identity)
}

/// Smallest truncation whose Poisson tail is below `tol`.
pub fn series_truncation(kernel: PoissonKernel, tol: f64) -> usize {
    let mut r = 0;
    while poisson_tail(kernel.lambda, r) >= tol {
        r += 1;
    }
    r
}

/// `T_{n,λ}` by direct summation of `n |D(r1,r2)|² v(r1) v(r2)` over
/// `|r1|, |r2| ≤ truncation`. Fails when the neglected Poisson tail is not
/// below `1e-12`.
pub fn t_omnibus_series(s: &PairedSample, kernel: PoissonKernel, truncation: usize) -> Result<f64> {
    const TOL: f64 = 1e-12;
    let tail = poisson_tail(kernel.lambda, truncation);
    if tail >= TOL {
        return Err(Error::Truncation { truncation, tail, tolerance: TOL });
    }
    let r = truncation as i64;
    let m1: Vec<Complex64> = (-r..=r).map(|a| marginal_ecf(s.first(), a)).collect();
    let m2: Vec<Complex64> = (-r..=r).map(|b| marginal_ecf(s.second(), b)).collect();
    let mut total = 0.0;
    for a in -r..=r {
        let wa = kernel.weight(a);
        for b in -r..=r {
            let d = joint_ecf(s, a, b) - m1[(a + r) as usize] * m2[(b + r) as usize];
            total += d.norm_sqr() * wa * kernel.weight(b);
        }
    }
    Ok(s.len() as f64 * total)
}

/// Number of permutations and the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PermutationPlan {
    pub permutations: usize,
    pub seed: u64,
}

impl PermutationPlan {
    pub fn new(permutations: usize, seed: u64) -> Result<Self> {
        if permutations == 0 {
            return Err(Error::invalid("at least one permutation is required"));
        }
        Ok(Self { permutations, seed })
    }
}

/// Permutation test for `T_{n,λ}`.
///
/// Both kernel matrices are built once; permutation `b` (drawn from
/// substream `b` of the plan's seed) only re-indexes the second one. The
/// p-value is the fraction of permuted statistics strictly above the
/// observed one, so it can be exactly zero.
pub fn permutation_test(s: &PairedSample, kernel: PoissonKernel, plan: PermutationPlan) -> Result<TestResult> {
    let n = s.len();
    if n < 2 {
        return Err(Error::invalid("permutation test needs at least two pairs"));
    }
    if plan.permutations == 0 {
        return Err(Error::invalid("at least one permutation is required"));
    }
    let pair = KernelPair::new(s, kernel);
    let identity: Vec<usize> = (0..n).collect();
    let observed = pair.statistic(&identity);

    let exceed = (0..plan.permutations as u64)
        .into_par_iter()
        .map_init(
            || identity.clone(),
            |perm, b| {
                perm.copy_from_slice(&identity);
                perm.shuffle(&mut substream(plan.seed, b));
                observed < pair.statistic(perm)
            },
        )
        .filter(|&hit| hit)
        .count();

    let mut params = BTreeMap::new();
    params.insert("lambda".to_string(), kernel.lambda.to_string());
    params.insert("seed".to_string(), plan.seed.to_string());
    if !kernel.is_nonnegative() {
        params.insert("kernel_sign".to_string(), "may-be-negative".to_string());
    }
    Ok(TestResult {
        statistic: observed,
        p_value: exceed as f64 / plan.permutations as f64,
        method: Method::Permutation,
        df_or_b: plan.permutations as u64,
        n,
        params,
    })
}
