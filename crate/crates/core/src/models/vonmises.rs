//! Von Mises sampling, distribution function and quantile.

use std::f64::consts::{PI, TAU};

use rand::Rng;

use crate::circ::{wrap, Angle};
use crate::error::{Error, Result};
use crate::rng::substream;

/// Below this concentration the distribution is sampled as uniform.
const UNIFORM_KAPPA: f64 = 1e-8;

/// Zero-mean von Mises numerics for a fixed concentration.
///
/// The distribution function uses the Fourier expansion
/// `F(θ) = (θ + π)/(2π) + (1/π) Σ_p A_p sin(pθ)/p` with `A_p = I_p(κ)/I_0(κ)`,
/// the Bessel ratios obtained by backward recurrence.
#[derive(Debug, Clone)]
pub struct VonMises {
    kappa: f64,
    /// `A_p / p` for `p = 1, 2, …`.
    coeffs: Vec<f64>,
    norm: f64,
}

impl VonMises {
    pub fn new(kappa: f64) -> Result<Self> {
        if !(kappa.is_finite() && kappa >= 0.0) {
            return Err(Error::invalid(format!("concentration {kappa} must be non-negative")));
        }
        let ratios = bessel_ratios(kappa);
        let coeffs = ratios.iter().enumerate().map(|(i, a)| a / (i + 1) as f64).collect();
        Ok(Self { kappa, coeffs, norm: TAU * bessel_i0_scaled(kappa) })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Density of the zero-mean distribution.
    pub fn density(&self, theta: f64) -> f64 {
        (self.kappa * (theta.cos() - 1.0)).exp() / self.norm
    }

    /// `P(Θ ≤ θ)` for `θ ∈ [-π, π]`, Θ zero-mean von Mises.
    pub fn cdf(&self, theta: f64) -> f64 {
        let theta = theta.clamp(-PI, PI);
        let (s1, c1) = theta.sin_cos();
        // sin(pθ) by the angle-addition recurrence
        let (mut s, mut c) = (s1, c1);
        let mut acc = 0.0;
        for &a in &self.coeffs {
            acc += a * s;
            let next_s = s * c1 + c * s1;
            c = c * c1 - s * s1;
            s = next_s;
        }
        ((theta + PI) / TAU + acc / PI).clamp(0.0, 1.0)
    }

    /// Smallest `θ ∈ [-π, π)` with `F(θ) = u`, by safeguarded Newton steps
    /// inside a shrinking bracket.
    pub fn quantile(&self, u: f64) -> Result<Angle> {
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::invalid(format!("probability {u} outside [0, 1]")));
        }
        if u == 0.0 {
            return Angle::new(-PI);
        }
        if u == 1.0 {
            return Angle::new(f64::from_bits(PI.to_bits() - 1));
        }
        let (mut lo, mut hi) = (-PI, PI);
        let mut x = -PI + TAU * u;
        for _ in 0..100 {
            let f = self.cdf(x) - u;
            if f.abs() < 1e-14 {
                return Angle::new(x);
            }
            if f < 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            if hi - lo < 1e-13 {
                return Angle::new(0.5 * (lo + hi));
            }
            let d = self.density(x);
            let step = x - f / d;
            x = if d > 0.0 && step > lo && step < hi { step } else { 0.5 * (lo + hi) };
        }
        Err(Error::QuantileConvergence(u))
    }

    /// One draw centred at `mu`, by the Best–Fisher wrapped-Cauchy envelope.
    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R, mu: f64) -> f64 {
        sample_vm_one(rng, mu, self.kappa)
    }
}

/// One von Mises(μ, κ) draw, Best–Fisher rejection.
pub(crate) fn sample_vm_one<R: Rng + ?Sized>(rng: &mut R, mu: f64, kappa: f64) -> f64 {
    if kappa < UNIFORM_KAPPA {
        return rng.gen::<f64>() * TAU - PI;
    }
    let tau = 1.0 + (1.0 + 4.0 * kappa * kappa).sqrt();
    let rho = (tau - (2.0 * tau).sqrt()) / (2.0 * kappa);
    let r = (1.0 + rho * rho) / (2.0 * rho);
    loop {
        let u1: f64 = rng.gen();
        let u2: f64 = rng.gen();
        let u3: f64 = rng.gen();
        let z = (PI * u1).cos();
        let f = (1.0 + r * z) / (r + z);
        let c = kappa * (r - f);
        if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
            let t = f.clamp(-1.0, 1.0).acos();
            let t = if u3 > 0.5 { t } else { -t };
            return wrap(mu + t);
        }
    }
}

/// `n` i.i.d. von Mises(μ, κ) draws from stream 0 of `seed`.
pub fn sample_vm(n: usize, mu: f64, kappa: f64, seed: u64) -> Result<Vec<f64>> {
    if !(kappa.is_finite() && kappa >= 0.0) {
        return Err(Error::invalid(format!("concentration {kappa} must be non-negative")));
    }
    if !mu.is_finite() {
        return Err(Error::NonFinite(mu));
    }
    let mut rng = substream(seed, 0);
    Ok((0..n).map(|_| sample_vm_one(&mut rng, mu, kappa)).collect())
}

/// Distribution function of the zero-mean von Mises with concentration κ.
pub fn vm_cdf(theta: f64, kappa: f64) -> Result<f64> {
    Ok(VonMises::new(kappa)?.cdf(theta))
}

/// Quantile function of the zero-mean von Mises with concentration κ.
pub fn vm_quantile(u: f64, kappa: f64) -> Result<Angle> {
    VonMises::new(kappa)?.quantile(u)
}

/// `I_p(κ)/I_0(κ)` for `p = 1, 2, …` until negligible.
fn bessel_ratios(kappa: f64) -> Vec<f64> {
    if kappa == 0.0 {
        return Vec::new();
    }
    // backward recurrence for r_p = I_p / I_{p-1}: r_p = 1 / (2p/κ + r_{p+1})
    let start = (kappa + 30.0 + 10.0 * kappa.sqrt()).ceil() as usize + 20;
    let mut r = vec![0.0; start + 1];
    let mut next = 0.0;
    for p in (1..=start).rev() {
        next = 1.0 / (2.0 * p as f64 / kappa + next);
        r[p] = next;
    }
    let mut out = Vec::new();
    let mut a = 1.0;
    for &rp in &r[1..] {
        a *= rp;
        if a < 1e-18 {
            break;
        }
        out.push(a);
    }
    out
}

/// `e^{-κ} I_0(κ)`.
fn bessel_i0_scaled(kappa: f64) -> f64 {
    if kappa < 15.0 {
        // power series
        let q = kappa * kappa / 4.0;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0;
        while term > 1e-17 * sum {
            term *= q / (k * k);
            sum += term;
            k += 1.0;
        }
        sum * (-kappa).exp()
    } else {
        // asymptotic expansion
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..30 {
            let kf = k as f64;
            term *= (2.0 * kf - 1.0).powi(2) / (8.0 * kappa * kf);
            if term < 1e-17 {
                break;
            }
            sum += term;
        }
        sum / (TAU * kappa).sqrt()
    }
}
