//! Toroidal alternative models and their exact samplers.

mod vonmises;

use std::f64::consts::{PI, TAU};
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::circ::{wrap, PairedSample};
use crate::error::{Error, Result};
use crate::rng::substream;

pub use vonmises::{sample_vm, vm_cdf, vm_quantile, VonMises};

/// Sign of the cosine-model interaction term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interaction {
    /// `κ3 cos(θ1 − θ2)`
    Positive,
    /// `κ3 cos(θ1 + θ2)`
    Negative,
}

impl fmt::Display for Interaction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Interaction::Positive => "positive",
            Interaction::Negative => "negative",
        })
    }
}

impl std::str::FromStr for Interaction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "positive" | "+" => Ok(Interaction::Positive),
            "negative" | "-" => Ok(Interaction::Negative),
            _ => Err(Error::invalid(format!("unknown interaction {s:?}"))),
        }
    }
}

/// A toroidal model. The dependence parameter is `p`, `rho`, `kappa3` or
/// `kappa_g`; setting it to zero gives independent margins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", try_from = "FlatModel")]
pub enum ModelSpec {
    /// Parabolic functional dependence with uniform first margin.
    Pb { p: f64 },
    /// Bivariate wrapped Cauchy.
    Bwc { rho1: f64, rho2: f64, rho: f64 },
    /// Bivariate cosine von Mises.
    Bcvm { kappa1: f64, kappa2: f64, kappa3: f64, interaction: Interaction },
    /// Von Mises margins joined through a von Mises link on `2π(F1 − F2)`.
    Bvm { kappa1: f64, kappa2: f64, mu_g: f64, kappa_g: f64 },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Family {
    Pb,
    Bwc,
    Bcvm,
    Bvm,
}

/// Field-by-field form of [`ModelSpec`] so that parse errors carry the
/// offending key.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FlatModel {
    #[serde(rename = "type")]
    family: Family,
    p: Option<f64>,
    rho1: Option<f64>,
    rho2: Option<f64>,
    rho: Option<f64>,
    kappa1: Option<f64>,
    kappa2: Option<f64>,
    kappa3: Option<f64>,
    interaction: Option<Interaction>,
    mu_g: Option<f64>,
    kappa_g: Option<f64>,
}

impl TryFrom<FlatModel> for ModelSpec {
    type Error = String;

    fn try_from(f: FlatModel) -> std::result::Result<Self, String> {
        let given = [
            ("p", f.p.is_some()),
            ("rho1", f.rho1.is_some()),
            ("rho2", f.rho2.is_some()),
            ("rho", f.rho.is_some()),
            ("kappa1", f.kappa1.is_some()),
            ("kappa2", f.kappa2.is_some()),
            ("kappa3", f.kappa3.is_some()),
            ("interaction", f.interaction.is_some()),
            ("mu_g", f.mu_g.is_some()),
            ("kappa_g", f.kappa_g.is_some()),
        ];
        let (name, allowed): (&str, &[&str]) = match f.family {
            Family::Pb => ("pb", &["p"]),
            Family::Bwc => ("bwc", &["rho1", "rho2", "rho"]),
            Family::Bcvm => ("bcvm", &["kappa1", "kappa2", "kappa3", "interaction"]),
            Family::Bvm => ("bvm", &["kappa1", "kappa2", "mu_g", "kappa_g"]),
        };
        if let Some((k, _)) = given.iter().find(|(k, set)| *set && !allowed.contains(k)) {
            return Err(format!("field `{k}` does not apply to model `{name}`"));
        }
        let req = |v: Option<f64>, k: &str| v.ok_or_else(|| format!("missing field `{k}` for model `{name}`"));
        Ok(match f.family {
            Family::Pb => ModelSpec::Pb { p: req(f.p, "p")? },
            Family::Bwc => {
                ModelSpec::Bwc { rho1: req(f.rho1, "rho1")?, rho2: req(f.rho2, "rho2")?, rho: req(f.rho, "rho")? }
            }
            Family::Bcvm => ModelSpec::Bcvm {
                kappa1: req(f.kappa1, "kappa1")?,
                kappa2: req(f.kappa2, "kappa2")?,
                kappa3: req(f.kappa3, "kappa3")?,
                interaction: f.interaction.unwrap_or(Interaction::Positive),
            },
            Family::Bvm => ModelSpec::Bvm {
                kappa1: req(f.kappa1, "kappa1")?,
                kappa2: req(f.kappa2, "kappa2")?,
                mu_g: f.mu_g.unwrap_or(0.0),
                kappa_g: req(f.kappa_g, "kappa_g")?,
            },
        })
    }
}

fn check(ok: bool, what: &str, v: f64) -> Result<()> {
    if ok && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{what} = {v} out of range")))
    }
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ModelSpec::Pb { p } => check((0.0..=1.0).contains(&p), "p", p),
            ModelSpec::Bwc { rho1, rho2, rho } => {
                check((0.0..1.0).contains(&rho1), "rho1", rho1)?;
                check((0.0..1.0).contains(&rho2), "rho2", rho2)?;
                check(rho.abs() < 1.0, "rho", rho)
            }
            ModelSpec::Bcvm { kappa1, kappa2, kappa3, .. } => {
                check(kappa1 >= 0.0, "kappa1", kappa1)?;
                check(kappa2 >= 0.0, "kappa2", kappa2)?;
                check(true, "kappa3", kappa3)
            }
            ModelSpec::Bvm { kappa1, kappa2, mu_g, kappa_g } => {
                check(kappa1 >= 0.0, "kappa1", kappa1)?;
                check(kappa2 >= 0.0, "kappa2", kappa2)?;
                check(true, "mu_g", mu_g)?;
                check(kappa_g >= 0.0, "kappa_g", kappa_g)
            }
        }
    }

    /// Short family name: `pb`, `bwc`, `bcvm` or `bvm`.
    pub fn family(&self) -> &'static str {
        match self {
            ModelSpec::Pb { .. } => "pb",
            ModelSpec::Bwc { .. } => "bwc",
            ModelSpec::Bcvm { .. } => "bcvm",
            ModelSpec::Bvm { .. } => "bvm",
        }
    }

    pub fn dependence(&self) -> f64 {
        match *self {
            ModelSpec::Pb { p } => p,
            ModelSpec::Bwc { rho, .. } => rho,
            ModelSpec::Bcvm { kappa3, .. } => kappa3,
            ModelSpec::Bvm { kappa_g, .. } => kappa_g,
        }
    }

    /// Same model with the dependence parameter replaced.
    pub fn with_dependence(&self, x: f64) -> Result<Self> {
        let mut out = *self;
        match &mut out {
            ModelSpec::Pb { p } => *p = x,
            ModelSpec::Bwc { rho, .. } => *rho = x,
            ModelSpec::Bcvm { kappa3, .. } => *kappa3 = x,
            ModelSpec::Bvm { kappa_g, .. } => *kappa_g = x,
        }
        out.validate()?;
        Ok(out)
    }

    /// `n` draws from stream 0 of `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<PairedSample> {
        self.sample_with(&mut substream(seed, 0), n)
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Result<PairedSample> {
        self.validate()?;
        match *self {
            ModelSpec::Pb { p } => Ok(pb_draws(rng, n, p)),
            ModelSpec::Bwc { rho1, rho2, rho } => Ok(bwc_draws(rng, n, rho1, rho2, rho)),
            ModelSpec::Bcvm { kappa1, kappa2, kappa3, interaction } => {
                Ok(bcvm_draws(rng, n, kappa1, kappa2, kappa3, interaction))
            }
            ModelSpec::Bvm { kappa1, kappa2, mu_g, kappa_g } => bvm_draws(rng, n, kappa1, kappa2, mu_g, kappa_g),
        }
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ModelSpec::Pb { p } => write!(f, "pb(p={p})"),
            ModelSpec::Bwc { rho1, rho2, rho } => write!(f, "bwc(rho1={rho1},rho2={rho2},rho={rho})"),
            ModelSpec::Bcvm { kappa1, kappa2, kappa3, interaction } => {
                write!(f, "bcvm(kappa1={kappa1},kappa2={kappa2},kappa3={kappa3},interaction={interaction})")
            }
            ModelSpec::Bvm { kappa1, kappa2, mu_g, kappa_g } => {
                write!(f, "bvm(kappa1={kappa1},kappa2={kappa2},mu_g={mu_g},kappa_g={kappa_g})")
            }
        }
    }
}

fn uniform_angle<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    wrap(rng.gen::<f64>() * TAU - PI)
}

pub fn sample_pb(n: usize, p: f64, seed: u64) -> Result<PairedSample> {
    ModelSpec::Pb { p }.sample(n, seed)
}

pub fn sample_bwc(n: usize, rho1: f64, rho2: f64, rho: f64, seed: u64) -> Result<PairedSample> {
    ModelSpec::Bwc { rho1, rho2, rho }.sample(n, seed)
}

pub fn sample_bcvm(
    n: usize,
    kappa1: f64,
    kappa2: f64,
    kappa3: f64,
    interaction: Interaction,
    seed: u64,
) -> Result<PairedSample> {
    ModelSpec::Bcvm { kappa1, kappa2, kappa3, interaction }.sample(n, seed)
}

pub fn sample_bvm(n: usize, kappa1: f64, kappa2: f64, mu_g: f64, kappa_g: f64, seed: u64) -> Result<PairedSample> {
    ModelSpec::Bvm { kappa1, kappa2, mu_g, kappa_g }.sample(n, seed)
}

fn pb_draws<R: Rng + ?Sized>(rng: &mut R, n: usize, p: f64) -> PairedSample {
    let mut first = Vec::with_capacity(n);
    let mut second = Vec::with_capacity(n);
    for _ in 0..n {
        let t = uniform_angle(rng);
        let u = uniform_angle(rng);
        first.push(t);
        second.push(wrap(2.0 * (p * t * t + (1.0 - p) * u * u) / PI - PI));
    }
    PairedSample::from_wrapped(first, second)
}

// ---- bivariate wrapped Cauchy ----

/// Density constants `(c, c0, c1, c2, c3, c4)` of the bivariate wrapped
/// Cauchy: `f = c / (c0 − c1 cos θ1 − c2 cos θ2 − c3 cos θ1 cos θ2 − c4 sin θ1 sin θ2)`.
pub fn bwc_constants(rho1: f64, rho2: f64, rho: f64) -> [f64; 6] {
    let (a, b, r) = (rho1 * rho1, rho2 * rho2, rho * rho);
    let ar = rho.abs();
    [
        (1.0 - r) * (1.0 - a) * (1.0 - b) / (4.0 * PI * PI),
        (1.0 + r) * (1.0 + a) * (1.0 + b) - 8.0 * ar * rho1 * rho2,
        2.0 * (1.0 + r) * rho1 * (1.0 + b) - 4.0 * ar * rho2 * (1.0 + a),
        2.0 * (1.0 + r) * rho2 * (1.0 + a) - 4.0 * ar * rho1 * (1.0 + b),
        -4.0 * (1.0 + r) * rho1 * rho2 + 2.0 * ar * (1.0 + a) * (1.0 + b),
        2.0 * rho * (1.0 - a) * (1.0 - b),
    ]
}

pub fn bwc_density(t1: f64, t2: f64, rho1: f64, rho2: f64, rho: f64) -> f64 {
    let [c, c0, c1, c2, c3, c4] = bwc_constants(rho1, rho2, rho);
    let (s1, k1) = t1.sin_cos();
    let (s2, k2) = t2.sin_cos();
    c / (c0 - c1 * k1 - c2 * k2 - c3 * k1 * k2 - c4 * s1 * s2)
}

/// Wrapped Cauchy `WC(m, r)` by inversion of a uniform `u`.
fn wc_inverse(u: f64, m: f64, r: f64) -> f64 {
    wrap(m + 2.0 * (((1.0 - r) / (1.0 + r)) * (PI * (u - 0.5)).tan()).atan())
}

fn bwc_draws<R: Rng + ?Sized>(rng: &mut R, n: usize, rho1: f64, rho2: f64, rho: f64) -> PairedSample {
    let [_, c0, c1, c2, c3, c4] = bwc_constants(rho1, rho2, rho);
    let mut first = Vec::with_capacity(n);
    let mut second = Vec::with_capacity(n);
    for _ in 0..n {
        let t1 = wc_inverse(rng.gen(), 0.0, rho1);
        // given θ1 the density in θ2 is ∝ 1/(A − R cos(θ2 − m)), a wrapped Cauchy
        let (s1, k1) = t1.sin_cos();
        let a = c0 - c1 * k1;
        let b = c2 + c3 * k1;
        let c = c4 * s1;
        let rr = b.hypot(c);
        let m = c.atan2(b);
        let r = rr / (a + (a * a - rr * rr).max(0.0).sqrt());
        first.push(t1);
        second.push(wc_inverse(rng.gen(), m, r));
    }
    PairedSample::from_wrapped(first, second)
}

// ---- bivariate cosine von Mises ----

/// Unnormalised cosine-model density.
pub fn bcvm_kernel(t1: f64, t2: f64, kappa1: f64, kappa2: f64, kappa3: f64, interaction: Interaction) -> f64 {
    let inter = match interaction {
        Interaction::Positive => t1 - t2,
        Interaction::Negative => t1 + t2,
    };
    (kappa1 * t1.cos() + kappa2 * t2.cos() + kappa3 * inter.cos()).exp()
}

/// Normalising constant of [`bcvm_kernel`] by the periodic trapezoid rule
/// on a `grid × grid` lattice.
pub fn bcvm_normalizer(kappa1: f64, kappa2: f64, kappa3: f64, interaction: Interaction, grid: usize) -> f64 {
    let h = TAU / grid as f64;
    let mut z = 0.0;
    for i in 0..grid {
        let t1 = -PI + i as f64 * h;
        for j in 0..grid {
            z += bcvm_kernel(t1, -PI + j as f64 * h, kappa1, kappa2, kappa3, interaction);
        }
    }
    z * h * h
}

/// Expected acceptance rate of the uniform-proposal rejection sampler.
pub fn bcvm_acceptance_rate(kappa1: f64, kappa2: f64, kappa3: f64, interaction: Interaction) -> f64 {
    let z = bcvm_normalizer(kappa1, kappa2, kappa3, interaction, 256);
    z / (TAU * TAU * (kappa1 + kappa2 + kappa3.abs()).exp())
}

fn bcvm_draws<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    kappa1: f64,
    kappa2: f64,
    kappa3: f64,
    interaction: Interaction,
) -> PairedSample {
    let mut first = Vec::with_capacity(n);
    let mut second = Vec::with_capacity(n);
    let bound = kappa1 + kappa2 + kappa3.abs();
    while first.len() < n {
        let t1 = uniform_angle(rng);
        let t2 = uniform_angle(rng);
        let u: f64 = rng.gen();
        let inter = match interaction {
            Interaction::Positive => t1 - t2,
            Interaction::Negative => t1 + t2,
        };
        let log_ratio = kappa1 * t1.cos() + kappa2 * t2.cos() + kappa3 * inter.cos() - bound;
        if u.ln() <= log_ratio {
            first.push(t1);
            second.push(t2);
        }
    }
    PairedSample::from_wrapped(first, second)
}

// ---- von Mises margins with von Mises link ----

fn bvm_draws<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    kappa1: f64,
    kappa2: f64,
    mu_g: f64,
    kappa_g: f64,
) -> Result<PairedSample> {
    Ok(bvm_draws_with_link(rng, n, kappa1, kappa2, mu_g, kappa_g)?.0)
}

fn bvm_draws_with_link<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    kappa1: f64,
    kappa2: f64,
    mu_g: f64,
    kappa_g: f64,
) -> Result<(PairedSample, Vec<f64>)> {
    let m1 = VonMises::new(kappa1)?;
    let m2 = VonMises::new(kappa2)?;
    let link = VonMises::new(kappa_g)?;
    let mut first = Vec::with_capacity(n);
    let mut second = Vec::with_capacity(n);
    let mut omegas = Vec::with_capacity(n);
    for _ in 0..n {
        let t1 = m1.sample_one(rng, 0.0);
        let omega = link.sample_one(rng, mu_g);
        // F2(θ2) = F1(θ1) − ω/2π (mod 1)
        let u2 = (m1.cdf(t1) - omega / TAU).rem_euclid(1.0);
        let t2 = m2.quantile(u2)?.value();
        first.push(t1);
        second.push(wrap(t2));
        omegas.push(omega);
    }
    Ok((PairedSample::from_wrapped(first, second), omegas))
}

/// Like [`sample_bvm`], also returning the link angle `ω` of each draw, for
/// which `2π{F1(θ1) − F2(θ2)} = ω` modulo `2π`.
pub fn sample_bvm_with_link(
    n: usize,
    kappa1: f64,
    kappa2: f64,
    mu_g: f64,
    kappa_g: f64,
    seed: u64,
) -> Result<(PairedSample, Vec<f64>)> {
    ModelSpec::Bvm { kappa1, kappa2, mu_g, kappa_g }.validate()?;
    bvm_draws_with_link(&mut substream(seed, 0), n, kappa1, kappa2, mu_g, kappa_g)
}
