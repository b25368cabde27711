//! Empirical trigonometric moments at integer frequencies.

use std::collections::HashMap;

use num_complex::Complex64;

use crate::circ::PairedSample;

/// Empirical cosine and sine moments of a paired sample.
///
/// Marginal moments `Ĵ_jc(r) + i Ĵ_js(r)` and joint addition moments
/// `Ĵ_c(r1, r2) + i Ĵ_s(r1, r2)` are stored as complex numbers; lookups at
/// negated frequencies are answered by conjugation.
#[derive(Debug, Clone)]
pub struct TrigMoments {
    n: usize,
    first: HashMap<i64, Complex64>,
    second: HashMap<i64, Complex64>,
    joint: HashMap<(i64, i64), Complex64>,
}

/// Mean of `exp(i r θ)` over a column.
pub(crate) fn marginal_ecf(angles: &[f64], r: i64) -> Complex64 {
    if r == 0 {
        return Complex64::new(1.0, 0.0);
    }
    let rf = r as f64;
    let (c, s) = angles.iter().fold((0.0, 0.0), |(c, s), &x| {
        let (sx, cx) = (rf * x).sin_cos();
        (c + cx, s + sx)
    });
    let n = angles.len() as f64;
    Complex64::new(c / n, s / n)
}

/// Mean of `exp(i (r1 θ¹ + r2 θ²))` over the sample.
pub(crate) fn joint_ecf(s: &PairedSample, r1: i64, r2: i64) -> Complex64 {
    if r1 == 0 && r2 == 0 {
        return Complex64::new(1.0, 0.0);
    }
    let (a, b) = (r1 as f64, r2 as f64);
    let (c, sn) = s.pairs().fold((0.0, 0.0), |(c, sn), (x, y)| {
        let (sx, cx) = (a * x + b * y).sin_cos();
        (c + cx, sn + sx)
    });
    let n = s.len() as f64;
    Complex64::new(c / n, sn / n)
}

impl TrigMoments {
    /// Computes joint moments at every requested `(r1, r2)` together with
    /// the marginal moments at `r1` and `r2`. Marginals are summed directly.
    pub fn compute(s: &PairedSample, freqs: &[(i64, i64)]) -> Self {
        let mut m = TrigMoments { n: s.len(), first: HashMap::new(), second: HashMap::new(), joint: HashMap::new() };
        for &(r1, r2) in freqs {
            let key = canonical(r1, r2);
            if !m.joint.contains_key(&key) && !m.joint.contains_key(&(-key.0, -key.1)) {
                m.joint.insert(key, joint_ecf(s, key.0, key.1));
            }
            let a = r1.abs();
            m.first.entry(a).or_insert_with(|| marginal_ecf(s.first(), a));
            let b = r2.abs();
            m.second.entry(b).or_insert_with(|| marginal_ecf(s.second(), b));
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `Ĵ_1c(r) + i Ĵ_1s(r)`, if computed.
    pub fn first(&self, r: i64) -> Option<Complex64> {
        lookup1(&self.first, r)
    }

    /// `Ĵ_2c(r) + i Ĵ_2s(r)`, if computed.
    pub fn second(&self, r: i64) -> Option<Complex64> {
        lookup1(&self.second, r)
    }

    /// `Ĵ_c(r1, r2) + i Ĵ_s(r1, r2)`, if computed. Pure marginal
    /// frequencies `(r, 0)` and `(0, r)` fall back to the marginal tables.
    pub fn joint(&self, r1: i64, r2: i64) -> Option<Complex64> {
        if r1 == 0 && r2 == 0 {
            return Some(Complex64::new(1.0, 0.0));
        }
        if let Some(z) = self.joint.get(&(r1, r2)) {
            return Some(*z);
        }
        if let Some(z) = self.joint.get(&(-r1, -r2)) {
            return Some(z.conj());
        }
        match (r1, r2) {
            (0, b) => self.second(b),
            (a, 0) => self.first(a),
            _ => None,
        }
    }

    pub fn j1c(&self, r: i64) -> Option<f64> {
        self.first(r).map(|z| z.re)
    }
    pub fn j1s(&self, r: i64) -> Option<f64> {
        self.first(r).map(|z| z.im)
    }
    pub fn j2c(&self, r: i64) -> Option<f64> {
        self.second(r).map(|z| z.re)
    }
    pub fn j2s(&self, r: i64) -> Option<f64> {
        self.second(r).map(|z| z.im)
    }
    pub fn jc(&self, r1: i64, r2: i64) -> Option<f64> {
        self.joint(r1, r2).map(|z| z.re)
    }
    pub fn js(&self, r1: i64, r2: i64) -> Option<f64> {
        self.joint(r1, r2).map(|z| z.im)
    }
}

fn lookup1(map: &HashMap<i64, Complex64>, r: i64) -> Option<Complex64> {
    if r == 0 {
        return Some(Complex64::new(1.0, 0.0));
    }
    let z = map.get(&r.abs())?;
    Some(if r < 0 { z.conj() } else { *z })
}

fn canonical(r1: i64, r2: i64) -> (i64, i64) {
    if r1 < 0 || (r1 == 0 && r2 < 0) {
        (-r1, -r2)
    } else {
        (r1, r2)
    }
}
