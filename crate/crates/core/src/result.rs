use std::collections::BTreeMap;
use std::fmt;

use libm::erfc;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// How a p-value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "asymptotic-chisq")]
    AsymptoticChiSquare,
    #[serde(rename = "permutation")]
    Permutation,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::AsymptoticChiSquare => "asymptotic-chisq",
            Method::Permutation => "permutation",
        })
    }
}

/// Outcome of one independence test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub method: Method,
    /// Degrees of freedom for χ² calibration, permutation count otherwise.
    pub df_or_b: u64,
    pub n: usize,
    pub params: BTreeMap<String, String>,
}

/// Upper tail of χ² with `df` degrees of freedom.
pub fn chisq_sf(x: f64, df: u64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if df == 1 {
        // P(Z² > x) = erfc(√(x/2))
        return erfc((x / 2.0).sqrt()).clamp(0.0, 1.0);
    }
    ChiSquared::new(df as f64).expect("positive degrees of freedom").sf(x).clamp(0.0, 1.0)
}

/// Lower `p` quantile of χ² with `df` degrees of freedom.
pub fn chisq_quantile(p: f64, df: u64) -> f64 {
    ChiSquared::new(df as f64).expect("positive degrees of freedom").inverse_cdf(p)
}
