//! Independence tests for bivariate circular (toroidal) data based on
//! trigonometric moments and the empirical characteristic function.
//!
//! ```
//! use torus_indep::models::ModelSpec;
//! use torus_indep::{cosine_test, multi_test, permutation_test, FrequencyPair, PermutationPlan, PoissonKernel};
//!
//! let model = ModelSpec::Bvm { kappa1: 1.0, kappa2: 1.0, mu_g: 0.0, kappa_g: 1.0 };
//! let s = model.sample(100, 42)?;
//! let r = cosine_test(&s, FrequencyPair::new(1, -1), true)?;
//! let m = multi_test(&s, &"1,-1,1,1".parse()?, true)?;
//! let o = permutation_test(&s, PoissonKernel::new(1.0)?, PermutationPlan::new(999, 7)?)?;
//! assert!(r.p_value < 0.05 || m.p_value < 0.05 || o.p_value < 0.05);
//! # Ok::<(), torus_indep::Error>(())
//! ```

pub mod bench;
pub mod circ;
pub mod cli;
pub mod cosine;
pub mod error;
pub mod models;
pub mod moments;
pub mod multi;
pub mod omnibus;
pub mod result;
pub mod rng;

pub use circ::{
    axial_to_circular, center_sample, circular_mean, lag_pairs, weighted_circular_mean, wrap_angle, Angle, PairedSample,
};
pub use cosine::{cosine_test, d_cos, d_sin, v_hat, FrequencyPair};
pub use error::{Error, Result};
pub use models::{Interaction, ModelSpec};
pub use moments::TrigMoments;
pub use multi::{multi_test, sigma_hat, MultiOrderSpec};
pub use omnibus::{permutation_test, t_omnibus, t_omnibus_series, PermutationPlan, PoissonKernel};
pub use result::{Method, TestResult};
