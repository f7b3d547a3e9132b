//! Numeric checks of the redundancy identities.
//!
//! Discrete joints over `(Y, Z_1..Z_K)` give pooled information
//! `G = I(Y; Z)`, aggregate information `L = sum_i I(Y; Z_i)` and redundancy
//! `R = L - G`, which equals `TC(Z) - TC(Z | Y)`. The Gaussian model gives the
//! closed-form information of `K` correlated observations and the effective
//! width `K / (1 + (K-1) rho)`. Everything is in nats. Any conditioning on
//! the query is absorbed into the joint; extra conditioning variables can be
//! added as ordinary variables and passed in `given`.

mod checks;
mod discrete;
mod gaussian;

use thiserror::Error;

pub use checks::{run_checks, CheckConfig, CheckResult, Perturbation};
pub use discrete::{
    collaborative_gain, info_quantities, mutual_information, random_joint, random_product_channel,
    redundancy_via_tc, total_correlation, verify_tc_identity, DiscreteJoint, GainReport, InfoQuantities,
    TcReport, IDENTITY_TOL, MAX_CELLS,
};
pub use gaussian::{
    effective_width, gaussian_mi_closed_form, gaussian_mi_monte_carlo, gaussian_mi_oracle,
    gaussian_mi_via_effective_width, keff_curve, mi_curve, GaussianRedundancyModel, KeffPoint, McEstimate,
    MiPoint, ORACLE_MAX_K,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TheoryError {
    #[error("bad arity: {0}")]
    BadArity(String),
    #[error("joint not normalized: {0}")]
    NotNormalized(String),
    #[error("joint table exceeds {limit} cells")]
    TooLarge { limit: usize },
    #[error("variable index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("variable sets overlap")]
    Overlap,
    #[error("total correlation needs at least two variables")]
    TooFewVars,
    #[error("Y arity mismatch: {col} vs {ind}")]
    ArityMismatch { col: usize, ind: usize },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("rho {0} outside [0, 1]")]
    RhoOutOfRange(f64),
}
