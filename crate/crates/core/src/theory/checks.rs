use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::par::{map_indexed, Execution};
use crate::rng::{derive_rng, Stream};

use super::discrete::{
    collaborative_gain, info_quantities, random_joint, random_product_channel, verify_tc_identity,
    DiscreteJoint, IDENTITY_TOL,
};
use super::gaussian::{
    effective_width, gaussian_mi_closed_form, gaussian_mi_monte_carlo, gaussian_mi_oracle,
    gaussian_mi_via_effective_width, GaussianRedundancyModel,
};

/// Deliberate defects used as negative controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Perturbation {
    /// Closed form that forgets to scale the shared noise by `K`.
    UnscaledSharedNoise,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckConfig {
    /// Random joints (and joint pairs) per discrete check.
    pub joints: usize,
    pub mc_samples: usize,
    pub seed: u64,
    pub execution: Execution,
    pub perturbation: Option<Perturbation>,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self {
            joints: 100,
            mc_samples: 100_000,
            seed: 0,
            execution: Execution::default(),
            perturbation: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub cases: usize,
    pub max_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckResult {
    fn new(name: &str, errors: &[f64], tolerance: f64) -> Self {
        let max_error = errors.iter().copied().fold(0.0, f64::max);
        let passed = errors.iter().all(|e| e.is_finite() && *e < tolerance);
        Self {
            name: name.to_string(),
            cases: errors.len(),
            max_error,
            tolerance,
            passed,
        }
    }
}

pub const GAUSSIAN_K: std::ops::RangeInclusive<usize> = 1..=64;
pub const GAUSSIAN_SIGMA_U2: [f64; 3] = [0.5, 1.0, 2.0];
pub const GAUSSIAN_SIGMA_C2: [f64; 4] = [0.0, 0.5, 1.0, 4.0];
pub const MC_POINTS: [(usize, f64, f64); 5] = [(1, 1.0, 0.0), (2, 0.5, 0.5), (4, 1.0, 1.0), (16, 2.0, 0.5), (64, 1.0, 4.0)];

/// K in {2, 3}, every support in 2..=4.
fn random_arities(rng: &mut Stream) -> Vec<usize> {
    let k = rng.random_range(2..=3);
    (0..=k).map(|_| rng.random_range(2..=4)).collect()
}

fn closed_form(m: &GaussianRedundancyModel, p: Option<Perturbation>) -> f64 {
    match p {
        None => gaussian_mi_closed_form(m),
        Some(Perturbation::UnscaledSharedNoise) => {
            0.5 * (m.k as f64 / (m.sigma_u2 + m.sigma_c2)).ln_1p()
        }
    }
}

fn joint_for(seed: u64, label: &str, i: usize, product: bool) -> DiscreteJoint {
    let mut rng = derive_rng(seed, &format!("theory/{label}/{i}"));
    let arities = random_arities(&mut rng);
    let j = if product {
        random_product_channel(arities, &mut rng)
    } else {
        random_joint(arities, &mut rng)
    };
    j.expect("random arities stay within limits")
}

/// Run the whole check suite.
pub fn run_checks(cfg: &CheckConfig) -> Vec<CheckResult> {
    let exec = cfg.execution;
    let n = cfg.joints;
    let mut out = Vec::new();

    let tc = map_indexed(exec, n, |i| verify_tc_identity(&joint_for(cfg.seed, "tc", i, false)).residual);
    out.push(CheckResult::new("tc_identity", &tc, IDENTITY_TOL));

    let gain = map_indexed(exec, n, |i| {
        let col = joint_for(cfg.seed, "gain-col", i, false);
        let mut rng = derive_rng(cfg.seed, &format!("theory/gain-ind/{i}"));
        let mut arities = random_arities(&mut rng);
        arities[0] = col.arities()[0];
        let ind = random_joint(arities, &mut rng).expect("random arities stay within limits");
        collaborative_gain(&col, &ind).expect("matching Y arity").residual
    });
    out.push(CheckResult::new("collaborative_gain", &gain, IDENTITY_TOL));

    // Conditionally independent joints: R must be nonnegative. Error = max(0, -R).
    let ci = map_indexed(exec, n, |i| {
        let j = joint_for(cfg.seed, "ci", i, true);
        (-info_quantities(&j).r).max(0.0)
    });
    out.push(CheckResult::new("redundancy_nonnegative_ci", &ci, 1e-12));

    let grid: Vec<GaussianRedundancyModel> = GAUSSIAN_K
        .flat_map(|k| {
            GAUSSIAN_SIGMA_U2.iter().flat_map(move |&u| {
                GAUSSIAN_SIGMA_C2
                    .iter()
                    .map(move |&c| GaussianRedundancyModel::new(k, u, c).expect("grid is valid"))
            })
        })
        .collect();
    let oracle = map_indexed(exec, grid.len(), |i| {
        let m = &grid[i];
        let cf = closed_form(m, cfg.perturbation);
        let or = gaussian_mi_oracle(m).expect("grid is valid");
        ((or - cf) / cf).abs()
    });
    out.push(CheckResult::new("gaussian_oracle", &oracle, 1e-9));

    let forms: Vec<f64> = grid
        .iter()
        .map(|m| (closed_form(m, cfg.perturbation) - gaussian_mi_via_effective_width(m)).abs())
        .collect();
    out.push(CheckResult::new("effective_width_forms", &forms, 1e-12));

    // Endpoints must be exact: any nonzero error fails.
    let endpoints: Vec<f64> = GAUSSIAN_K
        .flat_map(|k| {
            let k = k as f64;
            [
                (effective_width(k, 0.0).expect("valid") - k).abs(),
                (effective_width(k, 1.0).expect("valid") - 1.0).abs(),
            ]
        })
        .collect();
    out.push(CheckResult::new("effective_width_endpoints", &endpoints, f64::MIN_POSITIVE));

    let limit: Vec<f64> = [0.25, 0.5, 0.8]
        .iter()
        .map(|&rho| (effective_width(1e6, rho).expect("valid") - 1.0 / rho).abs())
        .collect();
    out.push(CheckResult::new("effective_width_limit", &limit, 1e-3));

    let mc: Vec<f64> = MC_POINTS
        .iter()
        .enumerate()
        .map(|(i, &(k, u, c))| {
            let m = GaussianRedundancyModel::new(k, u, c).expect("valid point");
            let est = gaussian_mi_monte_carlo(&m, cfg.mc_samples, cfg.seed.wrapping_add(i as u64), exec)
                .expect("valid point");
            (est.mean - closed_form(&m, cfg.perturbation)).abs() / est.std_error
        })
        .collect();
    out.push(CheckResult::new("gaussian_monte_carlo_se", &mc, 3.0));

    out
}
