use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::Stream;

use super::TheoryError;

/// Largest table `DiscreteJoint` accepts.
pub const MAX_CELLS: usize = 10_000_000;

/// Normalization tolerance of a joint table.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Probability table over `(Y, Z_1, ..., Z_K)`, row-major with the last
/// variable varying fastest. Variable 0 is the answer `Y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteJoint {
    arities: Vec<usize>,
    probs: Vec<f64>,
}

fn cell_count(arities: &[usize]) -> Result<usize, TheoryError> {
    let mut n: usize = 1;
    for &a in arities {
        if a == 0 {
            return Err(TheoryError::BadArity("every support needs at least one outcome".into()));
        }
        n = n
            .checked_mul(a)
            .filter(|&n| n <= MAX_CELLS)
            .ok_or(TheoryError::TooLarge { limit: MAX_CELLS })?;
    }
    Ok(n)
}

fn xlogx_sum(table: &[f64]) -> f64 {
    -table.iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum::<f64>()
}

impl DiscreteJoint {
    pub fn new(arities: Vec<usize>, probs: Vec<f64>) -> Result<Self, TheoryError> {
        if arities.len() < 2 {
            return Err(TheoryError::BadArity("need Y and at least one Z".into()));
        }
        let n = cell_count(&arities)?;
        if probs.len() != n {
            return Err(TheoryError::BadArity(format!(
                "table has {} cells, arities imply {n}",
                probs.len()
            )));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(TheoryError::NotNormalized("negative or non-finite cell".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(TheoryError::NotNormalized(format!("cells sum to {total}")));
        }
        Ok(Self { arities, probs })
    }

    /// Build from a closure over outcome tuples, normalizing the result.
    pub fn from_fn(arities: Vec<usize>, mut weight: impl FnMut(&[usize]) -> f64) -> Result<Self, TheoryError> {
        let n = cell_count(&arities)?;
        let mut digits = vec![0usize; arities.len()];
        let mut probs = Vec::with_capacity(n);
        for _ in 0..n {
            probs.push(weight(&digits));
            for v in (0..arities.len()).rev() {
                digits[v] += 1;
                if digits[v] < arities[v] {
                    break;
                }
                digits[v] = 0;
            }
        }
        let total: f64 = probs.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(TheoryError::NotNormalized(format!("weights sum to {total}")));
        }
        probs.iter_mut().for_each(|p| *p /= total);
        Self::new(arities, probs)
    }

    pub fn arities(&self) -> &[usize] {
        &self.arities
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn num_vars(&self) -> usize {
        self.arities.len()
    }

    /// Number of `Z` variables.
    pub fn k(&self) -> usize {
        self.arities.len() - 1
    }

    pub fn z_vars(&self) -> Vec<usize> {
        (1..self.num_vars()).collect()
    }

    fn check_vars(&self, vars: &[usize]) -> Result<(), TheoryError> {
        if let Some(&v) = vars.iter().find(|&&v| v >= self.num_vars()) {
            return Err(TheoryError::IndexOutOfRange(v));
        }
        for (i, a) in vars.iter().enumerate() {
            if vars[i + 1..].contains(a) {
                return Err(TheoryError::Overlap);
            }
        }
        Ok(())
    }

    /// Marginal table over `vars` (in the given order, last fastest).
    pub fn marginal(&self, vars: &[usize]) -> Result<Vec<f64>, TheoryError> {
        self.check_vars(vars)?;
        let size: usize = vars.iter().map(|&v| self.arities[v]).product();
        let mut out = vec![0.0; size];
        let mut digits = vec![0usize; self.num_vars()];
        for &p in &self.probs {
            let idx = vars.iter().fold(0, |acc, &v| acc * self.arities[v] + digits[v]);
            out[idx] += p;
            for v in (0..self.num_vars()).rev() {
                digits[v] += 1;
                if digits[v] < self.arities[v] {
                    break;
                }
                digits[v] = 0;
            }
        }
        Ok(out)
    }

    /// Joint entropy of `vars` in nats (empty set has entropy 0).
    pub fn entropy(&self, vars: &[usize]) -> Result<f64, TheoryError> {
        Ok(xlogx_sum(&self.marginal(vars)?))
    }

    /// `H(vars | given)`.
    pub fn conditional_entropy(&self, vars: &[usize], given: &[usize]) -> Result<f64, TheoryError> {
        let both: Vec<usize> = vars.iter().chain(given).copied().collect();
        Ok(self.entropy(&both)? - self.entropy(given)?)
    }
}

/// `I(A; B | C)` in nats by direct summation of
/// `p(a,b,c) ln[p(a,b,c) p(c) / (p(a,c) p(b,c))]`.
pub fn mutual_information(
    joint: &DiscreteJoint,
    a: &[usize],
    b: &[usize],
    given: &[usize],
) -> Result<f64, TheoryError> {
    if a.is_empty() || b.is_empty() {
        return Err(TheoryError::BadArity("mutual information needs nonempty variable sets".into()));
    }
    let all: Vec<usize> = a.iter().chain(b).chain(given).copied().collect();
    let abc = joint.marginal(&all)?;
    let ac: Vec<usize> = a.iter().chain(given).copied().collect();
    let bc: Vec<usize> = b.iter().chain(given).copied().collect();
    let p_ac = joint.marginal(&ac)?;
    let p_bc = joint.marginal(&bc)?;
    let p_c = joint.marginal(given)?;

    let ar = |vars: &[usize]| -> Vec<usize> { vars.iter().map(|&v| joint.arities()[v]).collect() };
    let (ra, rb, rc) = (ar(a), ar(b), ar(given));
    let size = |r: &[usize]| r.iter().product::<usize>();
    let (na, nb, nc) = (size(&ra), size(&rb), size(&rc));

    let mut total = 0.0;
    for ia in 0..na {
        for ib in 0..nb {
            for ic in 0..nc {
                let p = abc[(ia * nb + ib) * nc + ic];
                if p <= 0.0 {
                    continue;
                }
                let num = p * p_c[ic];
                let den = p_ac[ia * nc + ic] * p_bc[ib * nc + ic];
                total += p * (num / den).ln();
            }
        }
    }
    Ok(total)
}

/// `TC(vars | given) = sum_i H(v_i | given) - H(vars | given)`, via entropies.
pub fn total_correlation(joint: &DiscreteJoint, vars: &[usize], given: &[usize]) -> Result<f64, TheoryError> {
    if vars.len() < 2 {
        return Err(TheoryError::TooFewVars);
    }
    let both: Vec<usize> = vars.iter().chain(given).copied().collect();
    joint.check_vars(&both)?;
    let mut sum = 0.0;
    for &v in vars {
        sum += joint.conditional_entropy(&[v], given)?;
    }
    Ok(sum - joint.conditional_entropy(vars, given)?)
}

/// Pooled `G`, aggregate `L` and redundant `R = L - G` information about `Y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfoQuantities {
    pub g: f64,
    pub l: f64,
    pub r: f64,
}

pub fn info_quantities(joint: &DiscreteJoint) -> InfoQuantities {
    let z = joint.z_vars();
    let g = mutual_information(joint, &[0], &z, &[]).expect("valid variable sets");
    let l: f64 = z
        .iter()
        .map(|&v| mutual_information(joint, &[0], &[v], &[]).expect("valid variable sets"))
        .sum();
    InfoQuantities { g, l, r: l - g }
}

/// `TC(Z)` and `TC(Z | Y)`; a single `Z` has zero total correlation.
fn tc_pair(joint: &DiscreteJoint) -> (f64, f64) {
    let z = joint.z_vars();
    if z.len() < 2 {
        return (0.0, 0.0);
    }
    (
        total_correlation(joint, &z, &[]).expect("valid variable sets"),
        total_correlation(joint, &z, &[0]).expect("valid variable sets"),
    )
}

/// Redundancy computed as `TC(Z) - TC(Z | Y)` (entropy route, independent
/// of the mutual-information route used by [`info_quantities`]).
pub fn redundancy_via_tc(joint: &DiscreteJoint) -> f64 {
    let (m, c) = tc_pair(joint);
    m - c
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TcReport {
    pub redundancy: f64,
    pub tc_marginal: f64,
    pub tc_given_y: f64,
    pub residual: f64,
    pub passed: bool,
}

pub const IDENTITY_TOL: f64 = 1e-10;

pub fn verify_tc_identity(joint: &DiscreteJoint) -> TcReport {
    let q = info_quantities(joint);
    let (tc_marginal, tc_given_y) = tc_pair(joint);
    let residual = (q.r - (tc_marginal - tc_given_y)).abs();
    TcReport {
        redundancy: q.r,
        tc_marginal,
        tc_given_y,
        residual,
        passed: residual < IDENTITY_TOL,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainReport {
    pub col: InfoQuantities,
    pub ind: InfoQuantities,
    pub delta_g: f64,
    pub delta_l: f64,
    /// `R_col - R_ind`, with both redundancies from the entropy route.
    pub delta_r: f64,
    /// `|dG - dL - (R_ind - R_col)|`.
    pub residual: f64,
}

pub fn collaborative_gain(col: &DiscreteJoint, ind: &DiscreteJoint) -> Result<GainReport, TheoryError> {
    if col.arities()[0] != ind.arities()[0] {
        return Err(TheoryError::ArityMismatch {
            col: col.arities()[0],
            ind: ind.arities()[0],
        });
    }
    let qc = info_quantities(col);
    let qi = info_quantities(ind);
    let (rc, ri) = (redundancy_via_tc(col), redundancy_via_tc(ind));
    let delta_g = qc.g - qi.g;
    let delta_l = qc.l - qi.l;
    Ok(GainReport {
        col: qc,
        ind: qi,
        delta_g,
        delta_l,
        delta_r: rc - ri,
        residual: (delta_g - delta_l - (ri - rc)).abs(),
    })
}

/// Joint with i.i.d. uniform(0,1] cell weights, normalized.
pub fn random_joint(arities: Vec<usize>, rng: &mut Stream) -> Result<DiscreteJoint, TheoryError> {
    DiscreteJoint::from_fn(arities, |_| 1.0 - rng.random::<f64>())
}

/// `p(y) * prod_i p(z_i | y)` with random factors: the `Z_i` are
/// conditionally independent given `Y`.
pub fn random_product_channel(arities: Vec<usize>, rng: &mut Stream) -> Result<DiscreteJoint, TheoryError> {
    let mut draw = |n: usize| -> Vec<f64> {
        let w: Vec<f64> = (0..n).map(|_| 1.0 - rng.random::<f64>()).collect();
        let s: f64 = w.iter().sum();
        w.into_iter().map(|x| x / s).collect()
    };
    let y = arities[0];
    let py = draw(y);
    let channels: Vec<Vec<Vec<f64>>> = arities[1..].iter().map(|&a| (0..y).map(|_| draw(a)).collect()).collect();
    DiscreteJoint::from_fn(arities, |d| {
        channels
            .iter()
            .enumerate()
            .fold(py[d[0]], |acc, (i, ch)| acc * ch[d[0]][d[i + 1]])
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;
    use std::f64::consts::LN_2;

    fn copy_bit(k: usize) -> DiscreteJoint {
        DiscreteJoint::from_fn(vec![2; k + 1], |d| if d.iter().all(|&x| x == d[0]) { 1.0 } else { 0.0 }).unwrap()
    }

    fn flip_channel(eps: f64) -> DiscreteJoint {
        DiscreteJoint::from_fn(vec![2, 2], |d| 0.5 * if d[0] == d[1] { 1.0 - eps } else { eps }).unwrap()
    }

    fn h_b(p: f64) -> f64 {
        -(p * p.ln() + (1.0 - p) * (1.0 - p).ln())
    }

    #[test]
    fn validation() {
        assert!(DiscreteJoint::new(vec![2], vec![0.5, 0.5]).is_err());
        assert!(DiscreteJoint::new(vec![2, 2], vec![0.25; 3]).is_err());
        assert!(DiscreteJoint::new(vec![2, 2], vec![0.5, 0.5, 0.5, -0.5]).is_err());
        assert!(DiscreteJoint::new(vec![2, 2], vec![0.3; 4]).is_err());
        assert!(matches!(
            DiscreteJoint::new(vec![1000, 1000, 1000], vec![]),
            Err(TheoryError::TooLarge { .. })
        ));
        assert!(DiscreteJoint::new(vec![2, 0], vec![]).is_err());
    }

    #[test]
    fn mi_basics() {
        let j = copy_bit(1);
        assert!((mutual_information(&j, &[0], &[1], &[]).unwrap() - LN_2).abs() < 1e-15);
        let ind = DiscreteJoint::from_fn(vec![2, 3], |_| 1.0).unwrap();
        assert!(mutual_information(&ind, &[0], &[1], &[]).unwrap().abs() < 1e-15);
        let f = flip_channel(0.25);
        let expected = LN_2 - h_b(0.25);
        assert!((mutual_information(&f, &[0], &[1], &[]).unwrap() - expected).abs() < 1e-14);
        assert!((expected - 0.1308).abs() < 1e-4);
        assert_eq!(mutual_information(&f, &[0], &[0], &[]), Err(TheoryError::Overlap));
    }

    #[test]
    fn redundant_copies() {
        let q = info_quantities(&copy_bit(2));
        assert!((q.g - LN_2).abs() < 1e-15);
        assert!((q.l - 2.0 * LN_2).abs() < 1e-15);
        assert!((q.r - LN_2).abs() < 1e-15);
        let rep = verify_tc_identity(&copy_bit(2));
        assert!(rep.passed);
        assert!((rep.tc_marginal - LN_2).abs() < 1e-15);
    }

    #[test]
    fn constant_variable_adds_nothing() {
        let f = flip_channel(0.1);
        let j = DiscreteJoint::from_fn(vec![2, 2, 1], |d| f.probs()[d[0] * 2 + d[1]]).unwrap();
        let q = info_quantities(&j);
        let i1 = mutual_information(&f, &[0], &[1], &[]).unwrap();
        assert!((q.g - i1).abs() < 1e-15 && (q.l - i1).abs() < 1e-15 && q.r.abs() < 1e-15);
    }

    #[test]
    fn tc_cases() {
        let ind = DiscreteJoint::from_fn(vec![2, 2, 2], |_| 1.0).unwrap();
        assert!(total_correlation(&ind, &[1, 2], &[]).unwrap().abs() < 1e-15);
        assert!((total_correlation(&copy_bit(2), &[1, 2], &[]).unwrap() - LN_2).abs() < 1e-15);
        assert_eq!(total_correlation(&ind, &[1], &[]), Err(TheoryError::TooFewVars));
    }

    #[test]
    fn tc_matches_cell_sum() {
        // Independent oracle: TC as KL(p || prod of marginals) by direct summation.
        let j = random_joint(vec![2, 3, 2], &mut derive_rng(5, "tc")).unwrap();
        let m: Vec<Vec<f64>> = (0..3).map(|v| j.marginal(&[v]).unwrap()).collect();
        let mut kl = 0.0;
        let mut idx = 0;
        for a in 0..2 {
            for b in 0..3 {
                for c in 0..2 {
                    let p = j.probs()[idx];
                    kl += p * (p / (m[0][a] * m[1][b] * m[2][c])).ln();
                    idx += 1;
                }
            }
        }
        assert!((total_correlation(&j, &[0, 1, 2], &[]).unwrap() - kl).abs() < 1e-13);
    }

    #[test]
    fn product_channel_identity() {
        let j = random_product_channel(vec![2, 2, 2], &mut derive_rng(9, "pc")).unwrap();
        let rep = verify_tc_identity(&j);
        assert!(rep.tc_given_y.abs() < 1e-12);
        assert!(rep.residual < IDENTITY_TOL);
        assert!((info_quantities(&j).r - rep.tc_marginal).abs() < 1e-12);
        assert!(rep.redundancy >= -1e-12);
    }

    #[test]
    fn gain_on_constructed_pair() {
        // ind: Z2 copies Z1; col: Z2 is an independent flip of Y with the same noise.
        let eps = 0.2;
        let ch = |y: usize, z: usize| if y == z { 1.0 - eps } else { eps };
        let ind = DiscreteJoint::from_fn(vec![2, 2, 2], |d| if d[1] == d[2] { ch(d[0], d[1]) } else { 0.0 }).unwrap();
        let col = DiscreteJoint::from_fn(vec![2, 2, 2], |d| ch(d[0], d[1]) * ch(d[0], d[2])).unwrap();
        let g = collaborative_gain(&col, &ind).unwrap();
        assert!(g.delta_l.abs() < 1e-14);
        assert!(g.delta_g > 0.0);
        assert!((g.delta_g + g.delta_r).abs() < 1e-12);
        assert!(g.residual < 1e-12);
        let same = collaborative_gain(&col, &col).unwrap();
        assert_eq!((same.delta_g, same.delta_l, same.delta_r), (0.0, 0.0, 0.0));
        let other = DiscreteJoint::from_fn(vec![3, 2], |_| 1.0).unwrap();
        assert!(collaborative_gain(&col, &other).is_err());
    }

    #[test]
    fn conditional_mi_chain_rule() {
        let j = random_joint(vec![2, 2, 3], &mut derive_rng(1, "chain")).unwrap();
        let joint = mutual_information(&j, &[0], &[1, 2], &[]).unwrap();
        let first = mutual_information(&j, &[0], &[1], &[]).unwrap();
        let second = mutual_information(&j, &[0], &[2], &[1]).unwrap();
        assert!((joint - first - second).abs() < 1e-13);
    }
}
