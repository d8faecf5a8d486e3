//! Regret accounting, the policy-comparison metric, regret lower bounds,
//! and observability diagnostics.

pub mod bounds;
pub mod phi;

use crate::environment::{best_action_for, LgdsSpec};
use crate::error::{Error, Result};
use crate::numerics::{psd_sqrt, symmetrize, Matrix, SpdMatrix, Vector};

pub use bounds::{lower_bound_continuous_mc, lower_bound_discrete, DiscreteBound, McBound};
pub use phi::{phi_interval, phi_metric, PhiInterval};

/// Per-round and cumulative regret of one episode.
#[derive(Debug, Clone, Default)]
pub struct RegretTrace {
    pub inst: Vec<f64>,
    pub cumulative: Vec<f64>,
    pub oracle_actions: Vec<usize>,
    pub chosen_actions: Vec<usize>,
}

impl RegretTrace {
    pub fn push(&mut self, inst: f64, oracle_action: usize, chosen_action: usize) {
        let prev = self.cumulative.last().copied().unwrap_or(0.0);
        self.inst.push(inst);
        self.cumulative.push(prev + inst);
        self.oracle_actions.push(oracle_action);
        self.chosen_actions.push(chosen_action);
    }

    pub fn total(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }
}

/// Noise-free instantaneous regret `<a* - a_chosen, z>` with `a*` the
/// best action for the current state. Always nonnegative.
pub fn instantaneous_regret(z: &Vector, chosen: usize, spec: &LgdsSpec) -> f64 {
    let best = best_action_for(z, spec);
    spec.actions[best].dot(z) - spec.actions[chosen].dot(z)
}

/// Threshold below which an oracle regret cannot be used as a normalizer.
pub const NORMALIZER_FLOOR: f64 = 1e-12;

/// `(R_method - R_oracle) / |R_oracle|`; `None` flags an oracle regret too
/// close to zero to normalize by (record raw regrets instead).
pub fn normalized_regret(r_method: f64, r_oracle: f64) -> Option<f64> {
    if r_oracle.abs() < NORMALIZER_FLOOR {
        None
    } else {
        Some((r_method - r_oracle) / r_oracle.abs())
    }
}

/// `sum_{tau=t0}^{t1} (Gamma^T)^tau a_tau a_tau^T Gamma^tau` for a played
/// action sequence indexed from round 0.
pub fn observability_gramian(
    gamma: &Matrix,
    actions: &[Vector],
    t0: usize,
    t1: usize,
) -> Result<SpdMatrix> {
    if t0 > t1 || t1 >= actions.len() {
        return Err(Error::Dimension(format!(
            "window [{t0}, {t1}] out of range for {} actions",
            actions.len()
        )));
    }
    let d = gamma.nrows();
    // Gamma^t0 once, then one multiply per round
    let mut pow = Matrix::identity(d, d);
    for _ in 0..t0 {
        pow = gamma * &pow;
    }
    let mut g = Matrix::zeros(d, d);
    for a in &actions[t0..=t1] {
        let v = pow.transpose() * a;
        g += &v * v.transpose();
        pow = gamma * &pow;
    }
    Ok(SpdMatrix::new_unchecked(g))
}

/// Smallest eigenvalue above `1e-8` of the largest.
pub fn is_observable(gramian: &SpdMatrix) -> bool {
    let eig = gramian.as_matrix().clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    max > 0.0 && min > 1e-8 * max
}

/// Transport cost between Gaussians with the mean term entering as the
/// unsquared norm: `||mu1 - mu2|| + tr(S1 + S2) - 2 tr((S2^{1/2} S1 S2^{1/2})^{1/2})`.
///
/// Note this is not the textbook squared 2-Wasserstein distance (which
/// squares the mean term); the unsquared form is the comparison metric
/// used throughout, kept as defined.
pub fn wasserstein2_gaussian_cost(
    mu1: &Vector,
    s1: &SpdMatrix,
    mu2: &Vector,
    s2: &SpdMatrix,
) -> Result<f64> {
    if mu1.len() != mu2.len() || s1.dim() != s2.dim() || mu1.len() != s1.dim() {
        return Err(Error::Dimension(format!(
            "mismatched dimensions: means {}/{}, covariances {}/{}",
            mu1.len(),
            mu2.len(),
            s1.dim(),
            s2.dim()
        )));
    }
    let root2 = psd_sqrt(s2)?;
    let inner = symmetrize(&(root2.as_matrix() * s1.as_matrix() * root2.as_matrix()));
    let cross = psd_sqrt(&SpdMatrix::new_unchecked(inner))?;
    Ok((mu1 - mu2).norm() + s1.as_matrix().trace() + s2.as_matrix().trace()
        - 2.0 * cross.as_matrix().trace())
}
