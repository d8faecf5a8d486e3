//! The phi comparison metric for optimism-template policies.
//!
//! phi(i, j | P) is the Gaussian transport cost between the joint law of
//! the learner's perturbed prediction gaps and the oracle's, evaluated at
//! an error covariance P. Small phi means the perturbation barely distorts
//! the decision geometry, predicting better regret.

use crate::environment::LgdsSpec;
use crate::error::{Error, Result};
use crate::numerics::{solve_dare_multi, solve_dare_single, Matrix, SpdMatrix, Vector};

use super::wasserstein2_gaussian_cost;

/// Rows `a_i - a_s` for every `s != i`, in index order: (k-1) x d.
pub fn difference_matrix(spec: &LgdsSpec, i: usize) -> Matrix {
    let k = spec.k();
    let d = spec.d();
    let mut m = Matrix::zeros(k - 1, d);
    let mut row = 0;
    for s in 0..k {
        if s == i {
            continue;
        }
        let diff = &spec.actions[i] - &spec.actions[s];
        m.row_mut(row).copy_from(&diff.transpose());
        row += 1;
    }
    m
}

/// Optimism-gap mean vector: `u(a_i) - u(a_s)` over `s != i`, padded with
/// k-1 zeros for the oracle half of the joint vector.
fn mu_vector(spec: &LgdsSpec, i: usize, u: &dyn Fn(usize) -> f64) -> Vector {
    let k = spec.k();
    let mut mu = Vector::zeros(2 * (k - 1));
    let ui = u(i);
    let mut row = 0;
    for s in 0..k {
        if s == i {
            continue;
        }
        mu[row] = ui - u(s);
        row += 1;
    }
    mu
}

/// `[[A_i T A_i', A_i T A_j'], [A_j T A_i', A_j Z A_j']]` — the joint
/// covariance block form shared by the learner (T = Z - P) and oracle
/// (T = Z - P_A) distributions.
fn block_cov(ai: &Matrix, aj: &Matrix, top: &Matrix, z: &Matrix) -> SpdMatrix {
    let m = ai.nrows();
    let mut s = Matrix::zeros(2 * m, 2 * m);
    s.view_mut((0, 0), (m, m)).copy_from(&(ai * top * ai.transpose()));
    s.view_mut((0, m), (m, m)).copy_from(&(ai * top * aj.transpose()));
    s.view_mut((m, 0), (m, m)).copy_from(&(aj * top * ai.transpose()));
    s.view_mut((m, m), (m, m)).copy_from(&(aj * z * aj.transpose()));
    SpdMatrix::new_unchecked(s)
}

fn phi_inner(
    i: usize,
    j: usize,
    p: &SpdMatrix,
    z: &Matrix,
    ztilde: &Matrix,
    spec: &LgdsSpec,
    u: &dyn Fn(usize) -> f64,
) -> Result<f64> {
    let ai = difference_matrix(spec, i);
    let aj = difference_matrix(spec, j);
    let z_minus_p = z - p.as_matrix();
    let sigma_hat = block_cov(&ai, &aj, &z_minus_p, z);
    let sigma = block_cov(&ai, &aj, ztilde, z);
    let mu = mu_vector(spec, i, u);
    let zero = Vector::zeros(mu.len());
    wasserstein2_gaussian_cost(&mu, &sigma_hat, &zero, &sigma)
}

fn stationary_parts(spec: &LgdsSpec) -> Result<(Matrix, Matrix)> {
    let z = spec
        .stationary_covariance()
        .map_err(|_| {
            Error::UnsupportedEnvironment(
                "phi needs a stationary state covariance (spectral radius < 1)".into(),
            )
        })?
        .into_matrix();
    let (p_a, _) = solve_dare_multi(&spec.gamma, &spec.c_matrix(), &spec.q_spd(), spec.sigma2())?;
    Ok((z.clone(), &z - p_a.as_matrix()))
}

/// phi(i, j | P) for one ordered pair and one error covariance, with `u`
/// the policy's optimism term at that covariance (indexed by action).
pub fn phi_metric(
    i: usize,
    j: usize,
    p: &SpdMatrix,
    spec: &LgdsSpec,
    u: &dyn Fn(usize) -> f64,
) -> Result<f64> {
    if i == j || i >= spec.k() || j >= spec.k() {
        return Err(Error::Parameter(format!(
            "need distinct action indices below {}, got ({i}, {j})",
            spec.k()
        )));
    }
    if spec.k() < 2 {
        return Err(Error::Parameter("phi needs at least two actions".into()));
    }
    let (z, ztilde) = stationary_parts(spec)?;
    phi_inner(i, j, p, &z, &ztilde, spec, u)
}

/// Extrema of phi over ordered pairs and per-action steady covariances.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct PhiInterval {
    pub min: f64,
    pub max: f64,
    /// Set when k = 1 leaves no suboptimal pair to compare; the interval
    /// is then defined as (0, 0).
    pub empty: bool,
}

/// Evaluates phi at `P_a` (the single-action steady covariance) for every
/// conditioning action `a` and every ordered pair `i != j`, and returns
/// the extrema. `u` receives the covariance in play and the action index.
pub fn phi_interval(
    spec: &LgdsSpec,
    u: &dyn Fn(&SpdMatrix, usize) -> f64,
) -> Result<PhiInterval> {
    if spec.k() < 2 {
        return Ok(PhiInterval {
            min: 0.0,
            max: 0.0,
            empty: true,
        });
    }
    let (z, ztilde) = stationary_parts(spec)?;
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for (a_idx, a) in spec.actions.iter().enumerate() {
        let p_a = solve_dare_single(&spec.gamma, a, &spec.q_spd(), spec.sigma2()).map_err(|e| {
            Error::Parameter(format!("steady covariance failed for action {a_idx}: {e}"))
        })?;
        let u_at = |i: usize| u(&p_a, i);
        for i in 0..spec.k() {
            for j in 0..spec.k() {
                if i == j {
                    continue;
                }
                let v = phi_inner(i, j, &p_a, &z, &ztilde, spec, &u_at)?;
                min = min.min(v);
                max = max.max(v);
            }
        }
    }
    Ok(PhiInterval { min, max, empty: false })
}
