//! Kalman one-step predictors: the scalar-observation filter driving the
//! learner policies, and the vector-observation steady-gain filter behind
//! the full-information baseline.

use crate::environment::LgdsSpec;
use crate::error::Result;
use crate::numerics::{riccati_map, solve_dare_multi, Matrix, SpdMatrix, Vector};

/// One-step state prediction and its error covariance.
#[derive(Debug, Clone)]
pub struct KalmanState {
    pub zhat: Vector,
    pub p: SpdMatrix,
}

/// Initial predictor: zero state, covariance `Sigma0`.
pub fn kf_init(spec: &LgdsSpec) -> KalmanState {
    KalmanState {
        zhat: Vector::zeros(spec.d()),
        p: spec.sigma0_spd(),
    }
}

/// Predicted reward mean `<a, zhat>` and innovation variance
/// `a^T P a + sigma^2` for one action.
pub fn kf_predict_reward(kf: &KalmanState, action_index: usize, spec: &LgdsSpec) -> Result<(f64, f64)> {
    if action_index >= spec.k() {
        return Err(crate::error::Error::Dimension(format!(
            "action index {action_index} out of range (k = {})",
            spec.k()
        )));
    }
    let a = &spec.actions[action_index];
    let mean = a.dot(&kf.zhat);
    let variance = a.dot(&(kf.p.as_matrix() * a)) + spec.sigma2();
    Ok((mean, variance))
}

/// One predictor step after observing `reward` for `action_index`:
/// `zhat <- Gamma zhat + Gamma K (X - <a, zhat>)` with
/// `K = P a (a^T P a + sigma^2)^{-1}`, and `P <- g(P, a)`.
pub fn kf_update(
    kf: &KalmanState,
    action_index: usize,
    reward: f64,
    spec: &LgdsSpec,
) -> Result<KalmanState> {
    let a = &spec.actions[action_index];
    let pm = kf.p.as_matrix();
    let pa = pm * a;
    let innovation_var = a.dot(&pa) + spec.sigma2();
    let gain = &pa / innovation_var;
    let innovation = reward - a.dot(&kf.zhat);
    let zhat = &spec.gamma * (&kf.zhat + gain * innovation);
    let p = riccati_map(&kf.p, a, &spec.gamma, &spec.q_spd(), spec.sigma2())?;
    Ok(KalmanState { zhat, p })
}

/// Steady-gain filter state for the full-information baseline.
#[derive(Debug, Clone)]
pub struct OracleKalmanState {
    pub ztilde: Vector,
    /// Steady gain `K = P_A C^T (C P_A C^T + sigma^2 I)^{-1}` (d x k).
    pub gain: Matrix,
    pub p_a: SpdMatrix,
    c: Matrix,
}

impl OracleKalmanState {
    pub fn c_matrix(&self) -> &Matrix {
        &self.c
    }
}

/// Solves the stacked-observation Riccati fixed point and starts at zero.
pub fn oracle_kf_init(spec: &LgdsSpec) -> Result<OracleKalmanState> {
    let c = spec.c_matrix();
    let (p_a, gain) = solve_dare_multi(&spec.gamma, &c, &spec.q_spd(), spec.sigma2())?;
    Ok(OracleKalmanState {
        ztilde: Vector::zeros(spec.d()),
        gain,
        p_a,
        c,
    })
}

/// `ztilde <- Gamma ztilde + Gamma K (X - C ztilde)` with the steady gain.
pub fn oracle_kf_update(
    okf: &OracleKalmanState,
    rewards: &Vector,
    spec: &LgdsSpec,
) -> Result<OracleKalmanState> {
    if rewards.len() != spec.k() {
        return Err(crate::error::Error::Dimension(format!(
            "expected {} rewards, got {}",
            spec.k(),
            rewards.len()
        )));
    }
    let innovation = rewards - &okf.c * &okf.ztilde;
    let ztilde = &spec.gamma * (&okf.ztilde + &okf.gain * innovation);
    Ok(OracleKalmanState {
        ztilde,
        gain: okf.gain.clone(),
        p_a: okf.p_a.clone(),
        c: okf.c.clone(),
    })
}
