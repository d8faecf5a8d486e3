//! Shared test oracles.

use lgds_bandit::environment::LgdsSpec;
use lgds_bandit::numerics::{Matrix, Vector};

/// Brute-force one-step prediction: the conditional mean and covariance of
/// `z_t` given the rewards `X_0..X_{t-1}`, computed by stacking every noise
/// source of the episode into one joint Gaussian and conditioning directly.
///
/// The stacked variable is `w = (z_0, xi_0..xi_{t-1}, eta_0..eta_{t-1})`
/// with block-diagonal covariance `diag(Sigma0, Q, ..., Q, sigma^2 I)`.
/// Both `z_t` and the reward vector are linear in `w`:
///   `z_t  = Gamma^t z_0 + sum_i Gamma^{t-1-i} xi_i`
///   `X_s  = a_s' z_s + eta_s`
/// so the conditional law follows from the Schur complement of the joint
/// covariance. This shares no code with the recursive filter.
pub fn conditioned_prediction(
    spec: &LgdsSpec,
    actions: &[usize],
    rewards: &[f64],
) -> (Vector, Matrix) {
    assert_eq!(actions.len(), rewards.len());
    let t = rewards.len();
    let d = spec.d();
    if t == 0 {
        return (Vector::zeros(d), spec.sigma0.clone());
    }
    let dim = d + d * t + t;

    let mut cov_w = Matrix::zeros(dim, dim);
    cov_w.view_mut((0, 0), (d, d)).copy_from(&spec.sigma0);
    for i in 0..t {
        cov_w
            .view_mut((d + i * d, d + i * d), (d, d))
            .copy_from(&spec.q);
    }
    for i in 0..t {
        let idx = d + t * d + i;
        cov_w[(idx, idx)] = spec.sigma2();
    }

    // powers[p] = Gamma^p for p = 0..=t
    let mut powers = vec![Matrix::identity(d, d)];
    for p in 0..t {
        powers.push(&spec.gamma * &powers[p]);
    }

    let mut m_z = Matrix::zeros(d, dim);
    m_z.view_mut((0, 0), (d, d)).copy_from(&powers[t]);
    for i in 0..t {
        m_z.view_mut((0, d + i * d), (d, d))
            .copy_from(&powers[t - 1 - i]);
    }

    let mut m_x = Matrix::zeros(t, dim);
    for (s, &a_idx) in actions.iter().enumerate() {
        let a = &spec.actions[a_idx];
        m_x.view_mut((s, 0), (1, d))
            .copy_from(&(a.transpose() * &powers[s]));
        for i in 0..s {
            m_x.view_mut((s, d + i * d), (1, d))
                .copy_from(&(a.transpose() * &powers[s - 1 - i]));
        }
        m_x[(s, d + t * d + s)] = 1.0;
    }

    let cov_zx = &m_z * &cov_w * m_x.transpose();
    let cov_xx = &m_x * &cov_w * m_x.transpose();
    let cov_zz = &m_z * &cov_w * m_z.transpose();
    let xx_inv = cov_xx
        .try_inverse()
        .expect("reward covariance must be invertible (sigma > 0)");

    let x = Vector::from_column_slice(rewards);
    let mean = &cov_zx * &xx_inv * x;
    let cov = &cov_zz - &cov_zx * &xx_inv * cov_zx.transpose();
    (mean, cov)
}
