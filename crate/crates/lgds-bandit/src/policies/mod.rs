//! Action-selection rules behind a single policy contract.
//!
//! The filter-based rules (greedy, information-directed, confidence-bound,
//! and the full-information baseline) are thin argmax layers over the
//! Kalman predictors; the classical baselines live in [`baselines`].

pub mod baselines;

use std::sync::Arc;

use crate::environment::LgdsSpec;
use crate::error::{Error, Result};
use crate::filtering::{
    kf_init, kf_update, oracle_kf_init, oracle_kf_update, KalmanState, OracleKalmanState,
};
use crate::numerics::Vector;
use crate::rng::Stream;

pub use baselines::{
    oful_select, random_select, rexp3_probabilities, sw_ucb_select, ucb_select, OfulState,
    Rexp3State, SwUcbState, UcbState,
};

/// Chosen action plus the per-action objective values that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyDecision {
    pub action_index: usize,
    pub scores: Vec<f64>,
}

/// Argmax with lowest-index tie-breaking; NaN scores never win.
pub fn argmax_lowest(scores: &[f64]) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, &s) in scores.iter().enumerate() {
        if s > best_val {
            best = i;
            best_val = s;
        }
    }
    best
}

fn decide(scores: Vec<f64>) -> PolicyDecision {
    PolicyDecision {
        action_index: argmax_lowest(&scores),
        scores,
    }
}

/// Information-gain perturbation: `sqrt(tr(G P a a^T P G^T) / (a^T P a + s^2))`,
/// the norm reduction the feedback term buys for the next prediction.
pub fn idea_optimism(kf: &KalmanState, spec: &LgdsSpec, action_index: usize) -> f64 {
    let a = &spec.actions[action_index];
    let pa = kf.p.as_matrix() * a;
    let denom = a.dot(&pa) + spec.sigma2();
    let gpa = &spec.gamma * pa;
    (gpa.norm_squared() / denom).max(0.0).sqrt()
}

/// Default confidence level for the Kalman confidence-bound rule (the
/// conventional 95% level).
pub const KALMAN_UCB_DEFAULT_DELTA: f64 = 0.05;

/// Confidence-bound perturbation: `sqrt(a^T P a * log(1/delta))`.
pub fn kalman_ucb_optimism(
    kf: &KalmanState,
    spec: &LgdsSpec,
    action_index: usize,
    log_inv_delta: f64,
) -> f64 {
    let a = &spec.actions[action_index];
    (a.dot(&(kf.p.as_matrix() * a)) * log_inv_delta).max(0.0).sqrt()
}

/// Predicted reward plus the information-gain perturbation.
pub fn idea_select(kf: &KalmanState, spec: &LgdsSpec) -> PolicyDecision {
    let scores = (0..spec.k())
        .map(|i| spec.actions[i].dot(&kf.zhat) + idea_optimism(kf, spec, i))
        .collect();
    decide(scores)
}

/// Predicted reward plus the confidence-bound perturbation.
pub fn kalman_ucb_select(kf: &KalmanState, spec: &LgdsSpec, delta: f64) -> Result<PolicyDecision> {
    if !(0.0..1.0).contains(&delta) || delta == 0.0 {
        return Err(Error::Parameter(format!("delta must be in (0,1), got {delta}")));
    }
    let log_inv_delta = (1.0 / delta).ln();
    let scores = (0..spec.k())
        .map(|i| spec.actions[i].dot(&kf.zhat) + kalman_ucb_optimism(kf, spec, i, log_inv_delta))
        .collect();
    Ok(decide(scores))
}

/// Pure greedy on the state prediction.
pub fn kode_select(kf: &KalmanState, spec: &LgdsSpec) -> PolicyDecision {
    let scores = (0..spec.k()).map(|i| spec.actions[i].dot(&kf.zhat)).collect();
    decide(scores)
}

/// Greedy on the full-information filter's prediction.
pub fn kalman_oracle_select(okf: &OracleKalmanState, spec: &LgdsSpec) -> PolicyDecision {
    let scores = (0..spec.k())
        .map(|i| spec.actions[i].dot(&okf.ztilde))
        .collect();
    decide(scores)
}

/// How a policy observes the environment each round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObservationMode {
    /// Only the chosen action's reward.
    Scalar,
    /// The reward vector for every action (full-information baseline).
    Full,
}

/// A stateful per-episode policy. `select` must not mutate anything a
/// repeated call would observe; randomized policies draw from their own
/// stream inside `select`.
pub trait Policy {
    fn select(&mut self, t: u64) -> Result<PolicyDecision>;
    fn update(&mut self, t: u64, action_index: usize, reward: f64) -> Result<()>;
    fn update_full(&mut self, _t: u64, _rewards: &Vector) -> Result<()> {
        Ok(())
    }
    fn observation_mode(&self) -> ObservationMode {
        ObservationMode::Scalar
    }
    /// Scalar-observation filter state, when the policy keeps one.
    fn filter_state(&self) -> Option<&KalmanState> {
        None
    }
    fn oracle_state(&self) -> Option<&OracleKalmanState> {
        None
    }
    /// The optimism term `u_t(a | P)` at the current filter state, for
    /// policies of the optimism template.
    fn optimism(&self, _action_index: usize) -> Option<f64> {
        None
    }
}

/// Policy identifier strings for CLI and config.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyId {
    Idea,
    KalmanUcb,
    Kode,
    KalmanOracle,
    Ucb,
    SwUcb,
    Rexp3,
    Oful,
    Random,
}

impl PolicyId {
    pub const ALL: [PolicyId; 9] = [
        PolicyId::Idea,
        PolicyId::KalmanUcb,
        PolicyId::Kode,
        PolicyId::KalmanOracle,
        PolicyId::Ucb,
        PolicyId::SwUcb,
        PolicyId::Rexp3,
        PolicyId::Oful,
        PolicyId::Random,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            PolicyId::Idea => "idea",
            PolicyId::KalmanUcb => "kalman_ucb",
            PolicyId::Kode => "kode",
            PolicyId::KalmanOracle => "kalman_oracle",
            PolicyId::Ucb => "ucb",
            PolicyId::SwUcb => "sw_ucb",
            PolicyId::Rexp3 => "rexp3",
            PolicyId::Oful => "oful",
            PolicyId::Random => "random",
        }
    }
}

impl std::str::FromStr for PolicyId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        PolicyId::ALL
            .iter()
            .copied()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown policy '{s}'")))
    }
}

/// Tunables for the baseline policies; `None` means the documented default.
#[derive(Debug, Clone, Default, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct PolicyParams {
    /// Confidence level for the Kalman confidence-bound rule (default 0.05,
    /// the conventional 95% level).
    pub kalman_ucb_delta: Option<f64>,
    /// Confidence level for UCB / SW-UCB (default 1/n).
    pub ucb_delta: Option<f64>,
    /// Sub-Gaussian reward scale for UCB / SW-UCB (default
    /// `sqrt(max_a a^T Z a + sigma^2)` from the stationary covariance).
    pub ucb_scale: Option<f64>,
    /// SW-UCB window (default `ceil(sqrt(n))`).
    pub sw_window: Option<u64>,
    /// Rexp3 batch size (default `ceil((k log k)^(1/3) n^(2/3))`).
    pub rexp3_batch: Option<u64>,
    /// Rexp3 exploration rate (default `min(1, sqrt(k log k / ((e-1) batch)))`).
    pub rexp3_gamma: Option<f64>,
    /// OFUL ridge parameter (default 1).
    pub oful_lambda: Option<f64>,
    /// OFUL confidence level (default 1/n).
    pub oful_delta: Option<f64>,
}

/// Fully resolved per-episode policy configuration.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ResolvedParams {
    pub kalman_ucb_delta: f64,
    pub ucb_delta: f64,
    pub ucb_scale: f64,
    pub sw_window: u64,
    pub rexp3_batch: u64,
    pub rexp3_gamma: f64,
    pub oful_lambda: f64,
    pub oful_delta: f64,
}

impl PolicyParams {
    /// Resolves defaults against a spec and horizon. The UCB scale comes
    /// from the known stationary covariance when one exists, else from the
    /// initial-state covariance.
    pub fn resolve(&self, spec: &LgdsSpec, horizon: u64) -> ResolvedParams {
        let n = horizon.max(1) as f64;
        let k = spec.k() as f64;
        let ucb_scale = self.ucb_scale.unwrap_or_else(|| {
            let z = spec
                .stationary_covariance()
                .map(|z| z.into_matrix())
                .unwrap_or_else(|_| spec.sigma0.clone());
            let max_var = spec
                .actions
                .iter()
                .map(|a| a.dot(&(&z * a)))
                .fold(0.0_f64, f64::max);
            (max_var.max(0.0) + spec.sigma2()).sqrt()
        });
        let rexp3_batch = self.rexp3_batch.unwrap_or_else(|| {
            let b = (k * k.ln().max(0.0)).powf(1.0 / 3.0) * n.powf(2.0 / 3.0);
            (b.ceil() as u64).max(1)
        });
        let rexp3_gamma = self.rexp3_gamma.unwrap_or_else(|| {
            let g = (k * k.ln().max(0.0) / ((std::f64::consts::E - 1.0) * rexp3_batch as f64)).sqrt();
            if g > 0.0 {
                g.min(1.0)
            } else {
                1.0
            }
        });
        ResolvedParams {
            kalman_ucb_delta: self.kalman_ucb_delta.unwrap_or(KALMAN_UCB_DEFAULT_DELTA),
            ucb_delta: self.ucb_delta.unwrap_or(1.0 / n),
            ucb_scale,
            sw_window: self.sw_window.unwrap_or_else(|| (n.sqrt().ceil() as u64).max(1)),
            rexp3_batch,
            rexp3_gamma,
            oful_lambda: self.oful_lambda.unwrap_or(1.0),
            oful_delta: self.oful_delta.unwrap_or(1.0 / n),
        }
    }
}

enum KalmanRule {
    Idea,
    ConfidenceBound { log_inv_delta: f64 },
    Greedy,
}

struct KalmanPolicy {
    spec: Arc<LgdsSpec>,
    kf: KalmanState,
    rule: KalmanRule,
}

impl Policy for KalmanPolicy {
    fn select(&mut self, _t: u64) -> Result<PolicyDecision> {
        Ok(match &self.rule {
            KalmanRule::Idea => idea_select(&self.kf, &self.spec),
            KalmanRule::ConfidenceBound { log_inv_delta } => {
                let scores = (0..self.spec.k())
                    .map(|i| {
                        self.spec.actions[i].dot(&self.kf.zhat)
                            + kalman_ucb_optimism(&self.kf, &self.spec, i, *log_inv_delta)
                    })
                    .collect();
                decide(scores)
            }
            KalmanRule::Greedy => kode_select(&self.kf, &self.spec),
        })
    }

    fn update(&mut self, _t: u64, action_index: usize, reward: f64) -> Result<()> {
        self.kf = kf_update(&self.kf, action_index, reward, &self.spec)?;
        Ok(())
    }

    fn filter_state(&self) -> Option<&KalmanState> {
        Some(&self.kf)
    }

    fn optimism(&self, action_index: usize) -> Option<f64> {
        match &self.rule {
            KalmanRule::Idea => Some(idea_optimism(&self.kf, &self.spec, action_index)),
            KalmanRule::ConfidenceBound { log_inv_delta } => Some(kalman_ucb_optimism(
                &self.kf,
                &self.spec,
                action_index,
                *log_inv_delta,
            )),
            KalmanRule::Greedy => Some(0.0),
        }
    }
}

struct OraclePolicy {
    spec: Arc<LgdsSpec>,
    okf: OracleKalmanState,
}

impl Policy for OraclePolicy {
    fn select(&mut self, _t: u64) -> Result<PolicyDecision> {
        Ok(kalman_oracle_select(&self.okf, &self.spec))
    }

    fn update(&mut self, _t: u64, _action_index: usize, _reward: f64) -> Result<()> {
        Err(Error::Parameter(
            "full-information baseline must be fed the reward vector".into(),
        ))
    }

    fn update_full(&mut self, _t: u64, rewards: &Vector) -> Result<()> {
        self.okf = oracle_kf_update(&self.okf, rewards, &self.spec)?;
        Ok(())
    }

    fn observation_mode(&self) -> ObservationMode {
        ObservationMode::Full
    }

    fn oracle_state(&self) -> Option<&OracleKalmanState> {
        Some(&self.okf)
    }
}

/// Builds a per-episode policy instance. `policy_rng` feeds only the
/// randomized baselines; deterministic policies ignore it.
pub fn build_policy(
    id: PolicyId,
    spec: &Arc<LgdsSpec>,
    params: &ResolvedParams,
    policy_rng: Stream,
) -> Result<Box<dyn Policy>> {
    Ok(match id {
        PolicyId::Idea => Box::new(KalmanPolicy {
            spec: Arc::clone(spec),
            kf: kf_init(spec),
            rule: KalmanRule::Idea,
        }),
        PolicyId::KalmanUcb => {
            let delta = params.kalman_ucb_delta;
            if !(0.0..1.0).contains(&delta) || delta == 0.0 {
                return Err(Error::Parameter(format!("delta must be in (0,1), got {delta}")));
            }
            Box::new(KalmanPolicy {
                spec: Arc::clone(spec),
                kf: kf_init(spec),
                rule: KalmanRule::ConfidenceBound {
                    log_inv_delta: (1.0 / delta).ln(),
                },
            })
        }
        PolicyId::Kode => Box::new(KalmanPolicy {
            spec: Arc::clone(spec),
            kf: kf_init(spec),
            rule: KalmanRule::Greedy,
        }),
        PolicyId::KalmanOracle => Box::new(OraclePolicy {
            spec: Arc::clone(spec),
            okf: oracle_kf_init(spec)?,
        }),
        PolicyId::Ucb => Box::new(baselines::UcbPolicy::new(
            spec.k(),
            params.ucb_delta,
            params.ucb_scale,
        )?),
        PolicyId::SwUcb => Box::new(baselines::SwUcbPolicy::new(
            spec.k(),
            params.ucb_delta,
            params.ucb_scale,
            params.sw_window,
        )?),
        PolicyId::Rexp3 => Box::new(baselines::Rexp3Policy::new(
            spec.k(),
            params.rexp3_batch,
            params.rexp3_gamma,
            policy_rng,
        )?),
        PolicyId::Oful => Box::new(baselines::OfulPolicy::new(
            Arc::clone(spec),
            params.oful_lambda,
            params.oful_delta,
        )?),
        PolicyId::Random => Box::new(baselines::RandomPolicy::new(spec.k(), policy_rng)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{generate_spec, ParamDist};
    use crate::numerics::{Matrix, SpdMatrix};
    use approx::assert_relative_eq;

    fn two_action_spec(p: Matrix) -> (LgdsSpec, KalmanState) {
        let spec = LgdsSpec {
            gamma: Matrix::identity(2, 2),
            actions: vec![
                Vector::from_vec(vec![1.0, 0.0]),
                Vector::from_vec(vec![0.0, 1.0]),
            ],
            q: Matrix::identity(2, 2),
            sigma: 1.0,
            sigma0: Matrix::identity(2, 2),
            meta: None,
        };
        let kf = KalmanState {
            zhat: Vector::zeros(2),
            p: SpdMatrix::new_unchecked(p),
        };
        (spec, kf)
    }

    #[test]
    fn idea_tie_breaks_low_and_analytic_perturbation() {
        // Gamma = I, P = I, sigma2 = 1: every unit action perturbs by sqrt(1/2)
        let (spec, kf) = two_action_spec(Matrix::identity(2, 2));
        let d = idea_select(&kf, &spec);
        assert_eq!(d.action_index, 0);
        for s in &d.scores {
            assert_relative_eq!(*s, 0.5_f64.sqrt(), max_relative = 1e-12);
        }
    }

    #[test]
    fn idea_reduces_to_greedy_when_gamma_zero() {
        let (mut spec, mut kf) = two_action_spec(Matrix::identity(2, 2));
        spec.gamma = Matrix::zeros(2, 2);
        kf.zhat = Vector::from_vec(vec![0.2, 0.9]);
        let d = idea_select(&kf, &spec);
        let g = kode_select(&kf, &spec);
        assert_eq!(d.action_index, g.action_index);
        assert_eq!(d.scores, g.scores);
    }

    #[test]
    fn idea_scalar_trace() {
        // d=1, gamma=2, p=1, sigma2=1: perturbation sqrt(4/(1+1)) = sqrt(2)
        let spec = LgdsSpec {
            gamma: Matrix::identity(1, 1) * 2.0,
            actions: vec![Vector::from_vec(vec![1.0])],
            q: Matrix::identity(1, 1),
            sigma: 1.0,
            sigma0: Matrix::identity(1, 1),
            meta: None,
        };
        let kf = KalmanState {
            zhat: Vector::zeros(1),
            p: SpdMatrix::identity(1),
        };
        assert_relative_eq!(idea_optimism(&kf, &spec, 0), 2.0_f64.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn confidence_bound_examples() {
        let (spec, kf) = two_action_spec(Matrix::identity(2, 2));
        let d = kalman_ucb_select(&kf, &spec, 0.3).unwrap();
        assert_eq!(d.action_index, 0);

        // P = diag(4,1), log(1/delta) = 1: scores (2, 1)
        let (spec, mut kf) = two_action_spec(Matrix::from_diagonal(&Vector::from_vec(vec![4.0, 1.0])));
        let d = kalman_ucb_select(&kf, &spec, 1.0 / std::f64::consts::E).unwrap();
        assert_relative_eq!(d.scores[0], 2.0, max_relative = 1e-12);
        assert_relative_eq!(d.scores[1], 1.0, max_relative = 1e-12);
        assert_eq!(d.action_index, 0);

        // exploitation dominates: zhat = (0, 3) gives scores (2, 4)
        kf.zhat = Vector::from_vec(vec![0.0, 3.0]);
        let d = kalman_ucb_select(&kf, &spec, 1.0 / std::f64::consts::E).unwrap();
        assert_eq!(d.action_index, 1);

        assert!(kalman_ucb_select(&kf, &spec, 0.0).is_err());
        assert!(kalman_ucb_select(&kf, &spec, 1.0).is_err());
    }

    #[test]
    fn greedy_examples() {
        let (spec, mut kf) = two_action_spec(Matrix::identity(2, 2));
        kf.zhat = Vector::from_vec(vec![1.0, 0.0]);
        assert_eq!(kode_select(&kf, &spec).action_index, 0);
        kf.zhat = Vector::zeros(2);
        assert_eq!(kode_select(&kf, &spec).action_index, 0);
    }

    #[test]
    fn greedy_matches_brute_force_scan() {
        let spec = generate_spec(ParamDist::Gaussian, 5, 10, 0.9, 40).unwrap();
        let kf = KalmanState {
            zhat: Vector::from_fn(5, |i, _| (i as f64 - 2.0) * 0.7),
            p: SpdMatrix::identity(5),
        };
        let d = kode_select(&kf, &spec);
        let brute = crate::environment::best_action_for(&kf.zhat, &spec);
        assert_eq!(d.action_index, brute);
    }

    #[test]
    fn oracle_select_is_greedy_on_its_estimate() {
        let spec = generate_spec(ParamDist::Gaussian, 4, 6, 0.9, 41).unwrap();
        let mut okf = crate::filtering::oracle_kf_init(&spec).unwrap();
        okf.ztilde = Vector::from_vec(vec![0.5, -1.0, 0.2, 2.0]);
        let d = kalman_oracle_select(&okf, &spec);
        let kf = KalmanState {
            zhat: okf.ztilde.clone(),
            p: SpdMatrix::identity(4),
        };
        assert_eq!(d.action_index, kode_select(&kf, &spec).action_index);
    }

    #[test]
    fn optimism_template_with_zero_perturbation_is_greedy() {
        // forcing the perturbation to 0 must coincide with the greedy rule
        let spec = Arc::new(generate_spec(ParamDist::Gaussian, 4, 6, 0.9, 42).unwrap());
        let kf = KalmanState {
            zhat: Vector::from_vec(vec![1.0, 0.3, -0.2, 0.8]),
            p: SpdMatrix::zeros(4),
        };
        // P = 0 kills both perturbations exactly
        let idea = idea_select(&kf, &spec);
        let cb = kalman_ucb_select(&kf, &spec, 0.5).unwrap();
        let greedy = kode_select(&kf, &spec);
        assert_eq!(idea.action_index, greedy.action_index);
        assert_eq!(cb.action_index, greedy.action_index);
    }

    #[test]
    fn argmax_tie_and_nan_handling() {
        assert_eq!(argmax_lowest(&[1.0, 1.0, 0.5]), 0);
        assert_eq!(argmax_lowest(&[f64::NAN, 0.0, 1.0]), 2);
        assert_eq!(argmax_lowest(&[f64::NAN, f64::NAN]), 0);
    }
}
