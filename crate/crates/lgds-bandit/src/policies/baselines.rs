//! Classical bandit baselines: UCB, sliding-window UCB, Rexp3 (Exp3 with
//! batch restarts), OFUL, and uniform random.

use std::collections::VecDeque;
use std::sync::Arc;

use rand::Rng;

use crate::environment::LgdsSpec;
use crate::error::{Error, Result};
use crate::numerics::{Matrix, Vector};
use crate::rng::Stream;

use super::{argmax_lowest, ObservationMode, Policy, PolicyDecision};

/// Per-action visit counts and reward sums.
#[derive(Debug, Clone)]
pub struct UcbState {
    pub counts: Vec<u64>,
    pub sums: Vec<f64>,
}

impl UcbState {
    pub fn new(k: usize) -> Self {
        UcbState {
            counts: vec![0; k],
            sums: vec![0.0; k],
        }
    }

    pub fn record(&mut self, action_index: usize, reward: f64) {
        self.counts[action_index] += 1;
        self.sums[action_index] += reward;
    }
}

fn check_ucb_params(delta: f64, r: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Parameter(format!("delta must be in (0,1), got {delta}")));
    }
    if !(r > 0.0) {
        return Err(Error::Parameter(format!("R must be positive, got {r}")));
    }
    Ok(())
}

/// `mean_a + sqrt(2 R^2 log(1/delta) / N_a)`; unvisited actions score
/// infinity so initialization is round-robin in index order.
pub fn ucb_select(bs: &UcbState, delta: f64, r: f64) -> Result<PolicyDecision> {
    check_ucb_params(delta, r)?;
    let bonus_num = 2.0 * r * r * (1.0 / delta).ln();
    let scores: Vec<f64> = bs
        .counts
        .iter()
        .zip(&bs.sums)
        .map(|(&n, &s)| {
            if n == 0 {
                f64::INFINITY
            } else {
                s / n as f64 + (bonus_num / n as f64).sqrt()
            }
        })
        .collect();
    Ok(PolicyDecision {
        action_index: argmax_lowest(&scores),
        scores,
    })
}

/// Recent (round, action, reward) history limited to the window.
#[derive(Debug, Clone)]
pub struct SwUcbState {
    pub k: usize,
    pub window: u64,
    history: VecDeque<(u64, usize, f64)>,
}

impl SwUcbState {
    pub fn new(k: usize, window: u64) -> Result<Self> {
        if window == 0 {
            return Err(Error::Parameter("window must be >= 1".into()));
        }
        Ok(SwUcbState {
            k,
            window,
            history: VecDeque::new(),
        })
    }

    pub fn record(&mut self, t: u64, action_index: usize, reward: f64) {
        self.history.push_back((t, action_index, reward));
        while self.history.len() as u64 > self.window {
            self.history.pop_front();
        }
    }

    fn windowed(&self, t: u64) -> UcbState {
        let mut bs = UcbState::new(self.k);
        let cutoff = t.saturating_sub(self.window);
        for &(tau, a, x) in &self.history {
            if tau >= cutoff {
                bs.record(a, x);
            }
        }
        bs
    }
}

/// UCB with statistics rebuilt from the last `window` rounds only.
pub fn sw_ucb_select(bs: &SwUcbState, t: u64, delta: f64, r: f64) -> Result<PolicyDecision> {
    ucb_select(&bs.windowed(t), delta, r)
}

/// Exponential weights restarted every batch.
#[derive(Debug, Clone)]
pub struct Rexp3State {
    pub weights: Vec<f64>,
    pub batch_size: u64,
    pub gamma: f64,
    rounds_in_batch: u64,
}

impl Rexp3State {
    pub fn new(k: usize, batch_size: u64, gamma: f64) -> Result<Self> {
        if batch_size == 0 {
            return Err(Error::Parameter("batch size must be >= 1".into()));
        }
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::Parameter(format!("gamma must be in (0,1], got {gamma}")));
        }
        Ok(Rexp3State {
            weights: vec![1.0; k],
            batch_size,
            gamma,
            rounds_in_batch: 0,
        })
    }

    fn maybe_restart(&mut self) {
        if self.rounds_in_batch >= self.batch_size {
            self.weights.iter_mut().for_each(|w| *w = 1.0);
            self.rounds_in_batch = 0;
        }
    }
}

/// Exp3 sampling probabilities for the current weights.
pub fn rexp3_probabilities(state: &Rexp3State) -> Vec<f64> {
    let k = state.weights.len();
    let total: f64 = state.weights.iter().sum();
    state
        .weights
        .iter()
        .map(|w| (1.0 - state.gamma) * w / total + state.gamma / k as f64)
        .collect()
}

pub struct UcbPolicy {
    state: UcbState,
    delta: f64,
    r: f64,
}

impl UcbPolicy {
    pub fn new(k: usize, delta: f64, r: f64) -> Result<Self> {
        check_ucb_params(delta, r)?;
        Ok(UcbPolicy {
            state: UcbState::new(k),
            delta,
            r,
        })
    }
}

impl Policy for UcbPolicy {
    fn select(&mut self, _t: u64) -> Result<PolicyDecision> {
        ucb_select(&self.state, self.delta, self.r)
    }

    fn update(&mut self, _t: u64, action_index: usize, reward: f64) -> Result<()> {
        self.state.record(action_index, reward);
        Ok(())
    }
}

pub struct SwUcbPolicy {
    state: SwUcbState,
    delta: f64,
    r: f64,
}

impl SwUcbPolicy {
    pub fn new(k: usize, delta: f64, r: f64, window: u64) -> Result<Self> {
        check_ucb_params(delta, r)?;
        Ok(SwUcbPolicy {
            state: SwUcbState::new(k, window)?,
            delta,
            r,
        })
    }
}

impl Policy for SwUcbPolicy {
    fn select(&mut self, t: u64) -> Result<PolicyDecision> {
        sw_ucb_select(&self.state, t, self.delta, self.r)
    }

    fn update(&mut self, t: u64, action_index: usize, reward: f64) -> Result<()> {
        self.state.record(t, action_index, reward);
        Ok(())
    }
}

pub struct Rexp3Policy {
    state: Rexp3State,
    rng: Stream,
    last_probs: Vec<f64>,
    last_action: usize,
}

impl Rexp3Policy {
    pub fn new(k: usize, batch_size: u64, gamma: f64, rng: Stream) -> Result<Self> {
        Ok(Rexp3Policy {
            state: Rexp3State::new(k, batch_size, gamma)?,
            rng,
            last_probs: vec![1.0 / k as f64; k],
            last_action: 0,
        })
    }
}

impl Policy for Rexp3Policy {
    fn select(&mut self, _t: u64) -> Result<PolicyDecision> {
        self.state.maybe_restart();
        let probs = rexp3_probabilities(&self.state);
        let u: f64 = self.rng.random();
        let mut cum = 0.0;
        let mut chosen = probs.len() - 1;
        for (i, &p) in probs.iter().enumerate() {
            cum += p;
            if u < cum {
                chosen = i;
                break;
            }
        }
        self.last_probs = probs;
        self.last_action = chosen;
        // scores report the sampled draw so the argmax contract holds for
        // randomized policies; sampling probabilities drive the draw itself
        let mut scores = vec![0.0; self.last_probs.len()];
        scores[chosen] = 1.0;
        Ok(PolicyDecision {
            action_index: chosen,
            scores,
        })
    }

    fn update(&mut self, _t: u64, action_index: usize, reward: f64) -> Result<()> {
        let k = self.state.weights.len() as f64;
        let p = self.last_probs[action_index].max(f64::MIN_POSITIVE);
        let xhat = reward / p;
        self.state.weights[action_index] *= (self.state.gamma * xhat / k).exp();
        // renormalize so unbounded rewards can't overflow the weights
        let max_w = self
            .state
            .weights
            .iter()
            .cloned()
            .fold(f64::MIN_POSITIVE, f64::max);
        if max_w.is_finite() && max_w > 0.0 {
            self.state.weights.iter_mut().for_each(|w| *w /= max_w);
        } else {
            // an infinite or NaN weight: keep only the offending arm
            for (i, w) in self.state.weights.iter_mut().enumerate() {
                *w = if i == action_index { 1.0 } else { f64::MIN_POSITIVE };
            }
        }
        self.state.rounds_in_batch += 1;
        Ok(())
    }
}

/// Ridge regression on a static-parameter model plus an ellipsoidal bonus.
#[derive(Debug, Clone)]
pub struct OfulState {
    pub v: Matrix,
    pub xty: Vector,
    pub lambda: f64,
    pub log_inv_delta: f64,
    pub rounds: u64,
}

/// `<a, theta_hat> + beta_t sqrt(a^T V^{-1} a)` with
/// `beta_t = sqrt(lambda) + sigma sqrt(2 log(1/delta) + d log(1 + t/(lambda d)))`.
pub fn oful_select(state: &OfulState, spec: &LgdsSpec) -> Result<PolicyDecision> {
    let d = spec.d() as f64;
    let chol = state
        .v
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Parameter("design matrix lost positive definiteness".into()))?;
    let theta = chol.solve(&state.xty);
    let beta = state.lambda.sqrt()
        + spec.sigma
            * (2.0 * state.log_inv_delta
                + d * (1.0 + state.rounds as f64 / (state.lambda * d)).ln())
            .sqrt();
    let scores: Vec<f64> = spec
        .actions
        .iter()
        .map(|a| {
            let vinv_a = chol.solve(a);
            a.dot(&theta) + beta * a.dot(&vinv_a).max(0.0).sqrt()
        })
        .collect();
    Ok(PolicyDecision {
        action_index: argmax_lowest(&scores),
        scores,
    })
}

pub struct OfulPolicy {
    spec: Arc<LgdsSpec>,
    state: OfulState,
}

impl OfulPolicy {
    pub fn new(spec: Arc<LgdsSpec>, lambda: f64, delta: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::Parameter(format!("lambda must be positive, got {lambda}")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Parameter(format!("delta must be in (0,1), got {delta}")));
        }
        let d = spec.d();
        Ok(OfulPolicy {
            state: OfulState {
                v: Matrix::identity(d, d) * lambda,
                xty: Vector::zeros(d),
                lambda,
                log_inv_delta: (1.0 / delta).ln(),
                rounds: 0,
            },
            spec,
        })
    }
}

impl Policy for OfulPolicy {
    fn select(&mut self, _t: u64) -> Result<PolicyDecision> {
        oful_select(&self.state, &self.spec)
    }

    fn update(&mut self, _t: u64, action_index: usize, reward: f64) -> Result<()> {
        let a = &self.spec.actions[action_index];
        self.state.v += a * a.transpose();
        self.state.xty += a * reward;
        self.state.rounds += 1;
        Ok(())
    }
}

pub struct RandomPolicy {
    k: usize,
    rng: Stream,
}

impl RandomPolicy {
    pub fn new(k: usize, rng: Stream) -> Self {
        RandomPolicy { k, rng }
    }
}

/// Uniform draw over the action set.
pub fn random_select(k: usize, rng: &mut Stream) -> PolicyDecision {
    let chosen = rng.random_range(0..k);
    let mut scores = vec![0.0; k];
    scores[chosen] = 1.0;
    PolicyDecision {
        action_index: chosen,
        scores,
    }
}

impl Policy for RandomPolicy {
    fn select(&mut self, _t: u64) -> Result<PolicyDecision> {
        Ok(random_select(self.k, &mut self.rng))
    }

    fn update(&mut self, _t: u64, _action_index: usize, _reward: f64) -> Result<()> {
        Ok(())
    }

    fn observation_mode(&self) -> ObservationMode {
        ObservationMode::Scalar
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{generate_spec, ParamDist};
    use crate::rng::{counter_stream, tag};
    use approx::assert_relative_eq;

    #[test]
    fn ucb_round_robin_then_analytic() {
        let mut bs = UcbState::new(3);
        // all unvisited: lowest index wins
        let d = ucb_select(&bs, 0.5, 1.0).unwrap();
        assert_eq!(d.action_index, 0);
        bs.record(0, 1.0);
        assert_eq!(ucb_select(&bs, 0.5, 1.0).unwrap().action_index, 1);
        bs.record(1, 0.0);
        assert_eq!(ucb_select(&bs, 0.5, 1.0).unwrap().action_index, 2);

        // k=2, N=(1,1), means (1,0), R=1, delta=1/e -> (1+sqrt2, sqrt2)
        let mut bs = UcbState::new(2);
        bs.record(0, 1.0);
        bs.record(1, 0.0);
        let d = ucb_select(&bs, 1.0 / std::f64::consts::E, 1.0).unwrap();
        assert_relative_eq!(d.scores[0], 1.0 + 2.0_f64.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(d.scores[1], 2.0_f64.sqrt(), max_relative = 1e-12);
        assert_eq!(d.action_index, 0);

        assert!(ucb_select(&bs, 0.0, 1.0).is_err());
        assert!(ucb_select(&bs, 0.5, 0.0).is_err());
    }

    #[test]
    fn ucb_finds_best_arm_on_frozen_instance() {
        // frozen two-arm instance: rewards mean (1.0, 0.0), tiny noise
        let mut rng = counter_stream(9, &[tag::POLICY]);
        let mut policy = UcbPolicy::new(2, 1e-3, 1.0).unwrap();
        let mut pulls_bad = 0u64;
        let n = 5000;
        for t in 0..n {
            let d = policy.select(t).unwrap();
            let mean = if d.action_index == 0 { 1.0 } else { 0.0 };
            let noise: f64 = rng.random::<f64>() * 0.02 - 0.01;
            if d.action_index == 1 {
                pulls_bad += 1;
            }
            policy.update(t, d.action_index, mean + noise).unwrap();
        }
        assert!(
            (pulls_bad as f64 / n as f64) < 0.05,
            "suboptimal pull fraction {pulls_bad}/{n}"
        );
    }

    #[test]
    fn sw_ucb_covers_everything_with_large_window() {
        let mut sw = SwUcbState::new(3, 1000).unwrap();
        let mut plain = UcbState::new(3);
        let seq = [(0usize, 1.0), (1, 0.5), (2, -0.2), (0, 0.9), (1, 0.7)];
        for (t, &(a, x)) in seq.iter().enumerate() {
            sw.record(t as u64, a, x);
            plain.record(a, x);
        }
        let d_sw = sw_ucb_select(&sw, seq.len() as u64, 0.3, 1.0).unwrap();
        let d_plain = ucb_select(&plain, 0.3, 1.0).unwrap();
        assert_eq!(d_sw.action_index, d_plain.action_index);
        assert_eq!(d_sw.scores, d_plain.scores);
    }

    #[test]
    fn sw_ucb_window_one_forgets_all_but_last() {
        let mut sw = SwUcbState::new(3, 1).unwrap();
        sw.record(0, 0, 1.0);
        sw.record(1, 2, 0.5);
        let d = sw_ucb_select(&sw, 2, 0.3, 1.0).unwrap();
        assert!(d.scores[0].is_infinite());
        assert!(d.scores[1].is_infinite());
        assert!(d.scores[2].is_finite());
        assert_eq!(d.action_index, 0);
    }

    #[test]
    fn sw_ucb_matches_naive_recompute() {
        // oracle: recompute windowed stats from the full history each round
        let spec = generate_spec(ParamDist::Gaussian, 3, 5, 0.9, 21).unwrap();
        let k = spec.k();
        let window = 16u64;
        let mut sw = SwUcbState::new(k, window).unwrap();
        let mut full: Vec<(u64, usize, f64)> = Vec::new();
        let mut rng = counter_stream(3, &[tag::POLICY, 1]);
        for t in 0..400u64 {
            let d = sw_ucb_select(&sw, t, 0.2, 1.5).unwrap();

            let mut naive = UcbState::new(k);
            let cutoff = t.saturating_sub(window);
            for &(tau, a, x) in full.iter().rev().take(window as usize) {
                if tau >= cutoff {
                    naive.record(a, x);
                }
            }
            let d_naive = ucb_select(&naive, 0.2, 1.5).unwrap();
            assert_eq!(d.action_index, d_naive.action_index, "round {t}");

            let x: f64 = rng.random::<f64>() + 0.3 * d.action_index as f64;
            sw.record(t, d.action_index, x);
            full.push((t, d.action_index, x));
        }
    }

    #[test]
    fn rexp3_gamma_one_is_uniform() {
        let mut state = Rexp3State::new(4, 10, 1.0).unwrap();
        state.weights = vec![100.0, 1.0, 1.0, 1.0];
        for p in rexp3_probabilities(&state) {
            assert_relative_eq!(p, 0.25, max_relative = 1e-12);
        }
    }

    #[test]
    fn rexp3_restarts_and_reproduces() {
        let mk = || {
            Rexp3Policy::new(3, 5, 0.3, counter_stream(11, &[tag::POLICY, 2])).unwrap()
        };
        let run = |mut p: Rexp3Policy| -> Vec<usize> {
            (0..40)
                .map(|t| {
                    let d = p.select(t).unwrap();
                    p.update(t, d.action_index, (t % 3) as f64).unwrap();
                    d.action_index
                })
                .collect()
        };
        assert_eq!(run(mk()), run(mk()));

        // after a restart the weights are uniform again
        let mut p = mk();
        for t in 0..5 {
            let d = p.select(t).unwrap();
            p.update(t, d.action_index, 10.0).unwrap();
        }
        p.state.maybe_restart();
        let w0 = p.state.weights[0];
        assert!(p.state.weights.iter().all(|&w| w == w0));
    }

    #[test]
    fn rexp3_survives_huge_rewards() {
        let mut p = Rexp3Policy::new(2, 100, 0.5, counter_stream(12, &[tag::POLICY, 3])).unwrap();
        for t in 0..50 {
            let d = p.select(t).unwrap();
            p.update(t, d.action_index, 1e12).unwrap();
            assert!(p.state.weights.iter().all(|w| w.is_finite()));
        }
    }

    #[test]
    fn oful_prefers_informative_then_converges() {
        // static state z (Gamma = I, Q -> 0): OFUL should find the best arm
        let spec = Arc::new(LgdsSpec {
            gamma: Matrix::identity(2, 2),
            actions: vec![
                Vector::from_vec(vec![1.0, 0.0]),
                Vector::from_vec(vec![0.0, 1.0]),
            ],
            q: Matrix::zeros(2, 2),
            sigma: 0.1,
            sigma0: Matrix::identity(2, 2),
            meta: None,
        });
        let z = Vector::from_vec(vec![1.0, -0.5]);
        let mut p = OfulPolicy::new(Arc::clone(&spec), 1.0, 0.01).unwrap();
        let mut rng = counter_stream(5, &[tag::POLICY, 4]);
        let mut last_hundred_good = 0;
        for t in 0..500u64 {
            let d = p.select(t).unwrap();
            let x = spec.actions[d.action_index].dot(&z) + 0.1 * rng.random::<f64>();
            p.update(t, d.action_index, x).unwrap();
            if t >= 400 && d.action_index == 0 {
                last_hundred_good += 1;
            }
        }
        assert!(last_hundred_good >= 95, "good pulls {last_hundred_good}/100");
    }

    #[test]
    fn random_is_reproducible_and_in_range() {
        let mut a = counter_stream(6, &[tag::POLICY, 5]);
        let mut b = counter_stream(6, &[tag::POLICY, 5]);
        for _ in 0..100 {
            let da = random_select(7, &mut a);
            let db = random_select(7, &mut b);
            assert_eq!(da.action_index, db.action_index);
            assert!(da.action_index < 7);
        }
    }
}
