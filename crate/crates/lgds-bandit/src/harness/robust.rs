//! Model-mismatch robustness: policies filter with a similarity-perturbed
//! copy of exactly one system matrix while the real environment (and the
//! oracle baseline) stays exact.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::environment::LgdsSpec;
use crate::error::{Error, Result};
use crate::numerics::{Matrix, Vector};
use crate::rng::{counter_stream, derive_seed, tag};

use super::benchmark::{run_sweep, BenchmarkOutcome};
use super::config::ExperimentConfig;

/// Which system matrix the perceived model gets wrong.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PerturbTarget {
    Gamma,
    Actions,
    Q,
}

impl PerturbTarget {
    pub const ALL: [PerturbTarget; 3] =
        [PerturbTarget::Gamma, PerturbTarget::Actions, PerturbTarget::Q];

    pub fn name(&self) -> &'static str {
        match self {
            PerturbTarget::Gamma => "gamma",
            PerturbTarget::Actions => "actions",
            PerturbTarget::Q => "q",
        }
    }

    fn tag(&self) -> u64 {
        match self {
            PerturbTarget::Gamma => 1,
            PerturbTarget::Actions => 2,
            PerturbTarget::Q => 3,
        }
    }
}

impl std::str::FromStr for PerturbTarget {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        PerturbTarget::ALL
            .iter()
            .copied()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown perturbation target '{s}'")))
    }
}

const MAX_ATTEMPTS: u64 = 100;
const MAX_CONDITION: f64 = 1e12;

/// Draws `T = I + nu * Xi` with `Xi` entrywise normal scaled to unit
/// Frobenius norm, resampling while `T` is near-singular, and returns the
/// perceived spec with one matrix replaced by its `T^{-1} X T` conjugate.
/// `nu = 0` returns an exact copy.
pub fn perturb_spec(
    spec: &LgdsSpec,
    nu: f64,
    target: PerturbTarget,
    seed: u64,
) -> Result<LgdsSpec> {
    if nu < 0.0 {
        return Err(Error::Parameter(format!("nu must be nonnegative, got {nu}")));
    }
    if nu == 0.0 {
        return Ok(spec.clone());
    }
    let d = spec.d();
    if target == PerturbTarget::Actions && spec.k() != d {
        return Err(Error::Perturbation(format!(
            "the action-matrix conjugation needs k = d, got k = {} and d = {d}",
            spec.k()
        )));
    }
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = counter_stream(seed, &[tag::PERTURB, attempt]);
        let mut xi = Matrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = xi.norm();
        if norm == 0.0 {
            continue;
        }
        xi /= norm;
        let t = Matrix::identity(d, d) + xi * nu;
        let svd = t.clone().svd(false, false);
        let smax = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
        let smin = svd
            .singular_values
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if !(smin > 0.0) || smax / smin > MAX_CONDITION {
            continue;
        }
        let t_inv = t
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Perturbation("similarity transform not invertible".into()))?;
        let mut out = spec.clone();
        match target {
            PerturbTarget::Gamma => out.gamma = &t_inv * &spec.gamma * &t,
            PerturbTarget::Q => out.q = &t_inv * &spec.q * &t,
            PerturbTarget::Actions => {
                let c = spec.c_matrix();
                let c_tilde = &t_inv * c * &t;
                out.actions = (0..spec.k())
                    .map(|i| Vector::from_iterator(d, c_tilde.row(i).iter().cloned()))
                    .collect();
            }
        }
        return Ok(out);
    }
    Err(Error::Perturbation(format!(
        "no well-conditioned transform in {MAX_ATTEMPTS} draws (nu = {nu})"
    )))
}

/// One robustness sweep result.
#[derive(Debug)]
pub struct RobustnessOutcome {
    pub nu: f64,
    pub target: PerturbTarget,
    pub outcome: BenchmarkOutcome,
}

/// Runs the benchmark grid once per `nu`, perturbing the given matrix in
/// each environment's perceived model. The oracle baseline and the
/// environment itself always use the exact system.
pub fn run_robustness(
    config: &ExperimentConfig,
    nus: &[f64],
    target: PerturbTarget,
) -> Result<Vec<RobustnessOutcome>> {
    let mut out = Vec::with_capacity(nus.len());
    for &nu in nus {
        let outcome = run_sweep(config, &|env_id, spec: &Arc<LgdsSpec>| {
            let seed = derive_seed(
                config.seed,
                &[tag::PERTURB, target.tag(), nu.to_bits(), env_id as u64],
            );
            perturb_spec(spec, nu, target, seed).map(Arc::new)
        })?;
        out.push(RobustnessOutcome {
            nu,
            target,
            outcome,
        });
    }
    Ok(out)
}
