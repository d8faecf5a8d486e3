//! Batch benchmarking: environments x runs x policies, with paired seeds,
//! oracle-normalized regret, and exclusion accounting.

use std::sync::Arc;

use rayon::prelude::*;

use crate::environment::{generate_spec, LgdsSpec};
use crate::error::{Error, Result};
use crate::policies::PolicyId;
use crate::rng::{derive_seed, tag};

use super::config::ExperimentConfig;
use super::episode::{run_episode, RunRecord};
use super::summary::{summarize_cell, SummaryTable};

/// Normalized regret of one episode against its paired oracle episode.
#[derive(Debug, Clone, serde::Serialize)]
pub struct NormalizedEntry {
    pub env_id: usize,
    pub run_id: usize,
    pub policy: PolicyId,
    /// `None` when the oracle regret was too close to zero to divide by.
    pub value: Option<f64>,
    pub raw: f64,
    pub oracle_raw: f64,
}

/// An episode dropped from the summary, with the reason.
#[derive(Debug, Clone, serde::Serialize)]
pub struct Exclusion {
    pub env_id: usize,
    pub run_id: usize,
    pub policy: PolicyId,
    pub reason: String,
}

#[derive(Debug)]
pub struct BenchmarkOutcome {
    /// Completed episodes, sorted by (env, run, policy-order); includes the
    /// oracle baseline even when it was added only as the normalizer.
    pub records: Vec<RunRecord>,
    pub normalized: Vec<NormalizedEntry>,
    pub summary: SummaryTable,
    pub exclusions: Vec<Exclusion>,
    /// envs x runs x executed policies; completed + excluded sums to this.
    pub total_episodes: usize,
}

fn policy_order(p: PolicyId) -> usize {
    PolicyId::ALL.iter().position(|&q| q == p).unwrap()
}

/// Runs the full grid where the policy's believed spec for environment `e`
/// is `perceive(e, true_spec)`. The oracle baseline always believes the
/// true spec. Results are keyed and sorted, so the output is independent
/// of thread scheduling.
pub fn run_sweep(
    config: &ExperimentConfig,
    perceive: &(dyn Fn(usize, &Arc<LgdsSpec>) -> Result<Arc<LgdsSpec>> + Sync),
) -> Result<BenchmarkOutcome> {
    config.validate()?;
    let mut policies = config.policies.clone();
    if !policies.contains(&PolicyId::KalmanOracle) {
        // the oracle baseline is the normalizer, run it regardless
        policies.push(PolicyId::KalmanOracle);
    }

    // per-environment setup, with generation failures excluding the
    // environment's whole episode block
    let mut envs: Vec<(usize, Arc<LgdsSpec>, Arc<LgdsSpec>)> = Vec::new();
    let mut exclusions: Vec<Exclusion> = Vec::new();
    for env_id in 0..config.envs {
        let spec_seed = derive_seed(config.seed, &[tag::SPEC_GEN, env_id as u64]);
        let setup = generate_spec(config.dist, config.d, config.k, config.rho, spec_seed)
            .map(Arc::new)
            .and_then(|s| Ok((perceive(env_id, &s)?, s)));
        match setup {
            Ok((perceived, true_spec)) => envs.push((env_id, true_spec, perceived)),
            Err(e) => {
                for run_id in 0..config.runs {
                    for &policy in &policies {
                        exclusions.push(Exclusion {
                            env_id,
                            run_id,
                            policy,
                            reason: format!("environment setup failed: {e}"),
                        });
                    }
                }
            }
        }
    }

    let mut tasks: Vec<(usize, usize, PolicyId)> = Vec::new();
    for &(env_id, _, _) in &envs {
        for run_id in 0..config.runs {
            for &p in &policies {
                tasks.push((env_id, run_id, p));
            }
        }
    }

    let by_env: std::collections::HashMap<usize, (Arc<LgdsSpec>, Arc<LgdsSpec>)> = envs
        .iter()
        .map(|(e, t, p)| (*e, (Arc::clone(t), Arc::clone(p))))
        .collect();

    let run_one = |&(env_id, run_id, policy): &(usize, usize, PolicyId)| -> (
        (usize, usize, PolicyId),
        Result<RunRecord>,
    ) {
        let (true_spec, perceived) = &by_env[&env_id];
        // the oracle baseline always works from the true system
        let believed = if policy == PolicyId::KalmanOracle {
            true_spec
        } else {
            perceived
        };
        let params = config.params.clone().resolve(believed, config.horizon);
        let env_seed = derive_seed(config.seed, &[tag::ENV_OF_RUN, env_id as u64, run_id as u64]);
        let policy_seed = derive_seed(
            config.seed,
            &[
                tag::POLICY,
                env_id as u64,
                run_id as u64,
                policy_order(policy) as u64,
            ],
        );
        let r = run_episode(
            true_spec,
            believed,
            policy,
            &params,
            config.horizon,
            config.warmup,
            env_seed,
            policy_seed,
            env_id,
            run_id,
        );
        ((env_id, run_id, policy), r)
    };

    let mut results: Vec<((usize, usize, PolicyId), Result<RunRecord>)> = if config.jobs == 1 {
        tasks.iter().map(run_one).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| tasks.par_iter().map(run_one).collect())
    };
    results.sort_by_key(|((e, r, p), _)| (*e, *r, policy_order(*p)));

    let mut records: Vec<RunRecord> = Vec::new();
    for ((env_id, run_id, policy), res) in results {
        match res {
            Ok(rec) if rec.is_valid() => records.push(rec),
            Ok(_) => exclusions.push(Exclusion {
                env_id,
                run_id,
                policy,
                reason: "non-finite regret trace".into(),
            }),
            Err(e) => exclusions.push(Exclusion {
                env_id,
                run_id,
                policy,
                reason: e.to_string(),
            }),
        }
    }

    let outcome = assemble(config, &policies, records, exclusions);
    Ok(outcome)
}

fn assemble(
    config: &ExperimentConfig,
    executed: &[PolicyId],
    records: Vec<RunRecord>,
    exclusions: Vec<Exclusion>,
) -> BenchmarkOutcome {
    use std::collections::HashMap;
    let mut oracle_regret: HashMap<(usize, usize), f64> = HashMap::new();
    for r in &records {
        if r.policy == PolicyId::KalmanOracle {
            oracle_regret.insert((r.env_id, r.run_id), r.final_regret);
        }
    }

    let mut normalized: Vec<NormalizedEntry> = Vec::new();
    for r in &records {
        if !config.policies.contains(&r.policy) {
            continue; // oracle run only as normalizer
        }
        if let Some(&oracle_raw) = oracle_regret.get(&(r.env_id, r.run_id)) {
            normalized.push(NormalizedEntry {
                env_id: r.env_id,
                run_id: r.run_id,
                policy: r.policy,
                value: crate::analysis::normalized_regret(r.final_regret, oracle_raw),
                raw: r.final_regret,
                oracle_raw,
            });
        }
    }

    let mut cells = Vec::new();
    for &policy in &config.policies {
        let values: Vec<f64> = normalized
            .iter()
            .filter(|n| n.policy == policy)
            .filter_map(|n| n.value)
            .collect();
        let unnormalizable = normalized
            .iter()
            .filter(|n| n.policy == policy && n.value.is_none())
            .count();
        let excluded = exclusions.iter().filter(|x| x.policy == policy).count();
        if let Some(cell) = summarize_cell(policy, &values, excluded, unnormalizable) {
            cells.push(cell);
        }
    }

    let total_episodes = config.envs * config.runs * executed.len();
    let summary = SummaryTable {
        cells,
        total_episodes,
        excluded_episodes: exclusions.len(),
    };
    BenchmarkOutcome {
        records,
        normalized,
        summary,
        exclusions,
        total_episodes,
    }
}

/// The standard benchmark: policies believe the true system.
pub fn run_benchmark(config: &ExperimentConfig) -> Result<BenchmarkOutcome> {
    run_sweep(config, &|_, spec| Ok(Arc::clone(spec)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::ParamDist;
    use crate::policies::PolicyParams;

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            dist: ParamDist::Gaussian,
            d: 3,
            k: 4,
            rho: 0.9,
            envs: 3,
            runs: 2,
            horizon: 60,
            warmup: 50,
            policies: vec![PolicyId::Idea, PolicyId::Kode, PolicyId::KalmanOracle],
            seed: 123,
            jobs: 1,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn policy_params_from_the_config_reach_the_policies() {
        let base = ExperimentConfig {
            policies: vec![PolicyId::KalmanUcb],
            ..small_config()
        };
        let tuned = ExperimentConfig {
            params: PolicyParams {
                kalman_ucb_delta: Some(1e-6),
                ..PolicyParams::default()
            },
            ..base.clone()
        };
        let a = run_benchmark(&base).unwrap();
        let b = run_benchmark(&tuned).unwrap();
        let regrets = |o: &BenchmarkOutcome| -> Vec<f64> {
            o.records.iter().map(|r| r.final_regret).collect()
        };
        assert_ne!(regrets(&a), regrets(&b));
    }

    #[test]
    fn oracle_self_comparison_is_zero() {
        let config = ExperimentConfig {
            envs: 1,
            runs: 1,
            policies: vec![PolicyId::KalmanOracle],
            ..small_config()
        };
        let out = run_benchmark(&config).unwrap();
        assert_eq!(out.normalized.len(), 1);
        assert_eq!(out.normalized[0].value, Some(0.0));
        assert_eq!(out.summary.cell(PolicyId::KalmanOracle).unwrap().median, 0.0);
    }

    #[test]
    fn policy_results_are_isolated_from_the_policy_list() {
        let full = run_benchmark(&small_config()).unwrap();
        let config = ExperimentConfig {
            policies: vec![PolicyId::Idea],
            ..small_config()
        };
        let solo = run_benchmark(&config).unwrap();
        let pick = |out: &BenchmarkOutcome| -> Vec<f64> {
            out.records
                .iter()
                .filter(|r| r.policy == PolicyId::Idea)
                .map(|r| r.final_regret)
                .collect()
        };
        assert_eq!(pick(&full), pick(&solo));
    }

    #[test]
    fn parallelism_does_not_change_results() {
        let seq = run_benchmark(&small_config()).unwrap();
        let par = run_benchmark(&ExperimentConfig {
            jobs: 4,
            ..small_config()
        })
        .unwrap();
        let key = |out: &BenchmarkOutcome| -> Vec<(usize, usize, PolicyId, f64)> {
            out.records
                .iter()
                .map(|r| (r.env_id, r.run_id, r.policy, r.final_regret))
                .collect()
        };
        assert_eq!(key(&seq), key(&par));
    }

    #[test]
    fn episode_accounting_adds_up() {
        let out = run_benchmark(&small_config()).unwrap();
        assert_eq!(
            out.records.len() + out.exclusions.len(),
            out.total_episodes
        );
        // 3 policies requested including the oracle: no extra policy added
        assert_eq!(out.total_episodes, 3 * 2 * 3);
    }

    #[test]
    fn oracle_is_added_as_normalizer_when_missing() {
        let config = ExperimentConfig {
            policies: vec![PolicyId::Random],
            ..small_config()
        };
        let out = run_benchmark(&config).unwrap();
        assert!(out.records.iter().any(|r| r.policy == PolicyId::KalmanOracle));
        // but it does not appear in the normalized entries or summary
        assert!(out.normalized.iter().all(|n| n.policy == PolicyId::Random));
        assert!(out.summary.cell(PolicyId::KalmanOracle).is_none());
        assert_eq!(out.total_episodes, 3 * 2 * 2);
    }
}
