//! Command-line front end for the simulation library.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use lgds_bandit::analysis::{lower_bound_continuous_mc, lower_bound_discrete, phi_interval};
use lgds_bandit::environment::{generate_spec, validate_spec, LgdsSpec};
use lgds_bandit::error::{Error, Result};
use lgds_bandit::filtering::KalmanState;
use lgds_bandit::harness::{
    benchmark::run_benchmark,
    config::ExperimentConfig,
    episode::run_episode,
    output,
    plot::{self, IntervalPoint},
    robust::{run_robustness, PerturbTarget},
    summary::box_stats,
};
use lgds_bandit::numerics::{solve_dare_multi, Vector};
use lgds_bandit::policies::{
    idea_optimism, kalman_ucb_optimism, PolicyId, KALMAN_UCB_DEFAULT_DELTA,
};
use lgds_bandit::rng::{derive_seed, stream, tag};

#[derive(Parser)]
#[command(name = "lgds-bandit", version, about = "Linear bandit simulation on a known linear Gaussian dynamical system")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by the experiment pipelines; each overrides the config
/// file when given.
#[derive(Args, Debug, Default, Clone)]
struct CommonFlags {
    /// Parameter distribution: gaussian|uniform|exponential|cauchy|bernoulli
    #[arg(long)]
    dist: Option<String>,
    /// State dimension
    #[arg(long)]
    d: Option<usize>,
    /// Number of actions
    #[arg(long)]
    k: Option<usize>,
    /// Target spectral radius of the dynamics
    #[arg(long)]
    rho: Option<f64>,
    /// Number of generated environments
    #[arg(long)]
    envs: Option<usize>,
    /// Episodes per environment
    #[arg(long)]
    runs: Option<usize>,
    /// Rounds per episode
    #[arg(long)]
    horizon: Option<u64>,
    /// Environment warm-up steps
    #[arg(long)]
    warmup: Option<usize>,
    /// Comma-separated policy list
    #[arg(long, value_delimiter = ',')]
    policies: Option<Vec<String>>,
    /// Master seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores)
    #[arg(long)]
    jobs: Option<usize>,
    /// JSON config file; flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate environment spec files
    Generate {
        #[command(flatten)]
        common: CommonFlags,
    },
    /// Validate a spec file against the model assumptions
    Validate {
        /// Spec JSON file
        spec: PathBuf,
    },
    /// Run a single episode and print its per-round CSV
    Run {
        #[command(flatten)]
        common: CommonFlags,
        /// Spec JSON file (generated from flags when omitted)
        #[arg(long)]
        spec: Option<PathBuf>,
    },
    /// Benchmark all policies across generated environments
    Bench {
        #[command(flatten)]
        common: CommonFlags,
        /// Also write the (large) per-round CSV
        #[arg(long)]
        per_round: bool,
    },
    /// Robustness sweep: policies filter with a perturbed model
    Robust {
        #[command(flatten)]
        common: CommonFlags,
        /// Perturbation magnitudes
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.1, 1.0, 10.0])]
        nu: Vec<f64>,
        /// Which matrix to perturb: gamma|actions|q
        #[arg(long, default_value = "gamma")]
        perturb: String,
    },
    /// Comparison-metric intervals with paired episode regrets
    Metric {
        #[command(flatten)]
        common: CommonFlags,
    },
    /// Evaluate the regret lower bounds on generated specs
    Bounds {
        #[command(flatten)]
        common: CommonFlags,
        /// Monte-Carlo samples for the continuous bound
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
    },
    /// Re-render the scatter plot from a normalized-regret CSV
    Plot {
        /// normalized.csv produced by bench
        csv: PathBuf,
        /// x-axis policy
        #[arg(long, default_value = "kalman_ucb")]
        x: String,
        /// y-axis policy
        #[arg(long, default_value = "idea")]
        y: String,
        #[arg(long, default_value = "plot.svg")]
        out: PathBuf,
    },
}

fn build_config(common: &CommonFlags) -> Result<ExperimentConfig> {
    let mut config = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(d) = &common.dist {
        config.dist = d.parse()?;
    }
    if let Some(v) = common.d {
        config.d = v;
    }
    if let Some(v) = common.k {
        config.k = v;
    }
    if let Some(v) = common.rho {
        config.rho = v;
    }
    if let Some(v) = common.envs {
        config.envs = v;
    }
    if let Some(v) = common.runs {
        config.runs = v;
    }
    if let Some(v) = common.horizon {
        config.horizon = v;
    }
    if let Some(v) = common.warmup {
        config.warmup = v;
    }
    if let Some(ps) = &common.policies {
        config.policies = ps
            .iter()
            .map(|s| s.parse::<PolicyId>())
            .collect::<Result<Vec<_>>>()?;
    }
    if let Some(v) = common.seed {
        config.seed = v;
    }
    if let Some(v) = &common.out {
        config.out = Some(v.clone());
    }
    if let Some(v) = common.jobs {
        config.jobs = v;
    }
    config.validate()?;
    Ok(config)
}

fn out_dir(config: &ExperimentConfig) -> PathBuf {
    config.out.clone().unwrap_or_else(|| PathBuf::from("."))
}

fn load_spec(path: &Path) -> Result<LgdsSpec> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn exceeds_failure_budget(excluded: usize, total: usize) -> bool {
    total > 0 && (excluded as f64) > 0.05 * total as f64
}

fn cmd_generate(common: &CommonFlags) -> Result<u8> {
    let config = build_config(common)?;
    let dir = out_dir(&config);
    std::fs::create_dir_all(&dir)?;
    for env_id in 0..config.envs {
        let seed = derive_seed(config.seed, &[tag::SPEC_GEN, env_id as u64]);
        let spec = generate_spec(config.dist, config.d, config.k, config.rho, seed)?;
        let path = dir.join(format!("spec_{env_id:04}.json"));
        output::write_text(&path, &serde_json::to_string_pretty(&spec)?)?;
        println!("{}", path.display());
    }
    Ok(0)
}

fn cmd_validate(path: &Path) -> Result<u8> {
    let spec = load_spec(path)?;
    let report = validate_spec(&spec);
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(if report.all_pass() { 0 } else { 2 })
}

fn cmd_run(common: &CommonFlags, spec_path: &Option<PathBuf>) -> Result<u8> {
    let config = build_config(common)?;
    let spec = Arc::new(match spec_path {
        Some(p) => load_spec(p)?,
        None => generate_spec(
            config.dist,
            config.d,
            config.k,
            config.rho,
            derive_seed(config.seed, &[tag::SPEC_GEN, 0]),
        )?,
    });
    let policy = *config
        .policies
        .first()
        .ok_or_else(|| Error::Config("no policy given".into()))?;
    let params = config.params.resolve(&spec, config.horizon);
    let record = run_episode(
        &spec,
        &spec,
        policy,
        &params,
        config.horizon,
        config.warmup,
        derive_seed(config.seed, &[tag::ENV_OF_RUN, 0, 0]),
        derive_seed(config.seed, &[tag::POLICY, 0, 0, 0]),
        0,
        0,
    )?;
    print!("{}", output::rounds_csv(std::slice::from_ref(&record)));
    eprintln!("final cumulative regret: {}", record.final_regret);
    Ok(0)
}

fn cmd_bench(common: &CommonFlags, per_round: bool) -> Result<u8> {
    let config = build_config(common)?;
    let outcome = run_benchmark(&config)?;
    let dir = out_dir(&config);
    output::write_text(&dir.join("summary.csv"), &output::summary_csv(&outcome.summary))?;
    output::write_text(&dir.join("normalized.csv"), &output::normalized_csv(&outcome.normalized))?;
    output::write_text(&dir.join("exclusions.csv"), &output::exclusions_csv(&outcome))?;
    if per_round {
        output::write_text(&dir.join("rounds.csv"), &output::rounds_csv(&outcome.records))?;
    }
    let points = output::paired_env_medians(
        &outcome.normalized,
        PolicyId::KalmanUcb,
        PolicyId::Idea,
    );
    if !points.is_empty() {
        let svg = plot::scatter_log_log(
            &points,
            "kalman_ucb normalized regret",
            "idea normalized regret",
            "per-environment normalized regret",
        );
        output::write_text(&dir.join("regret_scatter.svg"), &svg)?;
    }
    print!("{}", output::summary_csv(&outcome.summary));
    eprintln!(
        "episodes: {} completed, {} excluded (master seed {})",
        outcome.records.len(),
        outcome.exclusions.len(),
        config.seed
    );
    Ok(if exceeds_failure_budget(outcome.exclusions.len(), outcome.total_episodes) {
        3
    } else {
        0
    })
}

fn cmd_robust(common: &CommonFlags, nus: &[f64], perturb: &str) -> Result<u8> {
    let mut config = build_config(common)?;
    if common.policies.is_none() {
        config.policies = vec![PolicyId::Kode, PolicyId::Idea, PolicyId::KalmanUcb];
    }
    let target: PerturbTarget = perturb.parse()?;
    let sweeps = run_robustness(&config, nus, target)?;
    let dir = out_dir(&config);
    let mut budget_blown = false;
    for sweep in &sweeps {
        let stem = format!("robust_{}_nu{}", target.name(), sweep.nu);
        output::write_text(
            &dir.join(format!("{stem}_summary.csv")),
            &output::summary_csv(&sweep.outcome.summary),
        )?;
        output::write_text(
            &dir.join(format!("{stem}_normalized.csv")),
            &output::normalized_csv(&sweep.outcome.normalized),
        )?;
        let groups: Vec<(String, _)> = config
            .policies
            .iter()
            .filter_map(|&p| {
                let values: Vec<f64> = sweep
                    .outcome
                    .normalized
                    .iter()
                    .filter(|n| n.policy == p)
                    .filter_map(|n| n.value)
                    .collect();
                box_stats(&values).map(|b| (p.name().to_string(), b))
            })
            .collect();
        if !groups.is_empty() {
            let svg = plot::box_plot(
                &groups,
                "normalized regret",
                &format!("{} perturbation, nu = {}", target.name(), sweep.nu),
            );
            output::write_text(&dir.join(format!("{stem}.svg")), &svg)?;
        }
        println!("# nu = {}", sweep.nu);
        print!("{}", output::summary_csv(&sweep.outcome.summary));
        budget_blown |= exceeds_failure_budget(
            sweep.outcome.exclusions.len(),
            sweep.outcome.total_episodes,
        );
    }
    Ok(if budget_blown { 3 } else { 0 })
}

fn interval_for(spec: &LgdsSpec, policy: PolicyId) -> Result<(f64, f64)> {
    let r = match policy {
        PolicyId::Idea => phi_interval(spec, &|p, i| {
            let kf = KalmanState {
                zhat: Vector::zeros(spec.d()),
                p: p.clone(),
            };
            idea_optimism(&kf, spec, i)
        })?,
        PolicyId::KalmanUcb => phi_interval(spec, &|p, i| {
            let kf = KalmanState {
                zhat: Vector::zeros(spec.d()),
                p: p.clone(),
            };
            kalman_ucb_optimism(&kf, spec, i, (1.0 / KALMAN_UCB_DEFAULT_DELTA).ln())
        })?,
        _ => {
            return Err(Error::Config(format!(
                "no comparison interval for policy '{}'",
                policy.name()
            )))
        }
    };
    Ok((r.min, r.max))
}

fn cmd_metric(common: &CommonFlags) -> Result<u8> {
    let config = build_config(common)?;
    let dir = out_dir(&config);
    let mut rows = String::from("env,idea_min,idea_max,kalman_ucb_min,kalman_ucb_max\n");
    let mut points = Vec::new();
    let mut failures = 0usize;
    for env_id in 0..config.envs {
        let seed = derive_seed(config.seed, &[tag::SPEC_GEN, env_id as u64]);
        let spec = generate_spec(config.dist, config.d, config.k, config.rho, seed)?;
        match interval_for(&spec, PolicyId::Idea)
            .and_then(|i| interval_for(&spec, PolicyId::KalmanUcb).map(|u| (i, u)))
        {
            Ok(((i_min, i_max), (u_min, u_max))) => {
                rows.push_str(&format!("{env_id},{i_min},{i_max},{u_min},{u_max}\n"));
                points.push(IntervalPoint {
                    x_min: u_min,
                    x_max: u_max,
                    y_min: i_min,
                    y_max: i_max,
                });
            }
            Err(e) => {
                eprintln!("env {env_id}: {e}");
                failures += 1;
            }
        }
    }
    output::write_text(&dir.join("intervals.csv"), &rows)?;
    let svg = plot::interval_scatter(
        &points,
        "kalman_ucb interval",
        "idea interval",
        "comparison-metric intervals",
    );
    output::write_text(&dir.join("intervals.svg"), &svg)?;
    print!("{rows}");
    Ok(if exceeds_failure_budget(failures, config.envs) { 3 } else { 0 })
}

fn cmd_bounds(common: &CommonFlags, samples: u64) -> Result<u8> {
    let config = build_config(common)?;
    let mut rows = String::from("env,discrete_bound,continuous_estimate,continuous_se,skipped_pairs\n");
    let mut failures = 0usize;
    for env_id in 0..config.envs {
        let seed = derive_seed(config.seed, &[tag::SPEC_GEN, env_id as u64]);
        let spec = generate_spec(config.dist, config.d, config.k, config.rho, seed)?;
        let result = (|| -> Result<String> {
            let discrete = lower_bound_discrete(&spec, config.horizon)?;
            let (p_a, _) = solve_dare_multi(
                &spec.gamma,
                &spec.c_matrix(),
                &spec.q_spd(),
                spec.sigma2(),
            )?;
            let mut rng = stream(derive_seed(config.seed, &[tag::BOUND_MC, env_id as u64]));
            let mc = lower_bound_continuous_mc(&spec, config.horizon, &p_a, samples, &mut rng)?;
            Ok(format!(
                "{env_id},{},{},{},{}\n",
                discrete.value,
                mc.estimate,
                mc.std_error,
                discrete.skipped_pairs.len()
            ))
        })();
        match result {
            Ok(row) => rows.push_str(&row),
            Err(e) => {
                eprintln!("env {env_id}: {e}");
                failures += 1;
            }
        }
    }
    if let Some(dir) = &config.out {
        output::write_text(&dir.join("bounds.csv"), &rows)?;
    }
    print!("{rows}");
    Ok(if exceeds_failure_budget(failures, config.envs) { 3 } else { 0 })
}

fn cmd_plot(csv: &Path, x: &str, y: &str, out: &Path) -> Result<u8> {
    let x_policy: PolicyId = x.parse()?;
    let y_policy: PolicyId = y.parse()?;
    let text = std::fs::read_to_string(csv)?;
    let mut xs: Vec<(usize, f64)> = Vec::new();
    let mut ys: Vec<(usize, f64)> = Vec::new();
    for (lineno, line) in text.lines().enumerate().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 4 {
            return Err(Error::Config(format!("{}: malformed line {}", csv.display(), lineno + 1)));
        }
        let env: usize = fields[0]
            .parse()
            .map_err(|_| Error::Config(format!("bad env id on line {}", lineno + 1)))?;
        let Ok(value) = fields[3].parse::<f64>() else {
            continue; // unnormalizable entries have an empty value field
        };
        if fields[2] == x_policy.name() {
            xs.push((env, value));
        } else if fields[2] == y_policy.name() {
            ys.push((env, value));
        }
    }
    // median per env on both axes, paired by env id
    let median_by_env = |mut v: Vec<(usize, f64)>| -> std::collections::BTreeMap<usize, f64> {
        v.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.partial_cmp(&b.1).unwrap()));
        let mut map: std::collections::BTreeMap<usize, Vec<f64>> = Default::default();
        for (e, x) in v {
            map.entry(e).or_default().push(x);
        }
        map.into_iter()
            .map(|(e, vals)| (e, lgds_bandit::harness::lower_median(&vals)))
            .collect()
    };
    let xm = median_by_env(xs);
    let ym = median_by_env(ys);
    let points: Vec<(f64, f64)> = xm
        .iter()
        .filter_map(|(e, &x)| ym.get(e).map(|&y| (x, y)))
        .collect();
    let svg = plot::scatter_log_log(
        &points,
        &format!("{} normalized regret", x_policy.name()),
        &format!("{} normalized regret", y_policy.name()),
        "per-environment normalized regret",
    );
    output::write_text(out, &svg)?;
    eprintln!("wrote {} ({} points)", out.display(), points.len());
    Ok(0)
}

fn dispatch(cli: Cli) -> Result<u8> {
    match &cli.command {
        Command::Generate { common } => cmd_generate(common),
        Command::Validate { spec } => cmd_validate(spec),
        Command::Run { common, spec } => cmd_run(common, spec),
        Command::Bench { common, per_round } => cmd_bench(common, *per_round),
        Command::Robust { common, nu, perturb } => cmd_robust(common, nu, perturb),
        Command::Metric { common } => cmd_metric(common),
        Command::Bounds { common, samples } => cmd_bounds(common, *samples),
        Command::Plot { csv, x, y, out } => cmd_plot(csv, x, y, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e @ (Error::Config(_) | Error::Parameter(_))) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
