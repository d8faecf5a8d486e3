//! Experiment harness: seeded episode execution, batch benchmarking,
//! robustness sweeps, summaries, persistence, and plot emission.

pub mod benchmark;
pub mod config;
pub mod episode;
pub mod output;
pub mod plot;
pub mod robust;
pub mod summary;

pub use benchmark::{run_benchmark, run_sweep, BenchmarkOutcome, Exclusion, NormalizedEntry};
pub use config::ExperimentConfig;
pub use episode::{run_episode, RoundRecord, RunRecord};
pub use robust::{perturb_spec, run_robustness, PerturbTarget, RobustnessOutcome};
pub use summary::{box_stats, lower_median, quantile_linear, BoxStats, SummaryCell, SummaryTable};
