//! Flat-file persistence: byte-stable CSV writers.
//!
//! Floats are written with Rust's shortest-roundtrip formatting, '.' as
//! the decimal separator, and '\n' line endings, so identical results are
//! identical bytes.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;
use crate::policies::PolicyId;

use super::benchmark::{BenchmarkOutcome, NormalizedEntry};
use super::episode::RunRecord;
use super::summary::SummaryTable;

fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v}")
    }
}

pub const ROUNDS_HEADER: &str = "t,env,run,policy,action,reward,oracle_action,inst_regret,err_norm";

/// Per-round CSV for a set of episodes (assumed already sorted).
pub fn rounds_csv(records: &[RunRecord]) -> String {
    let mut s = String::new();
    s.push_str(ROUNDS_HEADER);
    s.push('\n');
    for rec in records {
        for r in &rec.rounds {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{}",
                r.t,
                rec.env_id,
                rec.run_id,
                rec.policy.name(),
                r.action,
                fmt_f64(r.reward),
                r.oracle_action,
                fmt_f64(r.inst_regret),
                r.err_norm.map(fmt_f64).unwrap_or_default(),
            );
        }
    }
    s
}

pub const SUMMARY_HEADER: &str =
    "policy,median,iqr,q1,q3,count,excluded,unnormalizable";

pub fn summary_csv(summary: &SummaryTable) -> String {
    let mut s = String::new();
    s.push_str(SUMMARY_HEADER);
    s.push('\n');
    for c in &summary.cells {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            c.policy.name(),
            fmt_f64(c.median),
            fmt_f64(c.iqr),
            fmt_f64(c.q1),
            fmt_f64(c.q3),
            c.count,
            c.excluded,
            c.unnormalizable,
        );
    }
    s
}

pub const NORMALIZED_HEADER: &str = "env,run,policy,normalized_regret,raw_regret,oracle_regret";

pub fn normalized_csv(entries: &[NormalizedEntry]) -> String {
    let mut s = String::new();
    s.push_str(NORMALIZED_HEADER);
    s.push('\n');
    for n in entries {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            n.env_id,
            n.run_id,
            n.policy.name(),
            n.value.map(fmt_f64).unwrap_or_default(),
            fmt_f64(n.raw),
            fmt_f64(n.oracle_raw),
        );
    }
    s
}

pub const EXCLUSIONS_HEADER: &str = "env,run,policy,reason";

pub fn exclusions_csv(outcome: &BenchmarkOutcome) -> String {
    let mut s = String::new();
    s.push_str(EXCLUSIONS_HEADER);
    s.push('\n');
    for x in &outcome.exclusions {
        let reason = x.reason.replace([',', '\n'], ";");
        let _ = writeln!(s, "{},{},{},{}", x.env_id, x.run_id, x.policy.name(), reason);
    }
    s
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, text.as_bytes())?;
    Ok(())
}

/// Per-environment median normalized regret for scatter plots; pairs the
/// two policies' values by environment. Environments where either value
/// is missing are dropped.
pub fn paired_env_medians(
    entries: &[NormalizedEntry],
    x_policy: PolicyId,
    y_policy: PolicyId,
) -> Vec<(f64, f64)> {
    use std::collections::BTreeMap;
    let mut by_env: BTreeMap<usize, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for n in entries {
        let Some(v) = n.value else { continue };
        let slot = by_env.entry(n.env_id).or_default();
        if n.policy == x_policy {
            slot.0.push(v);
        } else if n.policy == y_policy {
            slot.1.push(v);
        }
    }
    by_env
        .values()
        .filter(|(x, y)| !x.is_empty() && !y.is_empty())
        .map(|(x, y)| {
            let mut xs = x.clone();
            let mut ys = y.clone();
            xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            ys.sort_by(|a, b| a.partial_cmp(b).unwrap());
            (
                super::summary::lower_median(&xs),
                super::summary::lower_median(&ys),
            )
        })
        .collect()
}
