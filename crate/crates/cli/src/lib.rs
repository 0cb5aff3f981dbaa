//! Runner behind the `canard-ctl` binary: config resolution, the experiment
//! registry, batch execution and the output writers.

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod svg;
pub mod verify;

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use config::{Experiment, ResolvedConfig};
pub use error::CliError;

/// Outcome of one run in a batch.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub name: String,
    pub dir: PathBuf,
    pub result: Result<String, CliError>,
}

fn run_one(cfg: &ResolvedConfig, dir: &Path) -> Result<String, CliError> {
    if cfg.experiment == Experiment::Verify {
        let results = verify::run_all();
        let failed = results.iter().filter(|r| !r.passed).count();
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let json = serde_json::json!({
            "config": cfg,
            "checks": results.iter().map(|r| serde_json::json!({"name": r.name, "passed": r.passed, "detail": r.detail})).collect::<Vec<_>>(),
            "failed": failed,
        });
        let path = dir.join("metrics.json");
        std::fs::write(&path, format!("{}\n", serde_json::to_string_pretty(&json).expect("json"))).map_err(|e| CliError::io(&path, e))?;
        return if failed == 0 {
            Ok(format!("{} checks passed", results.len()))
        } else {
            Err(CliError::Integration(format!("{failed} of {} checks failed", results.len())))
        };
    }
    match experiments::run(cfg) {
        Ok(out) => {
            output::write_run(dir, cfg, &out)?;
            let labels = out.summary.get("labels").and_then(|v| v.as_str()).map(|s| format!(", loops {s}")).unwrap_or_default();
            Ok(format!("{} samples, t = {}{labels}", out.times.len(), out.times.last().copied().unwrap_or(0.0)))
        }
        Err(e) => {
            output::write_failure(dir, cfg, &e);
            Err(e)
        }
    }
}

/// Runs every config on a pool of `jobs` threads, each into `out/<name>`.
/// Names must be distinct; nothing runs otherwise.
pub fn run_batch(configs: &[ResolvedConfig], out: &Path, jobs: usize) -> Result<Vec<RunReport>, CliError> {
    let mut seen = HashSet::new();
    for c in configs {
        if !seen.insert(c.name.as_str()) {
            return Err(CliError::Validation(format!("two runs share the output directory '{}'; give them distinct \"name\" values", c.name)));
        }
    }
    if jobs == 0 {
        return Err(CliError::Validation("--jobs must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Validation(format!("cannot start worker pool: {e}")))?;
    use rayon::prelude::*;
    let reports = pool.install(|| {
        configs
            .par_iter()
            .map(|c| {
                let dir = out.join(&c.name);
                RunReport { name: c.name.clone(), result: run_one(c, &dir), dir }
            })
            .collect()
    });
    Ok(reports)
}

/// Exit code of a batch: that of the first failed run in config order.
pub fn batch_exit_code(reports: &[RunReport]) -> u8 {
    reports.iter().find_map(|r| r.result.as_ref().err().map(|e| e.exit_code())).unwrap_or(0)
}
