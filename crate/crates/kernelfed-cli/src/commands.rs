//! The `gen` and `solve` subcommands.

use std::path::Path;
use std::sync::Arc;

use kernelfed::datasets::{generate_synthetic, write_dataset_csv, PartitionedDataset, SyntheticSpec};
use kernelfed::federation::run_federation_with;
use kernelfed::grid::{KernelFamily, QuadratureGrid};
use kernelfed::solver::{ascend_with, write_trace_csv, AscendOptions};
use kernelfed::{Error, Result};

use crate::config::{DatasetConfig, RunConfig};
use crate::sweeps::{load_file_pool, precheck_out_path};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Learner {
    Federated,
    Centralized,
    Both,
}

impl Learner {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "federated" => Ok(Self::Federated),
            "centralized" => Ok(Self::Centralized),
            "both" => Ok(Self::Both),
            other => Err(Error::invalid(format!(
                "unknown learner '{other}' (expected federated, centralized, or both)"
            ))),
        }
    }
}

fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Generates the synthetic dataset and archives it as CSV.
pub fn run_gen(cfg: &RunConfig) -> Result<String> {
    let (noise_sigma, overlap, test_n) = match &cfg.dataset {
        DatasetConfig::Synthetic { noise_sigma, overlap, test_n } => {
            (*noise_sigma, *overlap, *test_n)
        }
        DatasetConfig::File { .. } => {
            return Err(Error::invalid("gen only produces the synthetic dataset"))
        }
    };
    precheck_out_path(&cfg.out)?;
    let mut spec = SyntheticSpec::with_defaults(cfg.n[0], cfg.seed);
    spec.noise_sigma = noise_sigma;
    spec.overlap = overlap;
    spec.test_n = test_n;
    spec.k_subspaces = cfg.agents[0];
    let ds = generate_synthetic(&spec)?;
    let mut buf = Vec::new();
    write_dataset_csv(&ds, &mut buf)?;
    write_atomic(&cfg.out, &buf)?;
    Ok(format!(
        "wrote {} training and {} test samples across {} agents to {}",
        ds.total_samples(),
        ds.test_set.len(),
        ds.agents.len(),
        cfg.out.display()
    ))
}

fn build_dataset(cfg: &RunConfig) -> Result<PartitionedDataset> {
    match &cfg.dataset {
        DatasetConfig::Synthetic { noise_sigma, overlap, test_n } => {
            let mut spec = SyntheticSpec::with_defaults(cfg.n[0], cfg.seed);
            spec.noise_sigma = *noise_sigma;
            spec.overlap = *overlap;
            spec.test_n = *test_n;
            spec.k_subspaces = cfg.agents[0];
            generate_synthetic(&spec)
        }
        DatasetConfig::File { .. } => {
            let pool = load_file_pool(cfg)?;
            let k = cfg.agents[0].min(pool.users.len());
            crate::sweeps::file_dataset(&pool, cfg, k, cfg.seed)
        }
    }
}

/// Runs a single federated and/or centralized fit and writes one JSON line
/// per learner. Returns the emitted lines.
pub fn run_solve(cfg: &RunConfig, learner: Learner) -> Result<Vec<String>> {
    precheck_out_path(&cfg.out)?;
    let ds = build_dataset(cfg)?;
    let all = ds.all_samples();
    let family = KernelFamily::new(cfg.widths.clone())?;
    let grid = Arc::new(QuadratureGrid::from_point_cloud(
        all.iter().map(|s| s.x.as_slice()),
        cfg.grid_resolution,
        family,
    )?);
    let hp = cfg.hyperparams(cfg.gamma[0])?;

    let mut lines = Vec::new();
    if learner != Learner::Centralized {
        let (report, server_result) = run_federation_with(&ds, &grid, &hp, cfg.trace)?;
        let mut value: serde_json::Value = serde_json::from_str(&report.to_json_line())
            .expect("report lines are valid JSON");
        value["learner"] = "federated".into();
        value["n_train"] = ds.total_samples().into();
        lines.push(value.to_string());
        if cfg.trace {
            if let Some(tr) = &server_result.dual_state.trajectory {
                let mut buf = Vec::new();
                write_trace_csv(tr, &mut buf)?;
                write_atomic(&trace_path(&cfg.out, "federated"), &buf)?;
            }
        }
    }
    if learner != Learner::Federated {
        let opts = AscendOptions { record_trajectory: cfg.trace, ..Default::default() };
        let result = ascend_with(&all, &grid, &hp, &opts)?;
        let acc = result.alpha_star.accuracy(&ds.test_set)?;
        let value = serde_json::json!({
            "learner": "centralized",
            "n_train": all.len(),
            "communication_cost": all.len(),
            "representation_cost": result.alpha_star.support_cells(),
            "iters": result.dual_state.iters_run,
            "global_accuracy": acc,
        });
        lines.push(value.to_string());
        if cfg.trace {
            if let Some(tr) = &result.dual_state.trajectory {
                let mut buf = Vec::new();
                write_trace_csv(tr, &mut buf)?;
                write_atomic(&trace_path(&cfg.out, "centralized"), &buf)?;
            }
        }
    }
    write_atomic(&cfg.out, (lines.join("\n") + "\n").as_bytes())?;
    Ok(lines)
}

fn trace_path(out: &Path, learner: &str) -> std::path::PathBuf {
    out.with_file_name(format!(
        "{}.{learner}.trace.csv",
        out.file_stem().map(|s| s.to_string_lossy()).unwrap_or_default()
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentKind;

    fn tiny_cfg(dir: &Path) -> RunConfig {
        let mut cfg = RunConfig::defaults(ExperimentKind::SampleSize);
        cfg.n = vec![40];
        cfg.agents = vec![4];
        cfg.gamma = vec![0.0];
        cfg.iters = 200;
        cfg.eta = 1.0;
        cfg.grid_resolution = 8;
        cfg.widths = vec![2.0];
        cfg.out = dir.join("out.jsonl");
        if let DatasetConfig::Synthetic { test_n, .. } = &mut cfg.dataset {
            *test_n = 40;
        }
        cfg
    }

    #[test]
    fn gen_writes_csv() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_cfg(dir.path());
        cfg.out = dir.path().join("data.csv");
        let msg = run_gen(&cfg).unwrap();
        assert!(msg.contains("40 training"));
        let text = std::fs::read_to_string(&cfg.out).unwrap();
        assert!(text.starts_with("x1,x2,y,agent_id"));
        assert_eq!(text.lines().count(), 1 + 40 + 40);
    }

    #[test]
    fn solve_emits_json_lines_and_traces() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_cfg(dir.path());
        cfg.trace = true;
        let lines = run_solve(&cfg, Learner::Both).unwrap();
        assert_eq!(lines.len(), 2);
        let fed: serde_json::Value = serde_json::from_str(&lines[0]).unwrap();
        assert_eq!(fed["learner"], "federated");
        assert!(fed["communication_cost"].as_u64().unwrap() <= 40);
        let cen: serde_json::Value = serde_json::from_str(&lines[1]).unwrap();
        assert_eq!(cen["learner"], "centralized");
        assert_eq!(cen["communication_cost"].as_u64().unwrap(), 40);
        assert!(dir.path().join("out.federated.trace.csv").exists());
        assert!(dir.path().join("out.centralized.trace.csv").exists());
        let written = std::fs::read_to_string(&cfg.out).unwrap();
        assert_eq!(written.lines().count(), 2);
    }
}
