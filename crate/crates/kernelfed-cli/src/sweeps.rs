//! The three experiment sweeps and their CSV/JSON outputs.
//!
//! A sweep runs both learners over seeded repetitions for every value of the
//! swept variable and aggregates accuracy, communication cost, and
//! representation cost per value. Repetition `r` always uses seed
//! `base_seed + r`, repetitions run in parallel, and aggregation happens in
//! repetition order so identical configurations produce identical bytes.

use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;

use kernelfed::datasets::{
    generate_synthetic, ingest_accelerometer_windows, split, AgentData, PartitionedDataset,
    SubspaceBox, SyntheticSpec,
};
use kernelfed::federation::{centralized_train, run_federation};
use kernelfed::grid::{KernelFamily, QuadratureGrid};
use kernelfed::{Error, LabeledSample, Result};

use crate::config::{DatasetConfig, ExperimentKind, RunConfig};

/// Aggregated metrics for one value of the swept variable.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub sweep_value: f64,
    pub reps_completed: usize,
    pub failures: usize,
    /// Seeds of the completed repetitions.
    pub seeds: Vec<u64>,
    pub fed_acc_mean: f64,
    pub fed_acc_std: f64,
    pub cen_acc_mean: f64,
    pub cen_acc_std: f64,
    pub fed_comm_mean: f64,
    pub cen_comm_mean: f64,
    pub fed_rep_mean: f64,
    pub cen_rep_mean: f64,
}

/// Both learners' metrics from one repetition.
#[derive(Debug, Clone, Copy)]
struct RepOutcome {
    fed_acc: f64,
    cen_acc: f64,
    fed_comm: usize,
    cen_comm: usize,
    fed_rep: usize,
    cen_rep: usize,
}

fn mean(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = values.clone().count();
    if n == 0 {
        return f64::NAN;
    }
    values.sum::<f64>() / n as f64
}

fn std_dev(values: impl Iterator<Item = f64> + Clone, mean: f64) -> f64 {
    let n = values.clone().count();
    if n < 2 {
        return 0.0;
    }
    (values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
}

fn aggregate(sweep_value: f64, total_reps: usize, outcomes: Vec<(u64, Result<RepOutcome>)>) -> SweepRow {
    let ok: Vec<(u64, RepOutcome)> =
        outcomes.into_iter().filter_map(|(s, r)| r.ok().map(|o| (s, o))).collect();
    let fed_acc = mean(ok.iter().map(|(_, o)| o.fed_acc));
    let cen_acc = mean(ok.iter().map(|(_, o)| o.cen_acc));
    SweepRow {
        sweep_value,
        reps_completed: ok.len(),
        failures: total_reps - ok.len(),
        seeds: ok.iter().map(|(s, _)| *s).collect(),
        fed_acc_mean: fed_acc,
        fed_acc_std: std_dev(ok.iter().map(|(_, o)| o.fed_acc), fed_acc),
        cen_acc_mean: cen_acc,
        cen_acc_std: std_dev(ok.iter().map(|(_, o)| o.cen_acc), cen_acc),
        fed_comm_mean: mean(ok.iter().map(|(_, o)| o.fed_comm as f64)),
        cen_comm_mean: mean(ok.iter().map(|(_, o)| o.cen_comm as f64)),
        fed_rep_mean: mean(ok.iter().map(|(_, o)| o.fed_rep as f64)),
        cen_rep_mean: mean(ok.iter().map(|(_, o)| o.cen_rep as f64)),
    }
}

fn build_grid(cfg: &RunConfig, samples: &[LabeledSample]) -> Result<Arc<QuadratureGrid>> {
    let family = KernelFamily::new(cfg.widths.clone())?;
    Ok(Arc::new(QuadratureGrid::from_point_cloud(
        samples.iter().map(|s| s.x.as_slice()),
        cfg.grid_resolution,
        family,
    )?))
}

/// Runs both learners on a prepared dataset.
fn run_both(dataset: &PartitionedDataset, cfg: &RunConfig, gamma: f64) -> Result<RepOutcome> {
    let all = dataset.all_samples();
    let grid = build_grid(cfg, &all)?;
    let hp = cfg.hyperparams(gamma)?;
    let (cen_model, _) = centralized_train(&all, &grid, &hp)?;
    let report = run_federation(dataset, &grid, &hp)?;
    Ok(RepOutcome {
        fed_acc: report.global_accuracy,
        cen_acc: cen_model.accuracy(&dataset.test_set)?,
        fed_comm: report.communication_cost,
        // The centralized route ships every sample by definition.
        cen_comm: all.len(),
        fed_rep: report.representation_cost,
        cen_rep: cen_model.support_cells(),
    })
}

fn synthetic_dataset(
    cfg: &RunConfig,
    n: usize,
    k_subspaces: usize,
    seed: u64,
) -> Result<PartitionedDataset> {
    let (noise_sigma, overlap, test_n) = match &cfg.dataset {
        DatasetConfig::Synthetic { noise_sigma, overlap, test_n } => {
            (*noise_sigma, *overlap, *test_n)
        }
        DatasetConfig::File { .. } => {
            return Err(Error::invalid("this experiment requires the synthetic dataset"))
        }
    };
    let mut spec = SyntheticSpec::with_defaults(n, seed);
    spec.noise_sigma = noise_sigma;
    spec.overlap = overlap;
    spec.test_n = test_n;
    spec.k_subspaces = k_subspaces;
    let ds = generate_synthetic(&spec)?;
    for (i, a) in ds.agents.iter().enumerate() {
        if a.samples.is_empty() {
            return Err(Error::invalid(format!(
                "agent partition {i} drew no samples at n={n}, seed={seed}"
            )));
        }
    }
    Ok(ds)
}

/// Windows grouped per user, ingested once per sweep.
pub struct FilePool {
    pub users: Vec<(String, Vec<LabeledSample>)>,
}

pub fn load_file_pool(cfg: &RunConfig) -> Result<FilePool> {
    let (path, label_map, window_seconds) = match &cfg.dataset {
        DatasetConfig::File { path, label_map, window_seconds, .. } => {
            (path, label_map, *window_seconds)
        }
        _ => return Err(Error::invalid("no data file configured")),
    };
    let file = std::fs::File::open(path)?;
    let (windows, _stats) = ingest_accelerometer_windows(
        std::io::BufReader::new(file),
        window_seconds,
        1e9,
        label_map,
    )?;
    let mut users: Vec<(String, Vec<LabeledSample>)> = Vec::new();
    for w in windows {
        match users.iter_mut().find(|(u, _)| *u == w.user) {
            Some((_, v)) => v.push(w.sample),
            None => users.push((w.user, vec![w.sample])),
        }
    }
    users.sort_by(|a, b| a.0.cmp(&b.0));
    if users.is_empty() {
        return Err(Error::invalid("data file produced no usable windows"));
    }
    Ok(FilePool { users })
}

fn bounding_box(samples: &[LabeledSample]) -> SubspaceBox {
    let dim = samples[0].x.len();
    let mut lo = samples[0].x.clone();
    let mut hi = samples[0].x.clone();
    for s in samples {
        for d in 0..dim {
            lo[d] = lo[d].min(s.x[d]);
            hi[d] = hi[d].max(s.x[d]);
        }
    }
    SubspaceBox { lo, hi }
}

/// One repetition over file data: pick `k` users with a seeded shuffle, split
/// each user's windows into train/test, and treat each user as an agent.
pub fn file_dataset(
    pool: &FilePool,
    cfg: &RunConfig,
    k: usize,
    seed: u64,
) -> Result<PartitionedDataset> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let test_fraction = match &cfg.dataset {
        DatasetConfig::File { test_fraction, .. } => *test_fraction,
        _ => unreachable!("file_dataset requires a file config"),
    };
    if k == 0 {
        return Err(Error::invalid("agent count must be at least 1"));
    }
    if k > pool.users.len() {
        return Err(Error::invalid(format!(
            "requested {k} agents but the file has {} users",
            pool.users.len()
        )));
    }
    let mut order: Vec<usize> = (0..pool.users.len()).collect();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut agents = Vec::with_capacity(k);
    let mut test_set = Vec::new();
    for (slot, &u) in order[..k].iter().enumerate() {
        let (_, samples) = &pool.users[u];
        let (train, test) = split(samples, test_fraction, seed.wrapping_add(slot as u64))?;
        if train.is_empty() {
            return Err(Error::invalid("a selected user has no training windows"));
        }
        test_set.extend(test);
        agents.push(AgentData { subspace: bounding_box(&train), samples: train });
    }
    Ok(PartitionedDataset { agents, test_set })
}

fn single<T: Copy>(list: &[T], what: &str) -> Result<T> {
    if list.len() != 1 {
        return Err(Error::invalid(format!(
            "{what} must be a single value for this experiment, got {} values",
            list.len()
        )));
    }
    Ok(list[0])
}

/// Accuracy vs training-set size, both learners, synthetic task only.
pub fn sweep_sample_size(cfg: &RunConfig) -> Result<Vec<SweepRow>> {
    let gamma = single(&cfg.gamma, "gamma")?;
    let k = single(&cfg.agents, "agents")?;
    cfg.n
        .iter()
        .map(|&n| {
            let outcomes: Vec<(u64, Result<RepOutcome>)> = (0..cfg.reps)
                .into_par_iter()
                .map(|r| {
                    let seed = cfg.seed + r as u64;
                    let out = synthetic_dataset(cfg, n, k, seed)
                        .and_then(|ds| run_both(&ds, cfg, gamma));
                    (seed, out)
                })
                .collect();
            Ok(aggregate(n as f64, cfg.reps, outcomes))
        })
        .collect()
}

/// Accuracy, representation cost, and communication cost across the
/// sparsity-parameter grid.
pub fn sweep_gamma(cfg: &RunConfig) -> Result<Vec<SweepRow>> {
    match &cfg.dataset {
        DatasetConfig::Synthetic { .. } => {
            let n = single(&cfg.n, "n")?;
            let k = single(&cfg.agents, "agents")?;
            cfg.gamma
                .iter()
                .map(|&gamma| {
                    let outcomes: Vec<(u64, Result<RepOutcome>)> = (0..cfg.reps)
                        .into_par_iter()
                        .map(|r| {
                            let seed = cfg.seed + r as u64;
                            let out = synthetic_dataset(cfg, n, k, seed)
                                .and_then(|ds| run_both(&ds, cfg, gamma));
                            (seed, out)
                        })
                        .collect();
                    Ok(aggregate(gamma, cfg.reps, outcomes))
                })
                .collect()
        }
        DatasetConfig::File { .. } => {
            let pool = load_file_pool(cfg)?;
            let k = single(&cfg.agents, "agents")?.min(pool.users.len());
            cfg.gamma
                .iter()
                .map(|&gamma| {
                    let outcomes: Vec<(u64, Result<RepOutcome>)> = (0..cfg.reps)
                        .into_par_iter()
                        .map(|r| {
                            let seed = cfg.seed + r as u64;
                            let out = file_dataset(&pool, cfg, k, seed)
                                .and_then(|ds| run_both(&ds, cfg, gamma));
                            (seed, out)
                        })
                        .collect();
                    Ok(aggregate(gamma, cfg.reps, outcomes))
                })
                .collect()
        }
    }
}

/// Both learners across agent counts; subspace counts for the synthetic
/// task, user counts for file data.
pub fn sweep_agents(cfg: &RunConfig) -> Result<Vec<SweepRow>> {
    let gamma = single(&cfg.gamma, "gamma")?;
    match &cfg.dataset {
        DatasetConfig::Synthetic { .. } => {
            let n = single(&cfg.n, "n")?;
            cfg.agents
                .iter()
                .map(|&k| {
                    let outcomes: Vec<(u64, Result<RepOutcome>)> = (0..cfg.reps)
                        .into_par_iter()
                        .map(|r| {
                            let seed = cfg.seed + r as u64;
                            let out = synthetic_dataset(cfg, n, k, seed)
                                .and_then(|ds| run_both(&ds, cfg, gamma));
                            (seed, out)
                        })
                        .collect();
                    Ok(aggregate(k as f64, cfg.reps, outcomes))
                })
                .collect()
        }
        DatasetConfig::File { .. } => {
            let pool = load_file_pool(cfg)?;
            for &k in &cfg.agents {
                if k > pool.users.len() {
                    return Err(Error::invalid(format!(
                        "requested {k} agents but the file has {} users",
                        pool.users.len()
                    )));
                }
            }
            cfg.agents
                .iter()
                .map(|&k| {
                    let outcomes: Vec<(u64, Result<RepOutcome>)> = (0..cfg.reps)
                        .into_par_iter()
                        .map(|r| {
                            let seed = cfg.seed + r as u64;
                            let out = file_dataset(&pool, cfg, k, seed)
                                .and_then(|ds| run_both(&ds, cfg, gamma));
                            (seed, out)
                        })
                        .collect();
                    Ok(aggregate(k as f64, cfg.reps, outcomes))
                })
                .collect()
        }
    }
}

pub fn run_sweep(cfg: &RunConfig) -> Result<Vec<SweepRow>> {
    match cfg.experiment {
        ExperimentKind::SampleSize => sweep_sample_size(cfg),
        ExperimentKind::Gamma => sweep_gamma(cfg),
        ExperimentKind::Agents => sweep_agents(cfg),
    }
}

pub const CSV_HEADER: &str = "sweep_value,reps,failures,seeds,fed_acc_mean,fed_acc_std,\
cen_acc_mean,cen_acc_std,fed_comm_mean,cen_comm_mean,fed_rep_mean,cen_rep_mean";

pub fn render_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let seeds: Vec<String> = r.seeds.iter().map(|s| s.to_string()).collect();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.sweep_value,
            r.reps_completed,
            r.failures,
            seeds.join(";"),
            r.fed_acc_mean,
            r.fed_acc_std,
            r.cen_acc_mean,
            r.cen_acc_std,
            r.fed_comm_mean,
            r.cen_comm_mean,
            r.fed_rep_mean,
            r.cen_rep_mean,
        ));
    }
    out
}

pub fn parse_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::invalid("empty sweep CSV"))?;
    if header != CSV_HEADER {
        return Err(Error::invalid("unexpected sweep CSV header"));
    }
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 12 {
            return Err(Error::Parse {
                line: idx + 2,
                detail: format!("expected 12 fields, got {}", f.len()),
            });
        }
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|_| Error::Parse {
                line: idx + 2,
                detail: format!("bad number '{s}'"),
            })
        };
        let seeds = if f[3].is_empty() {
            Vec::new()
        } else {
            f[3].split(';')
                .map(|s| {
                    s.parse::<u64>().map_err(|_| Error::Parse {
                        line: idx + 2,
                        detail: format!("bad seed '{s}'"),
                    })
                })
                .collect::<Result<_>>()?
        };
        rows.push(SweepRow {
            sweep_value: num(f[0])?,
            reps_completed: f[1].parse().map_err(|_| Error::Parse {
                line: idx + 2,
                detail: "bad rep count".into(),
            })?,
            failures: f[2].parse().map_err(|_| Error::Parse {
                line: idx + 2,
                detail: "bad failure count".into(),
            })?,
            seeds,
            fed_acc_mean: num(f[4])?,
            fed_acc_std: num(f[5])?,
            cen_acc_mean: num(f[6])?,
            cen_acc_std: num(f[7])?,
            fed_comm_mean: num(f[8])?,
            cen_comm_mean: num(f[9])?,
            fed_rep_mean: num(f[10])?,
            cen_rep_mean: num(f[11])?,
        });
    }
    Ok(rows)
}

/// Confirms the output location is writable before any computation starts.
pub fn precheck_out_path(path: &Path) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        if !dir.exists() {
            return Err(Error::invalid(format!(
                "output directory {} does not exist",
                dir.display()
            )));
        }
    }
    let probe = path.with_extension("writecheck.tmp");
    std::fs::write(&probe, b"")?;
    std::fs::remove_file(&probe)?;
    Ok(())
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Writes the sweep table as CSV plus a JSON sidecar holding the full
/// configuration, both atomically (write to a temp file, then rename).
pub fn emit_outputs(rows: &[SweepRow], cfg: &RunConfig, path: &Path) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::invalid("refusing to emit an empty sweep table"));
    }
    write_atomic(path, &render_csv(rows))?;
    let sidecar = path.with_file_name(format!(
        "{}.config.json",
        path.file_name().map(|s| s.to_string_lossy()).unwrap_or_default()
    ));
    let json = serde_json::to_string_pretty(cfg)
        .map_err(|e| Error::invalid(format!("config serialization failed: {e}")))?;
    write_atomic(&sidecar, &json)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentKind;

    fn tiny_config() -> RunConfig {
        let mut cfg = RunConfig::defaults(ExperimentKind::SampleSize);
        cfg.n = vec![30, 60];
        cfg.reps = 2;
        cfg.iters = 50;
        cfg.grid_resolution = 8;
        cfg.widths = vec![2.0];
        cfg.gamma = vec![0.0];
        cfg.eta = 1.0;
        if let DatasetConfig::Synthetic { test_n, .. } = &mut cfg.dataset {
            *test_n = 50;
        }
        cfg
    }

    #[test]
    fn sample_size_sweep_shape() {
        let cfg = tiny_config();
        let rows = sweep_sample_size(&cfg).unwrap();
        assert_eq!(rows.len(), 2);
        for row in &rows {
            assert_eq!(row.reps_completed + row.failures, 2);
            assert!(row.fed_acc_mean.is_finite());
            assert!(row.cen_acc_mean.is_finite());
            assert!(row.fed_comm_mean.is_finite());
            assert!((0.0..=1.0).contains(&row.fed_acc_mean));
            assert!((0.0..=1.0).contains(&row.cen_acc_mean));
        }
        assert_eq!(rows[0].sweep_value, 30.0);
        assert_eq!(rows[1].sweep_value, 60.0);
        // Seeds are base..base+reps for completed runs.
        assert_eq!(rows[0].seeds, vec![42, 43]);
    }

    #[test]
    fn gamma_sweep_includes_cost_columns() {
        let mut cfg = tiny_config();
        cfg.experiment = ExperimentKind::Gamma;
        cfg.gamma = vec![0.0, 50.0];
        cfg.n = vec![40];
        let rows = sweep_gamma(&cfg).unwrap();
        assert_eq!(rows.len(), 2);
        // Communication of the federated learner never exceeds centralized N.
        for row in &rows {
            assert!(row.fed_comm_mean <= row.cen_comm_mean + 1e-9);
        }
        // A huge gamma kills the representation entirely at this scale.
        assert!(rows[1].fed_rep_mean <= rows[0].fed_rep_mean);
    }

    #[test]
    fn agents_sweep_k1_matches_centralized() {
        let mut cfg = tiny_config();
        cfg.experiment = ExperimentKind::Agents;
        cfg.agents = vec![1];
        cfg.n = vec![40];
        cfg.reps = 1;
        cfg.iters = 2000;
        cfg.grad_tol = 1e-9;
        let rows = sweep_agents(&cfg).unwrap();
        // One agent sees everything; its critical set feeds a server solving
        // a subproblem of the same data, so the accuracies coincide.
        assert!(
            (rows[0].fed_acc_mean - rows[0].cen_acc_mean).abs() <= 0.02 + 1e-12,
            "fed {} vs cen {}",
            rows[0].fed_acc_mean,
            rows[0].cen_acc_mean
        );
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let cfg = tiny_config();
        let rows = sweep_sample_size(&cfg).unwrap();
        let text = render_csv(&rows);
        let parsed = parse_csv(&text).unwrap();
        assert_eq!(parsed, rows);
        assert_eq!(text.lines().count(), rows.len() + 1);
    }

    #[test]
    fn emit_writes_csv_and_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("table.csv");
        let cfg = tiny_config();
        precheck_out_path(&out).unwrap();
        let rows = sweep_sample_size(&cfg).unwrap();
        emit_outputs(&rows, &cfg, &out).unwrap();
        let text = std::fs::read_to_string(&out).unwrap();
        assert!(text.starts_with(CSV_HEADER));
        let sidecar = dir.path().join("table.csv.config.json");
        let loaded: RunConfig =
            serde_json::from_str(&std::fs::read_to_string(&sidecar).unwrap()).unwrap();
        assert_eq!(loaded, cfg);
    }

    #[test]
    fn precheck_rejects_missing_directory() {
        let out = Path::new("/nonexistent-dir-for-sure/table.csv");
        assert!(precheck_out_path(out).is_err());
    }

    #[test]
    fn failures_are_recorded_and_sweep_continues() {
        // Force failures: more subspaces than samples guarantees an empty
        // partition in some repetitions.
        let mut cfg = tiny_config();
        cfg.n = vec![4];
        cfg.agents = vec![9];
        cfg.reps = 3;
        let rows = sweep_sample_size(&cfg).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].reps_completed + rows[0].failures, 3);
        assert!(rows[0].failures > 0);
    }
}
