//! Data sources: the synthetic two-ellipse task with overlapping subspaces,
//! accelerometer time-series ingestion, and seeded splitting.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::model::LabeledSample;

/// Axis-aligned region of feature space observed by one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl SubspaceBox {
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(self.hi.iter()))
            .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    pub fn as_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (self.lo.clone(), self.hi.clone())
    }
}

/// Configuration of the simulated classification task: points drawn uniformly
/// on a box, labeled `+1` inside either of two ellipses, features then
/// perturbed by Gaussian noise.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SyntheticSpec {
    /// Training sample count.
    pub n: usize,
    pub seed: u64,
    /// Standard deviation of the feature noise.
    pub noise_sigma: f64,
    pub r1: f64,
    pub r2: f64,
    pub c1: [f64; 2],
    pub c2: [f64; 2],
    /// Metric matrix of the quadratic form, row-major 2x2.
    pub a: [[f64; 2]; 2],
    pub domain_lo: [f64; 2],
    pub domain_hi: [f64; 2],
    /// Number of overlapping subspaces; must be a perfect square.
    pub k_subspaces: usize,
    /// Fractional inflation of each subspace tile, in `[0, 1)`.
    pub overlap: f64,
    /// Held-out evaluation samples.
    pub test_n: usize,
}

impl SyntheticSpec {
    /// The task parameters used throughout the experiments, at a given
    /// training size and seed.
    pub fn with_defaults(n: usize, seed: u64) -> Self {
        Self {
            n,
            seed,
            noise_sigma: 0.2,
            r1: 9.0,
            r2: 30.0,
            c1: [3.0, 0.0],
            c2: [-10.0, 6.0],
            a: [[1.0, 0.0], [0.0, 0.25]],
            domain_lo: [-16.0, -6.0],
            domain_hi: [10.0, 12.0],
            k_subspaces: 9,
            overlap: 0.25,
            test_n: 1000,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("synthetic sample count must be at least 1"));
        }
        if self.noise_sigma < 0.0 {
            return Err(Error::invalid("noise sigma must be nonnegative"));
        }
        if self.test_n == 0 {
            return Err(Error::invalid("test set must be nonempty"));
        }
        for d in 0..2 {
            if !(self.domain_lo[d] < self.domain_hi[d]) {
                return Err(Error::invalid("synthetic domain box is degenerate"));
            }
        }
        Ok(())
    }

    /// Class rule: `+1` when `(x - c_i)' A (x - c_i) <= r_i` for either
    /// region, `-1` otherwise. Applied to pre-noise positions.
    pub fn label(&self, x: &[f64; 2]) -> f64 {
        let quad = |c: &[f64; 2]| {
            let d = [x[0] - c[0], x[1] - c[1]];
            d[0] * (self.a[0][0] * d[0] + self.a[0][1] * d[1])
                + d[1] * (self.a[1][0] * d[0] + self.a[1][1] * d[1])
        };
        if quad(&self.c1) <= self.r1 || quad(&self.c2) <= self.r2 {
            1.0
        } else {
            -1.0
        }
    }
}

/// Samples grouped by the agents that observed them, plus a held-out test set.
#[derive(Debug, Clone)]
pub struct PartitionedDataset {
    pub agents: Vec<AgentData>,
    pub test_set: Vec<LabeledSample>,
}

#[derive(Debug, Clone)]
pub struct AgentData {
    pub subspace: SubspaceBox,
    pub samples: Vec<LabeledSample>,
}

impl PartitionedDataset {
    pub fn total_samples(&self) -> usize {
        self.agents.iter().map(|a| a.samples.len()).sum()
    }

    pub fn all_samples(&self) -> Vec<LabeledSample> {
        self.agents.iter().flat_map(|a| a.samples.iter().cloned()).collect()
    }
}

/// A `sqrt(k) x sqrt(k)` grid of boxes tiling the domain, each tile inflated
/// by the overlap fraction so neighbors share a margin. With overlap 0 the
/// boxes tile the domain exactly.
pub fn partition_boxes(
    domain_lo: &[f64],
    domain_hi: &[f64],
    k: usize,
    overlap: f64,
) -> Result<Vec<SubspaceBox>> {
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::invalid(format!("overlap must lie in [0, 1), got {overlap}")));
    }
    let dim = domain_lo.len();
    if dim != domain_hi.len() {
        return Err(Error::DimensionMismatch { expected: dim, got: domain_hi.len() });
    }
    let side = (k as f64).powf(1.0 / dim as f64).round() as usize;
    if side == 0 || side.pow(dim as u32) != k {
        return Err(Error::invalid(format!(
            "subspace count {k} is not a perfect {dim}-dimensional grid"
        )));
    }
    let tile: Vec<f64> =
        (0..dim).map(|d| (domain_hi[d] - domain_lo[d]) / side as f64).collect();
    let mut boxes = Vec::with_capacity(k);
    let mut idx = vec![0usize; dim];
    for _ in 0..k {
        let mut lo = Vec::with_capacity(dim);
        let mut hi = Vec::with_capacity(dim);
        for d in 0..dim {
            let extra = tile[d] * overlap / 2.0;
            lo.push(domain_lo[d] + idx[d] as f64 * tile[d] - extra);
            hi.push(domain_lo[d] + (idx[d] + 1) as f64 * tile[d] + extra);
        }
        boxes.push(SubspaceBox { lo, hi });
        for d in (0..dim).rev() {
            idx[d] += 1;
            if idx[d] < side {
                break;
            }
            idx[d] = 0;
        }
    }
    Ok(boxes)
}

/// Draws the synthetic dataset: uniform pre-noise positions, ellipse labels,
/// Gaussian feature noise, and assignment of each sample to the first
/// subspace box containing its pre-noise position. Identical spec and seed
/// reproduce the dataset bit for bit.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<PartitionedDataset> {
    spec.validate()?;
    let boxes =
        partition_boxes(&spec.domain_lo, &spec.domain_hi, spec.k_subspaces, spec.overlap)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise_sigma)
        .map_err(|e| Error::invalid(format!("bad noise sigma: {e}")))?;

    let draw = |rng: &mut ChaCha8Rng| -> (LabeledSample, [f64; 2]) {
        let raw = [
            rng.random_range(spec.domain_lo[0]..spec.domain_hi[0]),
            rng.random_range(spec.domain_lo[1]..spec.domain_hi[1]),
        ];
        let y = spec.label(&raw);
        let x = vec![raw[0] + noise.sample(rng), raw[1] + noise.sample(rng)];
        (LabeledSample { x, y }, raw)
    };

    let mut agents: Vec<AgentData> = boxes
        .into_iter()
        .map(|subspace| AgentData { subspace, samples: Vec::new() })
        .collect();
    for _ in 0..spec.n {
        let (sample, raw) = draw(&mut rng);
        let owner = agents
            .iter()
            .position(|a| a.subspace.contains(&raw))
            .expect("subspace boxes cover the domain");
        agents[owner].samples.push(sample);
    }
    let test_set = (0..spec.test_n).map(|_| draw(&mut rng).0).collect();
    Ok(PartitionedDataset { agents, test_set })
}

/// Seeded shuffle-and-split. The test side gets `round(fraction * n)` samples;
/// the two sides are disjoint and exhaust the input.
pub fn split(
    samples: &[LabeledSample],
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<LabeledSample>, Vec<LabeledSample>)> {
    if samples.len() < 2 {
        return Err(Error::invalid("need at least 2 samples to split"));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Fisher-Yates.
    for i in (1..order.len()).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    let n_test = (test_fraction * samples.len() as f64).round() as usize;
    let n_test = n_test.clamp(1, samples.len() - 1);
    let test = order[..n_test].iter().map(|&i| samples[i].clone()).collect();
    let train = order[n_test..].iter().map(|&i| samples[i].clone()).collect();
    Ok((train, test))
}

/// One ingested window: the averaged features plus the user that produced it,
/// so file-based experiments can partition by user.
#[derive(Debug, Clone)]
pub struct WindowSample {
    pub user: String,
    pub sample: LabeledSample,
}

/// Ingestion bookkeeping; the row counts reconcile exactly with the input.
#[derive(Debug, Clone, Default)]
pub struct IngestStats {
    pub total_rows: usize,
    pub rows_in_windows: usize,
    pub rows_dropped_short_windows: usize,
    pub rows_skipped_unmapped: usize,
    pub unmapped_activities: BTreeMap<String, usize>,
}

/// Parses accelerometer rows `user,activity,timestamp,ax,ay,az` (an optional
/// trailing semicolon is tolerated), groups them per user and activity into
/// consecutive fixed-length windows by timestamp, and averages each window
/// into one three-feature sample. Windows with fewer than two rows are
/// dropped; activities missing from the label map are skipped and counted.
pub fn ingest_accelerometer_windows<R: BufRead>(
    input: R,
    window_seconds: f64,
    timestamp_units_per_second: f64,
    label_map: &BTreeMap<String, f64>,
) -> Result<(Vec<WindowSample>, IngestStats)> {
    if !(window_seconds > 0.0) {
        return Err(Error::invalid("window length must be positive"));
    }
    if !(timestamp_units_per_second > 0.0) {
        return Err(Error::invalid("timestamp unit must be positive"));
    }
    let mut stats = IngestStats::default();
    // (user, activity) -> rows as (timestamp, ax, ay, az)
    let mut groups: BTreeMap<(String, String), Vec<(f64, [f64; 3])>> = BTreeMap::new();

    for (idx, line) in input.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let trimmed = line.trim().trim_end_matches(';').trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if fields.len() != 6 {
            return Err(Error::Parse {
                line: lineno,
                detail: format!("expected 6 comma-separated fields, got {}", fields.len()),
            });
        }
        let ts: f64 = fields[2].parse().map_err(|_| Error::Parse {
            line: lineno,
            detail: format!("bad timestamp '{}'", fields[2]),
        })?;
        let mut acc = [0.0f64; 3];
        for (slot, raw) in acc.iter_mut().zip(&fields[3..6]) {
            *slot = raw.parse().map_err(|_| Error::Parse {
                line: lineno,
                detail: format!("bad acceleration value '{raw}'"),
            })?;
        }
        stats.total_rows += 1;
        let user = fields[0].to_string();
        let activity = fields[1].to_string();
        if !label_map.contains_key(&activity) {
            stats.rows_skipped_unmapped += 1;
            *stats.unmapped_activities.entry(activity).or_insert(0) += 1;
            continue;
        }
        groups.entry((user, activity)).or_default().push((ts, acc));
    }

    let window_len = window_seconds * timestamp_units_per_second;
    let mut out = Vec::new();
    for ((user, activity), mut rows) in groups {
        rows.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("timestamps are finite"));
        let label = label_map[&activity];
        let t0 = rows[0].0;
        let mut start = 0usize;
        while start < rows.len() {
            let window_idx = ((rows[start].0 - t0) / window_len).floor();
            let mut end = start;
            while end < rows.len() && ((rows[end].0 - t0) / window_len).floor() == window_idx {
                end += 1;
            }
            let count = end - start;
            if count < 2 {
                stats.rows_dropped_short_windows += count;
            } else {
                let mut mean = [0.0f64; 3];
                for (_, a) in &rows[start..end] {
                    for d in 0..3 {
                        mean[d] += a[d];
                    }
                }
                for m in mean.iter_mut() {
                    *m /= count as f64;
                }
                stats.rows_in_windows += count;
                out.push(WindowSample {
                    user: user.clone(),
                    sample: LabeledSample::new(mean.to_vec(), label)?,
                });
            }
            start = end;
        }
    }
    Ok((out, stats))
}

/// File-based wrapper returning plain samples; timestamps are nanoseconds.
pub fn ingest_accelerometer(
    path: &Path,
    window_seconds: f64,
    label_map: &BTreeMap<String, f64>,
) -> Result<Vec<LabeledSample>> {
    let file = std::fs::File::open(path)?;
    let (windows, _) = ingest_accelerometer_windows(
        std::io::BufReader::new(file),
        window_seconds,
        1e9,
        label_map,
    )?;
    Ok(windows.into_iter().map(|w| w.sample).collect())
}

/// Archives a generated dataset as CSV: feature columns, label, and the
/// owning agent index (`-1` for held-out test rows).
pub fn write_dataset_csv<W: Write>(dataset: &PartitionedDataset, mut out: W) -> Result<()> {
    let dim = dataset
        .agents
        .iter()
        .flat_map(|a| a.samples.first())
        .chain(dataset.test_set.first())
        .map(|s| s.x.len())
        .next()
        .unwrap_or(0);
    let header: Vec<String> = (1..=dim)
        .map(|d| format!("x{d}"))
        .chain(["y".to_string(), "agent_id".to_string()])
        .collect();
    writeln!(out, "{}", header.join(","))?;
    let mut write_row = |s: &LabeledSample, agent: i64| -> Result<()> {
        let mut fields: Vec<String> = s.x.iter().map(|v| v.to_string()).collect();
        fields.push(s.y.to_string());
        fields.push(agent.to_string());
        writeln!(out, "{}", fields.join(","))?;
        Ok(())
    };
    for (i, agent) in dataset.agents.iter().enumerate() {
        for s in &agent.samples {
            write_row(s, i as i64)?;
        }
    }
    for s in &dataset.test_set {
        write_row(s, -1)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ellipse_rule_examples() {
        let spec = SyntheticSpec::with_defaults(10, 0);
        // Center of region 1: distance 0 <= 9.
        assert_eq!(spec.label(&[3.0, 0.0]), 1.0);
        // Center of region 2: zero quadratic form.
        assert_eq!(spec.label(&[-10.0, 6.0]), 1.0);
        // Hand-evaluated: region 1 gives 0 + 0.25 * 49 = 12.25 > 9;
        // region 2 gives 169 + 0.25 = 169.25 > 30.
        assert_eq!(spec.label(&[3.0, 7.0]), -1.0);
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = SyntheticSpec::with_defaults(60, 7);
        let a = generate_synthetic(&spec).unwrap();
        let b = generate_synthetic(&spec).unwrap();
        assert_eq!(a.test_set.len(), spec.test_n);
        assert_eq!(a.total_samples(), 60);
        for (x, y) in a.all_samples().iter().zip(b.all_samples().iter()) {
            assert_eq!(x, y);
        }
        for (x, y) in a.test_set.iter().zip(b.test_set.iter()) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn labels_and_assignment_ignore_noise() {
        // Same seed with and without noise: identical labels and identical
        // per-agent counts, because both depend only on pre-noise positions.
        let mut clean = SyntheticSpec::with_defaults(200, 11);
        clean.noise_sigma = 0.0;
        let mut noisy = clean.clone();
        noisy.noise_sigma = 3.0;
        let a = generate_synthetic(&clean).unwrap();
        let b = generate_synthetic(&noisy).unwrap();
        for (agent_a, agent_b) in a.agents.iter().zip(b.agents.iter()) {
            assert_eq!(agent_a.samples.len(), agent_b.samples.len());
            for (sa, sb) in agent_a.samples.iter().zip(agent_b.samples.iter()) {
                assert_eq!(sa.y, sb.y);
            }
        }
        // With zero noise the stored features are the pre-noise positions,
        // which must lie inside the owning agent's box.
        for agent in &a.agents {
            for s in &agent.samples {
                assert!(agent.subspace.contains(&s.x));
            }
        }
    }

    #[test]
    fn partition_zero_overlap_tiles_exactly() {
        let boxes = partition_boxes(&[0.0, 0.0], &[3.0, 3.0], 9, 0.0).unwrap();
        assert_eq!(boxes.len(), 9);
        for b in &boxes {
            assert!((b.hi[0] - b.lo[0] - 1.0).abs() < 1e-12);
            assert!((b.hi[1] - b.lo[1] - 1.0).abs() < 1e-12);
        }
        assert_eq!(boxes[0].lo, vec![0.0, 0.0]);
        assert_eq!(boxes[8].hi, vec![3.0, 3.0]);
    }

    #[test]
    fn partition_overlap_inflates_sides() {
        let boxes = partition_boxes(&[0.0, 0.0], &[1.0, 1.0], 9, 0.25).unwrap();
        let expect = (1.0 / 3.0) * 1.25;
        for b in &boxes {
            assert!((b.hi[0] - b.lo[0] - expect).abs() < 1e-12);
            assert!((b.hi[1] - b.lo[1] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn partition_covers_domain() {
        for overlap in [0.0, 0.1, 0.25, 0.6] {
            let boxes = partition_boxes(&[-2.0, 1.0], &[4.0, 5.0], 9, overlap).unwrap();
            for i in 0..100 {
                for j in 0..100 {
                    let x = [
                        -2.0 + 6.0 * (i as f64 + 0.5) / 100.0,
                        1.0 + 4.0 * (j as f64 + 0.5) / 100.0,
                    ];
                    assert!(
                        boxes.iter().any(|b| b.contains(&x)),
                        "point {x:?} uncovered at overlap {overlap}"
                    );
                }
            }
        }
    }

    #[test]
    fn partition_rejects_bad_input() {
        assert!(partition_boxes(&[0.0, 0.0], &[1.0, 1.0], 9, -0.1).is_err());
        assert!(partition_boxes(&[0.0, 0.0], &[1.0, 1.0], 9, 1.0).is_err());
        assert!(partition_boxes(&[0.0, 0.0], &[1.0, 1.0], 7, 0.2).is_err());
    }

    #[test]
    fn split_counts_and_determinism() {
        let samples: Vec<LabeledSample> = (0..10)
            .map(|i| LabeledSample::new(vec![i as f64], if i % 2 == 0 { 1.0 } else { -1.0 }).unwrap())
            .collect();
        let (train, test) = split(&samples, 0.3, 9).unwrap();
        assert_eq!(train.len(), 7);
        assert_eq!(test.len(), 3);
        let (train2, test2) = split(&samples, 0.3, 9).unwrap();
        assert_eq!(train, train2);
        assert_eq!(test, test2);

        // Union is the input multiset.
        let mut all: Vec<f64> =
            train.iter().chain(test.iter()).map(|s| s.x[0]).collect();
        all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(all, (0..10).map(|i| i as f64).collect::<Vec<_>>());

        assert!(split(&samples[..1], 0.3, 9).is_err());
        assert!(split(&samples, 0.0, 9).is_err());
        assert!(split(&samples, 1.0, 9).is_err());
    }

    fn label_map() -> BTreeMap<String, f64> {
        let mut m = BTreeMap::new();
        m.insert("walk".to_string(), 1.0);
        m.insert("jog".to_string(), -1.0);
        m
    }

    #[test]
    fn ingest_constant_window() {
        let data = "u1,walk,0,1,1,1\nu1,walk,1000000000,1,1,1\nu1,walk,2000000000,1,1,1\n";
        let (windows, stats) =
            ingest_accelerometer_windows(data.as_bytes(), 5.0, 1e9, &label_map()).unwrap();
        assert_eq!(windows.len(), 1);
        assert_eq!(windows[0].sample.x, vec![1.0, 1.0, 1.0]);
        assert_eq!(windows[0].sample.y, 1.0);
        assert_eq!(stats.total_rows, 3);
        assert_eq!(stats.rows_in_windows, 3);
    }

    #[test]
    fn ingest_mean_of_two_rows() {
        let data = "u1,jog,0,0,0,0;\nu1,jog,1000000000,2,4,6;\n";
        let (windows, _) =
            ingest_accelerometer_windows(data.as_bytes(), 5.0, 1e9, &label_map()).unwrap();
        assert_eq!(windows.len(), 1);
        assert_eq!(windows[0].sample.x, vec![1.0, 2.0, 3.0]);
        assert_eq!(windows[0].sample.y, -1.0);
    }

    #[test]
    fn ingest_matches_recomputation_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        // Build a file with irregular timestamps across two users and both
        // activities, then recompute the expected windows independently.
        let mut lines = Vec::new();
        let mut expected: BTreeMap<(String, String, u64), Vec<[f64; 3]>> = BTreeMap::new();
        for user in ["a", "b"] {
            for activity in ["walk", "jog"] {
                let mut t: u64 = 0;
                for _ in 0..40 {
                    t += rng.random_range(200_000_000..2_000_000_000u64);
                    let acc = [
                        rng.random_range(-5.0..5.0),
                        rng.random_range(-5.0..5.0),
                        rng.random_range(-5.0..5.0),
                    ];
                    lines.push(format!(
                        "{user},{activity},{t},{},{},{}",
                        acc[0], acc[1], acc[2]
                    ));
                    expected
                        .entry((user.to_string(), activity.to_string(), 0))
                        .or_default()
                        .push(acc);
                }
            }
        }
        // Oracle: group rows by 5e9-length windows anchored at the group's
        // first timestamp, over a re-parse of the lines. Groups in the same
        // (user, activity) order the ingester emits.
        let mut oracle: Vec<(String, f64, [f64; 3])> = Vec::new();
        for user in ["a", "b"] {
            for activity in ["jog", "walk"] {
                let rows: Vec<(u64, [f64; 3])> = lines
                    .iter()
                    .filter_map(|l| {
                        let f: Vec<&str> = l.split(',').collect();
                        if f[0] == user && f[1] == activity {
                            Some((
                                f[2].parse().unwrap(),
                                [
                                    f[3].parse().unwrap(),
                                    f[4].parse().unwrap(),
                                    f[5].parse().unwrap(),
                                ],
                            ))
                        } else {
                            None
                        }
                    })
                    .collect();
                let t0 = rows[0].0;
                let mut by_window: BTreeMap<u64, Vec<[f64; 3]>> = BTreeMap::new();
                for (t, a) in rows {
                    by_window.entry((t - t0) / 5_000_000_000).or_default().push(a);
                }
                for (_, group) in by_window {
                    if group.len() >= 2 {
                        let mut mean = [0.0; 3];
                        for a in &group {
                            for d in 0..3 {
                                mean[d] += a[d];
                            }
                        }
                        for m in mean.iter_mut() {
                            *m /= group.len() as f64;
                        }
                        let label = if activity == "walk" { 1.0 } else { -1.0 };
                        oracle.push((user.to_string(), label, mean));
                    }
                }
            }
        }

        let text = lines.join("\n");
        let (windows, stats) =
            ingest_accelerometer_windows(text.as_bytes(), 5.0, 1e9, &label_map()).unwrap();
        assert_eq!(windows.len(), oracle.len());
        for (w, (user, label, mean)) in windows.iter().zip(oracle.iter()) {
            assert_eq!(&w.user, user);
            assert_eq!(w.sample.y, *label);
            for d in 0..3 {
                assert!((w.sample.x[d] - mean[d]).abs() < 1e-12);
            }
        }
        // Mass conservation.
        assert_eq!(
            stats.rows_in_windows + stats.rows_dropped_short_windows
                + stats.rows_skipped_unmapped,
            stats.total_rows
        );
    }

    #[test]
    fn ingest_skips_unmapped_and_reports_parse_errors() {
        let data = "u1,walk,0,1,1,1\nu1,walk,1000000000,1,1,1\nu1,dance,0,2,2,2\n";
        let (windows, stats) =
            ingest_accelerometer_windows(data.as_bytes(), 5.0, 1e9, &label_map()).unwrap();
        assert_eq!(windows.len(), 1);
        assert_eq!(stats.rows_skipped_unmapped, 1);
        assert_eq!(stats.unmapped_activities["dance"], 1);

        let bad = "u1,walk,0,1,1,1\nu1,walk,oops,1,1,1\n";
        match ingest_accelerometer_windows(bad.as_bytes(), 5.0, 1e9, &label_map()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn ingest_drops_singleton_windows() {
        // Second row lands in a different 5s window and stays alone.
        let data = "u1,walk,0,1,1,1\nu1,walk,100000000,3,3,3\nu1,walk,9000000000,9,9,9\n";
        let (windows, stats) =
            ingest_accelerometer_windows(data.as_bytes(), 5.0, 1e9, &label_map()).unwrap();
        assert_eq!(windows.len(), 1);
        assert_eq!(windows[0].sample.x, vec![2.0, 2.0, 2.0]);
        assert_eq!(stats.rows_dropped_short_windows, 1);
        assert_eq!(stats.rows_in_windows, 2);
    }

    #[test]
    fn dataset_csv_shape() {
        let spec = SyntheticSpec::with_defaults(20, 3);
        let ds = generate_synthetic(&spec).unwrap();
        let mut buf = Vec::new();
        write_dataset_csv(&ds, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "x1,x2,y,agent_id");
        assert_eq!(lines.len(), 1 + 20 + spec.test_n);
        assert!(lines[1].split(',').count() == 4);
    }
}
