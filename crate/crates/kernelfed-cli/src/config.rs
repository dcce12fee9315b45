//! Run configuration: defaults, key=value config files, and flag merging.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use kernelfed::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    SampleSize,
    Gamma,
    Agents,
}

impl ExperimentKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "sample-size" => Ok(Self::SampleSize),
            "gamma" => Ok(Self::Gamma),
            "agents" => Ok(Self::Agents),
            other => Err(Error::invalid(format!(
                "unknown experiment '{other}' (expected sample-size, gamma, or agents)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::SampleSize => "sample-size",
            Self::Gamma => "gamma",
            Self::Agents => "agents",
        }
    }
}

/// Where the samples come from.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum DatasetConfig {
    Synthetic {
        noise_sigma: f64,
        overlap: f64,
        test_n: usize,
    },
    File {
        path: PathBuf,
        label_map: BTreeMap<String, f64>,
        window_seconds: f64,
        test_fraction: f64,
    },
}

/// Everything a sweep or solve needs; serialized verbatim as the JSON sidecar.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RunConfig {
    pub experiment: ExperimentKind,
    pub dataset: DatasetConfig,
    pub grid_resolution: usize,
    pub widths: Vec<f64>,
    /// Sweep values for the gamma experiment; a single value otherwise.
    pub gamma: Vec<f64>,
    /// Sweep values for the sample-size experiment; a single value otherwise.
    pub n: Vec<usize>,
    /// Sweep values for the agents experiment; a single value otherwise.
    pub agents: Vec<usize>,
    pub epsilon: f64,
    pub eta: f64,
    pub iters: usize,
    pub grad_tol: f64,
    pub reps: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub trace: bool,
}

impl RunConfig {
    pub fn defaults(experiment: ExperimentKind) -> Self {
        let (gamma, n, agents) = match experiment {
            ExperimentKind::SampleSize => {
                (vec![25.0], vec![90, 180, 450, 900], vec![9])
            }
            ExperimentKind::Gamma => {
                (vec![0.0, 25.0, 50.0, 100.0, 200.0], vec![900], vec![9])
            }
            ExperimentKind::Agents => (vec![25.0], vec![900], vec![1, 4, 9]),
        };
        Self {
            experiment,
            dataset: DatasetConfig::Synthetic { noise_sigma: 0.2, overlap: 0.25, test_n: 1000 },
            grid_resolution: 30,
            widths: vec![1.0, 2.0, 4.0],
            gamma,
            n,
            agents,
            epsilon: 0.01,
            eta: 0.1,
            iters: 1000,
            grad_tol: 1e-5,
            reps: 20,
            seed: 42,
            out: PathBuf::from("sweep.csv"),
            trace: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::invalid("repetitions must be at least 1"));
        }
        if self.gamma.is_empty() || self.n.is_empty() || self.agents.is_empty() {
            return Err(Error::invalid("sweep value lists must be nonempty"));
        }
        if self.widths.is_empty() {
            return Err(Error::invalid("width list must be nonempty"));
        }
        if self.grid_resolution == 0 {
            return Err(Error::invalid("grid resolution must be at least 1"));
        }
        kernelfed::Hyperparams::new(
            self.gamma[0],
            self.epsilon,
            self.eta,
            self.iters,
            self.grad_tol,
        )?;
        if let DatasetConfig::File { path, label_map, test_fraction, window_seconds } =
            &self.dataset
        {
            if !path.exists() {
                return Err(Error::invalid(format!(
                    "data file {} does not exist",
                    path.display()
                )));
            }
            if label_map.is_empty() {
                return Err(Error::invalid("label map must be nonempty for file datasets"));
            }
            if !(*test_fraction > 0.0 && *test_fraction < 1.0) {
                return Err(Error::invalid("test fraction must lie in (0, 1)"));
            }
            if !(*window_seconds > 0.0) {
                return Err(Error::invalid("window length must be positive"));
            }
        }
        Ok(())
    }

    pub fn hyperparams(&self, gamma: f64) -> Result<kernelfed::Hyperparams> {
        kernelfed::Hyperparams::new(gamma, self.epsilon, self.eta, self.iters, self.grad_tol)
    }
}

/// `activity=label` pairs, comma separated, labels `+1` or `-1`.
pub fn parse_label_map(s: &str) -> Result<BTreeMap<String, f64>> {
    let mut map = BTreeMap::new();
    for part in s.split(',') {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("label map entry '{part}' is not key=value")))?;
        let label: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("label '{v}' is not a number")))?;
        if label != 1.0 && label != -1.0 {
            return Err(Error::invalid(format!("label for '{k}' must be +1 or -1, got {v}")));
        }
        map.insert(k.trim().to_string(), label);
    }
    if map.is_empty() {
        return Err(Error::invalid("label map is empty"));
    }
    Ok(map)
}

pub fn parse_f64_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::invalid(format!("'{t}' is not a number")))
        })
        .collect()
}

pub fn parse_usize_list(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| Error::invalid(format!("'{t}' is not a count")))
        })
        .collect()
}

/// Raw key=value pairs from a config file; `#` starts a comment. A `.json`
/// file deserializes a full [`RunConfig`] instead (the sidecar format).
#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    pub entries: BTreeMap<String, String>,
    pub full: Option<RunConfig>,
}

pub fn read_config_file(path: &Path) -> Result<ConfigFile> {
    let text = std::fs::read_to_string(path)?;
    if path.extension().map(|e| e == "json").unwrap_or(false) {
        let full: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::invalid(format!("bad JSON config: {e}")))?;
        return Ok(ConfigFile { entries: BTreeMap::new(), full: Some(full) });
    }
    let mut entries = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: idx + 1,
            detail: format!("expected key=value, got '{line}'"),
        })?;
        entries.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(ConfigFile { entries, full: None })
}

/// Flag values as optionally-present strings; config-file entries fill the
/// gaps, then defaults.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub experiment: Option<String>,
    pub seed: Option<u64>,
    pub reps: Option<usize>,
    pub out: Option<PathBuf>,
    pub gamma: Option<String>,
    pub n: Option<String>,
    pub agents: Option<String>,
    pub epsilon: Option<f64>,
    pub eta: Option<f64>,
    pub iters: Option<usize>,
    pub grad_tol: Option<f64>,
    pub grid_res: Option<usize>,
    pub widths: Option<String>,
    pub data: Option<PathBuf>,
    pub label_map: Option<String>,
    pub noise: Option<f64>,
    pub overlap: Option<f64>,
    pub test_n: Option<usize>,
    pub test_fraction: Option<f64>,
    pub window_seconds: Option<f64>,
    pub trace: bool,
}

/// Build the effective configuration: defaults for the experiment kind,
/// overlaid by the config file, overlaid by explicit flags.
pub fn build_config(file: Option<&ConfigFile>, flags: &Overrides) -> Result<RunConfig> {
    let get = |key: &str| -> Option<&String> {
        file.and_then(|f| f.entries.get(key))
    };

    let experiment = match (&flags.experiment, get("experiment"), file.and_then(|f| f.full.as_ref()))
    {
        (Some(s), _, _) => ExperimentKind::parse(s)?,
        (None, Some(s), _) => ExperimentKind::parse(s)?,
        (None, None, Some(full)) => full.experiment,
        (None, None, None) => ExperimentKind::SampleSize,
    };

    let mut cfg = match file.and_then(|f| f.full.clone()) {
        Some(full) => full,
        None => RunConfig::defaults(experiment),
    };
    cfg.experiment = experiment;

    macro_rules! apply {
        ($key:literal, $field:expr, $parse:expr) => {
            if let Some(v) = get($key) {
                $field = $parse(v)?;
            }
        };
    }
    apply!("seed", cfg.seed, |v: &String| v
        .parse::<u64>()
        .map_err(|_| Error::invalid("seed must be an integer")));
    apply!("reps", cfg.reps, |v: &String| v
        .parse::<usize>()
        .map_err(|_| Error::invalid("reps must be a count")));
    apply!("out", cfg.out, |v: &String| -> Result<PathBuf> { Ok(PathBuf::from(v)) });
    apply!("gamma", cfg.gamma, |v: &String| parse_f64_list(v));
    apply!("n", cfg.n, |v: &String| parse_usize_list(v));
    apply!("agents", cfg.agents, |v: &String| parse_usize_list(v));
    apply!("epsilon", cfg.epsilon, |v: &String| v
        .parse::<f64>()
        .map_err(|_| Error::invalid("epsilon must be a number")));
    apply!("eta", cfg.eta, |v: &String| v
        .parse::<f64>()
        .map_err(|_| Error::invalid("eta must be a number")));
    apply!("iters", cfg.iters, |v: &String| v
        .parse::<usize>()
        .map_err(|_| Error::invalid("iters must be a count")));
    apply!("grad-tol", cfg.grad_tol, |v: &String| v
        .parse::<f64>()
        .map_err(|_| Error::invalid("grad-tol must be a number")));
    apply!("grid-res", cfg.grid_resolution, |v: &String| v
        .parse::<usize>()
        .map_err(|_| Error::invalid("grid-res must be a count")));
    apply!("widths", cfg.widths, |v: &String| parse_f64_list(v));
    if let Some(v) = get("trace") {
        cfg.trace = v == "true" || v == "1";
    }

    // Dataset source from the config file.
    let file_data = get("data").map(PathBuf::from);
    let file_labels = get("label-map").map(|s| parse_label_map(s)).transpose()?;
    if let Some(path) = file_data {
        let label_map = file_labels.ok_or_else(|| {
            Error::invalid("a data file needs a label-map entry")
        })?;
        cfg.dataset = DatasetConfig::File {
            path,
            label_map,
            window_seconds: 5.0,
            test_fraction: 0.3,
        };
    }
    if let DatasetConfig::File { window_seconds, test_fraction, .. } = &mut cfg.dataset {
        if let Some(v) = get("window-seconds") {
            *window_seconds =
                v.parse().map_err(|_| Error::invalid("window-seconds must be a number"))?;
        }
        if let Some(v) = get("test-fraction") {
            *test_fraction =
                v.parse().map_err(|_| Error::invalid("test-fraction must be a number"))?;
        }
    }
    if let DatasetConfig::Synthetic { noise_sigma, overlap, test_n } = &mut cfg.dataset {
        if let Some(v) = get("noise") {
            *noise_sigma = v.parse().map_err(|_| Error::invalid("noise must be a number"))?;
        }
        if let Some(v) = get("overlap") {
            *overlap = v.parse().map_err(|_| Error::invalid("overlap must be a number"))?;
        }
        if let Some(v) = get("test-n") {
            *test_n = v.parse().map_err(|_| Error::invalid("test-n must be a count"))?;
        }
    }

    // Explicit flags win over everything.
    if let Some(v) = flags.seed {
        cfg.seed = v;
    }
    if let Some(v) = flags.reps {
        cfg.reps = v;
    }
    if let Some(v) = &flags.out {
        cfg.out = v.clone();
    }
    if let Some(v) = &flags.gamma {
        cfg.gamma = parse_f64_list(v)?;
    }
    if let Some(v) = &flags.n {
        cfg.n = parse_usize_list(v)?;
    }
    if let Some(v) = &flags.agents {
        cfg.agents = parse_usize_list(v)?;
    }
    if let Some(v) = flags.epsilon {
        cfg.epsilon = v;
    }
    if let Some(v) = flags.eta {
        cfg.eta = v;
    }
    if let Some(v) = flags.iters {
        cfg.iters = v;
    }
    if let Some(v) = flags.grad_tol {
        cfg.grad_tol = v;
    }
    if let Some(v) = flags.grid_res {
        cfg.grid_resolution = v;
    }
    if let Some(v) = &flags.widths {
        cfg.widths = parse_f64_list(v)?;
    }
    if flags.trace {
        cfg.trace = true;
    }
    if let Some(path) = &flags.data {
        let label_map = match (&flags.label_map, &cfg.dataset) {
            (Some(s), _) => parse_label_map(s)?,
            (None, DatasetConfig::File { label_map, .. }) => label_map.clone(),
            (None, _) => {
                return Err(Error::invalid("--data needs --label-map"));
            }
        };
        let (window_seconds, test_fraction) = match &cfg.dataset {
            DatasetConfig::File { window_seconds, test_fraction, .. } => {
                (*window_seconds, *test_fraction)
            }
            _ => (5.0, 0.3),
        };
        cfg.dataset =
            DatasetConfig::File { path: path.clone(), label_map, window_seconds, test_fraction };
    } else if let Some(s) = &flags.label_map {
        if let DatasetConfig::File { label_map, .. } = &mut cfg.dataset {
            *label_map = parse_label_map(s)?;
        }
    }
    if let Some(v) = flags.noise {
        if let DatasetConfig::Synthetic { noise_sigma, .. } = &mut cfg.dataset {
            *noise_sigma = v;
        }
    }
    if let Some(v) = flags.overlap {
        if let DatasetConfig::Synthetic { overlap, .. } = &mut cfg.dataset {
            *overlap = v;
        }
    }
    if let Some(v) = flags.test_n {
        if let DatasetConfig::Synthetic { test_n, .. } = &mut cfg.dataset {
            *test_n = v;
        }
    }
    if let Some(v) = flags.test_fraction {
        if let DatasetConfig::File { test_fraction, .. } = &mut cfg.dataset {
            *test_fraction = v;
        }
    }
    if let Some(v) = flags.window_seconds {
        if let DatasetConfig::File { window_seconds, .. } = &mut cfg.dataset {
            *window_seconds = v;
        }
    }

    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_map_parsing() {
        let m = parse_label_map("Walking=+1,Jogging=-1").unwrap();
        assert_eq!(m["Walking"], 1.0);
        assert_eq!(m["Jogging"], -1.0);
        assert!(parse_label_map("Walking=2").is_err());
        assert!(parse_label_map("Walking").is_err());
    }

    #[test]
    fn defaults_per_experiment() {
        let c = RunConfig::defaults(ExperimentKind::SampleSize);
        assert_eq!(c.n, vec![90, 180, 450, 900]);
        assert_eq!(c.gamma, vec![25.0]);
        let c = RunConfig::defaults(ExperimentKind::Gamma);
        assert_eq!(c.gamma, vec![0.0, 25.0, 50.0, 100.0, 200.0]);
        let c = RunConfig::defaults(ExperimentKind::Agents);
        assert_eq!(c.agents, vec![1, 4, 9]);
    }

    #[test]
    fn flags_override_config_file_overrides_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(
            &path,
            "experiment=gamma\nseed=7\nreps=3\neta=0.5  # inline comment\nwidths=1,3\n",
        )
        .unwrap();
        let file = read_config_file(&path).unwrap();
        let flags = Overrides { seed: Some(99), ..Default::default() };
        let cfg = build_config(Some(&file), &flags).unwrap();
        assert_eq!(cfg.experiment, ExperimentKind::Gamma);
        assert_eq!(cfg.seed, 99);
        assert_eq!(cfg.reps, 3);
        assert_eq!(cfg.eta, 0.5);
        assert_eq!(cfg.widths, vec![1.0, 3.0]);
        assert_eq!(cfg.gamma, vec![0.0, 25.0, 50.0, 100.0, 200.0]);
    }

    #[test]
    fn json_sidecar_round_trip() {
        let cfg = RunConfig::defaults(ExperimentKind::Gamma);
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sidecar.json");
        std::fs::write(&path, &text).unwrap();
        let file = read_config_file(&path).unwrap();
        let rebuilt = build_config(Some(&file), &Overrides::default()).unwrap();
        assert_eq!(rebuilt, cfg);
    }

    #[test]
    fn validation_catches_bad_values() {
        let mut cfg = RunConfig::defaults(ExperimentKind::Gamma);
        cfg.reps = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::defaults(ExperimentKind::Gamma);
        cfg.gamma.clear();
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::defaults(ExperimentKind::Gamma);
        cfg.epsilon = 2.0;
        assert!(cfg.validate().is_err());
    }
}
