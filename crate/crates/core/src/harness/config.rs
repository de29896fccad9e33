use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::acquisition::AcquisitionSpec;
use crate::benchfn::{FunctionName, ObjectiveFunction};
use crate::error::{Error, Result};
use crate::optimizer::{Framework, RunConfig, SurrogateKind, TrustRegionSettings};
use crate::rng::fnv1a;
use crate::sampling::SamplingStrategy;
use crate::surrogate_gp::GpConfig;
use crate::surrogate_op::TrainConfig;

/// One algorithm column: a framework, a surrogate and optional overrides of
/// the experiment defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmSpec {
    /// Defaults to `<framework>-<surrogate>`.
    #[serde(default)]
    pub name: Option<String>,
    pub framework: Framework,
    #[serde(default = "default_surrogate")]
    pub surrogate: SurrogateKind,
    #[serde(default)]
    pub acquisition: Option<AcquisitionSpec>,
    #[serde(default)]
    pub iterations: Option<usize>,
    #[serde(default)]
    pub good_enough_size: Option<usize>,
    #[serde(default)]
    pub candidate_size: Option<usize>,
    #[serde(default)]
    pub candidate_strategy: Option<SamplingStrategy>,
    #[serde(default)]
    pub train: Option<TrainConfig>,
    #[serde(default)]
    pub gp: Option<GpConfig>,
    #[serde(default)]
    pub trust_region: Option<TrustRegionSettings>,
}

fn default_surrogate() -> SurrogateKind {
    SurrogateKind::Op
}

impl AlgorithmSpec {
    pub fn new(framework: Framework, surrogate: SurrogateKind) -> Self {
        Self {
            name: None,
            framework,
            surrogate,
            acquisition: None,
            iterations: None,
            good_enough_size: None,
            candidate_size: None,
            candidate_strategy: None,
            train: None,
            gp: None,
            trust_region: None,
        }
    }

    pub fn named(mut self, name: &str) -> Self {
        self.name = Some(name.to_owned());
        self
    }

    pub fn display_name(&self) -> String {
        match &self.name {
            Some(n) => n.clone(),
            None if self.framework == Framework::RandomSearch => "random".to_owned(),
            None => format!("{}-{}", self.framework, self.surrogate),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunDefaults {
    #[serde(default = "default_initial_size")]
    pub initial_size: usize,
    /// Rounds `R` of a batch algorithm.
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_good_enough_size")]
    pub good_enough_size: usize,
    #[serde(default)]
    pub candidate_size: Option<usize>,
    /// Give every algorithm `R * g` evaluations after the initial design,
    /// whatever its own batch size.
    #[serde(default = "default_true")]
    pub match_evaluations: bool,
    /// Keep suggested points in result files; they dominate file size at
    /// high dimension.
    #[serde(default = "default_true")]
    pub record_points: bool,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub gp: GpConfig,
    #[serde(default)]
    pub trust_region: TrustRegionSettings,
}

fn default_initial_size() -> usize {
    10
}

fn default_iterations() -> usize {
    50
}

fn default_good_enough_size() -> usize {
    10
}

fn default_true() -> bool {
    true
}

impl Default for RunDefaults {
    fn default() -> Self {
        Self {
            initial_size: default_initial_size(),
            iterations: default_iterations(),
            good_enough_size: default_good_enough_size(),
            candidate_size: None,
            match_evaluations: true,
            record_points: true,
            train: TrainConfig::default(),
            gp: GpConfig::default(),
            trust_region: TrustRegionSettings::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    pub suite: Vec<ObjectiveFunction>,
    pub algorithms: Vec<AlgorithmSpec>,
    #[serde(default = "default_trials")]
    pub trials_per_cell: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub defaults: RunDefaults,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
}

fn default_trials() -> usize {
    10
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

fn default_parallelism() -> usize {
    1
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Desk,
    Full,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "desk" => Ok(Preset::Desk),
            "full" => Ok(Preset::Full),
            other => Err(Error::config("preset", format!("unknown preset `{other}` (expected desk or full)"))),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Desk => "desk",
            Preset::Full => "full",
        })
    }
}

/// A fully specified trial of the matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialSpec {
    pub trial_id: String,
    pub problem: String,
    pub algorithm: String,
    pub trial: usize,
    pub seed: u64,
    pub config: RunConfig,
}

pub fn trial_id(problem: &str, algorithm: &str, trial: usize) -> String {
    format!("{problem}__{algorithm}__t{trial:02}")
}

/// Seed shared by every algorithm for trial `t` of `problem`.
pub fn trial_seed(base_seed: u64, problem: &str, trial: usize) -> u64 {
    base_seed.wrapping_add(fnv1a(problem.as_bytes())).wrapping_add(trial as u64)
}

fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && !name.contains("__")
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.')
}

impl ExperimentConfig {
    pub fn preset(preset: Preset) -> Self {
        let algorithms = vec![
            AlgorithmSpec::new(Framework::Opbo, SurrogateKind::Op),
            AlgorithmSpec::new(Framework::StandardBo, SurrogateKind::Gp),
            AlgorithmSpec::new(Framework::RandomSearch, SurrogateKind::Op),
        ];
        match preset {
            Preset::Desk => Self {
                name: "desk".into(),
                suite: FunctionName::ALL
                    .iter()
                    .map(|&f| ObjectiveFunction::new(f, 100).expect("valid benchmark"))
                    .collect(),
                algorithms,
                trials_per_cell: 10,
                base_seed: 0,
                defaults: RunDefaults::default(),
                output_dir: PathBuf::from("runs/desk"),
                parallelism: 4,
            },
            Preset::Full => {
                let mut algorithms = algorithms;
                algorithms.extend([
                    AlgorithmSpec::new(Framework::Opbo, SurrogateKind::Nn),
                    AlgorithmSpec::new(Framework::TrustRegion, SurrogateKind::Op),
                    AlgorithmSpec::new(Framework::TrustRegion, SurrogateKind::Gp),
                    AlgorithmSpec::new(Framework::TrustRegion, SurrogateKind::Nn),
                ]);
                let suite = [600, 700, 800, 900, 1000]
                    .iter()
                    .flat_map(|&d| FunctionName::ALL.iter().map(move |&f| ObjectiveFunction::new(f, d)))
                    .collect::<Result<Vec<_>>>()
                    .expect("valid benchmarks");
                Self {
                    name: "full".into(),
                    suite,
                    algorithms,
                    trials_per_cell: 10,
                    base_seed: 0,
                    defaults: RunDefaults {
                        iterations: 500,
                        match_evaluations: false,
                        record_points: false,
                        ..RunDefaults::default()
                    },
                    output_dir: PathBuf::from("runs/full"),
                    parallelism: 4,
                }
            }
        }
    }

    /// Parse JSON, reporting the offending field path on failure.
    pub fn from_json_str(json: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(json);
        let config: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(if path == "." { "$".to_owned() } else { path }, e.into_inner().to_string())
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.suite.is_empty() {
            return Err(Error::config("suite", "must list at least one problem"));
        }
        if self.algorithms.is_empty() {
            return Err(Error::config("algorithms", "must list at least one algorithm"));
        }
        if self.trials_per_cell == 0 {
            return Err(Error::config("trials_per_cell", "must be >= 1"));
        }
        if self.parallelism == 0 {
            return Err(Error::config("parallelism", "must be >= 1"));
        }
        let mut problems = Vec::new();
        for (j, f) in self.suite.iter().enumerate() {
            f.validate().map_err(|e| nest(&format!("suite[{j}]"), e))?;
            let id = f.id();
            if problems.contains(&id) {
                return Err(Error::config(format!("suite[{j}]"), format!("duplicate problem `{id}`")));
            }
            problems.push(id);
        }
        let mut names = Vec::new();
        for (i, a) in self.algorithms.iter().enumerate() {
            let name = a.display_name();
            if !valid_name(&name) {
                return Err(Error::config(
                    format!("algorithms[{i}].name"),
                    format!("`{name}` must be non-empty ASCII letters, digits, `-`, `_` or `.` without `__`"),
                ));
            }
            if names.contains(&name) {
                return Err(Error::config(format!("algorithms[{i}].name"), format!("duplicate algorithm `{name}`")));
            }
            names.push(name);
            for f in &self.suite {
                self.run_config(f, a, 0).validate().map_err(|e| nest(&format!("algorithms[{i}]"), e))?;
            }
        }
        Ok(())
    }

    /// Copy with algorithm names filled in.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        for a in &mut c.algorithms {
            a.name = Some(a.display_name());
        }
        c
    }

    fn run_config(&self, objective: &ObjectiveFunction, a: &AlgorithmSpec, seed: u64) -> RunConfig {
        let d = &self.defaults;
        let mut c = RunConfig::new(objective.clone(), a.framework, a.surrogate, d.iterations);
        c.acquisition = a.acquisition;
        c.initial_size = d.initial_size;
        c.good_enough_size = a.good_enough_size.unwrap_or(d.good_enough_size);
        c.candidate_size = a.candidate_size.or(d.candidate_size);
        c.candidate_strategy = a.candidate_strategy;
        c.train = a.train.clone().unwrap_or_else(|| d.train.clone());
        c.gp = a.gp.clone().unwrap_or_else(|| d.gp.clone());
        c.trust_region = a.trust_region.clone().unwrap_or_else(|| d.trust_region.clone());
        c.seed = seed;
        c.iterations = match a.iterations {
            Some(r) => r,
            None if d.match_evaluations => {
                let budget = d.iterations * d.good_enough_size;
                let g = c.resolved().good_enough_size.max(1);
                budget.div_ceil(g)
            }
            None => d.iterations,
        };
        c.resolved()
    }

    /// Every trial of the matrix, sorted by trial id.
    pub fn trials(&self) -> Vec<TrialSpec> {
        let mut out = Vec::new();
        for f in &self.suite {
            let problem = f.id();
            for a in &self.algorithms {
                let algorithm = a.display_name();
                for t in 0..self.trials_per_cell {
                    let seed = trial_seed(self.base_seed, &problem, t);
                    out.push(TrialSpec {
                        trial_id: trial_id(&problem, &algorithm, t),
                        problem: problem.clone(),
                        algorithm: algorithm.clone(),
                        trial: t,
                        seed,
                        config: self.run_config(f, a, seed),
                    });
                }
            }
        }
        out.sort_by(|a, b| a.trial_id.cmp(&b.trial_id));
        out
    }
}

fn nest(prefix: &str, e: Error) -> Error {
    match e {
        Error::ConfigInvalid { path, message } => Error::config(format!("{prefix}.{path}"), message),
        other => Error::config(prefix, other.to_string()),
    }
}
