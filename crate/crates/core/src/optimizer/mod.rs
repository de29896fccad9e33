//! Optimization loops.
//!
//! All frameworks share one batch loop: fit the surrogate on the data,
//! draw `N` candidates, keep the top-`g` by acquisition value, evaluate all
//! of them. Standard BO is the `g = 1` case; the trust-region framework
//! draws candidates around the incumbent and re-seeds the region when it
//! collapses.

pub mod trust_region;

use std::fmt;
use std::time::Instant;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

pub use trust_region::{
    default_failure_tolerance, is_improvement, update_trust_region, TrustRegionSettings, TrustRegionState,
    TrustRegionUpdate,
};

use crate::acquisition::{acquire, select_top_g, AcquisitionKind, AcquisitionSpec, Surrogate};
use crate::benchfn::{Evaluator, ObjectiveFunction};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::network::Network;
use crate::rng::RngStreams;
use crate::sampling::{
    grid_sampling, latin_hypercube, random_sampling, trust_region_candidates, CandidateSet, SamplingStrategy,
};
use crate::surrogate_gp::{GpConfig, GpModel};
use crate::surrogate_nn::NnSurrogate;
use crate::surrogate_op::{OpSurrogate, TrainConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Framework {
    #[serde(rename = "bo")]
    StandardBo,
    #[serde(rename = "opbo")]
    Opbo,
    #[serde(rename = "turbo")]
    TrustRegion,
    /// Uniform random batches; the matched-budget reference.
    #[serde(rename = "random")]
    RandomSearch,
}

impl Framework {
    pub fn as_str(&self) -> &'static str {
        match self {
            Framework::StandardBo => "bo",
            Framework::Opbo => "opbo",
            Framework::TrustRegion => "turbo",
            Framework::RandomSearch => "random",
        }
    }
}

impl fmt::Display for Framework {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SurrogateKind {
    Op,
    Gp,
    Nn,
}

impl SurrogateKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SurrogateKind::Op => "op",
            SurrogateKind::Gp => "gp",
            SurrogateKind::Nn => "nn",
        }
    }

    pub fn default_acquisition(&self) -> AcquisitionSpec {
        match self {
            SurrogateKind::Gp => AcquisitionSpec::new(AcquisitionKind::Ts),
            SurrogateKind::Op | SurrogateKind::Nn => AcquisitionSpec::new(AcquisitionKind::Greedy),
        }
    }
}

impl fmt::Display for SurrogateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One optimization trial. `None` fields resolve to documented defaults in
/// [`RunConfig::resolved`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub objective: ObjectiveFunction,
    pub framework: Framework,
    #[serde(default = "default_surrogate")]
    pub surrogate: SurrogateKind,
    #[serde(default)]
    pub acquisition: Option<AcquisitionSpec>,
    #[serde(default = "default_initial_size")]
    pub initial_size: usize,
    pub iterations: usize,
    /// Defaults to `10 d`.
    #[serde(default)]
    pub candidate_size: Option<usize>,
    #[serde(default = "default_good_enough_size")]
    pub good_enough_size: usize,
    /// Defaults to `lhs`, or `turbo` for the trust-region framework.
    #[serde(default)]
    pub candidate_strategy: Option<SamplingStrategy>,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub gp: GpConfig,
    #[serde(default)]
    pub trust_region: TrustRegionSettings,
    #[serde(default)]
    pub seed: u64,
}

fn default_surrogate() -> SurrogateKind {
    SurrogateKind::Op
}

fn default_initial_size() -> usize {
    10
}

fn default_good_enough_size() -> usize {
    10
}

impl RunConfig {
    pub fn new(objective: ObjectiveFunction, framework: Framework, surrogate: SurrogateKind, iterations: usize) -> Self {
        Self {
            objective,
            framework,
            surrogate,
            acquisition: None,
            initial_size: default_initial_size(),
            iterations,
            candidate_size: None,
            good_enough_size: default_good_enough_size(),
            candidate_strategy: None,
            train: TrainConfig::default(),
            gp: GpConfig::default(),
            trust_region: TrustRegionSettings::default(),
            seed: 0,
        }
    }

    /// Copy with every default filled in and framework rules applied.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        let d = c.objective.dimension;
        if c.framework == Framework::StandardBo {
            c.good_enough_size = 1;
        }
        c.acquisition.get_or_insert_with(|| c.surrogate.default_acquisition());
        c.candidate_size.get_or_insert(d * 10);
        c.candidate_strategy.get_or_insert(match c.framework {
            Framework::TrustRegion => SamplingStrategy::TrustRegionPerturbation,
            Framework::RandomSearch => SamplingStrategy::Random,
            _ => SamplingStrategy::LatinHypercube,
        });
        let g = c.good_enough_size;
        c.trust_region
            .failure_tolerance
            .get_or_insert_with(|| default_failure_tolerance(d, g));
        if c.objective.noise_std > 0.0 {
            c.gp.learn_noise = true;
        }
        c
    }

    pub fn validate(&self) -> Result<()> {
        self.objective.validate()?;
        let c = self.resolved();
        if c.initial_size == 0 {
            return Err(Error::config("initial_size", "must be >= 1"));
        }
        if c.iterations == 0 {
            return Err(Error::config("iterations", "must be >= 1"));
        }
        if c.good_enough_size == 0 {
            return Err(Error::config("good_enough_size", "must be >= 1"));
        }
        let n = c.candidate_size.unwrap_or_default();
        if c.framework != Framework::RandomSearch && n < c.good_enough_size {
            return Err(Error::config(
                "candidate_size",
                format!("{n} is below good_enough_size {}", c.good_enough_size),
            ));
        }
        let acq = c.acquisition.unwrap_or(AcquisitionSpec::new(AcquisitionKind::Greedy));
        acq.validate()?;
        if acq.kind == AcquisitionKind::Ts && c.surrogate != SurrogateKind::Gp && c.framework != Framework::RandomSearch {
            return Err(Error::config(
                "acquisition.kind",
                format!("ts needs a posterior; the {} surrogate has none", c.surrogate),
            ));
        }
        let strategy = c.candidate_strategy.unwrap_or(SamplingStrategy::LatinHypercube);
        if strategy == SamplingStrategy::TrustRegionPerturbation && c.framework != Framework::TrustRegion {
            return Err(Error::config(
                "candidate_strategy",
                "turbo candidates need the trust-region framework",
            ));
        }
        let tr = &c.trust_region;
        if !(0.0 < tr.min_length && tr.min_length <= tr.initial_length && tr.initial_length <= tr.max_length)
            || tr.max_length > crate::sampling::MAX_SIDE_LENGTH
        {
            return Err(Error::config("trust_region", "need 0 < min_length <= initial_length <= max_length <= 1.6"));
        }
        if tr.success_tolerance == 0 || tr.failure_tolerance == Some(0) {
            return Err(Error::config("trust_region", "tolerances must be >= 1"));
        }
        c.train.validate()
    }
}

/// Surrogate diagnostics logged per iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SurrogateStats {
    Gp {
        lengthscale: f64,
        signal_variance: f64,
        noise_variance: f64,
        log_marginal_likelihood: f64,
    },
    Network {
        loss_trace: Vec<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 0 is the initial design.
    pub iteration: usize,
    /// Unit-cube coordinates.
    pub suggested: Vec<Vec<f64>>,
    pub observed: Vec<f64>,
    pub batch_best: f64,
    pub incumbent: f64,
    pub evals_cumulative: u64,
    pub fit_seconds: f64,
    pub iter_seconds: f64,
    pub trust_region_length: Option<f64>,
    #[serde(default)]
    pub restarted: bool,
    pub surrogate: Option<SurrogateStats>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizationTrace {
    pub records: Vec<IterationRecord>,
    /// Unit-cube coordinates.
    pub best_point: Vec<f64>,
    pub best_point_original: Vec<f64>,
    pub best_value: f64,
    pub total_seconds: f64,
}

impl OptimizationTrace {
    pub fn initial_incumbent(&self) -> f64 {
        self.records[0].incumbent
    }

    pub fn final_incumbent(&self) -> f64 {
        self.best_value
    }

    pub fn evaluations(&self) -> u64 {
        self.records.last().map_or(0, |r| r.evals_cumulative)
    }
}

fn require_framework(config: &RunConfig, framework: Framework) -> Result<()> {
    if config.framework != framework {
        return Err(Error::config(
            "framework",
            format!("expected `{framework}`, got `{}`", config.framework),
        ));
    }
    Ok(())
}

/// Standard BO: one arg-max suggestion per iteration.
pub fn run_standard_bo(config: &RunConfig) -> Result<OptimizationTrace> {
    require_framework(config, Framework::StandardBo)?;
    run(config)
}

/// Good-enough batch loop: `g` suggestions per iteration.
pub fn run_opbo(config: &RunConfig) -> Result<OptimizationTrace> {
    require_framework(config, Framework::Opbo)?;
    run(config)
}

pub fn run_trust_region(config: &RunConfig) -> Result<OptimizationTrace> {
    require_framework(config, Framework::TrustRegion)?;
    run(config)
}

pub fn run_random_search(config: &RunConfig) -> Result<OptimizationTrace> {
    require_framework(config, Framework::RandomSearch)?;
    run(config)
}

/// Run any framework.
pub fn run(config: &RunConfig) -> Result<OptimizationTrace> {
    config.validate()?;
    Trial::new(config.resolved()).run()
}

struct Trial {
    config: RunConfig,
    streams: RngStreams,
    evaluator: Evaluator,
    data: Dataset,
    records: Vec<IterationRecord>,
    previous_network: Option<Network>,
}

fn fit_surrogate(
    kind: SurrogateKind,
    data: &Dataset,
    config: &RunConfig,
    train: &TrainConfig,
    previous: Option<&Network>,
) -> Result<Surrogate> {
    Ok(match (kind, previous) {
        (SurrogateKind::Gp, _) if data.len() > config.gp.max_points => {
            Surrogate::Gp(GpModel::fit(&data.best_subset(config.gp.max_points), &config.gp)?)
        }
        (SurrogateKind::Gp, _) => Surrogate::Gp(GpModel::fit(data, &config.gp)?),
        (SurrogateKind::Op, Some(net)) if train.warm_start => Surrogate::Op(OpSurrogate::refit_warm(net, data, train)?),
        (SurrogateKind::Op, _) => Surrogate::Op(OpSurrogate::fit(data, train)?),
        (SurrogateKind::Nn, Some(net)) if train.warm_start => Surrogate::Nn(NnSurrogate::refit_warm(net, data, train)?),
        (SurrogateKind::Nn, _) => Surrogate::Nn(NnSurrogate::fit(data, train)?),
    })
}

fn surrogate_stats(s: &Surrogate) -> SurrogateStats {
    match s {
        Surrogate::Gp(m) => SurrogateStats::Gp {
            lengthscale: m.lengthscale,
            signal_variance: m.signal_variance,
            noise_variance: m.noise_variance,
            log_marginal_likelihood: m.log_marginal_likelihood,
        },
        Surrogate::Op(m) => SurrogateStats::Network {
            loss_trace: m.loss_trace.clone(),
        },
        Surrogate::Nn(m) => SurrogateStats::Network {
            loss_trace: m.loss_trace.clone(),
        },
    }
}

impl Trial {
    fn new(config: RunConfig) -> Self {
        let streams = RngStreams::new(config.seed);
        let evaluator = Evaluator::new(config.objective.clone(), streams.seed("noise"));
        let data = Dataset::new(config.objective.dimension);
        Self {
            config,
            streams,
            evaluator,
            data,
            records: Vec::new(),
            previous_network: None,
        }
    }

    fn evaluate(&mut self, points: ArrayView2<'_, f64>, region: Option<&mut Dataset>) -> Result<Vec<f64>> {
        let mut observed = Vec::with_capacity(points.nrows());
        for row in points.rows() {
            let rec = self.evaluator.evaluate_unit(row.as_slice().expect("standard layout"))?;
            self.data.push(row, rec.value)?;
            observed.push(rec.value);
        }
        if let Some(region) = region {
            for (row, &y) in points.rows().into_iter().zip(&observed) {
                region.push(row, y)?;
            }
        }
        Ok(observed)
    }

    fn candidates(&self, round: usize, center: Option<(&[f64], f64)>) -> Result<CandidateSet> {
        let c = &self.config;
        let d = c.objective.dimension;
        let n = c.candidate_size.expect("resolved");
        let seed = self.streams.seed(&format!("candidates:{round}"));
        match c.candidate_strategy.expect("resolved") {
            SamplingStrategy::Random => random_sampling(d, n, seed),
            SamplingStrategy::LatinHypercube => latin_hypercube(d, n, seed),
            SamplingStrategy::Grid => {
                let per_axis = ((n as f64).powf(1.0 / d as f64).floor() as usize).max(2);
                grid_sampling(d, per_axis)
            }
            SamplingStrategy::TrustRegionPerturbation => {
                let (center, length) = center.expect("trust-region framework supplies a center");
                trust_region_candidates(center, length, n, seed)
            }
        }
    }

    /// Fit, acquire and select one batch.
    fn propose(&mut self, round: usize, fit_data: &Dataset, center: Option<(&[f64], f64)>) -> Result<(Array2<f64>, f64, Option<SurrogateStats>)> {
        let c = &self.config;
        let train = TrainConfig {
            seed: self.streams.seed(&format!("fit:{round}")),
            ..c.train.clone()
        };
        let started = Instant::now();
        let surrogate = fit_surrogate(c.surrogate, fit_data, c, &train, self.previous_network.as_ref())?;
        let fit_seconds = started.elapsed().as_secs_f64();
        let candidates = self.candidates(round, center)?;
        let spec = c.acquisition.expect("resolved");
        let mut rng = self.streams.stream(&format!("acquisition:{round}"));
        let values = acquire(&surrogate, &candidates, &spec, fit_data, &mut rng)?;
        let chosen = select_top_g(&values, &candidates, c.good_enough_size.min(candidates.len()))?;
        let stats = surrogate_stats(&surrogate);
        self.previous_network = match surrogate {
            Surrogate::Op(m) => Some(m.network),
            Surrogate::Nn(m) => Some(m.network),
            Surrogate::Gp(_) => None,
        };
        Ok((chosen.points, fit_seconds, Some(stats)))
    }

    fn incumbent(&self) -> f64 {
        self.data.best().map_or(f64::INFINITY, |(_, v)| v)
    }

    fn record(&mut self, iteration: usize, points: Array2<f64>, observed: Vec<f64>, timing: (f64, f64), extra: (Option<f64>, bool, Option<SurrogateStats>)) {
        let batch_best = observed.iter().copied().fold(f64::INFINITY, f64::min);
        self.records.push(IterationRecord {
            iteration,
            suggested: points.rows().into_iter().map(|r| r.to_vec()).collect(),
            observed,
            batch_best,
            incumbent: self.incumbent(),
            evals_cumulative: self.evaluator.evaluations(),
            fit_seconds: timing.0,
            iter_seconds: timing.1,
            trust_region_length: extra.0,
            restarted: extra.1,
            surrogate: extra.2,
        });
    }

    fn run(mut self) -> Result<OptimizationTrace> {
        let started = Instant::now();
        let d = self.config.objective.dimension;
        let k = self.config.initial_size;
        let trust = self.config.framework == Framework::TrustRegion;

        let init = latin_hypercube(d, k, self.streams.seed("init"))?.points;
        let mut region = Dataset::new(d);
        let observed = self.evaluate(init.view(), trust.then_some(&mut region))?;
        let mut state = trust.then(|| {
            let (i, _) = region.best().expect("initial design is non-empty");
            TrustRegionState::new(
                &self.config.trust_region,
                self.config.trust_region.failure_tolerance.expect("resolved"),
                region.point(i).to_vec(),
            )
        });
        let length = state.as_ref().map(|s| s.side_length);
        self.record(0, init, observed, (0.0, started.elapsed().as_secs_f64()), (length, false, None));

        let mut pending_restart = false;
        for round in 1..=self.config.iterations {
            let iter_started = Instant::now();
            let step = (|| -> Result<_> {
                if self.config.framework == Framework::RandomSearch {
                    let seed = self.streams.seed(&format!("candidates:{round}"));
                    let pts = random_sampling(d, self.config.good_enough_size, seed)?.points;
                    return Ok((pts, 0.0, None, false));
                }
                if pending_restart {
                    let pts = latin_hypercube(d, k, self.streams.seed(&format!("restart:{round}")))?.points;
                    return Ok((pts, 0.0, None, true));
                }
                let (pts, fit, stats) = match &state {
                    Some(s) => {
                        let snapshot = region.clone();
                        self.propose(round, &snapshot, Some((&s.center, s.side_length)))?
                    }
                    None => {
                        let snapshot = self.data.clone();
                        self.propose(round, &snapshot, None)?
                    }
                };
                Ok((pts, fit, stats, false))
            })();
            let (points, fit_seconds, stats, restarted) = step.map_err(|e| e.at_iteration(round))?;

            if restarted {
                region = Dataset::new(d);
            }
            let region_best_before = region.best().map_or(f64::INFINITY, |(_, v)| v);
            let observed = self
                .evaluate(points.view(), trust.then_some(&mut region))
                .map_err(|e| e.at_iteration(round))?;

            if let Some(s) = state.as_mut() {
                if restarted {
                    pending_restart = false;
                } else {
                    let batch_best = observed.iter().copied().fold(f64::INFINITY, f64::min);
                    let update = update_trust_region(s, batch_best, region_best_before);
                    *s = update.state;
                    pending_restart = update.restart;
                }
                let (i, _) = region.best().expect("region holds the batch just evaluated");
                s.center = region.point(i).to_vec();
            }
            let length = state.as_ref().map(|s| s.side_length);
            let iter_seconds = iter_started.elapsed().as_secs_f64();
            self.record(round, points, observed, (fit_seconds, iter_seconds), (length, restarted, stats));
        }

        let (best, best_value) = self.data.best().expect("non-empty dataset");
        let best_point = self.data.point(best).to_vec();
        Ok(OptimizationTrace {
            best_point_original: self.config.objective.from_unit(&best_point)?,
            best_point,
            best_value,
            records: self.records,
            total_seconds: started.elapsed().as_secs_f64(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchfn::FunctionName;

    fn levy2(framework: Framework, surrogate: SurrogateKind, iterations: usize) -> RunConfig {
        let f = ObjectiveFunction::new(FunctionName::Levy, 2).unwrap();
        let mut c = RunConfig::new(f, framework, surrogate, iterations);
        c.candidate_size = Some(100);
        c.train.epochs = 10;
        c
    }

    #[test]
    fn standard_bo_budget_is_k_plus_r() {
        let t = run_standard_bo(&levy2(Framework::StandardBo, SurrogateKind::Gp, 1)).unwrap();
        assert_eq!(t.evaluations(), 11);
        assert_eq!(t.records.len(), 2);
        assert_eq!(t.records[1].suggested.len(), 1);
    }

    #[test]
    fn opbo_budget_is_k_plus_rg() {
        let t = run_opbo(&levy2(Framework::Opbo, SurrogateKind::Op, 5)).unwrap();
        assert_eq!(t.evaluations(), 60);
        let sizes: Vec<usize> = t.records.iter().map(|r| r.suggested.len()).collect();
        assert_eq!(sizes, vec![10, 10, 10, 10, 10, 10]);
    }

    #[test]
    fn wrong_framework_is_rejected() {
        let c = levy2(Framework::Opbo, SurrogateKind::Op, 1);
        assert!(run_standard_bo(&c).is_err());
        assert!(run_trust_region(&c).is_err());
    }

    #[test]
    fn validation_errors() {
        let mut c = levy2(Framework::Opbo, SurrogateKind::Op, 1);
        c.acquisition = Some(AcquisitionSpec::new(AcquisitionKind::Ts));
        assert!(matches!(run(&c), Err(Error::ConfigInvalid { .. })));
        let mut c = levy2(Framework::Opbo, SurrogateKind::Op, 1);
        c.candidate_size = Some(5);
        assert!(run(&c).is_err());
        let mut c = levy2(Framework::Opbo, SurrogateKind::Op, 0);
        c.iterations = 0;
        assert!(run(&c).is_err());
        let mut c = levy2(Framework::Opbo, SurrogateKind::Op, 1);
        c.candidate_strategy = Some(SamplingStrategy::TrustRegionPerturbation);
        assert!(run(&c).is_err());
    }

    #[test]
    fn resolved_defaults() {
        let f = ObjectiveFunction::new(FunctionName::Ackley, 100).unwrap();
        let c = RunConfig::new(f, Framework::StandardBo, SurrogateKind::Gp, 3).resolved();
        assert_eq!(c.good_enough_size, 1);
        assert_eq!(c.candidate_size, Some(1000));
        assert_eq!(c.acquisition.unwrap().kind, AcquisitionKind::Ts);
        assert_eq!(c.candidate_strategy, Some(SamplingStrategy::LatinHypercube));
        let f = ObjectiveFunction::new(FunctionName::Ackley, 100).unwrap();
        let c = RunConfig::new(f, Framework::TrustRegion, SurrogateKind::Op, 3).resolved();
        assert_eq!(c.trust_region.failure_tolerance, Some(10));
        assert_eq!(c.acquisition.unwrap().kind, AcquisitionKind::Greedy);
    }

    #[test]
    fn config_round_trips_through_json() {
        let c = levy2(Framework::TrustRegion, SurrogateKind::Nn, 4).resolved();
        let json = serde_json::to_string(&c).unwrap();
        assert!(json.contains("\"framework\":\"turbo\""));
        assert!(json.contains("\"surrogate\":\"nn\""));
        let back: RunConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, c);
    }
}
