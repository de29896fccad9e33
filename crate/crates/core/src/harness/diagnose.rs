use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::benchfn::{FunctionName, ObjectiveFunction};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::metrics::{build_opc, classify_opc_shape, spearman_rho, OpcCurve, OpcType, MIN_CLASSIFY_POINTS};
use crate::optimizer::SurrogateKind;
use crate::rng::RngStreams;
use crate::sampling::{grid_sampling, latin_hypercube, random_sampling};
use crate::surrogate_gp::{GpConfig, GpModel};
use crate::surrogate_nn::NnSurrogate;
use crate::surrogate_op::{OpSurrogate, TrainConfig};

pub const BUMP_BOUND: f64 = 6.0;

/// `exp(-|x|² / 2)`.
pub fn gaussian_bump(x: &[f64]) -> f64 {
    (-0.5 * x.iter().map(|v| v * v).sum::<f64>()).exp()
}

/// A function to analyze: a benchmark or the Gaussian bump on `[-6, 6]^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DiagnoseTarget {
    GaussianBump { dimension: usize },
    Benchmark { function: ObjectiveFunction },
}

impl DiagnoseTarget {
    pub fn dimension(&self) -> usize {
        match self {
            DiagnoseTarget::GaussianBump { dimension } => *dimension,
            DiagnoseTarget::Benchmark { function } => function.dimension,
        }
    }

    /// Value at unit-cube coordinates.
    pub fn value_unit(&self, u: &[f64]) -> Result<f64> {
        match self {
            DiagnoseTarget::GaussianBump { .. } => {
                let x: Vec<f64> = u.iter().map(|v| -BUMP_BOUND + 2.0 * BUMP_BOUND * v).collect();
                Ok(gaussian_bump(&x))
            }
            DiagnoseTarget::Benchmark { function } => function.value(&function.from_unit(u)?),
        }
    }

    pub fn values_unit(&self, points: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        points
            .rows()
            .into_iter()
            .map(|r| self.value_unit(r.as_slice().expect("standard layout")))
            .collect()
    }
}

impl fmt::Display for DiagnoseTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DiagnoseTarget::GaussianBump { dimension } => write!(f, "gaussian-bump-{dimension}"),
            DiagnoseTarget::Benchmark { function } => f.write_str(&function.id()),
        }
    }
}

impl DiagnoseTarget {
    /// `gaussian-bump` or a benchmark name, at dimension `d`.
    pub fn parse(name: &str, dimension: usize) -> Result<Self> {
        if name.eq_ignore_ascii_case("gaussian-bump") || name.eq_ignore_ascii_case("bump") {
            if dimension == 0 {
                return Err(Error::EmptyDims);
            }
            return Ok(DiagnoseTarget::GaussianBump { dimension });
        }
        let f = FunctionName::from_str(name)?;
        Ok(DiagnoseTarget::Benchmark {
            function: ObjectiveFunction::new(f, dimension)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnoseConfig {
    pub target: DiagnoseTarget,
    /// Uniform samples behind the curve.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    /// Fit this surrogate and report held-out rank correlation.
    #[serde(default)]
    pub surrogate: Option<SurrogateKind>,
    #[serde(default = "default_train_samples")]
    pub train_samples: usize,
    /// Held-out grid resolution in two dimensions; higher dimensions use
    /// `samples` uniform points instead.
    #[serde(default = "default_grid")]
    pub holdout_grid: usize,
    #[serde(default)]
    pub train: TrainConfig,
}

fn default_samples() -> usize {
    2000
}

fn default_train_samples() -> usize {
    200
}

fn default_grid() -> usize {
    33
}

impl DiagnoseConfig {
    pub fn new(target: DiagnoseTarget) -> Self {
        Self {
            target,
            samples: default_samples(),
            seed: 0,
            surrogate: None,
            train_samples: default_train_samples(),
            holdout_grid: default_grid(),
            train: TrainConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpcReport {
    pub target: Option<String>,
    pub n: usize,
    pub opc_type: OpcType,
    pub signed_area: f64,
    pub left_area: f64,
    pub right_area: f64,
    pub half_point: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub surrogate: Option<SurrogateKind>,
    /// Spearman correlation between surrogate scores and negated true values.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub holdout_spearman: Option<f64>,
    pub curve: OpcCurve,
}

/// Build and classify the curve of `values`.
pub fn diagnose_values(values: &[f64]) -> Result<OpcReport> {
    if values.len() < MIN_CLASSIFY_POINTS {
        return Err(Error::TooFewPoints {
            n: values.len(),
            min: MIN_CLASSIFY_POINTS,
        });
    }
    let mut curve = build_opc(values)?;
    let shape = classify_opc_shape(&curve)?;
    curve.opc_type = Some(shape.opc_type);
    Ok(OpcReport {
        target: None,
        n: values.len(),
        opc_type: shape.opc_type,
        signed_area: shape.signed_area,
        left_area: shape.left_area,
        right_area: shape.right_area,
        half_point: shape.half_point,
        surrogate: None,
        holdout_spearman: None,
        curve,
    })
}

/// Larger-is-better surrogate scores on `x` after fitting on `data`.
pub fn fit_and_score(kind: SurrogateKind, data: &Dataset, train: &TrainConfig, x: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
    Ok(match kind {
        SurrogateKind::Op => OpSurrogate::fit(data, train)?.score(x)?.to_vec(),
        SurrogateKind::Nn => NnSurrogate::fit(data, train)?.score(x)?.to_vec(),
        SurrogateKind::Gp => GpModel::fit(data, &GpConfig::default())?
            .posterior(x)?
            .mean
            .iter()
            .map(|m| -m)
            .collect(),
    })
}

fn holdout_points(config: &DiagnoseConfig, streams: &RngStreams) -> Result<Array2<f64>> {
    let d = config.target.dimension();
    Ok(if d == 2 {
        grid_sampling(2, config.holdout_grid)?.points
    } else {
        random_sampling(d, config.samples, streams.seed("diagnose:holdout"))?.points
    })
}

/// Held-out Spearman correlation of a surrogate fitted on an LHS design.
pub fn holdout_spearman(config: &DiagnoseConfig, kind: SurrogateKind) -> Result<f64> {
    let streams = RngStreams::new(config.seed);
    let d = config.target.dimension();
    let x = latin_hypercube(d, config.train_samples, streams.seed("diagnose:train"))?.points;
    let y = config.target.values_unit(x.view())?;
    let data = Dataset::from_parts(x, y)?;
    let train = TrainConfig {
        seed: streams.seed("diagnose:fit"),
        ..config.train.clone()
    };
    let holdout = holdout_points(config, &streams)?;
    let truth: Vec<f64> = config.target.values_unit(holdout.view())?.iter().map(|v| -v).collect();
    let scores = fit_and_score(kind, &data, &train, holdout.view())?;
    spearman_rho(&scores, &truth)
}

/// Curve of `samples` uniform draws, plus held-out correlation when a
/// surrogate is configured.
pub fn diagnose(config: &DiagnoseConfig) -> Result<OpcReport> {
    let streams = RngStreams::new(config.seed);
    let d = config.target.dimension();
    let points = random_sampling(d, config.samples, streams.seed("diagnose:samples"))?.points;
    let values = config.target.values_unit(points.view())?;
    let mut report = diagnose_values(&values)?;
    report.target = Some(config.target.to_string());
    if let Some(kind) = config.surrogate {
        report.surrogate = Some(kind);
        report.holdout_spearman = Some(holdout_spearman(config, kind)?);
    }
    Ok(report)
}
