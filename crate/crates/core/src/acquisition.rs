//! Acquisition functions over a finite candidate set and top-`g` selection.
//!
//! Every acquisition output is oriented "larger is better" for a
//! minimization problem, so selection is always a top-`g` maximum.

use std::fmt;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::sampling::CandidateSet;
use crate::surrogate_gp::{GpModel, PosteriorPrediction};
use crate::surrogate_nn::NnSurrogate;
use crate::surrogate_op::OpSurrogate;

pub const DEFAULT_KAPPA: f64 = 1.96;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AcquisitionKind {
    Ei,
    Ucb,
    Ts,
    Greedy,
}

impl AcquisitionKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            AcquisitionKind::Ei => "ei",
            AcquisitionKind::Ucb => "ucb",
            AcquisitionKind::Ts => "ts",
            AcquisitionKind::Greedy => "greedy",
        }
    }
}

impl fmt::Display for AcquisitionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcquisitionSpec {
    pub kind: AcquisitionKind,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
}

fn default_kappa() -> f64 {
    DEFAULT_KAPPA
}

impl AcquisitionSpec {
    pub fn new(kind: AcquisitionKind) -> Self {
        Self {
            kind,
            kappa: DEFAULT_KAPPA,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return Err(Error::config("acquisition.kappa", "must be finite and >= 0"));
        }
        Ok(())
    }
}

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Expected improvement below `best_observed`.
pub fn expected_improvement(pred: &PosteriorPrediction, best_observed: f64) -> Vec<f64> {
    pred.mean
        .iter()
        .zip(&pred.std)
        .map(|(&mu, &sigma)| {
            let improvement = best_observed - mu;
            if sigma > 0.0 {
                let z = improvement / sigma;
                (improvement * normal_cdf(z) + sigma * normal_pdf(z)).max(0.0)
            } else {
                improvement.max(0.0)
            }
        })
        .collect()
}

/// Negated lower confidence bound `-(μ - κσ)`.
pub fn upper_confidence_bound(pred: &PosteriorPrediction, kappa: f64) -> Vec<f64> {
    pred.mean
        .iter()
        .zip(&pred.std)
        .map(|(&mu, &sigma)| -(mu - kappa * sigma))
        .collect()
}

/// A fitted surrogate of any supported family.
#[derive(Clone, Debug)]
pub enum Surrogate {
    Op(OpSurrogate),
    Nn(NnSurrogate),
    Gp(GpModel),
}

impl Surrogate {
    pub fn name(&self) -> &'static str {
        match self {
            Surrogate::Op(_) => "op",
            Surrogate::Nn(_) => "nn",
            Surrogate::Gp(_) => "gp",
        }
    }

    fn input_dim(&self) -> usize {
        match self {
            Surrogate::Op(m) => m.network.input_dim(),
            Surrogate::Nn(m) => m.network.input_dim(),
            Surrogate::Gp(m) => m.input_dim(),
        }
    }
}

/// Acquisition values for every candidate.
///
/// Point-score surrogates carry no variance: EI and UCB on them reduce to
/// the score ordering, and Thompson sampling is rejected.
pub fn acquire(
    surrogate: &Surrogate,
    candidates: &CandidateSet,
    spec: &AcquisitionSpec,
    dataset: &Dataset,
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    spec.validate()?;
    if candidates.dimension() != surrogate.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: surrogate.input_dim(),
            found: candidates.dimension(),
        });
    }
    let x = candidates.points.view();
    let point_score = |kind: AcquisitionKind| -> Result<()> {
        match kind {
            AcquisitionKind::Ts => Err(Error::IncompatibleSurrogateAcquisition {
                surrogate: surrogate.name(),
                acquisition: "ts",
            }),
            AcquisitionKind::Greedy => Ok(()),
            other => {
                log::debug!(
                    "{} surrogate has no variance; {other} reduces to the score ordering",
                    surrogate.name()
                );
                Ok(())
            }
        }
    };
    match surrogate {
        Surrogate::Op(m) => {
            point_score(spec.kind)?;
            Ok(m.score(x)?.to_vec())
        }
        Surrogate::Nn(m) => {
            point_score(spec.kind)?;
            Ok(m.score(x)?.to_vec())
        }
        Surrogate::Gp(m) => match spec.kind {
            AcquisitionKind::Ts => m.thompson_sample(x, rng).map(|f| f.into_iter().map(|v| -v).collect()),
            AcquisitionKind::Ei => {
                let best = dataset
                    .best()
                    .map(|(_, v)| v)
                    .ok_or_else(|| Error::InvalidSize("EI needs at least one observation".into()))?;
                Ok(expected_improvement(&m.posterior(x)?, best))
            }
            AcquisitionKind::Ucb => Ok(upper_confidence_bound(&m.posterior(x)?, spec.kappa)),
            AcquisitionKind::Greedy => Ok(m.posterior(x)?.mean.into_iter().map(|v| -v).collect()),
        },
    }
}

/// The `g` best candidates, ordered by value (descending), ties by index.
#[derive(Clone, Debug, PartialEq)]
pub struct GoodEnoughSet {
    pub points: Array2<f64>,
    pub acquisition_values: Vec<f64>,
    pub indices: Vec<usize>,
}

pub fn select_top_g(values: &[f64], candidates: &CandidateSet, g: usize) -> Result<GoodEnoughSet> {
    let m = values.len();
    if m != candidates.len() {
        return Err(Error::LengthMismatch {
            left: m,
            right: candidates.len(),
        });
    }
    if g == 0 || g > m {
        return Err(Error::InvalidG { g, m });
    }
    // NaN sorts last so a broken acquisition value never wins.
    let key = |v: f64| if v.is_nan() { f64::NEG_INFINITY } else { v };
    let mut order: Vec<usize> = (0..m).collect();
    let cmp = |a: &usize, b: &usize| key(values[*b]).total_cmp(&key(values[*a])).then(a.cmp(b));
    if g < m {
        order.select_nth_unstable_by(g - 1, cmp);
        order.truncate(g);
    }
    order.sort_by(cmp);
    Ok(GoodEnoughSet {
        points: candidates.points.select(Axis(0), &order),
        acquisition_values: order.iter().map(|&i| values[i]).collect(),
        indices: order,
    })
}
