//! Synthetic benchmark objectives (Ackley, Levy, Rosenbrock, Dixon-Price).
//!
//! All objectives are minimized over a uniform box `[lower, upper]^d`.
//! Optimizers work on the unit cube; [`ObjectiveFunction::from_unit`] and
//! [`ObjectiveFunction::to_unit`] convert between the two coordinate systems.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, Rng};

const ACKLEY_A: f64 = 20.0;
const ACKLEY_B: f64 = 0.2;
const ACKLEY_C: f64 = 2.0 * PI;

pub const DEFAULT_LOWER: f64 = -5.0;
pub const DEFAULT_UPPER: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FunctionName {
    Ackley,
    Levy,
    Rosenbrock,
    DixonPrice,
}

impl FunctionName {
    pub const ALL: [FunctionName; 4] = [
        FunctionName::Ackley,
        FunctionName::Levy,
        FunctionName::Rosenbrock,
        FunctionName::DixonPrice,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            FunctionName::Ackley => "ackley",
            FunctionName::Levy => "levy",
            FunctionName::Rosenbrock => "rosenbrock",
            FunctionName::DixonPrice => "dixonprice",
        }
    }

    pub fn min_dimension(&self) -> usize {
        match self {
            FunctionName::Ackley => 1,
            _ => 2,
        }
    }
}

impl fmt::Display for FunctionName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FunctionName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FunctionName::ALL
            .into_iter()
            .find(|n| n.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownFunction(s.to_string()))
    }
}

/// A named benchmark over a uniform box, with optional Gaussian observation noise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveFunction {
    pub name: FunctionName,
    pub dimension: usize,
    #[serde(default = "default_lower")]
    pub lower_bound: f64,
    #[serde(default = "default_upper")]
    pub upper_bound: f64,
    #[serde(default)]
    pub noise_std: f64,
}

fn default_lower() -> f64 {
    DEFAULT_LOWER
}

fn default_upper() -> f64 {
    DEFAULT_UPPER
}

impl ObjectiveFunction {
    pub fn new(name: FunctionName, dimension: usize) -> Result<Self> {
        let f = Self {
            name,
            dimension,
            lower_bound: DEFAULT_LOWER,
            upper_bound: DEFAULT_UPPER,
            noise_std: 0.0,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn with_bounds(mut self, lower: f64, upper: f64) -> Result<Self> {
        self.lower_bound = lower;
        self.upper_bound = upper;
        self.validate()?;
        Ok(self)
    }

    pub fn with_noise(mut self, noise_std: f64) -> Result<Self> {
        if !(noise_std >= 0.0 && noise_std.is_finite()) {
            return Err(Error::config("noise_std", "must be a finite nonnegative number"));
        }
        self.noise_std = noise_std;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let min = self.name.min_dimension();
        if self.dimension < min {
            return Err(Error::InvalidDimension {
                function: self.name.as_str(),
                dimension: self.dimension,
                min,
            });
        }
        if !(self.lower_bound < self.upper_bound)
            || !self.lower_bound.is_finite()
            || !self.upper_bound.is_finite()
        {
            return Err(Error::InvalidBounds {
                lower: self.lower_bound,
                upper: self.upper_bound,
            });
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::config("noise_std", "must be a finite nonnegative number"));
        }
        Ok(())
    }

    /// Problem identifier such as `ackley-100`.
    pub fn id(&self) -> String {
        format!("{}-{}", self.name, self.dimension)
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                found: x.len(),
            });
        }
        for (index, &value) in x.iter().enumerate() {
            if !(value >= self.lower_bound && value <= self.upper_bound) {
                return Err(Error::OutOfBounds {
                    index,
                    value,
                    lower: self.lower_bound,
                    upper: self.upper_bound,
                });
            }
        }
        Ok(())
    }

    /// Noiseless objective value at `x` (original coordinates).
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        Ok(match self.name {
            FunctionName::Ackley => ackley(x),
            FunctionName::Levy => levy(x),
            FunctionName::Rosenbrock => rosenbrock(x),
            FunctionName::DixonPrice => dixon_price(x),
        })
    }

    /// Map a unit-cube point to the original box.
    pub fn from_unit(&self, u: &[f64]) -> Result<Vec<f64>> {
        if u.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                found: u.len(),
            });
        }
        let width = self.upper_bound - self.lower_bound;
        u.iter()
            .enumerate()
            .map(|(index, &v)| {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::OutOfBounds {
                        index,
                        value: v,
                        lower: 0.0,
                        upper: 1.0,
                    });
                }
                Ok((self.lower_bound + v * width).min(self.upper_bound))
            })
            .collect()
    }

    pub fn to_unit(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        let width = self.upper_bound - self.lower_bound;
        Ok(x
            .iter()
            .map(|&v| ((v - self.lower_bound) / width).clamp(0.0, 1.0))
            .collect())
    }

    /// Analytic global minimizer (original coordinates) and its value.
    pub fn known_minimum(&self) -> Result<(Vec<f64>, f64)> {
        let d = self.dimension;
        let minimizer = match self.name {
            FunctionName::Ackley => vec![0.0; d],
            FunctionName::Levy | FunctionName::Rosenbrock => vec![1.0; d],
            // x_i = 2^{-(2^i - 2) / 2^i} = 2^{-(1 - 2^{1-i})}, written to stay finite for large i.
            FunctionName::DixonPrice => (1..=d)
                .map(|i| 2f64.powf(-(1.0 - 2f64.powi(1 - i as i32))))
                .collect(),
        };
        if minimizer
            .iter()
            .any(|&v| v < self.lower_bound || v > self.upper_bound)
        {
            return Err(Error::MinimizerOutsideBounds(self.id()));
        }
        Ok((minimizer, 0.0))
    }
}

fn ackley(x: &[f64]) -> f64 {
    let d = x.len() as f64;
    // Means are formed before the square root so large d cannot overflow.
    let mean_sq = x.iter().map(|v| v * v).sum::<f64>() / d;
    let mean_cos = x.iter().map(|v| (ACKLEY_C * v).cos()).sum::<f64>() / d;
    let e = 1f64.exp();
    // Grouped so each bracket is nonnegative in floating point.
    (ACKLEY_A - ACKLEY_A * (-ACKLEY_B * mean_sq.sqrt()).exp()) + (e - mean_cos.exp())
}

fn levy(x: &[f64]) -> f64 {
    let w: Vec<f64> = x.iter().map(|v| 1.0 + (v - 1.0) / 4.0).collect();
    let d = w.len();
    let head = (PI * w[0]).sin().powi(2);
    let body: f64 = w[..d - 1]
        .iter()
        .map(|wi| (wi - 1.0).powi(2) * (1.0 + 10.0 * (PI * wi + 1.0).sin().powi(2)))
        .sum();
    let wd = w[d - 1];
    let tail = (wd - 1.0).powi(2) * (1.0 + (2.0 * PI * wd).sin().powi(2));
    head + body + tail
}

fn rosenbrock(x: &[f64]) -> f64 {
    x.windows(2)
        .map(|p| 100.0 * (p[1] - p[0] * p[0]).powi(2) + (p[0] - 1.0).powi(2))
        .sum()
}

fn dixon_price(x: &[f64]) -> f64 {
    let head = (x[0] - 1.0).powi(2);
    let body: f64 = x
        .windows(2)
        .enumerate()
        .map(|(k, p)| (k + 2) as f64 * (2.0 * p[1] * p[1] - p[0]).powi(2))
        .sum();
    head + body
}

/// Cartesian product of the four benchmarks with `dims`, over `[-5, 10]^d`, noiseless.
pub fn make_suite(dims: &[usize]) -> Result<Vec<ObjectiveFunction>> {
    if dims.is_empty() {
        return Err(Error::EmptyDims);
    }
    let mut suite = Vec::with_capacity(dims.len() * FunctionName::ALL.len());
    for &d in dims {
        if d < 2 {
            return Err(Error::InvalidSize(format!("suite dimension {d} < 2")));
        }
        for name in FunctionName::ALL {
            suite.push(ObjectiveFunction::new(name, d)?);
        }
    }
    Ok(suite)
}

/// One objective call.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    /// Original coordinates.
    pub point: Vec<f64>,
    pub value: f64,
    pub true_value: f64,
    pub eval_index: u64,
}

/// Trial-local evaluation gate: owns the call counter and the noise stream.
///
/// Every framework goes through this type, so all are charged identically
/// per true-function call.
#[derive(Clone, Debug)]
pub struct Evaluator {
    function: ObjectiveFunction,
    evaluations: u64,
    noise: Rng,
}

impl Evaluator {
    pub fn new(function: ObjectiveFunction, noise_seed: u64) -> Self {
        Self {
            function,
            evaluations: 0,
            noise: rng_from_seed(noise_seed),
        }
    }

    pub fn function(&self) -> &ObjectiveFunction {
        &self.function
    }

    pub fn evaluations(&self) -> u64 {
        self.evaluations
    }

    pub fn evaluate(&mut self, x: &[f64]) -> Result<EvaluationRecord> {
        let true_value = self.function.value(x)?;
        let value = if self.function.noise_std > 0.0 {
            let eps: f64 = StandardNormal.sample(&mut self.noise);
            true_value + self.function.noise_std * eps
        } else {
            true_value
        };
        self.evaluations += 1;
        Ok(EvaluationRecord {
            point: x.to_vec(),
            value,
            true_value,
            eval_index: self.evaluations,
        })
    }

    /// Evaluate a point given in unit-cube coordinates.
    pub fn evaluate_unit(&mut self, u: &[f64]) -> Result<EvaluationRecord> {
        let x = self.function.from_unit(u)?;
        self.evaluate(&x)
    }
}
