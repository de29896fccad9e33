//! Initial designs and per-iteration candidate sets over `[0, 1]^d`.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

pub const DEFAULT_GRID_CAP: usize = 1_000_000;
pub const MAX_SIDE_LENGTH: f64 = 1.6;
/// Expected number of perturbed coordinates per trust-region candidate.
const PERTURBED_COORDINATES: f64 = 20.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SamplingStrategy {
    #[serde(rename = "rs")]
    Random,
    #[serde(rename = "lhs")]
    LatinHypercube,
    #[serde(rename = "grid")]
    Grid,
    #[serde(rename = "turbo")]
    TrustRegionPerturbation,
}

impl SamplingStrategy {
    pub fn as_str(&self) -> &'static str {
        match self {
            SamplingStrategy::Random => "rs",
            SamplingStrategy::LatinHypercube => "lhs",
            SamplingStrategy::Grid => "grid",
            SamplingStrategy::TrustRegionPerturbation => "turbo",
        }
    }
}

impl fmt::Display for SamplingStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SamplingStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rs" => Ok(SamplingStrategy::Random),
            "lhs" => Ok(SamplingStrategy::LatinHypercube),
            "grid" => Ok(SamplingStrategy::Grid),
            "turbo" => Ok(SamplingStrategy::TrustRegionPerturbation),
            other => Err(Error::config("candidate_strategy", format!("unknown strategy `{other}`"))),
        }
    }
}

/// `N x d` points in unit-cube coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidateSet {
    pub points: Array2<f64>,
    pub origin: SamplingStrategy,
    pub seed: u64,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dimension(&self) -> usize {
        self.points.ncols()
    }
}

fn check_size(d: usize, n: usize) -> Result<()> {
    if d == 0 {
        return Err(Error::InvalidSize("dimension must be >= 1".into()));
    }
    if n == 0 {
        return Err(Error::InvalidSize("sample count must be >= 1".into()));
    }
    Ok(())
}

pub fn random_sampling(d: usize, n: usize, seed: u64) -> Result<CandidateSet> {
    check_size(d, n)?;
    let mut rng = rng_from_seed(seed);
    let points = Array2::from_shape_simple_fn((n, d), || rng.random::<f64>());
    Ok(CandidateSet {
        points,
        origin: SamplingStrategy::Random,
        seed,
    })
}

/// Classic Latin hypercube: per dimension, one point in each of the `n`
/// strata `[j/n, (j+1)/n)`, strata assigned by an independent permutation.
pub fn latin_hypercube(d: usize, n: usize, seed: u64) -> Result<CandidateSet> {
    check_size(d, n)?;
    let mut rng = rng_from_seed(seed);
    let mut points = Array2::zeros((n, d));
    let mut strata: Vec<usize> = (0..n).collect();
    let width = n as f64;
    for j in 0..d {
        strata.shuffle(&mut rng);
        for (i, &s) in strata.iter().enumerate() {
            let u: f64 = rng.random();
            let mut x = (s as f64 + u) / width;
            // (s + u) / n can round up onto the next stratum boundary.
            while x * width >= (s + 1) as f64 {
                x = f64::from_bits(x.to_bits() - 1);
            }
            points[[i, j]] = x;
        }
    }
    Ok(CandidateSet {
        points,
        origin: SamplingStrategy::LatinHypercube,
        seed,
    })
}

/// Full factorial grid including both endpoints on every axis.
pub fn grid_sampling(d: usize, points_per_axis: usize) -> Result<CandidateSet> {
    grid_sampling_capped(d, points_per_axis, DEFAULT_GRID_CAP)
}

pub fn grid_sampling_capped(d: usize, points_per_axis: usize, cap: usize) -> Result<CandidateSet> {
    if d == 0 {
        return Err(Error::InvalidSize("dimension must be >= 1".into()));
    }
    if points_per_axis < 2 {
        return Err(Error::InvalidSize("grid needs at least 2 points per axis".into()));
    }
    let too_large = Error::GridTooLarge {
        points_per_axis,
        dimension: d,
        cap,
    };
    let total = u32::try_from(d)
        .ok()
        .and_then(|e| points_per_axis.checked_pow(e))
        .ok_or(too_large)?;
    if total > cap {
        return Err(Error::GridTooLarge {
            points_per_axis,
            dimension: d,
            cap,
        });
    }
    let step = 1.0 / (points_per_axis - 1) as f64;
    let mut points = Array2::zeros((total, d));
    for (row, mut p) in points.rows_mut().into_iter().enumerate() {
        let mut rest = row;
        for j in (0..d).rev() {
            let k = rest % points_per_axis;
            rest /= points_per_axis;
            p[j] = if k == points_per_axis - 1 { 1.0 } else { k as f64 * step };
        }
    }
    Ok(CandidateSet {
        points,
        origin: SamplingStrategy::Grid,
        seed: 0,
    })
}

/// Candidates inside the box `center ± L/2` (clipped to the unit cube).
///
/// An LHS base fills the box, then each coordinate keeps its perturbed value
/// with probability `min(20/d, 1)` and reverts to the center otherwise; at
/// least one coordinate per candidate is always perturbed.
pub fn trust_region_candidates(
    center: &[f64],
    side_length: f64,
    n: usize,
    seed: u64,
) -> Result<CandidateSet> {
    let d = center.len();
    check_size(d, n)?;
    if !(side_length > 0.0 && side_length <= MAX_SIDE_LENGTH) {
        return Err(Error::InvalidSideLength(side_length));
    }
    if let Some(index) = center.iter().position(|c| !(0.0..=1.0).contains(c)) {
        return Err(Error::OutOfBounds {
            index,
            value: center[index],
            lower: 0.0,
            upper: 1.0,
        });
    }
    let mut rng = rng_from_seed(seed);
    let base = latin_hypercube(d, n, rng.random())?.points;
    let half = side_length / 2.0;
    let lo: Vec<f64> = center.iter().map(|c| (c - half).max(0.0)).collect();
    let hi: Vec<f64> = center.iter().map(|c| (c + half).min(1.0)).collect();
    let prob = (PERTURBED_COORDINATES / d as f64).min(1.0);

    let mut points = Array2::zeros((n, d));
    let mut mask = vec![false; d];
    for (i, mut p) in points.rows_mut().into_iter().enumerate() {
        for m in mask.iter_mut() {
            *m = rng.random::<f64>() < prob;
        }
        if !mask.iter().any(|&m| m) {
            mask[rng.random_range(0..d)] = true;
        }
        for j in 0..d {
            p[j] = if mask[j] {
                (lo[j] + (hi[j] - lo[j]) * base[[i, j]]).clamp(lo[j], hi[j])
            } else {
                center[j]
            };
        }
    }
    Ok(CandidateSet {
        points,
        origin: SamplingStrategy::TrustRegionPerturbation,
        seed,
    })
}
