//! Order-preserving surrogate: the scoring network trained with the
//! Plackett–Luce listwise negative log-likelihood.
//!
//! For a batch whose items are listed best-first by the permutation `π`,
//!
//! ```text
//! L(s) = -Σ_i [ s_π(i) - log Σ_{k>=i} exp(s_π(k)) ]
//! ```
//!
//! Only the order of the observed values enters the loss, so any strictly
//! increasing transform of the targets trains the identical model.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::network::{Adam, AdamSettings, Network, NetworkCheckpoint};
use crate::rng::RngStreams;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub seed: u64,
    /// Continue from the previous iteration's parameters instead of a fresh init.
    pub warm_start: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            learning_rate: 0.01,
            batch_size: 2000,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            seed: 0,
            warm_start: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::config("train.epochs", "must be >= 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("train.learning_rate", "must be positive"));
        }
        if self.batch_size < 2 {
            return Err(Error::config("train.batch_size", "must be >= 2"));
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return Err(Error::config("train.adam_beta", "moment decay must lie in [0, 1)"));
        }
        if !(self.adam_epsilon > 0.0) {
            return Err(Error::config("train.adam_epsilon", "must be positive"));
        }
        Ok(())
    }

    fn adam(&self) -> AdamSettings {
        AdamSettings {
            learning_rate: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            epsilon: self.adam_epsilon,
        }
    }
}

/// Targets of one chunk together with the best-first permutation.
#[derive(Clone, Debug, PartialEq)]
pub struct RankingBatch {
    pub inputs: Array2<f64>,
    /// Fitness `-y`: larger is better.
    pub targets: Vec<f64>,
    /// 0-based indices, best first; ties keep the original order.
    pub permutation: Vec<usize>,
}

impl RankingBatch {
    pub fn new(inputs: Array2<f64>, values: &[f64]) -> Result<Self> {
        if inputs.nrows() != values.len() {
            return Err(Error::LengthMismatch {
                left: inputs.nrows(),
                right: values.len(),
            });
        }
        let targets: Vec<f64> = values.iter().map(|y| -y).collect();
        let permutation = ranking_permutation(values);
        Ok(Self {
            inputs,
            targets,
            permutation,
        })
    }
}

/// Order of indices from the lowest to the highest objective value
/// (descending fitness); the sort is stable, so ties keep index order.
pub fn ranking_permutation(values: &[f64]) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..values.len()).collect();
    perm.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    perm
}

/// `log Σ_{k>=i} exp(s_π(k))` for every position `i`, accumulated right to
/// left with a running maximum.
fn suffix_log_sum_exp(scores: &[f64], permutation: &[usize]) -> Vec<f64> {
    let n = permutation.len();
    let mut out = vec![0.0; n];
    let mut max = f64::NEG_INFINITY;
    let mut sum = 0.0;
    for i in (0..n).rev() {
        let v = scores[permutation[i]];
        if v > max {
            sum = sum * (max - v).exp() + 1.0;
            max = v;
        } else {
            sum += (v - max).exp();
        }
        out[i] = max + sum.ln();
    }
    out
}

/// Plackett–Luce negative log-likelihood of `permutation` under `scores`.
pub fn pl_loss(scores: &[f64], permutation: &[usize]) -> f64 {
    debug_assert_eq!(scores.len(), permutation.len());
    let lse = suffix_log_sum_exp(scores, permutation);
    permutation
        .iter()
        .zip(&lse)
        .map(|(&p, &l)| l - scores[p])
        .sum()
}

/// Gradient of [`pl_loss`] with respect to `scores` (indexed like `scores`).
///
/// `∂L/∂s_π(j) = -1 + Σ_{i<=j} exp(s_π(j) - lse_i)`.
pub fn pl_loss_gradient(scores: &[f64], permutation: &[usize]) -> Vec<f64> {
    pl_loss_and_gradient(scores, permutation).1
}

pub fn pl_loss_and_gradient(scores: &[f64], permutation: &[usize]) -> (f64, Vec<f64>) {
    let n = permutation.len();
    let lse = suffix_log_sum_exp(scores, permutation);
    let mut grad = vec![0.0; scores.len()];
    let mut loss = 0.0;
    // acc_j = Σ_{i<=j} exp(lse_j - lse_i); lse is non-increasing so every factor is <= 1.
    let mut acc = 0.0;
    for j in 0..n {
        let p = permutation[j];
        acc = if j == 0 { 1.0 } else { acc * (lse[j] - lse[j - 1]).exp() + 1.0 };
        grad[p] = -1.0 + (scores[p] - lse[j]).exp() * acc;
        loss += lse[j] - scores[p];
    }
    (loss, grad)
}

/// Mini-batch Adam training loop shared by the ranking and regression surrogates.
///
/// Returns the per-epoch mean chunk loss.
pub(crate) fn train_network<L>(
    network: &mut Network,
    inputs: ArrayView2<'_, f64>,
    values: &[f64],
    config: &TrainConfig,
    chunk_loss: L,
) -> Result<Vec<f64>>
where
    L: Fn(ArrayView1<'_, f64>, &[f64]) -> (f64, Vec<f64>),
{
    config.validate()?;
    let diverged = |epoch| Error::NonFiniteLoss {
        epoch,
        learning_rate: config.learning_rate,
    };
    if !network.is_finite() {
        return Err(diverged(0));
    }
    let n = values.len();
    let mut adam = Adam::new(network, config.adam());
    let mut shuffle = RngStreams::new(config.seed).stream("shuffle");
    let mut order: Vec<usize> = (0..n).collect();
    let mut trace = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle);
        let mut total = 0.0;
        let mut chunks = 0usize;
        for chunk in order.chunks(config.batch_size) {
            let x = inputs.select(Axis(0), chunk);
            let y: Vec<f64> = chunk.iter().map(|&i| values[i]).collect();
            let (cache, out) = network.forward_cached(x.view());
            let (loss, grad) = chunk_loss(out.view(), &y);
            if !loss.is_finite() {
                return Err(diverged(epoch));
            }
            let scale = 1.0 / chunk.len() as f64;
            let grad = Array1::from(grad) * scale;
            let g = network.backward(x.view(), &cache, grad.view());
            adam.step(network, &g);
            if !network.is_finite() {
                return Err(diverged(epoch));
            }
            total += loss;
            chunks += 1;
        }
        trace.push(total / chunks as f64);
    }
    Ok(trace)
}

fn ranking_chunk_loss(scores: ArrayView1<'_, f64>, values: &[f64]) -> (f64, Vec<f64>) {
    let perm = ranking_permutation(values);
    let s = scores.as_slice().expect("contiguous scores");
    pl_loss_and_gradient(s, &perm)
}

/// Trained ranking surrogate: larger score means a better (lower) objective value.
#[derive(Clone, Debug, PartialEq)]
pub struct OpSurrogate {
    pub network: Network,
    pub config: TrainConfig,
    pub loss_trace: Vec<f64>,
}

impl OpSurrogate {
    /// Fresh Xavier init followed by `config.epochs` passes over `dataset`.
    pub fn fit(dataset: &Dataset, config: &TrainConfig) -> Result<Self> {
        let network = Network::xavier_init(dataset.dimension(), config.seed);
        Self::train_from(network, dataset, config)
    }

    /// Continue training from `model`'s parameters with fresh Adam moments.
    pub fn refit_warm(model: &Network, dataset: &Dataset, config: &TrainConfig) -> Result<Self> {
        if !model.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch: 0,
                learning_rate: config.learning_rate,
            });
        }
        Self::train_from(model.clone(), dataset, config)
    }

    fn train_from(mut network: Network, dataset: &Dataset, config: &TrainConfig) -> Result<Self> {
        if network.input_dim() != dataset.dimension() {
            return Err(Error::DimensionMismatch {
                expected: network.input_dim(),
                found: dataset.dimension(),
            });
        }
        let loss_trace = if dataset.len() < 2 {
            config.validate()?;
            Vec::new()
        } else {
            train_network(
                &mut network,
                dataset.inputs(),
                dataset.values(),
                config,
                ranking_chunk_loss,
            )?
        };
        Ok(Self {
            network,
            config: config.clone(),
            loss_trace,
        })
    }

    pub fn score(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        self.network.forward(x)
    }

    pub fn checkpoint(&self) -> OpCheckpoint {
        OpCheckpoint {
            network: NetworkCheckpoint::from(&self.network),
            config: self.config.clone(),
            loss_trace: self.loss_trace.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpCheckpoint {
    #[serde(flatten)]
    pub network: NetworkCheckpoint,
    pub config: TrainConfig,
    pub loss_trace: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use crate::sampling::latin_hypercube;
    use rand::Rng as _;

    fn sphere_dataset(n: usize, seed: u64) -> Dataset {
        let x = latin_hypercube(2, n, seed).unwrap().points;
        let y: Vec<f64> = x
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|v| (v - 0.5).powi(2)).sum())
            .collect();
        Dataset::from_parts(x, y).unwrap()
    }

    #[test]
    fn single_item_loss_is_zero() {
        assert_eq!(pl_loss(&[3.7], &[0]), 0.0);
        assert_eq!(pl_loss_gradient(&[3.7], &[0]), vec![0.0]);
    }

    #[test]
    fn equal_scores_closed_forms() {
        assert!((pl_loss(&[0.4; 3], &[0, 1, 2]) - 6f64.ln()).abs() < 1e-12);
        let g = pl_loss_gradient(&[0.4; 3], &[0, 1, 2]);
        let expect = [-2.0 / 3.0, -1.0 / 6.0, 5.0 / 6.0];
        for (a, b) in g.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12, "{g:?}");
        }
    }

    #[test]
    fn gradient_follows_permutation_positions() {
        // Same as above, but item 2 is ranked first.
        let g = pl_loss_gradient(&[0.0; 3], &[2, 0, 1]);
        assert!((g[2] + 2.0 / 3.0).abs() < 1e-12);
        assert!((g[1] - 5.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn infinite_margin_drives_loss_to_zero() {
        assert!(pl_loss(&[800.0, 0.0], &[0, 1]) < 1e-300);
        assert!(pl_loss(&[30.0, 0.0], &[0, 1]) < 1e-12);
        assert!((pl_loss(&[0.0, 30.0], &[0, 1]) - 30.0).abs() < 1e-9);
    }

    #[test]
    fn large_batch_does_not_overflow() {
        let mut rng = rng_from_seed(1);
        let s: Vec<f64> = (0..2000).map(|_| rng.random_range(-700.0..700.0)).collect();
        let perm: Vec<usize> = (0..2000).collect();
        let (l, g) = pl_loss_and_gradient(&s, &perm);
        assert!(l.is_finite() && l >= 0.0);
        assert!(g.iter().all(|v| v.is_finite()));
        assert!(g.iter().sum::<f64>().abs() < 1e-9);
    }

    #[test]
    fn permutation_breaks_ties_by_index() {
        assert_eq!(ranking_permutation(&[2.0, 1.0, 2.0, 0.5]), vec![3, 1, 0, 2]);
        let b = RankingBatch::new(Array2::zeros((3, 1)), &[1.0, -1.0, 0.0]).unwrap();
        assert_eq!(b.permutation, vec![1, 2, 0]);
        assert_eq!(b.targets, vec![-1.0, 1.0, -0.0]);
    }

    #[test]
    fn training_reduces_loss_and_is_deterministic() {
        let data = sphere_dataset(60, 2);
        let cfg = TrainConfig {
            seed: 4,
            ..TrainConfig::default()
        };
        let a = OpSurrogate::fit(&data, &cfg).unwrap();
        assert_eq!(a.loss_trace.len(), 50);
        assert!(a.loss_trace[49] < a.loss_trace[0]);
        let b = OpSurrogate::fit(&data, &cfg).unwrap();
        assert_eq!(a.loss_trace, b.loss_trace);
        assert_eq!(a.network, b.network);
    }

    #[test]
    fn single_point_returns_initialization() {
        let data = sphere_dataset(1, 3);
        let cfg = TrainConfig::default();
        let m = OpSurrogate::fit(&data, &cfg).unwrap();
        assert!(m.loss_trace.is_empty());
        assert_eq!(m.network, Network::xavier_init(2, cfg.seed));
    }

    #[test]
    fn warm_refit_rejects_nan_and_accepts_same_data() {
        let data = sphere_dataset(30, 5);
        let cfg = TrainConfig {
            epochs: 5,
            ..TrainConfig::default()
        };
        let m = OpSurrogate::fit(&data, &cfg).unwrap();
        let again = OpSurrogate::refit_warm(&m.network, &data, &cfg).unwrap();
        assert_eq!(again.loss_trace.len(), 5);
        let mut bad = m.network.clone();
        bad.weights_2[[1, 1]] = f64::NAN;
        assert!(matches!(
            OpSurrogate::refit_warm(&bad, &data, &cfg),
            Err(Error::NonFiniteLoss { epoch: 0, .. })
        ));
    }

    #[test]
    fn divergence_is_reported() {
        let data = sphere_dataset(40, 6);
        let cfg = TrainConfig {
            learning_rate: 1e300,
            epochs: 5,
            ..TrainConfig::default()
        };
        assert!(matches!(
            OpSurrogate::fit(&data, &cfg),
            Err(Error::NonFiniteLoss { .. })
        ));
    }

    #[test]
    fn score_rows_are_independent() {
        let data = sphere_dataset(20, 7);
        let m = OpSurrogate::fit(&data, &TrainConfig { epochs: 3, ..Default::default() }).unwrap();
        let all = m.score(data.inputs()).unwrap();
        let one = m.score(data.inputs().slice(ndarray::s![4..5, ..])).unwrap();
        assert_eq!(all[4], one[0]);
    }

    #[test]
    fn checkpoint_is_flat_named_arrays() {
        let data = sphere_dataset(10, 8);
        let m = OpSurrogate::fit(&data, &TrainConfig { epochs: 2, ..Default::default() }).unwrap();
        let v = serde_json::to_value(m.checkpoint()).unwrap();
        for key in ["weights_1", "bias_1", "weights_2", "bias_2", "weights_out", "bias_out", "config"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
    }
}
