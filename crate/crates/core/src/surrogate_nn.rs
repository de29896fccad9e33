//! Regression baseline: the same network trained with mean squared error on
//! standardized targets.

use ndarray::{Array1, ArrayView1, ArrayView2};

use crate::dataset::Dataset;
use crate::error::Result;
use crate::network::Network;
use crate::surrogate_op::{train_network, TrainConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct NnSurrogate {
    pub network: Network,
    pub target_mean: f64,
    pub target_std: f64,
    pub config: TrainConfig,
    pub loss_trace: Vec<f64>,
}

fn standardization(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    (mean, if std > 0.0 && std.is_finite() { std } else { 1.0 })
}

impl NnSurrogate {
    pub fn fit(dataset: &Dataset, config: &TrainConfig) -> Result<Self> {
        Self::train_from(Network::xavier_init(dataset.dimension(), config.seed), dataset, config)
    }

    pub fn refit_warm(model: &Network, dataset: &Dataset, config: &TrainConfig) -> Result<Self> {
        Self::train_from(model.clone(), dataset, config)
    }

    fn train_from(mut network: Network, dataset: &Dataset, config: &TrainConfig) -> Result<Self> {
        config.validate()?;
        let (target_mean, target_std) = if dataset.is_empty() {
            (0.0, 1.0)
        } else {
            standardization(dataset.values())
        };
        let loss_trace = if dataset.len() < 2 {
            Vec::new()
        } else {
            let raw_to_z = |y: f64| (y - target_mean) / target_std;
            train_network(
                &mut network,
                dataset.inputs(),
                dataset.values(),
                config,
                move |pred: ArrayView1<'_, f64>, y: &[f64]| {
                    let n = y.len() as f64;
                    let mut loss = 0.0;
                    let grad = pred
                        .iter()
                        .zip(y)
                        .map(|(&p, &yi)| {
                            let r = p - raw_to_z(yi);
                            loss += r * r;
                            2.0 * r
                        })
                        .collect();
                    (loss / n, grad)
                },
            )?
        };
        Ok(Self {
            network,
            target_mean,
            target_std,
            config: config.clone(),
            loss_trace,
        })
    }

    /// Predicted objective values in original units.
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        Ok(self
            .network
            .forward(x)?
            .mapv(|z| z * self.target_std + self.target_mean))
    }

    /// Larger-is-better score: the negated prediction.
    pub fn score(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        Ok(-self.predict(x)?)
    }
}
