//! Two-hidden-layer scoring network shared by the ranking and regression surrogates.
//!
//! `s(x) = w_out · relu(W2 · relu(W1 · x + b1) + b2) + b_out`

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStreams;

pub const HIDDEN_WIDTH: usize = 128;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    pub weights_1: Array2<f64>,
    pub bias_1: Array1<f64>,
    pub weights_2: Array2<f64>,
    pub bias_2: Array1<f64>,
    pub weights_out: Array1<f64>,
    pub bias_out: f64,
    pub activation: Activation,
}

/// Gradient (or Adam moment) with the same layout as [`Network`].
#[derive(Clone, Debug)]
pub(crate) struct Params {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
    pub w_out: Array1<f64>,
    pub b_out: f64,
}

impl Params {
    fn zeros_like(net: &Network) -> Self {
        Self {
            w1: Array2::zeros(net.weights_1.raw_dim()),
            b1: Array1::zeros(net.bias_1.len()),
            w2: Array2::zeros(net.weights_2.raw_dim()),
            b2: Array1::zeros(net.bias_2.len()),
            w_out: Array1::zeros(net.weights_out.len()),
            b_out: 0.0,
        }
    }
}

/// Activations kept from the forward pass for backpropagation.
pub(crate) struct ForwardCache {
    pre_1: Array2<f64>,
    hidden_1: Array2<f64>,
    pre_2: Array2<f64>,
    hidden_2: Array2<f64>,
}

fn xavier(rng: &mut crate::rng::Rng, fan_out: usize, fan_in: usize) -> Array2<f64> {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Array2::from_shape_simple_fn((fan_out, fan_in), || rng.random_range(-bound..=bound))
}

fn relu(a: &Array2<f64>) -> Array2<f64> {
    a.mapv(|v| v.max(0.0))
}

impl Network {
    /// Xavier-uniform weights, zero biases.
    pub fn xavier_init(input_dim: usize, seed: u64) -> Self {
        let mut rng = RngStreams::new(seed).stream("xavier");
        let weights_1 = xavier(&mut rng, HIDDEN_WIDTH, input_dim);
        let weights_2 = xavier(&mut rng, HIDDEN_WIDTH, HIDDEN_WIDTH);
        let weights_out = xavier(&mut rng, 1, HIDDEN_WIDTH).remove_axis(Axis(0));
        Self {
            weights_1,
            bias_1: Array1::zeros(HIDDEN_WIDTH),
            weights_2,
            bias_2: Array1::zeros(HIDDEN_WIDTH),
            weights_out,
            bias_out: 0.0,
            activation: Activation::Relu,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weights_1.ncols()
    }

    pub fn is_finite(&self) -> bool {
        self.weights_1.iter().all(|v| v.is_finite())
            && self.bias_1.iter().all(|v| v.is_finite())
            && self.weights_2.iter().all(|v| v.is_finite())
            && self.bias_2.iter().all(|v| v.is_finite())
            && self.weights_out.iter().all(|v| v.is_finite())
            && self.bias_out.is_finite()
    }

    fn check_inputs(&self, x: &ArrayView2<'_, f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                found: x.ncols(),
            });
        }
        Ok(())
    }

    /// One output per input row.
    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        self.check_inputs(&x)?;
        Ok(self.forward_cached(x).1)
    }

    pub(crate) fn forward_cached(&self, x: ArrayView2<'_, f64>) -> (ForwardCache, Array1<f64>) {
        let pre_1 = x.dot(&self.weights_1.t()) + &self.bias_1;
        let hidden_1 = relu(&pre_1);
        let pre_2 = hidden_1.dot(&self.weights_2.t()) + &self.bias_2;
        let hidden_2 = relu(&pre_2);
        let out = hidden_2.dot(&self.weights_out) + self.bias_out;
        (
            ForwardCache {
                pre_1,
                hidden_1,
                pre_2,
                hidden_2,
            },
            out,
        )
    }

    /// Parameter gradients given `d loss / d output` for each row.
    pub(crate) fn backward(
        &self,
        x: ArrayView2<'_, f64>,
        cache: &ForwardCache,
        grad_out: ArrayView1<'_, f64>,
    ) -> Params {
        let w_out = cache.hidden_2.t().dot(&grad_out);
        let b_out = grad_out.sum();

        let mut g2 = grad_out
            .insert_axis(Axis(1))
            .dot(&self.weights_out.view().insert_axis(Axis(0)));
        Zip::from(&mut g2)
            .and(&cache.pre_2)
            .for_each(|g, &z| if z <= 0.0 { *g = 0.0 });
        let w2 = g2.t().dot(&cache.hidden_1);
        let b2 = g2.sum_axis(Axis(0));

        let mut g1 = g2.dot(&self.weights_2);
        Zip::from(&mut g1)
            .and(&cache.pre_1)
            .for_each(|g, &z| if z <= 0.0 { *g = 0.0 });
        let w1 = g1.t().dot(&x);
        let b1 = g1.sum_axis(Axis(0));

        Params {
            w1,
            b1,
            w2,
            b2,
            w_out,
            b_out,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamSettings {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

pub(crate) struct Adam {
    settings: AdamSettings,
    step: i32,
    m: Params,
    v: Params,
}

impl Adam {
    pub fn new(net: &Network, settings: AdamSettings) -> Self {
        Self {
            settings,
            step: 0,
            m: Params::zeros_like(net),
            v: Params::zeros_like(net),
        }
    }

    pub fn step(&mut self, net: &mut Network, grad: &Params) {
        self.step += 1;
        let AdamSettings {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.settings;
        let c1 = 1.0 - beta1.powi(self.step);
        let c2 = 1.0 - beta2.powi(self.step);
        let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            *p -= learning_rate * (*m / c1) / ((*v / c2).sqrt() + epsilon);
        };
        Zip::from(&mut net.weights_1)
            .and(&grad.w1)
            .and(&mut self.m.w1)
            .and(&mut self.v.w1)
            .for_each(|p, &g, m, v| update(p, g, m, v));
        Zip::from(&mut net.bias_1)
            .and(&grad.b1)
            .and(&mut self.m.b1)
            .and(&mut self.v.b1)
            .for_each(|p, &g, m, v| update(p, g, m, v));
        Zip::from(&mut net.weights_2)
            .and(&grad.w2)
            .and(&mut self.m.w2)
            .and(&mut self.v.w2)
            .for_each(|p, &g, m, v| update(p, g, m, v));
        Zip::from(&mut net.bias_2)
            .and(&grad.b2)
            .and(&mut self.m.b2)
            .and(&mut self.v.b2)
            .for_each(|p, &g, m, v| update(p, g, m, v));
        Zip::from(&mut net.weights_out)
            .and(&grad.w_out)
            .and(&mut self.m.w_out)
            .and(&mut self.v.w_out)
            .for_each(|p, &g, m, v| update(p, g, m, v));
        update(&mut net.bias_out, grad.b_out, &mut self.m.b_out, &mut self.v.b_out);
    }
}

/// Flat JSON checkpoint: one named array per parameter block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkCheckpoint {
    pub input_dim: usize,
    pub activation: Activation,
    pub weights_1: Vec<Vec<f64>>,
    pub bias_1: Vec<f64>,
    pub weights_2: Vec<Vec<f64>>,
    pub bias_2: Vec<f64>,
    pub weights_out: Vec<Vec<f64>>,
    pub bias_out: f64,
}

fn rows(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn from_rows(rows: &[Vec<f64>], shape: (usize, usize), path: &str) -> Result<Array2<f64>> {
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    if rows.len() != shape.0 || rows.iter().any(|r| r.len() != shape.1) {
        return Err(Error::config(path, format!("expected shape {shape:?}")));
    }
    Ok(Array2::from_shape_vec(shape, flat).expect("shape checked"))
}

impl From<&Network> for NetworkCheckpoint {
    fn from(net: &Network) -> Self {
        Self {
            input_dim: net.input_dim(),
            activation: net.activation,
            weights_1: rows(&net.weights_1),
            bias_1: net.bias_1.to_vec(),
            weights_2: rows(&net.weights_2),
            bias_2: net.bias_2.to_vec(),
            weights_out: vec![net.weights_out.to_vec()],
            bias_out: net.bias_out,
        }
    }
}

impl TryFrom<&NetworkCheckpoint> for Network {
    type Error = Error;

    fn try_from(c: &NetworkCheckpoint) -> Result<Self> {
        let h = HIDDEN_WIDTH;
        let vector = |v: &[f64], path: &str| {
            if v.len() == h {
                Ok(Array1::from(v.to_vec()))
            } else {
                Err(Error::config(path, format!("expected length {h}")))
            }
        };
        Ok(Self {
            weights_1: from_rows(&c.weights_1, (h, c.input_dim), "weights_1")?,
            bias_1: vector(&c.bias_1, "bias_1")?,
            weights_2: from_rows(&c.weights_2, (h, h), "weights_2")?,
            bias_2: vector(&c.bias_2, "bias_2")?,
            weights_out: from_rows(&c.weights_out, (1, h), "weights_out")?.remove_axis(Axis(0)),
            bias_out: c.bias_out,
            activation: c.activation,
        })
    }
}
