//! Gaussian-process baseline with an isotropic squared-exponential kernel.
//!
//! Targets are standardized before fitting. The noise variance is carried as
//! a fixed fraction `τ` of the signal variance, `K = σ_f² (R_ℓ + τ I)`, which
//! makes the log marginal likelihood's dependence on `σ_f²` closed-form: one
//! Cholesky factorization per lengthscale prices a whole row of the
//! `(ℓ, σ_f²)` grid.

use faer::linalg::triangular_solve::{solve_lower_triangular_in_place, solve_upper_triangular_in_place};
use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, MatRef, Par, Side};
use ndarray::{Array2, ArrayView2};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng::Rng;

const LN_2PI: f64 = 1.837_877_066_409_345_5;
/// Jitter ladder (relative to `σ_f²`) tried when a factorization fails.
const KERNEL_JITTER: [f64; 3] = [1e-6, 1e-4, 1e-2];
const SAMPLE_JITTER: [f64; 3] = [1e-8, 1e-6, 1e-4];
pub const MAX_THOMPSON_POINTS: usize = 20_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GpConfig {
    pub max_points: usize,
    pub grid_size: usize,
    pub refine_steps: usize,
    /// Noise-to-signal variance ratio used when noise is not learned.
    pub relative_noise: f64,
    /// Add `τ` as a third searched hyperparameter (noisy objectives).
    pub learn_noise: bool,
}

impl Default for GpConfig {
    fn default() -> Self {
        Self {
            max_points: 2000,
            grid_size: 25,
            refine_steps: 20,
            relative_noise: 1e-6,
            learn_noise: false,
        }
    }
}

/// Squared-exponential kernel `σ_f² exp(-‖x - x'‖² / 2ℓ²)`.
pub fn se_kernel(x: &[f64], x_prime: &[f64], lengthscale: f64, signal_variance: f64) -> Result<f64> {
    if x.len() != x_prime.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: x_prime.len(),
        });
    }
    let sq: f64 = x.iter().zip(x_prime).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(signal_variance * (-sq / (2.0 * lengthscale * lengthscale)).exp())
}

fn to_faer(a: ArrayView2<'_, f64>) -> Mat<f64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

/// Pairwise squared distances between the rows of `a` and `b`.
fn sq_dists(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Mat<f64> {
    let na: Vec<f64> = (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)] * a[(i, j)]).sum())
        .collect();
    let nb: Vec<f64> = (0..b.nrows())
        .map(|i| (0..b.ncols()).map(|j| b[(i, j)] * b[(i, j)]).sum())
        .collect();
    let mut g = Mat::<f64>::zeros(a.nrows(), b.nrows());
    matmul(g.as_mut(), Accum::Replace, a, b.transpose(), -2.0, Par::Seq);
    for j in 0..b.nrows() {
        for i in 0..a.nrows() {
            g[(i, j)] = (g[(i, j)] + na[i] + nb[j]).max(0.0);
        }
    }
    g
}

fn correlation(sq: &Mat<f64>, lengthscale: f64) -> Mat<f64> {
    let c = -0.5 / (lengthscale * lengthscale);
    Mat::from_fn(sq.nrows(), sq.ncols(), |i, j| (c * sq[(i, j)]).exp())
}

fn cholesky(a: &Mat<f64>) -> Option<Mat<f64>> {
    a.llt(Side::Lower).ok().map(|l| l.L().to_owned())
}

/// Solve `L Lᵀ x = b` in place.
fn cho_solve(l: &Mat<f64>, b: &mut Mat<f64>) {
    solve_lower_triangular_in_place(l.as_ref(), b.as_mut(), Par::Seq);
    solve_upper_triangular_in_place(l.transpose(), b.as_mut(), Par::Seq);
}

fn column(v: &[f64]) -> Mat<f64> {
    Mat::from_fn(v.len(), 1, |i, _| v[i])
}

fn standardize(values: &[f64]) -> (Vec<f64>, f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let mut std = var.sqrt();
    if !(std > 0.0 && std.is_finite()) {
        log::warn!("constant GP targets; using unit target scale");
        std = 1.0;
    }
    (values.iter().map(|v| (v - mean) / std).collect(), mean, std)
}

/// Log marginal likelihood of `targets` under `K = σ_f² R_ℓ + σ_n² I`, via Cholesky.
pub fn log_marginal_likelihood(
    inputs: ArrayView2<'_, f64>,
    targets: &[f64],
    lengthscale: f64,
    signal_variance: f64,
    noise_variance: f64,
) -> Result<f64> {
    let n = inputs.nrows();
    if targets.len() != n {
        return Err(Error::LengthMismatch {
            left: n,
            right: targets.len(),
        });
    }
    let x = to_faer(inputs);
    let mut k = correlation(&sq_dists(x.as_ref(), x.as_ref()), lengthscale);
    for i in 0..n {
        for j in 0..n {
            k[(i, j)] *= signal_variance;
        }
        k[(i, i)] += noise_variance;
    }
    let l = cholesky(&k).ok_or(Error::SingularKernel {
        jitter: noise_variance,
    })?;
    let mut alpha = column(targets);
    cho_solve(&l, &mut alpha);
    let fit: f64 = (0..n).map(|i| targets[i] * alpha[(i, 0)]).sum();
    let logdet: f64 = (0..n).map(|i| l[(i, i)].ln()).sum::<f64>() * 2.0;
    Ok(-0.5 * fit - 0.5 * logdet - 0.5 * n as f64 * LN_2PI)
}

/// Per-lengthscale quantities from which the likelihood over `σ_f²` follows.
struct Profile {
    log_lengthscale: f64,
    tau: f64,
    /// Cholesky factor of `R_ℓ + τ I`.
    chol: Mat<f64>,
    /// `zᵀ (R_ℓ + τ I)⁻¹ z`.
    quad: f64,
    logdet: f64,
}

impl Profile {
    fn build(sq: &Mat<f64>, z: &[f64], log_lengthscale: f64, tau: f64) -> Option<Self> {
        let n = z.len();
        let base = correlation(sq, log_lengthscale.exp());
        for &jitter in std::iter::once(&tau).chain(KERNEL_JITTER.iter().filter(|&&j| j > tau)) {
            let mut r = base.clone();
            for i in 0..n {
                r[(i, i)] += jitter;
            }
            if let Some(chol) = cholesky(&r) {
                let mut a = column(z);
                solve_lower_triangular_in_place(chol.as_ref(), a.as_mut(), Par::Seq);
                let quad = (0..n).map(|i| a[(i, 0)] * a[(i, 0)]).sum();
                let logdet = 2.0 * (0..n).map(|i| chol[(i, i)].ln()).sum::<f64>();
                return Some(Self {
                    log_lengthscale,
                    tau: jitter,
                    chol,
                    quad,
                    logdet,
                });
            }
        }
        None
    }

    fn lml(&self, log_signal: f64) -> f64 {
        let n = self.chol.nrows() as f64;
        -0.5 * self.quad * (-log_signal).exp() - 0.5 * (self.logdet + n * log_signal) - 0.5 * n * LN_2PI
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn median_pairwise_distance(sq: &Mat<f64>, dimension: usize) -> f64 {
    let n = sq.nrows();
    let mut d: Vec<f64> = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for j in 0..n {
        for i in 0..j {
            d.push(sq[(i, j)].sqrt());
        }
    }
    let fallback = (dimension as f64 / 6.0).sqrt().max(1e-3);
    if d.is_empty() {
        return fallback;
    }
    let mid = d.len() / 2;
    let (_, m, _) = d.select_nth_unstable_by(mid, f64::total_cmp);
    if *m > 0.0 {
        *m
    } else {
        fallback
    }
}

/// Fitted GP. All internal quantities are in standardized target units.
#[derive(Clone, Debug)]
pub struct GpModel {
    train_inputs: Mat<f64>,
    pub train_targets_standardized: Vec<f64>,
    pub target_mean: f64,
    pub target_std: f64,
    pub lengthscale: f64,
    pub signal_variance: f64,
    pub noise_variance: f64,
    pub log_marginal_likelihood: f64,
    cholesky_lower: Mat<f64>,
    solve_vector: Vec<f64>,
}

/// Posterior marginals in original objective units.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct PosteriorPrediction {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl PosteriorPrediction {
    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }
}

fn check_fit_size(dataset: &Dataset, cap: usize) -> Result<()> {
    let n = dataset.len();
    if n == 0 {
        return Err(Error::InvalidSize("GP needs at least one observation".into()));
    }
    if n > cap {
        return Err(Error::TooManyPoints { n, cap });
    }
    Ok(())
}

impl GpModel {
    /// Fit by maximizing the log marginal likelihood over a log-grid in
    /// `(ℓ, σ_f²)` centered on the median pairwise distance, then refine by
    /// coordinate descent.
    pub fn fit(dataset: &Dataset, config: &GpConfig) -> Result<Self> {
        check_fit_size(dataset, config.max_points)?;
        if config.grid_size == 0 {
            return Err(Error::config("gp.grid_size", "must be >= 1"));
        }
        let (z, target_mean, target_std) = standardize(dataset.values());
        let x = to_faer(dataset.inputs());
        let sq = sq_dists(x.as_ref(), x.as_ref());
        let center = median_pairwise_distance(&sq, dataset.dimension()).ln();
        let ln10 = std::f64::consts::LN_10;
        let log_ls_grid = linspace(center - 1.5 * ln10, center + 1.5 * ln10, config.grid_size);
        let log_sig_grid = linspace(-2.0 * ln10, 2.0 * ln10, config.grid_size);
        let taus: Vec<f64> = if config.learn_noise {
            vec![config.relative_noise, 1e-4, 1e-3, 1e-2, 1e-1]
        } else {
            vec![config.relative_noise]
        };

        let mut best: Option<(Profile, f64, f64)> = None;
        for &tau in &taus {
            for &log_ls in &log_ls_grid {
                let Some(p) = Profile::build(&sq, &z, log_ls, tau) else {
                    continue;
                };
                let (log_sig, lml) = log_sig_grid
                    .iter()
                    .map(|&s| (s, p.lml(s)))
                    .fold((f64::NAN, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
                if best.as_ref().is_none_or(|b| lml > b.2) {
                    best = Some((p, log_sig, lml));
                }
            }
        }
        let (mut profile, mut log_sig, mut lml) = best.ok_or(Error::SingularKernel {
            jitter: KERNEL_JITTER[KERNEL_JITTER.len() - 1],
        })?;

        let spacing = |g: &[f64]| if g.len() > 1 { g[1] - g[0] } else { 0.5 * ln10 };
        let mut step_ls = spacing(&log_ls_grid);
        let mut step_sig = spacing(&log_sig_grid);
        for k in 0..config.refine_steps {
            if k % 2 == 0 {
                let mut moved = false;
                for dir in [-1.0, 1.0] {
                    let trial = profile.log_lengthscale + dir * step_ls;
                    if let Some(p) = Profile::build(&sq, &z, trial, profile.tau) {
                        let v = p.lml(log_sig);
                        if v > lml {
                            profile = p;
                            lml = v;
                            moved = true;
                            break;
                        }
                    }
                }
                if !moved {
                    step_ls *= 0.5;
                }
            } else {
                let mut moved = false;
                for dir in [-1.0, 1.0] {
                    let trial = log_sig + dir * step_sig;
                    let v = profile.lml(trial);
                    if v > lml {
                        log_sig = trial;
                        lml = v;
                        moved = true;
                        break;
                    }
                }
                if !moved {
                    step_sig *= 0.5;
                }
            }
        }

        let signal_variance = log_sig.exp();
        let scale = signal_variance.sqrt();
        let n = z.len();
        let mut alpha = column(&z);
        cho_solve(&profile.chol, &mut alpha);
        let cholesky_lower = Mat::from_fn(n, n, |i, j| profile.chol[(i, j)] * scale);
        Ok(Self {
            train_inputs: x,
            train_targets_standardized: z,
            target_mean,
            target_std,
            lengthscale: profile.log_lengthscale.exp(),
            signal_variance,
            noise_variance: profile.tau * signal_variance,
            log_marginal_likelihood: lml,
            cholesky_lower,
            solve_vector: (0..n).map(|i| alpha[(i, 0)] / signal_variance).collect(),
        })
    }

    /// Condition on `dataset` with fixed hyperparameters (standardized units).
    pub fn with_hyperparameters(
        dataset: &Dataset,
        lengthscale: f64,
        signal_variance: f64,
        noise_variance: f64,
    ) -> Result<Self> {
        check_fit_size(dataset, usize::MAX)?;
        for (name, v) in [
            ("lengthscale", lengthscale),
            ("signal_variance", signal_variance),
            ("noise_variance", noise_variance),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("gp.{name}"), "must be finite and positive"));
            }
        }
        let (z, target_mean, target_std) = standardize(dataset.values());
        let x = to_faer(dataset.inputs());
        let sq = sq_dists(x.as_ref(), x.as_ref());
        let mut p = Profile::build(&sq, &z, lengthscale.ln(), noise_variance / signal_variance)
            .ok_or(Error::SingularKernel {
                jitter: noise_variance,
            })?;
        let log_sig = signal_variance.ln();
        let lml = p.lml(log_sig);
        let n = z.len();
        let mut alpha = column(&z);
        cho_solve(&p.chol, &mut alpha);
        let scale = signal_variance.sqrt();
        for j in 0..n {
            for i in 0..n {
                p.chol[(i, j)] *= scale;
            }
        }
        Ok(Self {
            train_inputs: x,
            train_targets_standardized: z,
            target_mean,
            target_std,
            lengthscale,
            signal_variance,
            noise_variance: p.tau * signal_variance,
            log_marginal_likelihood: lml,
            cholesky_lower: p.chol,
            solve_vector: (0..n).map(|i| alpha[(i, 0)] / signal_variance).collect(),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.train_inputs.ncols()
    }

    pub fn len(&self) -> usize {
        self.train_inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cholesky_lower(&self) -> Array2<f64> {
        let l = &self.cholesky_lower;
        Array2::from_shape_fn((l.nrows(), l.ncols()), |(i, j)| l[(i, j)])
    }

    pub fn solve_vector(&self) -> &[f64] {
        &self.solve_vector
    }

    /// `σ_f² R_ℓ + σ_n² I` over the training inputs.
    pub fn kernel_matrix(&self) -> Array2<f64> {
        let sq = sq_dists(self.train_inputs.as_ref(), self.train_inputs.as_ref());
        let r = correlation(&sq, self.lengthscale);
        Array2::from_shape_fn((self.len(), self.len()), |(i, j)| {
            self.signal_variance * r[(i, j)] + if i == j { self.noise_variance } else { 0.0 }
        })
    }

    fn check_query(&self, x: &ArrayView2<'_, f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                found: x.ncols(),
            });
        }
        Ok(())
    }

    /// Cross-covariance `K(X_train, X)` and `V = L⁻¹ K(X_train, X)`.
    fn cross(&self, xq: &Mat<f64>) -> (Mat<f64>, Mat<f64>) {
        let mut k = correlation(&sq_dists(self.train_inputs.as_ref(), xq.as_ref()), self.lengthscale);
        for j in 0..k.ncols() {
            for i in 0..k.nrows() {
                k[(i, j)] *= self.signal_variance;
            }
        }
        let mut v = k.clone();
        solve_lower_triangular_in_place(self.cholesky_lower.as_ref(), v.as_mut(), Par::Seq);
        (k, v)
    }

    fn standardized_mean(&self, k: &Mat<f64>) -> Vec<f64> {
        (0..k.ncols())
            .map(|j| (0..k.nrows()).map(|i| k[(i, j)] * self.solve_vector[i]).sum())
            .collect()
    }

    pub fn posterior(&self, x: ArrayView2<'_, f64>) -> Result<PosteriorPrediction> {
        self.check_query(&x)?;
        if x.nrows() == 0 {
            return Ok(PosteriorPrediction::default());
        }
        let xq = to_faer(x);
        let (k, v) = self.cross(&xq);
        let mu = self.standardized_mean(&k);
        let mean = mu.iter().map(|m| m * self.target_std + self.target_mean).collect();
        let std = (0..v.ncols())
            .map(|j| {
                let explained: f64 = (0..v.nrows()).map(|i| v[(i, j)] * v[(i, j)]).sum();
                (self.signal_variance - explained).max(0.0).sqrt() * self.target_std
            })
            .collect();
        Ok(PosteriorPrediction { mean, std })
    }

    /// One joint draw from the posterior over the rows of `x`.
    pub fn thompson_sample(&self, x: ArrayView2<'_, f64>, rng: &mut Rng) -> Result<Vec<f64>> {
        self.check_query(&x)?;
        let m = x.nrows();
        if m > MAX_THOMPSON_POINTS {
            return Err(Error::InvalidSize(format!(
                "Thompson sampling over {m} points exceeds {MAX_THOMPSON_POINTS}"
            )));
        }
        if m == 0 {
            return Ok(Vec::new());
        }
        let xq = to_faer(x);
        let (k, v) = self.cross(&xq);
        let mu = self.standardized_mean(&k);
        let prior = correlation(&sq_dists(xq.as_ref(), xq.as_ref()), self.lengthscale);
        let mut cov = Mat::from_fn(m, m, |i, j| self.signal_variance * prior[(i, j)]);
        matmul(cov.as_mut(), Accum::Add, v.transpose(), v.as_ref(), -1.0, Par::Seq);
        let mut factor = None;
        for jitter in SAMPLE_JITTER {
            let mut c = cov.clone();
            for i in 0..m {
                c[(i, i)] += jitter;
            }
            if let Some(l) = cholesky(&c) {
                factor = Some(l);
                break;
            }
        }
        let l = factor.ok_or(Error::SampleCovarianceSingular)?;
        let z: Vec<f64> = (0..m).map(|_| StandardNormal.sample(rng)).collect();
        Ok((0..m)
            .map(|i| {
                let dev: f64 = (0..=i).map(|j| l[(i, j)] * z[j]).sum();
                (mu[i] + dev) * self.target_std + self.target_mean
            })
            .collect())
    }
}
