//! Learning as hedging: samples are stimuli, prediction vectors are actions,
//! and the gap between population and empirical loss is the perturbation.
//!
//! Everything here is `f64`; the fixed-design regression task and its two
//! learners feed the end-to-end experiment in [`experiment`].

mod boxes;
mod codebook;
pub mod experiment;
mod kernel;
mod mlp;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::Generator;
use crate::hedge::{channel_average, optimal_perturbation};
use crate::problem::{joint_expectation, Channel, DiscreteProblem};
use crate::table::Table;

pub use boxes::LearnerBox;
pub use codebook::{build_codebook, kmeans, median_temperature, soft_assign, Codebook, KMeans};
pub use experiment::{run_experiment, Band, CurveRow, ExperimentConfig, ExperimentFailure, ExperimentReport, LearnerSpec, Scale};
pub use kernel::{gram_matrix, kernel_ridge_fit, kernel_ridge_scaled, KernelSmoother};
pub use mlp::{mlp_checkpoints, mlp_fit, Mlp, MlpConfig};

/// Fixed-design regression: `y_i = m(x_i) + noise` on an equally spaced grid in [-1, 1].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionTask {
    pub design: Vec<f64>,
    pub noise_sd: f64,
}

impl Default for RegressionTask {
    fn default() -> Self {
        Self::new(100, 0.15).expect("default task is valid")
    }
}

impl RegressionTask {
    pub fn new(n: usize, noise_sd: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::Invalid(format!("design needs at least two points, got {n}")));
        }
        if !(noise_sd > 0.0 && noise_sd.is_finite()) {
            return Err(Error::Invalid(format!("noise_sd must be positive, got {noise_sd}")));
        }
        let design = (0..n).map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64).collect();
        Ok(Self { design, noise_sd })
    }

    pub fn n(&self) -> usize {
        self.design.len()
    }

    pub fn mean_fn(x: f64) -> f64 {
        0.8 * (std::f64::consts::PI * x).sin() + 0.25 * x
    }

    pub fn mean_vector(&self) -> Vec<f64> {
        self.design.iter().map(|&x| Self::mean_fn(x)).collect()
    }

    /// Responses for one training sample.
    pub fn sample(&self, seed: u64) -> Vec<f64> {
        self.sample_with_sd(seed, self.noise_sd)
    }

    pub fn sample_with_sd(&self, seed: u64, sd: f64) -> Vec<f64> {
        let mut rng = crate::seed::rng(seed, &[0x7a5c]);
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        self.design
            .iter()
            .map(|&x| Self::mean_fn(x) + sd * normal.sample(&mut rng))
            .collect()
    }

    /// `L̄(a)`: mean squared distance to the mean function plus the noise variance.
    pub fn population_loss(&self, prediction: &[f64]) -> f64 {
        let n = self.n() as f64;
        let bias: f64 = self
            .design
            .iter()
            .zip(prediction)
            .map(|(&x, &p)| (p - Self::mean_fn(x)).powi(2))
            .sum();
        bias / n + self.noise_sd * self.noise_sd
    }
}

pub fn sample_task(task: &RegressionTask, seed: u64) -> Vec<f64> {
    task.sample(seed)
}

/// Mean squared error of a prediction vector on a sample.
pub fn empirical_loss(prediction: &[f64], sample: &[f64]) -> f64 {
    prediction.iter().zip(sample).map(|(p, y)| (p - y).powi(2)).sum::<f64>() / sample.len() as f64
}

/// `C_{s,n}(a) = L̄(a) - l_n(s, a)`.
pub fn sample_distortion(code: &[f64], sample: &[f64], task: &RegressionTask) -> f64 {
    task.population_loss(code) - empirical_loss(code, sample)
}

/// Distortions `L̄(a) - l_n(s, a)` from an empirical loss table and population losses.
pub fn distortion_table(empirical: &Table<f64>, population: &[f64]) -> Result<Table<f64>> {
    if empirical.n_cols() != population.len() {
        return Err(Error::Shape(format!(
            "{} actions in the loss table, {} population losses",
            empirical.n_cols(),
            population.len()
        )));
    }
    Ok(Table::from_fn(empirical.n_rows(), empirical.n_cols(), |s, a| population[a] - empirical.get(s, a)))
}

/// Both sides of the reweighting identity.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReweightingGap {
    /// `sum P(s,a) C`
    pub channel_weighted: f64,
    /// `sum P(s) P(a) (r - 1) C`
    pub product_form: f64,
    /// `channel_weighted - product_form`, which is the product-law average of `C`
    /// and vanishes when the distortion is centred.
    pub difference: f64,
}

pub fn reweighting_gap(prior: &[f64], channel: &Channel<f64>, distortions: &Table<f64>) -> Result<ReweightingGap> {
    check(prior, channel, distortions)?;
    let m = channel.marginal();
    let channel_weighted = joint_expectation(prior, channel.rows(), distortions);
    let mut terms = Vec::new();
    for (s, &p) in prior.iter().enumerate() {
        for (a, &ma) in m.iter().enumerate() {
            if ma > 0.0 {
                let r = channel.get(s, a) / ma;
                terms.push(p * ma * (r - 1.0) * distortions.get(s, a));
            }
        }
    }
    let product_form = crate::scalar::compensated_sum(terms);
    Ok(ReweightingGap {
        channel_weighted,
        product_form,
        difference: channel_weighted - product_form,
    })
}

/// `sum P(s) P(a) C`; zero in expectation for i.i.d. samples.
pub fn product_average(prior: &[f64], marginal: &[f64], distortions: &Table<f64>) -> f64 {
    crate::scalar::compensated_sum(
        prior
            .iter()
            .enumerate()
            .flat_map(|(s, &p)| marginal.iter().enumerate().map(move |(a, &m)| p * m * distortions.get(s, a))),
    )
}

/// Population loss split into empirical loss and channel-weighted distortion.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Decomposition {
    pub population: f64,
    pub empirical: f64,
    pub distortion: f64,
}

impl Decomposition {
    pub fn residual(&self) -> f64 {
        self.population - self.empirical - self.distortion
    }
}

/// `sum P(s,a) L̄(a) = L_n + sum P(s,a) C`, each side computed separately.
pub fn decomposition(
    prior: &[f64],
    channel: &Channel<f64>,
    empirical: &Table<f64>,
    population: &[f64],
) -> Result<Decomposition> {
    check(prior, channel, empirical)?;
    let dist = distortion_table(empirical, population)?;
    let pop = Table::from_fn(empirical.n_rows(), empirical.n_cols(), |_, a| population[a]);
    Ok(Decomposition {
        population: joint_expectation(prior, channel.rows(), &pop),
        empirical: joint_expectation(prior, channel.rows(), empirical),
        distortion: joint_expectation(prior, channel.rows(), &dist),
    })
}

/// `L_n + I_f / (beta n)`: the learning certificate.
pub fn learning_certificate(gen: &Generator<f64>, problem: &DiscreteProblem<f64>, channel: &Channel<f64>, beta: f64, n: usize) -> Result<f64> {
    crate::hedge::certificate(gen, problem, channel, beta * n as f64)
}

/// `sum P(s,a) [C^opt - C]` with the hedge scaled by `1/(beta n)`. The problem's
/// loss is the empirical loss `l_n`. Nonnegative exactly when population loss sits
/// below the certificate.
pub fn certificate_margin(
    gen: &Generator<f64>,
    problem: &DiscreteProblem<f64>,
    channel: &Channel<f64>,
    beta: f64,
    n: usize,
    distortions: &Table<f64>,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::Invalid("sample size must be positive".into()));
    }
    check(problem.prior(), channel, distortions)?;
    let hedge = optimal_perturbation(gen, problem, channel, beta * n as f64)?;
    let opt = channel_average(problem.prior(), channel.rows(), &hedge.values)?;
    Ok(opt - joint_expectation(problem.prior(), channel.rows(), distortions))
}

fn check(prior: &[f64], channel: &Channel<f64>, table: &Table<f64>) -> Result<()> {
    if prior.len() != channel.n_stimuli() || table.shape() != (channel.n_stimuli(), channel.n_actions()) {
        return Err(Error::Shape(format!(
            "prior {} / channel {}x{} / table {}x{}",
            prior.len(),
            channel.n_stimuli(),
            channel.n_actions(),
            table.n_rows(),
            table.n_cols()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_sample_is_the_mean() {
        let task = RegressionTask::default();
        assert_eq!(task.sample_with_sd(3, 0.0), task.mean_vector());
        assert_eq!(task.sample(9), task.sample(9));
        assert_ne!(task.sample(9), task.sample(10));
    }

    #[test]
    fn distortion_of_the_mean_function_on_clean_data() {
        let task = RegressionTask::default();
        let m = task.mean_vector();
        let d = sample_distortion(&m, &m, &task);
        assert!((d - 0.15f64.powi(2)).abs() < 1e-15);
    }

    #[test]
    fn independent_channel_has_no_reweighting() {
        let prior = [0.2, 0.8];
        let ch = Channel::independent(&prior, &[0.3, 0.7]).unwrap();
        let d = Table::from_rows(vec![vec![1.0, -2.0], vec![-0.25, 0.5]]).unwrap();
        let g = reweighting_gap(&prior, &ch, &d).unwrap();
        assert!(g.product_form.abs() < 1e-15);
    }
}
