//! Bounded-rational channels: Blahut-Arimoto for KL, projected descent with
//! an active-set Newton polish for general smooth generators.

mod descent;
mod kl;
mod newton;
mod response;

use serde::Serialize;

pub use descent::solve_f;
pub use kl::solve_kl;
pub use response::per_stimulus_response;
pub(crate) use response::response_row;

use crate::error::{Error, Result};
use crate::ext::Ext;
use crate::generators::Generator;
use crate::hedge::{indifference_parts, information_kernel, marginal_correction_parts, opening_direction};
use crate::problem::{expected_loss, f_mutual_information, information_from_parts, joint_expectation, Channel, DiscreteProblem};
use crate::scalar::Scalar;
use crate::table::Table;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum StepRule<T> {
    /// Constant step on the preconditioned gradient; an objective increase
    /// is reported as a numeric failure.
    Fixed(T),
    /// Armijo backtracking with step growth after each accepted move.
    Backtracking,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound(serialize = "T: Scalar + Serialize"))]
pub enum Init<T> {
    Uniform,
    /// Starts from the best response to a marginal concentrated on the
    /// per-stimulus minimizers, mixed with the uniform law.
    MarginalSeed,
    WarmStart(Channel<T>),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound(serialize = "T: Scalar + Serialize"))]
pub struct SolveConfig<T> {
    pub beta: T,
    pub max_iters: usize,
    pub tol: T,
    pub step_rule: StepRule<T>,
    pub init: Init<T>,
    /// Run the Newton polish after descent. Disable to study plain descent.
    pub polish: bool,
}

impl<T: Scalar> SolveConfig<T> {
    pub fn new(beta: T) -> Self {
        SolveConfig {
            beta,
            max_iters: 20_000,
            tol: T::lit(1e-9),
            step_rule: StepRule::Backtracking,
            init: Init::Uniform,
            polish: true,
        }
    }

    pub fn with_beta(mut self, beta: T) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_tol(mut self, tol: T) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_init(mut self, init: Init<T>) -> Self {
        self.init = init;
        self
    }

    pub fn with_step_rule(mut self, rule: StepRule<T>) -> Self {
        self.step_rule = rule;
        self
    }

    pub fn with_polish(mut self, polish: bool) -> Self {
        self.polish = polish;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > T::zero() && self.beta.is_finite()) {
            return Err(Error::Invalid(format!("beta must be positive and finite, got {}", self.beta)));
        }
        if !(self.tol > T::zero()) {
            return Err(Error::Invalid(format!("tol must be positive, got {}", self.tol)));
        }
        if let StepRule::Fixed(step) = self.step_rule {
            if !(step > T::zero() && step.is_finite()) {
                return Err(Error::Invalid(format!("fixed step must be positive, got {step}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound(serialize = "T: Scalar + Serialize"))]
pub struct SolveReport<T> {
    pub channel: Channel<T>,
    pub free_energy: T,
    pub iters: usize,
    /// Largest indifference violation, on or off the support.
    pub residual: T,
    pub converged: bool,
    pub beta: T,
    pub on_support_residual: T,
    /// Most negative off-support slack (zero if none), including unused
    /// actions that should be opened.
    pub off_support_slack: T,
    /// Objective after each accepted iterate.
    pub objective_trace: Vec<T>,
}

/// `F = L + I_f / beta`; an infinite information cost gives `+inf`.
pub fn free_energy<T: Scalar>(gen: &Generator<T>, problem: &DiscreteProblem<T>, channel: &Channel<T>, beta: T) -> Result<T> {
    if !(beta > T::zero()) {
        return Err(Error::Invalid(format!("beta must be positive, got {beta}")));
    }
    let loss = expected_loss(problem, channel)?;
    Ok(match f_mutual_information(gen, problem, channel)? {
        Ext::Finite(i) => loss + i / beta,
        Ext::PosInf => T::infinity(),
        Ext::NegInf => T::neg_infinity(),
    })
}

/// The subproblem on stimuli with positive prior.
pub(crate) struct Reduced<T> {
    pub keep: Vec<usize>,
    pub prior: Vec<T>,
    pub loss: Table<T>,
    n_full: usize,
}

impl<T: Scalar> Reduced<T> {
    pub fn new(problem: &DiscreteProblem<T>) -> Self {
        let keep: Vec<usize> = (0..problem.n_stimuli())
            .filter(|&s| problem.prior()[s] > T::zero())
            .collect();
        let prior = keep.iter().map(|&s| problem.prior()[s]).collect();
        let loss = Table::from_fn(keep.len(), problem.n_actions(), |i, a| problem.loss().get(keep[i], a));
        Reduced {
            keep,
            prior,
            loss,
            n_full: problem.n_stimuli(),
        }
    }

    pub fn restrict(&self, rows: &Table<T>) -> Table<T> {
        Table::from_fn(self.keep.len(), rows.n_cols(), |i, a| rows.get(self.keep[i], a))
    }

    /// Full channel with zero-prior stimuli answered by the marginal.
    pub fn expand(&self, rows: &Table<T>, marginal: &[T]) -> Channel<T> {
        let mut full = Table::from_fn(self.n_full, marginal.len(), |_, a| marginal[a]);
        for (i, &s) in self.keep.iter().enumerate() {
            full.row_mut(s).copy_from_slice(rows.row(i));
        }
        Channel::from_parts(full, marginal.to_vec())
    }

    pub fn objective(&self, gen: &Generator<T>, beta: T, rows: &Table<T>, marginal: &[T]) -> T {
        let loss = joint_expectation(&self.prior, rows, &self.loss);
        match information_from_parts(gen, &self.prior, rows, marginal) {
            Ext::Finite(i) => loss + i / beta,
            Ext::PosInf => T::infinity(),
            Ext::NegInf => T::neg_infinity(),
        }
    }
}

/// Indifference diagnostics of a reduced iterate.
#[derive(Clone, Debug)]
pub(crate) struct Stationarity<T> {
    pub on_support: T,
    /// Most negative slack, zero when none is negative.
    pub off_support: T,
    /// Entries `(s, a)` in used columns whose slack is below `-threshold`,
    /// with their best-response value.
    pub entering: Vec<(usize, usize, T)>,
    /// Unused actions with negative opening slack and their opening law.
    pub opening: Vec<(usize, Vec<T>)>,
}

impl<T: Scalar> Stationarity<T> {
    pub fn residual(&self) -> T {
        self.on_support.max(-self.off_support)
    }
}

pub(crate) fn stationarity<T: Scalar>(
    gen: &Generator<T>,
    beta: T,
    prior: &[T],
    loss: &Table<T>,
    rows: &Table<T>,
    marginal: &[T],
    threshold: T,
) -> Result<Stationarity<T>> {
    let kernel = information_kernel(gen, prior, rows, marginal)?;
    let values = kernel.map(|v| v.map(|x| x / beta));
    let report = indifference_parts(prior, loss, rows, marginal, &values)?;
    let eps = T::lit(crate::hedge::SUPPORT_EPS);
    let mut entering = Vec::new();
    let mut off = report.worst_off_support();
    let correction = marginal_correction_parts(gen, prior, rows, marginal)?;
    for s in 0..rows.n_rows() {
        for a in 0..rows.n_cols() {
            if marginal[a] > T::zero() && rows.get(s, a) <= eps {
                match values.get(s, a) {
                    Ext::Finite(c) => {
                        if loss.get(s, a) + c - report.lambda[s] < -threshold {
                            let y = beta * (report.lambda[s] - loss.get(s, a)) - correction[a];
                            let wanted = gen.f_prime_inverse(y).map(|r| marginal[a] * r).unwrap_or(T::zero());
                            entering.push((s, a, wanted));
                        }
                    }
                    // An exact zero where f'(0) = -inf is stationary only if
                    // the best response itself is negligible.
                    _ => {
                        let y = beta * (report.lambda[s] - loss.get(s, a)) - correction[a];
                        let wanted = match gen.f_prime_inverse(y) {
                            Ok(r) => marginal[a] * r,
                            Err(_) => T::infinity(),
                        };
                        if wanted > eps {
                            entering.push((s, a, wanted));
                            off = T::neg_infinity();
                        }
                    }
                }
            }
        }
    }
    let mut opening = Vec::new();
    for a in 0..marginal.len() {
        if marginal[a] == T::zero() {
            let column: Vec<T> = (0..rows.n_rows()).map(|s| loss.get(s, a)).collect();
            let (slack, q) = opening_direction(gen, prior, &column, &report.lambda, beta)?;
            off = off.min(slack);
            if slack < -threshold {
                opening.push((a, q));
            }
        }
    }
    Ok(Stationarity {
        on_support: report.worst_on_support(),
        off_support: off.min(T::zero()),
        entering,
        opening,
    })
}

/// Builds the final report from a reduced iterate.
pub(crate) fn finish<T: Scalar>(
    gen: &Generator<T>,
    red: &Reduced<T>,
    config: &SolveConfig<T>,
    rows: &Table<T>,
    marginal: &[T],
    iters: usize,
    trace: Vec<T>,
) -> Result<SolveReport<T>> {
    let st = stationarity(gen, config.beta, &red.prior, &red.loss, rows, marginal, config.tol)?;
    let residual = st.residual();
    let free_energy = red.objective(gen, config.beta, rows, marginal);
    Ok(SolveReport {
        channel: red.expand(rows, marginal),
        free_energy,
        iters,
        residual,
        converged: residual <= config.tol,
        beta: config.beta,
        on_support_residual: st.on_support,
        off_support_slack: st.off_support,
        objective_trace: trace,
    })
}

/// Marginal concentrated on per-stimulus minimizers, mixed with uniform.
pub(crate) fn seed_marginal<T: Scalar>(prior: &[T], loss: &Table<T>) -> Vec<T> {
    let n_a = loss.n_cols();
    let u = T::one() / T::from_usize(n_a).unwrap();
    let mut m = vec![T::lit(0.5) * u; n_a];
    for (s, &p) in prior.iter().enumerate() {
        let row = loss.row(s);
        let best = (0..n_a).fold(0, |b, a| if row[a] < row[b] { a } else { b });
        m[best] = m[best] + T::lit(0.5) * p;
    }
    m
}

pub(crate) fn uniform_mix<T: Scalar>(rows: &mut Table<T>, weight: T) {
    let u = T::one() / T::from_usize(rows.n_cols()).unwrap();
    for v in rows.as_mut_slice() {
        *v = (T::one() - weight) * *v + weight * u;
    }
}
