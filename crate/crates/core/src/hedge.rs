//! The endogenous adversary: optimal perturbation, marginal correction,
//! adversarial penalty, certificate value, and indifference residuals.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ext::{weighted_sum, Ext};
use crate::generators::{Generator, GeneratorKind};
use crate::problem::{expected_loss, f_mutual_information, Channel, DiscreteProblem};
use crate::scalar::{compensated_sum, Scalar};
use crate::solver::{self, SolveConfig};
use crate::table::Table;

/// Entries with `P(a|s)` at or below this count as off the support.
pub const SUPPORT_EPS: f64 = 1e-12;

/// Per-(s,a) cost corrections `C_s(a)` together with their penalty `Phi(C)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound(serialize = "T: Scalar + Serialize"))]
pub struct PerturbationTable<T> {
    pub values: Table<Ext<T>>,
    pub penalty: Ext<T>,
    pub beta: T,
    /// Columns with zero marginal; their entries are `-inf` placeholders.
    pub unused_actions: Vec<usize>,
}

/// `G(a) = sum_s P(s) [f(r) - r f'(r)]` with `r = P(a|s)/P(a)`.
///
/// Zero-marginal columns get `G = 0`; they carry no product mass.
pub fn marginal_correction<T: Scalar>(
    gen: &Generator<T>,
    problem: &DiscreteProblem<T>,
    channel: &Channel<T>,
) -> Result<Vec<T>> {
    check_shapes(problem, channel)?;
    marginal_correction_parts(gen, problem.prior(), channel.rows(), channel.marginal())
}

pub(crate) fn marginal_correction_parts<T: Scalar>(
    gen: &Generator<T>,
    prior: &[T],
    rows: &Table<T>,
    marginal: &[T],
) -> Result<Vec<T>> {
    if !gen.is_smooth() {
        return Err(Error::Unsupported {
            op: "marginal_correction",
            generator: gen.to_string(),
        });
    }
    if gen.kind() == GeneratorKind::Kl {
        // sum_s P(s)(1 - r) vanishes identically under marginal consistency.
        return Ok(vec![T::zero(); marginal.len()]);
    }
    marginal
        .iter()
        .enumerate()
        .map(|(a, &m)| {
            if m <= T::zero() {
                return Ok(T::zero());
            }
            let terms: Result<Vec<(T, Ext<T>)>> = prior
                .iter()
                .enumerate()
                .filter(|(_, &p)| p > T::zero())
                .map(|(s, &p)| Ok((p, gen.legendre_tail(rows.get(s, a) / m)?)))
                .collect();
            weighted_sum(terms?).finite().ok_or_else(|| {
                Error::numeric("marginal_correction", format!("G({a}) is infinite; the channel suppresses a used action"))
            })
        })
        .collect()
}

/// `f'(r(s,a)) + G(a)`: the functional gradient of `I_f` divided by `P(s)`.
pub(crate) fn information_kernel<T: Scalar>(
    gen: &Generator<T>,
    prior: &[T],
    rows: &Table<T>,
    marginal: &[T],
) -> Result<Table<Ext<T>>> {
    let g = marginal_correction_parts(gen, prior, rows, marginal)?;
    let mut out = Table::filled(rows.n_rows(), rows.n_cols(), Ext::NegInf);
    for s in 0..rows.n_rows() {
        for (a, &m) in marginal.iter().enumerate() {
            if m > T::zero() {
                let d = gen.f_prime(rows.get(s, a) / m)?;
                out.set(s, a, d.map(|v| v + g[a]));
            }
        }
    }
    Ok(out)
}

/// `C_s(a) = (1/beta) [f'(P(a|s)/P(a)) + G(a)]`, with its penalty filled in.
pub fn optimal_perturbation<T: Scalar>(
    gen: &Generator<T>,
    problem: &DiscreteProblem<T>,
    channel: &Channel<T>,
    beta: T,
) -> Result<PerturbationTable<T>> {
    check_shapes(problem, channel)?;
    check_beta(beta)?;
    let kernel = information_kernel(gen, problem.prior(), channel.rows(), channel.marginal())?;
    let values = kernel.map(|v| v.map(|x| x / beta));
    let penalty = adversarial_penalty(gen, problem, channel, &values, beta)?;
    Ok(PerturbationTable {
        values,
        penalty,
        beta,
        unused_actions: channel.unused_actions(),
    })
}

/// `Phi(C) = (1/beta) sum_{s,a} P(s) P(a) f*(beta C_s(a))`.
///
/// A `-inf` entry contributes the conjugate floor `-f(0)`, the limit of
/// `f*` at minus infinity.
pub fn adversarial_penalty<T: Scalar>(
    gen: &Generator<T>,
    problem: &DiscreteProblem<T>,
    channel: &Channel<T>,
    values: &Table<Ext<T>>,
    beta: T,
) -> Result<Ext<T>> {
    check_shapes(problem, channel)?;
    check_beta(beta)?;
    if values.shape() != (problem.n_stimuli(), problem.n_actions()) {
        return Err(Error::Shape("perturbation table does not match the problem".into()));
    }
    let prior = problem.prior();
    let marginal = channel.marginal();
    let terms = (0..values.n_rows()).flat_map(|s| {
        (0..values.n_cols()).map(move |a| {
            let w = prior[s] * marginal[a];
            let conj = match values.get(s, a) {
                Ext::Finite(c) => gen.f_conjugate(beta * c),
                Ext::NegInf => gen.conjugate_floor(),
                Ext::PosInf => Ext::PosInf,
            };
            (w, conj)
        })
    });
    Ok(weighted_sum(terms).map(|v| v / beta))
}

/// Certificate value `L + sum P(s,a) C_s^opt(a)`.
pub fn certificate<T: Scalar>(
    gen: &Generator<T>,
    problem: &DiscreteProblem<T>,
    channel: &Channel<T>,
    beta: T,
) -> Result<T> {
    let table = optimal_perturbation(gen, problem, channel, beta)?;
    certificate_from_table(problem, channel, &table.values)
}

pub(crate) fn certificate_from_table<T: Scalar>(
    problem: &DiscreteProblem<T>,
    channel: &Channel<T>,
    values: &Table<Ext<T>>,
) -> Result<T> {
    let loss = expected_loss(problem, channel)?;
    Ok(loss + channel_average(problem.prior(), channel.rows(), values)?)
}

/// `sum P(s) P(a|s) C_s(a)`; infinite entries are an error when they carry
/// joint mass.
pub(crate) fn channel_average<T: Scalar>(prior: &[T], rows: &Table<T>, values: &Table<Ext<T>>) -> Result<T> {
    let mut terms = Vec::with_capacity(rows.as_slice().len());
    for s in 0..rows.n_rows() {
        for a in 0..rows.n_cols() {
            let w = prior[s] * rows.get(s, a);
            if w == T::zero() {
                continue;
            }
            match values.get(s, a) {
                Ext::Finite(c) => terms.push(w * c),
                inf => {
                    return Err(Error::numeric(
                        "certificate",
                        format!("perturbation entry ({s},{a}) is {inf} but carries joint mass {w}"),
                    ))
                }
            }
        }
    }
    Ok(compensated_sum(terms))
}

/// Indifference diagnostics for one channel and perturbation table.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound(serialize = "T: Scalar + Serialize"))]
pub struct IndifferenceReport<T> {
    /// Per stimulus: max |l + C - lambda| over on-support actions.
    pub on_support: Vec<T>,
    /// Per stimulus: min of `l + C - lambda` over off-support actions with a
    /// finite perturbation, if any.
    pub off_support: Vec<Option<T>>,
    /// Per stimulus: on-support mean of the effective losses.
    pub lambda: Vec<T>,
}

impl<T: Scalar> IndifferenceReport<T> {
    pub fn worst_on_support(&self) -> T {
        self.on_support.iter().copied().fold(T::zero(), T::max)
    }

    /// Most negative off-support slack, or zero if none is negative.
    pub fn worst_off_support(&self) -> T {
        self.off_support
            .iter()
            .flatten()
            .copied()
            .fold(T::zero(), T::min)
    }

    /// Single number: on-support spread or off-support violation.
    pub fn residual(&self) -> T {
        self.worst_on_support().max(-self.worst_off_support())
    }
}

/// Checks `l(s,a) + C_s(a) = lambda_s` on the support and `>= lambda_s` off it.
pub fn indifference_residual<T: Scalar>(
    problem: &DiscreteProblem<T>,
    channel: &Channel<T>,
    table: &PerturbationTable<T>,
) -> Result<IndifferenceReport<T>> {
    check_shapes(problem, channel)?;
    indifference_parts(problem.prior(), problem.loss(), channel.rows(), channel.marginal(), &table.values)
}

pub(crate) fn indifference_parts<T: Scalar>(
    prior: &[T],
    loss: &Table<T>,
    rows: &Table<T>,
    marginal: &[T],
    values: &Table<Ext<T>>,
) -> Result<IndifferenceReport<T>> {
    let eps = T::lit(SUPPORT_EPS);
    let n_s = rows.n_rows();
    let mut report = IndifferenceReport {
        on_support: Vec::with_capacity(n_s),
        off_support: Vec::with_capacity(n_s),
        lambda: Vec::with_capacity(n_s),
    };
    for s in 0..n_s {
        let mut effective = Vec::new();
        for a in 0..rows.n_cols() {
            if rows.get(s, a) > eps && marginal[a] > T::zero() {
                match values.get(s, a) {
                    Ext::Finite(c) => effective.push(loss.get(s, a) + c),
                    inf => {
                        return Err(Error::numeric(
                            "indifference_residual",
                            format!("on-support entry ({s},{a}) has perturbation {inf}"),
                        ))
                    }
                }
            }
        }
        if effective.is_empty() {
            if prior[s] == T::zero() {
                report.on_support.push(T::zero());
                report.off_support.push(None);
                report.lambda.push(T::zero());
                continue;
            }
            return Err(Error::Invalid(format!("stimulus {s} has an empty support")));
        }
        let n = T::from_usize(effective.len()).unwrap();
        let lambda = compensated_sum(effective.iter().copied()) / n;
        let spread = effective
            .iter()
            .map(|&e| (e - lambda).abs())
            .fold(T::zero(), T::max);
        let off = (0..rows.n_cols())
            .filter(|&a| rows.get(s, a) <= eps && marginal[a] > T::zero())
            .filter_map(|a| values.get(s, a).finite().map(|c| loss.get(s, a) + c - lambda))
            .fold(None, |acc: Option<T>, v| Some(acc.map_or(v, |m| m.min(v))));
        report.on_support.push(spread);
        report.off_support.push(off);
        report.lambda.push(lambda);
    }
    Ok(report)
}

/// For an action with zero marginal, the smallest first-order change in the
/// objective per unit of mass moved onto it:
/// `min_q sum_s P(s) [q_s (l(s,a) - lambda_s) + f(q_s)/beta]` over
/// `q >= 0, sum_s P(s) q_s = 1`. Negative values mean the action should be
/// opened.
pub fn unused_action_slack<T: Scalar>(
    gen: &Generator<T>,
    prior: &[T],
    loss_column: &[T],
    lambda: &[T],
    beta: T,
) -> Result<T> {
    Ok(opening_direction(gen, prior, loss_column, lambda, beta)?.0)
}

/// The slack above and its minimizing density `q` (with `sum P(s) q_s = 1`).
pub(crate) fn opening_direction<T: Scalar>(
    gen: &Generator<T>,
    prior: &[T],
    loss_column: &[T],
    lambda: &[T],
    beta: T,
) -> Result<(T, Vec<T>)> {
    let active: Vec<usize> = (0..prior.len()).filter(|&s| prior[s] > T::zero()).collect();
    if active.is_empty() {
        return Ok((T::zero(), vec![T::zero(); prior.len()]));
    }
    let shift: Vec<T> = active.iter().map(|&s| lambda[s] - loss_column[s]).collect();
    let mass = |mu: T| -> Result<T> {
        let mut total = T::zero();
        for (i, &s) in active.iter().enumerate() {
            total = total + prior[s] * gen.f_prime_inverse(beta * (shift[i] + mu))?;
        }
        Ok(total)
    };
    // Largest admissible mu keeps every argument below the f' range.
    let hi_range = gen.fprime_range().hi;
    let mu_cap = if hi_range.is_finite() {
        shift
            .iter()
            .map(|&d| hi_range / beta - d)
            .fold(T::infinity(), T::min)
    } else {
        T::infinity()
    };
    let spread = shift.iter().copied().fold(T::zero(), |m, d| m.max(d.abs()));
    let mut lo = -spread - T::one() / beta;
    while mass(lo)? > T::one() {
        lo = lo * T::lit(2.0) - T::one();
        if !lo.is_finite() {
            return Err(Error::numeric("unused_action_slack", "lower bracket diverged"));
        }
    }
    let mut hi = if mu_cap.is_finite() {
        mu_cap
    } else {
        let mut h = spread + T::one() / beta;
        while mass(h)? < T::one() {
            h = h * T::lit(2.0) + T::one();
            if !h.is_finite() {
                return Err(Error::numeric("unused_action_slack", "upper bracket diverged"));
            }
        }
        h
    };
    for _ in 0..300 {
        let mid = T::lit(0.5) * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let m = if mu_cap.is_finite() && mid >= mu_cap {
            T::infinity()
        } else {
            mass(mid)?
        };
        if m < T::one() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mu = lo;
    let mut value = Vec::with_capacity(active.len());
    let mut total = T::zero();
    let mut qs = Vec::with_capacity(active.len());
    for (i, &s) in active.iter().enumerate() {
        let q = gen.f_prime_inverse(beta * (shift[i] + mu))?;
        total = total + prior[s] * q;
        qs.push(q);
    }
    if !(total > T::zero()) {
        return Err(Error::numeric("unused_action_slack", "no admissible opening direction"));
    }
    let mut density = vec![T::zero(); prior.len()];
    for (i, &s) in active.iter().enumerate() {
        let q = qs[i] / total;
        let f = gen.f_value(q)?.to_float();
        value.push(prior[s] * (q * (-shift[i]) + f / beta));
        density[s] = q;
    }
    Ok((compensated_sum(value), density))
}

/// Figure-style hedging contour: entry `(i, j)` is
/// `L(beta_i) + I_f(beta_i) / beta_adv_j` for the channel solved at `beta_i`.
pub fn effective_loss_grid<T: Scalar>(
    gen: &Generator<T>,
    problem: &DiscreteProblem<T>,
    beta_grid: &[T],
    beta_adv_grid: &[T],
    config: &SolveConfig<T>,
) -> Result<Table<T>> {
    let mut out = Table::filled(beta_grid.len(), beta_adv_grid.len(), T::zero());
    let mut warm: Option<Channel<T>> = None;
    for (i, &beta) in beta_grid.iter().enumerate() {
        let mut cfg = config.clone().with_beta(beta);
        if let Some(w) = warm.take() {
            cfg.init = solver::Init::WarmStart(w);
        }
        let report = solver::solve_f(gen, problem, &cfg)?;
        let loss = expected_loss(problem, &report.channel)?;
        let info = f_mutual_information(gen, problem, &report.channel)?.to_float();
        for (j, &beta_adv) in beta_adv_grid.iter().enumerate() {
            check_beta(beta_adv)?;
            out.set(i, j, loss + info / beta_adv);
        }
        warm = Some(report.channel);
    }
    Ok(out)
}

fn check_beta<T: Scalar>(beta: T) -> Result<()> {
    if beta > T::zero() && beta.is_finite() {
        Ok(())
    } else {
        Err(Error::Invalid(format!("beta must be positive and finite, got {beta}")))
    }
}

fn check_shapes<T: Scalar>(problem: &DiscreteProblem<T>, channel: &Channel<T>) -> Result<()> {
    if problem.n_stimuli() != channel.n_stimuli() || problem.n_actions() != channel.n_actions() {
        return Err(Error::Shape("channel does not match the problem".into()));
    }
    Ok(())
}
