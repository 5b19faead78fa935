use super::{finish, seed_marginal, stationarity, Init, Reduced, SolveConfig, SolveReport};
use crate::error::{Error, Result};
use crate::generators::Generator;
use crate::problem::{induced_marginal, DiscreteProblem};
use crate::scalar::Scalar;
use crate::table::Table;

/// Columns whose marginal falls below this while shrinking are removed.
const PRUNE_MASS: f64 = 1e-10;
/// Mass given back to a pruned column whose opening slack turns negative.
const REVIVE_MASS: f64 = 1e-6;

/// Blahut-Arimoto: alternate the Gibbs rows `P(a|s) ~ P(a) exp(-beta l)`
/// and the induced marginal until the objective and the indifference
/// residual settle.
pub fn solve_kl<T: Scalar>(problem: &DiscreteProblem<T>, config: &SolveConfig<T>) -> Result<SolveReport<T>> {
    config.validate()?;
    let gen = Generator::<T>::kl();
    let red = Reduced::new(problem);
    let n_a = problem.n_actions();
    let beta = config.beta;
    let uniform = T::one() / T::from_usize(n_a).unwrap();
    let mut m: Vec<T> = match &config.init {
        Init::Uniform => vec![uniform; n_a],
        Init::MarginalSeed => seed_marginal(&red.prior, &red.loss),
        Init::WarmStart(ch) => {
            if ch.n_stimuli() != problem.n_stimuli() || ch.n_actions() != n_a {
                return Err(Error::Shape("warm start channel does not match the problem".into()));
            }
            // Keep every column reachable; BA cannot revive a zero marginal.
            ch.marginal()
                .iter()
                .map(|&x| T::lit(0.999) * x + T::lit(0.001) * uniform)
                .collect()
        }
    };
    let n_s = red.prior.len();
    let mut rows = Table::filled(n_s, n_a, T::zero());
    let mut trace = Vec::new();
    let mut previous = T::infinity();
    let mut iters = 0;
    while iters < config.max_iters {
        iters += 1;
        gibbs_rows(&red.loss, &m, beta, &mut rows);
        let mut next = induced_marginal(&red.prior, &rows)?;
        let dying: Vec<usize> = (0..n_a)
            .filter(|&a| next[a] > T::zero() && next[a] < T::lit(PRUNE_MASS) && next[a] < m[a])
            .collect();
        if !dying.is_empty() {
            for &a in &dying {
                next[a] = T::zero();
            }
            gibbs_rows(&red.loss, &next, beta, &mut rows);
            next = induced_marginal(&red.prior, &rows)?;
        }
        m = next;
        let objective = red.objective(&gen, beta, &rows, &m);
        trace.push(objective);
        let decrease = previous - objective;
        previous = objective;
        if decrease.abs() < config.tol && (decrease.abs() < config.tol * T::lit(1e-3) || iters % 8 == 0) {
            let st = stationarity(&gen, beta, &red.prior, &red.loss, &rows, &m, config.tol)?;
            if st.residual() <= config.tol {
                break;
            }
            if !st.opening.is_empty() {
                for (a, _) in &st.opening {
                    m[*a] = T::lit(REVIVE_MASS);
                }
                let total: T = m.iter().copied().sum();
                m.iter_mut().for_each(|x| *x = *x / total);
                previous = T::infinity();
            }
        }
    }
    finish(&gen, &red, config, &rows, &m, iters, trace)
}

fn gibbs_rows<T: Scalar>(loss: &Table<T>, m: &[T], beta: T, rows: &mut Table<T>) {
    for s in 0..loss.n_rows() {
        let l = loss.row(s);
        let floor = (0..m.len())
            .filter(|&a| m[a] > T::zero())
            .map(|a| l[a])
            .fold(T::infinity(), T::min);
        let row = rows.row_mut(s);
        let mut total = T::zero();
        for a in 0..m.len() {
            row[a] = if m[a] > T::zero() {
                m[a] * (-beta * (l[a] - floor)).exp()
            } else {
                T::zero()
            };
            total = total + row[a];
        }
        row.iter_mut().for_each(|x| *x = *x / total);
    }
}
