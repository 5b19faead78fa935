use super::newton::polish;
use super::response::response_row;
use super::{finish, seed_marginal, stationarity, uniform_mix, Init, Reduced, SolveConfig, SolveReport, StepRule};
use crate::error::{Error, Result};
use crate::ext::Ext;
use crate::generators::Generator;
use crate::hedge::{marginal_correction_parts, SUPPORT_EPS};
use crate::linalg::project_simplex;
use crate::problem::{induced_marginal, DiscreteProblem};
use crate::scalar::Scalar;
use crate::table::Table;

const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1e-20;
/// Residual at which descent hands over to the Newton polish.
const HANDOVER: f64 = 1e-1;
/// Descent iterations allowed before the polish takes over regardless.
const HANDOVER_ITERS: usize = 200;

/// Projected descent on the channel rows with the exact coupled gradient
/// `P(s) [l + (f'(r) + G(a)) / beta]`, followed by an active-set Newton
/// polish and one best-response pass.
pub fn solve_f<T: Scalar>(gen: &Generator<T>, problem: &DiscreteProblem<T>, config: &SolveConfig<T>) -> Result<SolveReport<T>> {
    if !gen.is_smooth() {
        return Err(Error::Unsupported {
            op: "solve_f",
            generator: gen.to_string(),
        });
    }
    config.validate()?;
    let red = Reduced::new(problem);
    let beta = config.beta;
    let mut rows = initial_rows(gen, problem, &red, config)?;
    let mut m = induced_marginal(&red.prior, &rows)?;
    let mut f = red.objective(gen, beta, &rows, &m);
    if !f.is_finite() {
        return Err(Error::numeric("solve_f", format!("initial objective is {f}")));
    }
    let mut trace = vec![f];
    let mut iters = 0;
    let handover = if config.polish { T::lit(HANDOVER).max(config.tol) } else { config.tol };
    let mut step = match config.step_rule {
        StepRule::Fixed(s) => s,
        StepRule::Backtracking => T::one(),
    };

    while iters < config.max_iters {
        let st = stationarity(gen, beta, &red.prior, &red.loss, &rows, &m, config.tol)?;
        if st.residual() <= handover || (config.polish && iters >= HANDOVER_ITERS) {
            break;
        }
        let e = effective_loss(gen, beta, &red, &rows, &m)?;
        let mut accepted = false;
        loop {
            let cand = projected_step(&rows, &e, step);
            let cm = induced_marginal(&red.prior, &cand)?;
            let cf = red.objective(gen, beta, &cand, &cm);
            let predicted = directional(&red.prior, &e, &rows, &cand);
            match config.step_rule {
                StepRule::Fixed(_) => {
                    if !(cf <= f + T::lit(1e-12) * (T::one() + f.abs())) {
                        return Err(Error::numeric(
                            "solve_f",
                            format!("objective rose from {f} to {cf} at iteration {iters} under a fixed step of {step}"),
                        ));
                    }
                    rows = cand;
                    m = cm;
                    f = cf;
                    accepted = true;
                    break;
                }
                StepRule::Backtracking => {
                    if cf.is_finite() && cf <= f + T::lit(ARMIJO) * predicted && predicted < T::zero() {
                        rows = cand;
                        m = cm;
                        f = cf;
                        step = (step * T::lit(2.0)).min(T::lit(1e8));
                        accepted = true;
                        break;
                    }
                    step = step * T::lit(0.5);
                    if step < T::lit(MIN_STEP) {
                        break;
                    }
                }
            }
        }
        if !accepted {
            // Backtracking floor: descent has stalled at this precision.
            break;
        }
        iters += 1;
        trace.push(f);
    }

    if config.polish {
        iters += polish(gen, &red, beta, config.tol, &mut rows, &mut m, &mut trace)?;
        best_response_pass(gen, &red, beta, config.tol, &mut rows, &mut m, &mut trace)?;
    }
    finish(gen, &red, config, &rows, &m, iters, trace)
}

fn initial_rows<T: Scalar>(
    gen: &Generator<T>,
    problem: &DiscreteProblem<T>,
    red: &Reduced<T>,
    config: &SolveConfig<T>,
) -> Result<Table<T>> {
    let n_a = problem.n_actions();
    let n_s = red.prior.len();
    let uniform = T::one() / T::from_usize(n_a).unwrap();
    Ok(match &config.init {
        Init::Uniform => Table::filled(n_s, n_a, uniform),
        Init::MarginalSeed => {
            let m = seed_marginal(&red.prior, &red.loss);
            let mut rows = Table::filled(n_s, n_a, T::zero());
            for s in 0..n_s {
                let q = response_row(gen, &m, red.loss.row(s), config.beta)?;
                rows.row_mut(s).copy_from_slice(&q);
            }
            rows
        }
        Init::WarmStart(ch) => {
            if ch.n_stimuli() != problem.n_stimuli() || ch.n_actions() != n_a {
                return Err(Error::Shape("warm start channel does not match the problem".into()));
            }
            let mut rows = red.restrict(ch.rows());
            if gen.f_prime(T::zero())? == Ext::NegInf {
                uniform_mix(&mut rows, T::lit(1e-9));
            }
            rows
        }
    })
}

/// Per-row preconditioned gradient `l + (f'(r) + G) / beta`, with `f'`
/// clipped at the support threshold and unused columns priced at `r = 1`.
fn effective_loss<T: Scalar>(gen: &Generator<T>, beta: T, red: &Reduced<T>, rows: &Table<T>, m: &[T]) -> Result<Table<T>> {
    let g = marginal_correction_parts(gen, &red.prior, rows, m)?;
    let floor = gen.f_prime(T::lit(SUPPORT_EPS))?.to_float();
    let mut e = red.loss.clone();
    for s in 0..rows.n_rows() {
        for a in 0..rows.n_cols() {
            if m[a] > T::zero() {
                let d = gen.f_prime(rows.get(s, a) / m[a])?.to_float().max(floor);
                e.set(s, a, red.loss.get(s, a) + (d + g[a]) / beta);
            }
        }
    }
    Ok(e)
}

/// Backtracking projected-gradient step from `rows`, searched over steps
/// from large to small. `None` if no step decreases the objective.
pub(super) fn descent_step<T: Scalar>(
    gen: &Generator<T>,
    red: &Reduced<T>,
    beta: T,
    rows: &Table<T>,
    m: &[T],
    f: T,
) -> Result<Option<(Table<T>, Vec<T>, T)>> {
    let e = effective_loss(gen, beta, red, rows, m)?;
    let mut step = T::lit(1e6);
    while step >= T::lit(MIN_STEP) {
        let cand = projected_step(rows, &e, step);
        let cm = induced_marginal(&red.prior, &cand)?;
        let cf = red.objective(gen, beta, &cand, &cm);
        let predicted = directional(&red.prior, &e, rows, &cand);
        if cf.is_finite() && predicted < T::zero() && cf <= f + T::lit(ARMIJO) * predicted {
            return Ok(Some((cand, cm, cf)));
        }
        step = step * T::lit(0.25);
    }
    Ok(None)
}

fn projected_step<T: Scalar>(rows: &Table<T>, e: &Table<T>, step: T) -> Table<T> {
    let mut out = rows.clone();
    for s in 0..rows.n_rows() {
        let moved: Vec<T> = rows.row(s).iter().zip(e.row(s)).map(|(&q, &g)| q - step * g).collect();
        out.row_mut(s).copy_from_slice(&project_simplex(&moved));
    }
    out
}

fn directional<T: Scalar>(prior: &[T], e: &Table<T>, from: &Table<T>, to: &Table<T>) -> T {
    let mut acc = T::zero();
    for s in 0..from.n_rows() {
        for a in 0..from.n_cols() {
            acc = acc + prior[s] * e.get(s, a) * (to.get(s, a) - from.get(s, a));
        }
    }
    acc
}

/// Recomputes every row as the best response to the current marginal and
/// correction; kept only if it does not worsen the residual.
fn best_response_pass<T: Scalar>(
    gen: &Generator<T>,
    red: &Reduced<T>,
    beta: T,
    tol: T,
    rows: &mut Table<T>,
    m: &mut Vec<T>,
    trace: &mut Vec<T>,
) -> Result<()> {
    let g = marginal_correction_parts(gen, &red.prior, rows, m)?;
    let mut cand = rows.clone();
    for s in 0..rows.n_rows() {
        let shifted: Vec<T> = (0..m.len()).map(|a| red.loss.get(s, a) + g[a] / beta).collect();
        let q = response_row(gen, m, &shifted, beta)?;
        cand.row_mut(s).copy_from_slice(&q);
    }
    let cm = induced_marginal(&red.prior, &cand)?;
    let before = stationarity(gen, beta, &red.prior, &red.loss, rows, m, tol)?.residual();
    let after = stationarity(gen, beta, &red.prior, &red.loss, &cand, &cm, tol)?.residual();
    let f_old = *trace.last().unwrap_or(&T::infinity());
    let f_new = red.objective(gen, beta, &cand, &cm);
    if after < before && f_new <= f_old + T::lit(1e-14) * (T::one() + f_old.abs()) {
        *rows = cand;
        *m = cm;
        trace.push(f_new);
    }
    Ok(())
}
