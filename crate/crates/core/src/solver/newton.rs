use super::descent::descent_step;
use super::{stationarity, Reduced, Stationarity};
use crate::error::Result;
use crate::ext::Ext;
use crate::generators::Generator;
use crate::hedge::{marginal_correction_parts, SUPPORT_EPS};
use crate::linalg::solve_dense;
use crate::problem::induced_marginal;
use crate::scalar::Scalar;
use crate::table::Table;

const INNER_ITERS: usize = 60;
const OUTER_ROUNDS: usize = 20;
const INJECT: f64 = 1e-7;
/// Columns below this marginal are removed; the opening test brings them
/// back if that was premature.
const COLUMN_DEATH: f64 = 1e-10;

/// Active-set Newton on the entries above the support threshold, with row
/// sums as equality constraints. Entries or unused actions with negative
/// slack are brought in between rounds. Returns the number of Newton steps.
pub(super) fn polish<T: Scalar>(
    gen: &Generator<T>,
    red: &Reduced<T>,
    beta: T,
    tol: T,
    rows: &mut Table<T>,
    m: &mut Vec<T>,
    trace: &mut Vec<T>,
) -> Result<usize> {
    let target = (tol * T::lit(1e-2)).max(T::lit(1e-13));
    let finite_slope = gen.f_prime(T::zero())?.is_finite();
    let mut steps = 0;
    for _ in 0..OUTER_ROUNDS {
        let mut st = stationarity(gen, beta, &red.prior, &red.loss, rows, m, target)?;
        let mut f = red.objective(gen, beta, rows, m);
        for _ in 0..INNER_ITERS {
            if st.on_support <= target {
                break;
            }
            let Some((support, d)) = newton_direction(gen, red, beta, rows, m)? else {
                if !fallback_step(gen, red, beta, target, rows, m, &mut f, &mut st)? {
                    break;
                }
                steps += 1;
                trace.push(f);
                continue;
            };
            let g = gradient(gen, red, beta, rows, m, &support)?;
            let slope: T = g.iter().zip(&d).map(|(&gi, &di)| gi * di).sum();
            let mut alpha_max = T::infinity();
            for (k, &(s, a)) in support.iter().enumerate() {
                if d[k] < T::zero() {
                    alpha_max = alpha_max.min(-rows.get(s, a) / d[k]);
                }
            }
            let mut alpha = if alpha_max >= T::one() {
                T::one()
            } else if finite_slope {
                alpha_max
            } else {
                T::lit(0.9) * alpha_max
            };
            let mut accepted = false;
            for _ in 0..40 {
                let mut cand = rows.clone();
                for (k, &(s, a)) in support.iter().enumerate() {
                    let v = rows.get(s, a) + alpha * d[k];
                    let blocked = finite_slope
                        && alpha == alpha_max
                        && d[k] < T::zero()
                        && (-rows.get(s, a) / d[k]) <= alpha * (T::one() + T::lit(1e-9));
                    cand.set(s, a, if blocked { T::zero() } else { v.max(T::zero()) });
                }
                renormalize_rows(&mut cand);
                let mut cm = induced_marginal(&red.prior, &cand)?;
                if cm.iter().any(|&x| x > T::zero() && x < T::lit(COLUMN_DEATH)) {
                    for a in 0..cm.len() {
                        if cm[a] < T::lit(COLUMN_DEATH) {
                            for s in 0..cand.n_rows() {
                                cand.set(s, a, T::zero());
                            }
                        }
                    }
                    renormalize_rows(&mut cand);
                    cm = induced_marginal(&red.prior, &cand)?;
                }
                let cf = red.objective(gen, beta, &cand, &cm);
                if cf.is_finite() {
                    let armijo = cf <= f + T::lit(1e-4) * alpha * slope;
                    let flat = cf <= f + T::lit(1e-13) * (T::one() + f.abs());
                    let cst = if armijo || flat {
                        Some(stationarity(gen, beta, &red.prior, &red.loss, &cand, &cm, target)?)
                    } else {
                        None
                    };
                    if let Some(cst) = cst {
                        if armijo || cst.on_support < st.on_support {
                            *rows = cand;
                            *m = cm;
                            f = cf;
                            st = cst;
                            accepted = true;
                            break;
                        }
                    }
                }
                alpha = alpha * T::lit(0.5);
            }
            if !accepted && !fallback_step(gen, red, beta, target, rows, m, &mut f, &mut st)? {
                break;
            }
            steps += 1;
            trace.push(f);
        }
        if st.residual() <= target || (st.entering.is_empty() && st.opening.is_empty()) {
            break;
        }
        let eps = T::lit(INJECT);
        let (kept_rows, kept_m) = (rows.clone(), m.clone());
        for &(s, a, wanted) in &st.entering {
            let v = if wanted.is_finite() && wanted > T::zero() { wanted.min(T::lit(0.5)) } else { eps };
            rows.set(s, a, v);
        }
        for (a, q) in &st.opening {
            for s in 0..rows.n_rows() {
                rows.set(s, *a, eps * q[s]);
            }
        }
        renormalize_rows(rows);
        *m = induced_marginal(&red.prior, rows)?;
        let injected = red.objective(gen, beta, rows, m);
        if injected > f + T::lit(1e-13) * (T::one() + f.abs()) {
            // A best-response injection can overshoot when the column is thin and
            // Newton would pin the entry back at zero; a descent step releases it
            // without giving up monotonicity.
            let (mut r, mut mm) = (kept_rows, kept_m);
            if fallback_step(gen, red, beta, target, &mut r, &mut mm, &mut f, &mut st)? {
                *rows = r;
                *m = mm;
                steps += 1;
                trace.push(f);
            } else {
                trace.push(injected);
            }
        } else {
            trace.push(injected);
        }
    }
    Ok(steps)
}

/// One backtracking projected-gradient step, used where Newton cannot move.
#[allow(clippy::too_many_arguments)]
fn fallback_step<T: Scalar>(
    gen: &Generator<T>,
    red: &Reduced<T>,
    beta: T,
    target: T,
    rows: &mut Table<T>,
    m: &mut Vec<T>,
    f: &mut T,
    st: &mut Stationarity<T>,
) -> Result<bool> {
    let Some((cand, cm, cf)) = descent_step(gen, red, beta, rows, m, *f)? else {
        return Ok(false);
    };
    *st = stationarity(gen, beta, &red.prior, &red.loss, &cand, &cm, target)?;
    *rows = cand;
    *m = cm;
    *f = cf;
    Ok(true)
}

fn renormalize_rows<T: Scalar>(rows: &mut Table<T>) {
    for s in 0..rows.n_rows() {
        let row = rows.row_mut(s);
        let total: T = row.iter().copied().sum();
        row.iter_mut().for_each(|x| *x = *x / total);
    }
}

fn support_of<T: Scalar>(rows: &Table<T>, m: &[T]) -> Vec<(usize, usize)> {
    let eps = T::lit(SUPPORT_EPS);
    let mut out = Vec::new();
    for s in 0..rows.n_rows() {
        for a in 0..rows.n_cols() {
            if m[a] > T::zero() && rows.get(s, a) > eps {
                out.push((s, a));
            }
        }
    }
    out
}

/// `P(s) [l + (f'(r) + G) / beta]` on the support.
fn gradient<T: Scalar>(
    gen: &Generator<T>,
    red: &Reduced<T>,
    beta: T,
    rows: &Table<T>,
    m: &[T],
    support: &[(usize, usize)],
) -> Result<Vec<T>> {
    let g = marginal_correction_parts(gen, &red.prior, rows, m)?;
    support
        .iter()
        .map(|&(s, a)| {
            let d = match gen.f_prime(rows.get(s, a) / m[a])? {
                Ext::Finite(v) => v,
                other => other.to_float(),
            };
            Ok(red.prior[s] * (red.loss.get(s, a) + (d + g[a]) / beta))
        })
        .collect()
}

#[allow(clippy::type_complexity)]
fn newton_direction<T: Scalar>(
    gen: &Generator<T>,
    red: &Reduced<T>,
    beta: T,
    rows: &Table<T>,
    m: &[T],
) -> Result<Option<(Vec<(usize, usize)>, Vec<T>)>> {
    let support = support_of(rows, m);
    let n = support.len();
    let n_s = rows.n_rows();
    let dim = n + n_s;
    let prior = &red.prior;
    let n_a = rows.n_cols();

    // Column curvature sums W_a = sum_u P(u) r_u^2 f''(r_u).
    let mut w = vec![T::zero(); n_a];
    let mut curv = Table::filled(n_s, n_a, T::zero());
    for a in 0..n_a {
        if m[a] == T::zero() {
            continue;
        }
        for s in 0..n_s {
            let r = rows.get(s, a) / m[a];
            if r > T::zero() {
                let c = gen.f_second(r)?;
                curv.set(s, a, c);
                w[a] = w[a] + prior[s] * r * r * c;
            }
        }
    }
    let mut k = vec![T::zero(); dim * dim];
    for (i, &(s, a)) in support.iter().enumerate() {
        let rs = rows.get(s, a) / m[a];
        let fs = curv.get(s, a);
        for (j, &(t, b)) in support.iter().enumerate() {
            if b != a {
                continue;
            }
            let rt = rows.get(t, a) / m[a];
            let ft = curv.get(t, a);
            let delta = if s == t { T::one() } else { T::zero() };
            let h = prior[s] / m[a] * (fs * (delta - rs * prior[t]) - prior[t] * rt * ft + prior[t] * w[a]);
            k[i * dim + j] = h / beta;
        }
        k[i * dim + n + s] = T::one();
        k[(n + s) * dim + i] = T::one();
    }
    let diag_scale = (0..n).map(|i| k[i * dim + i].abs()).fold(T::zero(), T::max);
    let ridge = (diag_scale * T::lit(1e-13)).max(T::lit(1e-12));
    for i in 0..n {
        k[i * dim + i] = k[i * dim + i] + ridge;
    }
    let g = gradient(gen, red, beta, rows, m, &support)?;
    let mut rhs: Vec<T> = g.iter().map(|&v| -v).collect();
    rhs.extend(std::iter::repeat_n(T::zero(), n_s));
    let Some(x) = solve_dense(dim, &mut k, &mut rhs) else {
        return Ok(None);
    };
    Ok(Some((support, x[..n].to_vec())))
}
