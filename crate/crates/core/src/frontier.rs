//! Lower and certificate curves over beta grids, and re-evaluation of the
//! same channels in a reference information coordinate.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ext::Ext;
use crate::generators::Generator;
use crate::problem::{expected_loss, f_mutual_information, Channel, DiscreteProblem};
use crate::scalar::Scalar;
use crate::solver::{solve_f, Init, SolveConfig};

/// Tolerance for the monotonicity flags.
pub const MONOTONE_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound(serialize = "T: Scalar + Serialize"))]
pub struct OperatingPoint<T> {
    pub beta: T,
    pub info_native: T,
    pub loss: T,
    pub certificate: T,
    /// Information of the same channel under reference generators, by id.
    /// `None` marks an infinite reference divergence.
    pub info_projected: BTreeMap<String, Option<T>>,
    pub converged: bool,
    #[serde(skip)]
    pub channel: Option<Channel<T>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound(serialize = "T: Scalar + Serialize"))]
pub struct FrontierCurve<T> {
    pub generator: String,
    pub points: Vec<OperatingPoint<T>>,
    pub problem_hash: String,
    /// Betas whose solve failed, with the error text.
    pub failures: Vec<(T, String)>,
    /// Indices `i` where the step from point `i` to `i + 1` breaks
    /// monotonicity beyond tolerance.
    pub non_monotone: Vec<usize>,
}

impl<T: Scalar> FrontierCurve<T> {
    pub fn is_monotone(&self) -> bool {
        self.non_monotone.is_empty()
    }

    /// Horizontal coordinates in the named reference plane.
    pub fn projected(&self, id: &str) -> Vec<Option<T>> {
        self.points
            .iter()
            .map(|p| p.info_projected.get(id).copied().flatten())
            .collect()
    }
}

/// Geometric grid of `n` points from `lo` to `hi` inclusive.
pub fn geometric_grid<T: Scalar>(lo: T, hi: T, n: usize) -> Result<Vec<T>> {
    if !(lo > T::zero() && hi >= lo && n >= 1) {
        return Err(Error::Invalid(format!("bad grid: lo={lo} hi={hi} n={n}")));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    let ratio = (hi / lo).ln() / T::from_usize(n - 1).unwrap();
    Ok((0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                lo * (ratio * T::from_usize(i).unwrap()).exp()
            }
        })
        .collect())
}

/// Stable FNV-1a fingerprint of the problem's JSON form.
pub fn problem_hash<T: Scalar + Serialize>(problem: &DiscreteProblem<T>) -> String {
    let text = serde_json::to_string(problem).unwrap_or_default();
    let mut h: u64 = 0xcbf29ce484222325;
    for b in text.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    format!("{h:016x}")
}

/// Solves along an ascending beta grid with warm starts and records every
/// operating point. Channels are kept unless `keep_channels` is false.
pub fn trace<T: Scalar + Serialize>(
    gen: &Generator<T>,
    problem: &DiscreteProblem<T>,
    beta_grid: &[T],
    config: &SolveConfig<T>,
    keep_channels: bool,
) -> Result<FrontierCurve<T>> {
    if beta_grid.is_empty() {
        return Err(Error::Invalid("beta grid is empty".into()));
    }
    if beta_grid.iter().any(|&b| !(b > T::zero() && b.is_finite())) {
        return Err(Error::Invalid("beta grid must be positive and finite".into()));
    }
    if beta_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Invalid("beta grid must be strictly ascending".into()));
    }
    let mut points = Vec::with_capacity(beta_grid.len());
    let mut failures = Vec::new();
    let mut warm: Option<Channel<T>> = None;
    for &beta in beta_grid {
        let mut cfg = config.clone().with_beta(beta);
        if let Some(w) = &warm {
            cfg.init = Init::WarmStart(w.clone());
        }
        match solve_point(gen, problem, &cfg) {
            Ok(mut point) => {
                warm = point.channel.clone();
                if !keep_channels {
                    point.channel = None;
                }
                points.push(point);
            }
            Err(e) => failures.push((beta, e.to_string())),
        }
    }
    let non_monotone = monotonicity_flags(&points);
    Ok(FrontierCurve {
        generator: gen.id().to_string(),
        points,
        problem_hash: problem_hash(problem),
        failures,
        non_monotone,
    })
}

fn solve_point<T: Scalar>(gen: &Generator<T>, problem: &DiscreteProblem<T>, cfg: &SolveConfig<T>) -> Result<OperatingPoint<T>> {
    let report = solve_f(gen, problem, cfg)?;
    let loss = expected_loss(problem, &report.channel)?;
    let info = finite_info(gen, problem, &report.channel)?;
    Ok(OperatingPoint {
        beta: cfg.beta,
        info_native: info,
        loss,
        certificate: loss + info / cfg.beta,
        info_projected: BTreeMap::new(),
        converged: report.converged,
        channel: Some(report.channel),
    })
}

fn finite_info<T: Scalar>(gen: &Generator<T>, problem: &DiscreteProblem<T>, channel: &Channel<T>) -> Result<T> {
    f_mutual_information(gen, problem, channel)?
        .finite()
        .ok_or_else(|| Error::numeric("frontier", "native information is infinite at a solved point"))
}

fn monotonicity_flags<T: Scalar>(points: &[OperatingPoint<T>]) -> Vec<usize> {
    let tol = T::lit(MONOTONE_TOL);
    points
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[1].info_native < w[0].info_native - tol || w[1].loss > w[0].loss + tol)
        .map(|(i, _)| i)
        .collect()
}

/// Re-evaluates every retained channel under `reference`. Loss and
/// certificate are untouched.
pub fn project<T: Scalar>(curve: &FrontierCurve<T>, problem: &DiscreteProblem<T>, reference: &Generator<T>) -> Result<FrontierCurve<T>> {
    let mut out = curve.clone();
    for point in &mut out.points {
        let channel = point
            .channel
            .as_ref()
            .ok_or_else(|| Error::Invalid("projection needs the channels retained by trace".into()))?;
        let value = match f_mutual_information(reference, problem, channel)? {
            Ext::Finite(v) => Some(v),
            _ => None,
        };
        point.info_projected.insert(reference.id().to_string(), value);
    }
    Ok(out)
}

/// Bounds on the smallest native information attaining a given loss.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MatchedInfo<T> {
    pub loss: T,
    /// From tangent lines `I >= I_k - beta_k (L - L_k)` of solved points.
    pub lower: T,
    /// From the chord between the two bracketing solved points.
    pub upper: T,
    pub solves: usize,
}

/// Brackets the native frontier `I*(L)` at `target_loss` using solved
/// points, refining beta by geometric bisection until the chord bound
/// drops below `accept` or the bracket cannot shrink further.
pub fn native_info_at_loss<T: Scalar>(
    gen: &Generator<T>,
    problem: &DiscreteProblem<T>,
    curve: &FrontierCurve<T>,
    target_loss: T,
    accept: T,
    config: &SolveConfig<T>,
) -> Result<MatchedInfo<T>> {
    let mut pts: Vec<(T, T, T)> = curve.points.iter().map(|p| (p.beta, p.loss, p.info_native)).collect();
    // Solved losses carry solver error; at large beta the curve flattens onto
    // the minimum loss and a target there can sit a few ulps below every point.
    let slack = config.tol.max(T::lit(64.0) * T::epsilon()) * (T::one() + target_loss.abs());
    if pts.is_empty() {
        return Err(Error::Invalid("curve has no points".into()));
    }
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut solves = 0;
    let solve = |beta: T, solves: &mut usize| -> Result<(T, T, T)> {
        *solves += 1;
        let p = solve_point(gen, problem, &config.clone().with_beta(beta))?;
        Ok((beta, p.loss, p.info_native))
    };
    // Extend the grid until the target loss is bracketed.
    for _ in 0..60 {
        let first = pts[0];
        if first.1 >= target_loss || first.2 <= T::lit(1e-15) {
            break;
        }
        let p = solve(first.0 / T::lit(8.0), &mut solves)?;
        pts.insert(0, p);
    }
    for _ in 0..60 {
        let last = *pts.last().unwrap();
        if last.1 <= target_loss + slack || last.0 > T::lit(1e12) {
            break;
        }
        let p = solve(last.0 * T::lit(8.0), &mut solves)?;
        pts.push(p);
    }
    for _ in 0..80 {
        let bounds = bracket_bounds(&pts, target_loss, slack);
        if bounds.1 <= accept {
            return Ok(MatchedInfo {
                loss: target_loss,
                lower: bounds.0,
                upper: bounds.1,
                solves,
            });
        }
        let Some(k) = bracket_index(&pts, target_loss, slack) else {
            return Ok(MatchedInfo {
                loss: target_loss,
                lower: bounds.0,
                upper: bounds.1,
                solves,
            });
        };
        let (b0, b1) = (pts[k].0, pts[k + 1].0);
        let mid = (b0 * b1).sqrt();
        if !(mid > b0 && mid < b1) || b1 / b0 < T::one() + T::lit(1e-9) {
            return Ok(MatchedInfo {
                loss: target_loss,
                lower: bounds.0,
                upper: bounds.1,
                solves,
            });
        }
        let p = solve(mid, &mut solves)?;
        pts.insert(k + 1, p);
    }
    let bounds = bracket_bounds(&pts, target_loss, slack);
    Ok(MatchedInfo {
        loss: target_loss,
        lower: bounds.0,
        upper: bounds.1,
        solves,
    })
}

/// Index `k` with `L_k >= target >= L_{k+1} - slack` (ascending beta).
fn bracket_index<T: Scalar>(pts: &[(T, T, T)], target: T, slack: T) -> Option<usize> {
    (0..pts.len().saturating_sub(1)).find(|&k| pts[k].1 >= target && pts[k + 1].1 <= target + slack)
}

fn bracket_bounds<T: Scalar>(pts: &[(T, T, T)], target: T, slack: T) -> (T, T) {
    let lower = pts
        .iter()
        .map(|&(b, l, i)| i - b * (target - l + slack))
        .fold(T::zero(), T::max);
    let upper = match bracket_index(pts, target, slack) {
        Some(k) => {
            let (_, l0, i0) = pts[k];
            let (_, l1, i1) = pts[k + 1];
            if l0 == l1 {
                i0.min(i1)
            } else {
                let w = ((l0 - target) / (l0 - l1)).max(T::zero()).min(T::one());
                (T::one() - w) * i0 + w * i1
            }
        }
        None => {
            // Target beyond the most regularized point: information there
            // bounds the frontier from above since I* is non-increasing.
            if target >= pts[0].1 {
                pts[0].2
            } else {
                T::infinity()
            }
        }
    };
    (lower, upper)
}

/// Native-optimality comparison at one projected point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ParetoCheck<T> {
    pub loss: T,
    pub projected_info: T,
    pub native: MatchedInfo<T>,
    /// `native.upper - projected_info`; at most the tolerance when sound.
    pub excess: T,
}

/// For every point of `foreign` (channels retained), compares its
/// information under `native` with the native frontier at the same loss.
pub fn pareto_check<T: Scalar>(
    native: &Generator<T>,
    problem: &DiscreteProblem<T>,
    native_curve: &FrontierCurve<T>,
    foreign: &FrontierCurve<T>,
    tol: T,
    config: &SolveConfig<T>,
) -> Result<Vec<ParetoCheck<T>>> {
    let projected = project(foreign, problem, native)?;
    let mut out = Vec::with_capacity(projected.points.len());
    for point in &projected.points {
        let Some(info) = point.info_projected.get(native.id()).copied().flatten() else {
            continue;
        };
        let matched = native_info_at_loss(native, problem, native_curve, point.loss, info + tol, config)?;
        out.push(ParetoCheck {
            loss: point.loss,
            projected_info: info,
            native: matched,
            excess: matched.upper - info,
        });
    }
    Ok(out)
}
