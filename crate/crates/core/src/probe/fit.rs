use serde::Serialize;

use super::{LocalHedge, ProbeRecord};
use crate::error::{Error, Result};
use crate::generators::Generator;
use crate::hedge::marginal_correction_parts;
use crate::problem::induced_marginal;
use crate::solver::response_row;
use crate::table::Table;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CandidateScore {
    pub generator: String,
    /// Mean prior-weighted total variation between observed rows and the
    /// rows the candidate's indifference condition implies.
    pub score: f64,
    /// Fitted multiplier on `beta_hat` (the unit of native information).
    pub scale: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GeneratorRanking {
    /// Best first.
    pub scores: Vec<CandidateScore>,
    /// Set when the top two scores cannot be told apart.
    pub degenerate: bool,
}

impl GeneratorRanking {
    pub fn best(&self) -> &str {
        &self.scores[0].generator
    }

    /// Score gap between the runner-up and the winner.
    pub fn margin(&self) -> f64 {
        if self.scores.len() < 2 {
            return f64::INFINITY;
        }
        self.scores[1].score - self.scores[0].score
    }
}

struct Case {
    prior: Vec<f64>,
    loss: Table<f64>,
    rows: Table<f64>,
    marginal: Vec<f64>,
    beta_hat: f64,
}

/// Ranks candidate generators by how well each explains the observed base
/// and perturbed channels as its own best response. `hedges[k]` must come
/// from the operating setting of `records[k]`, after `recover_path`.
pub fn fit_generator(records: &[ProbeRecord], hedges: &[LocalHedge], candidates: &[Generator<f64>]) -> Result<GeneratorRanking> {
    if candidates.is_empty() {
        return Err(Error::Invalid("no candidate generators".into()));
    }
    if records.len() != hedges.len() || records.is_empty() {
        return Err(Error::Invalid("need one local hedge per record".into()));
    }
    let mut cases = Vec::new();
    for (r, h) in records.iter().zip(hedges) {
        if !(r.beta_hat > 0.0 && r.beta_hat.is_finite()) {
            return Err(Error::Invalid("records need beta_hat; run recover_path first".into()));
        }
        let base_loss = Table::from_rows(h.loss.clone())?;
        let mut push = |loss: Table<f64>, rows: Vec<Vec<f64>>| -> Result<()> {
            let rows = Table::from_rows(rows)?;
            let marginal = induced_marginal(&h.prior, &rows)?;
            cases.push(Case {
                prior: h.prior.clone(),
                loss,
                rows,
                marginal,
                beta_hat: r.beta_hat,
            });
            Ok(())
        };
        push(base_loss.clone(), h.rows.clone())?;
        for resp in &h.responses {
            let mut l = base_loss.clone();
            l.set(resp.s, resp.a, l.get(resp.s, resp.a) + resp.epsilon);
            push(l, resp.rows.clone())?;
        }
    }

    let mut scores: Vec<CandidateScore> = candidates
        .iter()
        .map(|g| {
            let (scale, score) = fit_scale(g, &cases);
            CandidateScore {
                generator: g.to_string(),
                score,
                scale,
            }
        })
        .collect();
    scores.sort_by(|a, b| a.score.total_cmp(&b.score));
    let degenerate = scores.len() > 1 && scores[1].score - scores[0].score < 1e-8 + 1e-2 * scores[0].score;
    Ok(GeneratorRanking { scores, degenerate })
}

/// Minimizes the mismatch over a log-grid of scales, then refines by
/// golden-section search around the best grid point.
fn fit_scale(gen: &Generator<f64>, cases: &[Case]) -> (f64, f64) {
    let eval = |log_c: f64| mismatch(gen, cases, log_c.exp());
    let grid: Vec<f64> = (0..=60).map(|i| (-4.0 + i as f64 * 8.0 / 60.0) * std::f64::consts::LN_10).collect();
    let values: Vec<f64> = grid.iter().map(|&x| eval(x)).collect();
    let k = (0..grid.len()).fold(0, |b, i| if values[i] < values[b] { i } else { b });
    let mut lo = grid[k.saturating_sub(1)];
    let mut hi = grid[(k + 1).min(grid.len() - 1)];
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let mut f1 = eval(x1);
    let mut f2 = eval(x2);
    for _ in 0..60 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = eval(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = eval(x2);
        }
    }
    let (x, f) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    if values[k] < f {
        (grid[k].exp(), values[k])
    } else {
        (x.exp(), f)
    }
}

fn mismatch(gen: &Generator<f64>, cases: &[Case], scale: f64) -> f64 {
    let mut total = 0.0;
    for case in cases {
        let beta = scale * case.beta_hat;
        let Ok(g) = marginal_correction_parts(gen, &case.prior, &case.rows, &case.marginal) else {
            total += 1.0;
            continue;
        };
        let mut tv = 0.0;
        for s in 0..case.rows.n_rows() {
            let shifted: Vec<f64> = (0..case.marginal.len())
                .map(|a| case.loss.get(s, a) + g[a] / beta)
                .collect();
            let d = match response_row(gen, &case.marginal, &shifted, beta) {
                Ok(q) => 0.5 * q.iter().zip(case.rows.row(s)).map(|(x, y)| (x - y).abs()).sum::<f64>(),
                Err(_) => 1.0,
            };
            tv += case.prior[s] * d;
        }
        total += tv;
    }
    total / cases.len() as f64
}
