use serde::Serialize;

use super::{estimate_certificate, observe, BlackBox, Observation};
use crate::error::{Error, Result};
use crate::table::Table;

/// `P(a|s)` above this counts as on the support: `max(1e-3, 5/n)`, or
/// `1e-3` for exact rows.
pub fn support_threshold(n_samples: Option<usize>) -> f64 {
    match n_samples {
        Some(n) if n > 0 => (5.0 / n as f64).max(1e-3),
        _ => 1e-3,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocalHedgeConfig {
    pub epsilon: f64,
    /// `(s, a)` coordinates to perturb; `None` means all of them.
    pub directions: Option<Vec<(usize, usize)>>,
    /// Certificate gap to fix the aggregate constant; estimated with
    /// `t_nodes` when absent.
    pub gap: Option<f64>,
    pub t_nodes: Vec<f64>,
    pub seed: u64,
}

impl Default for LocalHedgeConfig {
    fn default() -> Self {
        LocalHedgeConfig {
            epsilon: 1e-3,
            directions: None,
            gap: None,
            t_nodes: super::default_t_nodes(9),
            seed: 0,
        }
    }
}

/// First-order channel response to `l + eps e_{sa}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PerturbationResponse {
    pub s: usize,
    pub a: usize,
    pub epsilon: f64,
    /// Observed rows under the perturbed loss.
    pub rows: Vec<Vec<f64>>,
    /// `(rows(eps) - rows(0)) / eps`.
    pub derivative: Vec<Vec<f64>>,
    /// Whether the `eps` and `eps/2` responses agree within 10%.
    pub linear: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LocalHedge {
    pub control: f64,
    pub prior: Vec<f64>,
    pub loss: Vec<Vec<f64>>,
    pub rows: Vec<Vec<f64>>,
    /// Detected support per stimulus.
    pub support: Vec<Vec<usize>>,
    /// Recovered `C_s(a)` on the support, `None` off it.
    pub hedge: Vec<Vec<Option<f64>>>,
    /// The certificate gap that fixes `sum P(s,a) C_s(a)`.
    pub gap: f64,
    pub responses: Vec<PerturbationResponse>,
    pub warnings: Vec<String>,
}

impl LocalHedge {
    /// `C_s(a) - C_s(a')` for on-support pairs, equal to `l(s,a') - l(s,a)`.
    pub fn difference(&self, s: usize, a: usize, b: usize) -> Option<f64> {
        Some(self.hedge[s][a]? - self.hedge[s][b]?)
    }

    /// `sum P(s,a) C_s(a)` over the observed joint on the support.
    pub fn aggregate(&self) -> f64 {
        let mut acc = 0.0;
        for (s, row) in self.hedge.iter().enumerate() {
            for (a, c) in row.iter().enumerate() {
                if let Some(c) = c {
                    acc += self.prior[s] * self.rows[s][a] * c;
                }
            }
        }
        acc
    }
}

/// Hedge differences from the indifference condition on the detected
/// support, with stimulus-wise constants chosen so that each stimulus
/// carries the same share of the certificate gap. Then probes the channel
/// response to small coordinate perturbations of the loss.
pub fn recover_local_hedge(bb: &dyn BlackBox, loss: &Table<f64>, control: f64, config: &LocalHedgeConfig) -> Result<LocalHedge> {
    if !(config.epsilon > 0.0 && config.epsilon.is_finite()) {
        return Err(Error::Invalid(format!("epsilon must be positive, got {}", config.epsilon)));
    }
    let base = observe(bb, loss, control, config.seed)?;
    let gap = match config.gap {
        Some(g) => g,
        None => {
            let est = estimate_certificate(bb, loss, control, &config.t_nodes, config.seed)?;
            est.certificate - est.loss
        }
    };
    let prior = bb.prior().to_vec();
    let (n_s, n_a) = loss.shape();
    let threshold = support_threshold(base.n_samples);
    let mut support = Vec::with_capacity(n_s);
    let mut hedge = Vec::with_capacity(n_s);
    let mut warnings = Vec::new();
    let mass: f64 = (0..n_s)
        .map(|s| {
            let row_mass: f64 = (0..n_a)
                .filter(|&a| base.channel.get(s, a) > threshold)
                .map(|a| base.channel.get(s, a))
                .sum();
            prior[s] * row_mass
        })
        .sum();
    for s in 0..n_s {
        let sup: Vec<usize> = (0..n_a).filter(|&a| base.channel.get(s, a) > threshold).collect();
        let row_mass: f64 = sup.iter().map(|&a| base.channel.get(s, a)).sum();
        let row_loss: f64 = if row_mass > 0.0 {
            sup.iter().map(|&a| base.channel.get(s, a) * loss.get(s, a)).sum::<f64>() / row_mass
        } else {
            0.0
        };
        // kappa_s - l(s,a) on the support; kappa_s = gap / mass + row loss
        // makes sum P(s,a) C = gap over the support mass.
        let kappa = if mass > 0.0 { gap / mass } else { 0.0 } + row_loss;
        let mut row = vec![None; n_a];
        for &a in &sup {
            row[a] = Some(kappa - loss.get(s, a));
        }
        support.push(sup);
        hedge.push(row);
    }
    if support.iter().all(|s| s.len() <= 1) {
        warnings.push("every detected support is a singleton; hedge differences are empty".into());
    }

    let directions: Vec<(usize, usize)> = match &config.directions {
        Some(d) => d.clone(),
        None => (0..n_s).flat_map(|s| (0..n_a).map(move |a| (s, a))).collect(),
    };
    let mut responses = Vec::with_capacity(directions.len());
    for &(s, a) in &directions {
        if s >= n_s || a >= n_a {
            return Err(Error::Shape(format!("direction ({s},{a}) is out of range")));
        }
        let full = perturbed(bb, loss, control, config.seed, s, a, config.epsilon)?;
        let half = perturbed(bb, loss, control, config.seed, s, a, 0.5 * config.epsilon)?;
        let d_full = derivative(&base, &full, config.epsilon);
        let d_half = derivative(&base, &half, 0.5 * config.epsilon);
        let scale = d_half.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let diff = d_full
            .as_slice()
            .iter()
            .zip(d_half.as_slice())
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        let linear = diff <= 0.1 * scale || diff <= 1e-9 / config.epsilon;
        if !linear {
            warnings.push(format!(
                "response to direction ({s},{a}) is nonlinear at epsilon={}; consider a smaller step",
                config.epsilon
            ));
        }
        responses.push(PerturbationResponse {
            s,
            a,
            epsilon: config.epsilon,
            rows: full.channel.rows().to_rows(),
            derivative: d_full.to_rows(),
            linear,
        });
    }
    Ok(LocalHedge {
        control,
        prior,
        loss: loss.to_rows(),
        rows: base.channel.rows().to_rows(),
        support,
        hedge,
        gap,
        responses,
        warnings,
    })
}

fn perturbed(bb: &dyn BlackBox, loss: &Table<f64>, control: f64, seed: u64, s: usize, a: usize, eps: f64) -> Result<Observation> {
    let mut l = loss.clone();
    l.set(s, a, l.get(s, a) + eps);
    observe(bb, &l, control, seed)
}

fn derivative(base: &Observation, moved: &Observation, eps: f64) -> Table<f64> {
    let b = base.channel.rows();
    let m = moved.channel.rows();
    Table::from_fn(b.n_rows(), b.n_cols(), |s, a| (m.get(s, a) - b.get(s, a)) / eps)
}
