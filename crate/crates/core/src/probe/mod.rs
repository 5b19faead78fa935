//! Black-box estimation of the operating loss, average certificate, beta
//! path, native information and local hedge from intervention responses.
//!
//! Everything here works in `f64`: black boxes are external systems.

mod estimate;
mod external;
mod fit;
mod local;

pub use estimate::{
    default_t_nodes, estimate_certificate, estimate_loss, probe_record, recover_path, trapezoid, CertificateEstimate, ProbeRecord,
};
pub use external::ExternalBox;
pub use fit::{fit_generator, CandidateScore, GeneratorRanking};
pub use local::{recover_local_hedge, support_threshold, LocalHedge, LocalHedgeConfig, PerturbationResponse};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::Generator;
use crate::problem::{Channel, DiscreteProblem};
use crate::seed;
use crate::solver::{solve_f, SolveConfig};
use crate::table::Table;

/// What a black box returns for one intervention.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Response {
    /// Exact conditional rows `P(a|s)`.
    Rows(Vec<Vec<f64>>),
    /// Observed `(stimulus, action)` pairs.
    Samples(Vec<(usize, usize)>),
}

/// A system that answers a loss matrix and a control with a channel.
/// Responses must be deterministic given `(loss, control, seed)`.
pub trait BlackBox: Sync {
    fn prior(&self) -> &[f64];

    fn n_actions(&self) -> usize;

    fn respond(&self, loss: &Table<f64>, control: f64, seed: u64) -> Result<Response>;

    /// Whether `respond` may be called from several threads at once.
    fn concurrent(&self) -> bool {
        true
    }
}

/// A response turned into a channel on the declared prior, plus the joint
/// law used for plug-in averages.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub channel: Channel<f64>,
    pub joint: Table<f64>,
    pub n_samples: Option<usize>,
}

impl Observation {
    pub fn expected(&self, values: &Table<f64>) -> f64 {
        crate::scalar::compensated_sum(
            self.joint
                .as_slice()
                .iter()
                .zip(values.as_slice())
                .map(|(p, v)| p * v),
        )
    }
}

pub fn observe(bb: &dyn BlackBox, loss: &Table<f64>, control: f64, seed: u64) -> Result<Observation> {
    let prior = bb.prior();
    let n_s = prior.len();
    let n_a = bb.n_actions();
    if loss.shape() != (n_s, n_a) {
        return Err(Error::Shape(format!(
            "loss is {}x{}, box expects {n_s}x{n_a}",
            loss.n_rows(),
            loss.n_cols()
        )));
    }
    let at = format!("control={control}");
    match bb.respond(loss, control, seed)? {
        Response::Rows(rows) => {
            let rows = Table::from_rows(rows)?;
            if rows.shape() != (n_s, n_a) {
                return Err(Error::BlackBox {
                    at,
                    detail: "rows have the wrong shape".into(),
                });
            }
            let channel = Channel::new(prior, rows)?;
            let joint = Table::from_fn(n_s, n_a, |s, a| prior[s] * channel.get(s, a));
            Ok(Observation {
                channel,
                joint,
                n_samples: None,
            })
        }
        Response::Samples(pairs) => {
            if pairs.is_empty() {
                return Err(Error::BlackBox {
                    at,
                    detail: "empty sample".into(),
                });
            }
            let mut counts = Table::filled(n_s, n_a, 0.0);
            for &(s, a) in &pairs {
                if s >= n_s || a >= n_a {
                    return Err(Error::BlackBox {
                        at,
                        detail: format!("sample ({s},{a}) out of range"),
                    });
                }
                counts.set(s, a, counts.get(s, a) + 1.0);
            }
            let n = pairs.len() as f64;
            let joint = counts.map(|c| c / n);
            let action_law: Vec<f64> = (0..n_a).map(|a| (0..n_s).map(|s| counts.get(s, a)).sum::<f64>() / n).collect();
            let rows = Table::from_fn(n_s, n_a, |s, a| {
                let total: f64 = counts.row(s).iter().sum();
                if total > 0.0 {
                    counts.get(s, a) / total
                } else {
                    action_law[a]
                }
            });
            let channel = Channel::new(prior, rows)?;
            Ok(Observation {
                channel,
                joint,
                n_samples: Some(pairs.len()),
            })
        }
    }
}

/// White box: the exact regularized solver for one generator, with the
/// control acting as beta. Optionally reports samples instead of rows.
#[derive(Clone, Debug)]
pub struct SolverBox {
    gen: Generator<f64>,
    problem: DiscreteProblem<f64>,
    samples: Option<usize>,
    tol: f64,
}

impl SolverBox {
    pub fn new(gen: Generator<f64>, problem: DiscreteProblem<f64>) -> Result<Self> {
        if !gen.is_smooth() {
            return Err(Error::Unsupported {
                op: "SolverBox",
                generator: gen.to_string(),
            });
        }
        Ok(SolverBox {
            gen,
            problem,
            samples: None,
            tol: 1e-11,
        })
    }

    /// Report `n` sampled pairs per call instead of exact rows.
    pub fn with_samples(mut self, n: usize) -> Self {
        self.samples = Some(n);
        self
    }

    pub fn generator(&self) -> &Generator<f64> {
        &self.gen
    }

    pub fn problem(&self) -> &DiscreteProblem<f64> {
        &self.problem
    }

    /// Exact optimal channel for `loss` at `beta`. A zero loss is answered
    /// with the small-scale limit along this box's own task: all mass on
    /// the action with the smallest average loss.
    pub fn channel(&self, loss: &Table<f64>, beta: f64) -> Result<Channel<f64>> {
        let prior = self.problem.prior();
        if loss.as_slice().iter().all(|&v| v == 0.0) {
            let reference = self.problem.loss();
            let avg = |a: usize| (0..prior.len()).map(|s| prior[s] * reference.get(s, a)).sum::<f64>();
            let best = (0..reference.n_cols()).fold(0, |b, a| if avg(a) < avg(b) { a } else { b });
            return Channel::deterministic(prior, reference.n_cols(), &vec![best; prior.len()]);
        }
        let problem = self.problem.with_loss(loss.clone())?;
        let config = SolveConfig::new(beta).with_tol(self.tol);
        Ok(solve_f(&self.gen, &problem, &config)?.channel)
    }
}

impl BlackBox for SolverBox {
    fn prior(&self) -> &[f64] {
        self.problem.prior()
    }

    fn n_actions(&self) -> usize {
        self.problem.n_actions()
    }

    fn respond(&self, loss: &Table<f64>, control: f64, seed: u64) -> Result<Response> {
        let channel = self.channel(loss, control)?;
        match self.samples {
            None => Ok(Response::Rows(channel.rows().to_rows())),
            Some(n) => Ok(Response::Samples(sample_pairs(self.problem.prior(), &channel, n, seed))),
        }
    }
}

/// Draws `n` i.i.d. pairs from `P(s) P(a|s)`.
pub fn sample_pairs(prior: &[f64], channel: &Channel<f64>, n: usize, seed: u64) -> Vec<(usize, usize)> {
    use rand::distr::{weighted::WeightedIndex, Distribution};
    let mut rng = seed::rng(seed, &[0x5a4d]);
    let stim = WeightedIndex::new(prior).expect("prior is a distribution");
    let rows: Vec<Option<WeightedIndex<f64>>> = (0..prior.len())
        .map(|s| WeightedIndex::new(channel.rows().row(s)).ok())
        .collect();
    (0..n)
        .map(|_| {
            let s = stim.sample(&mut rng);
            let a = rows[s].as_ref().map(|d| d.sample(&mut rng)).unwrap_or(0);
            (s, a)
        })
        .collect()
}
