//! End-to-end regression experiment: Monte Carlo training samples, a shared
//! prediction codebook, loss-scaling certificates, path recovery, the Shannon
//! projection, and bootstrap bands.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{build_codebook, empirical_loss, mlp_checkpoints, soft_assign, Codebook, KernelSmoother, MlpConfig, RegressionTask};
use crate::error::{Error, Result};
use crate::probe::{default_t_nodes, recover_path, trapezoid, ProbeRecord};
use crate::seed::derive;

const TAG_PILOT: u64 = 1;
const TAG_PILOT_INIT: u64 = 2;
const TAG_CODEBOOK: u64 = 3;
const TAG_MC: u64 = 4;
const TAG_MC_INIT: u64 = 5;
const TAG_BOOT: u64 = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Desk,
    Paper,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearnerSpec {
    /// Control: ridge, from `ridge_max` (most regularized) down to `ridge_min`.
    KernelRidge { lengthscale: f64, ridge_max: f64, ridge_min: f64 },
    /// Control: Adam steps, from `steps_min` up to `steps_max`.
    Mlp { hidden: usize, lr: f64, steps_min: usize, steps_max: usize },
}

impl LearnerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            LearnerSpec::KernelRidge { .. } => "kernel_ridge",
            LearnerSpec::Mlp { .. } => "mlp",
        }
    }

    /// Control values ordered from most to least regularized.
    pub fn controls(&self, count: usize) -> Vec<f64> {
        match *self {
            LearnerSpec::KernelRidge { ridge_max, ridge_min, .. } => geometric(ridge_max, ridge_min, count),
            LearnerSpec::Mlp { steps_min, steps_max, .. } => {
                let mut s: Vec<f64> = geometric(steps_min as f64, steps_max as f64, count)
                    .into_iter()
                    .map(f64::round)
                    .collect();
                s.dedup();
                s
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            LearnerSpec::KernelRidge { lengthscale, ridge_max, ridge_min } => {
                if !(lengthscale > 0.0 && ridge_min > 0.0 && ridge_max > ridge_min) {
                    return Err(Error::Invalid("kernel_ridge needs lengthscale > 0 and ridge_max > ridge_min > 0".into()));
                }
            }
            LearnerSpec::Mlp { hidden, lr, steps_min, steps_max } => {
                if hidden == 0 || !(lr > 0.0) || steps_min == 0 || steps_max <= steps_min {
                    return Err(Error::Invalid("mlp needs hidden > 0, lr > 0 and steps_max > steps_min >= 1".into()));
                }
            }
        }
        Ok(())
    }
}

fn geometric(from: f64, to: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![from];
    }
    let r = (to / from).ln() / (count - 1) as f64;
    (0..count).map(|i| from * (r * i as f64).exp()).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scale: Scale,
    pub n: usize,
    pub noise_sd: f64,
    pub mc: usize,
    pub pilot: usize,
    pub bootstrap: usize,
    pub controls: usize,
    pub codes: usize,
    pub t_nodes: usize,
    /// Soft-assignment temperature; the median code distance over sqrt(2) when absent.
    pub temperature: Option<f64>,
    /// `beta` assigned to the least regularized setting of each learner.
    pub anchor_beta: f64,
    pub seed: u64,
    pub learners: Vec<LearnerSpec>,
}

impl ExperimentConfig {
    pub fn for_scale(scale: Scale) -> Self {
        let (mc, pilot, bootstrap, controls, codes) = match scale {
            Scale::Desk => (200, 8, 50, 10, 64),
            Scale::Paper => (2000, 64, 200, 30, 200),
        };
        Self {
            scale,
            n: 100,
            noise_sd: 0.15,
            mc,
            pilot,
            bootstrap,
            controls,
            codes,
            t_nodes: 9,
            temperature: None,
            anchor_beta: 1.0,
            seed: 0,
            learners: vec![
                LearnerSpec::Mlp {
                    hidden: 32,
                    lr: 1e-3,
                    steps_min: 25,
                    steps_max: 3200,
                },
                LearnerSpec::KernelRidge {
                    lengthscale: 0.22,
                    ridge_max: 300.0,
                    ridge_min: 0.3,
                },
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mc < 2 {
            return Err(Error::Invalid(format!("mc must be at least 2, got {}", self.mc)));
        }
        if self.controls < 2 {
            return Err(Error::Invalid(format!("controls must be at least 2, got {}", self.controls)));
        }
        if self.t_nodes < 2 {
            return Err(Error::Invalid(format!("t_nodes must be at least 2, got {}", self.t_nodes)));
        }
        if self.pilot == 0 || self.codes < 2 {
            return Err(Error::Invalid("pilot must be positive and codes at least 2".into()));
        }
        if !(self.anchor_beta > 0.0 && self.anchor_beta.is_finite()) {
            return Err(Error::Invalid(format!("anchor_beta must be positive, got {}", self.anchor_beta)));
        }
        if self.temperature.is_some_and(|t| !(t > 0.0)) {
            return Err(Error::Invalid("temperature must be positive".into()));
        }
        if self.learners.is_empty() {
            return Err(Error::Invalid("no learners configured".into()));
        }
        RegressionTask::new(self.n, self.noise_sd)?;
        self.learners.iter().try_for_each(LearnerSpec::validate)
    }
}

/// 5/10/90/95 percentiles of a bootstrap distribution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Band {
    pub p05: f64,
    pub p10: f64,
    pub p90: f64,
    pub p95: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurveRow {
    pub learner: String,
    pub control: f64,
    pub beta_hat: f64,
    /// `beta_hat * (L_adv - L)`: native information per observation.
    pub i_native: f64,
    /// `I(S;A)/n` from the same response laws.
    pub i_shannon_per_n: f64,
    pub loss: f64,
    pub certificate: f64,
    pub beta_band: Band,
    pub native_band: Band,
    pub shannon_band: Band,
    pub loss_band: Band,
    pub certificate_band: Band,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub curves: Vec<CurveRow>,
    pub codebook_size: usize,
    pub temperature: f64,
    /// Per learner, bootstrap resamples whose path could not be recovered.
    pub bootstrap_failures: BTreeMap<String, usize>,
    /// Seconds per stage.
    pub timings: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl ExperimentReport {
    fn empty(config: &ExperimentConfig) -> Self {
        Self {
            config: config.clone(),
            curves: Vec::new(),
            codebook_size: 0,
            temperature: f64::NAN,
            bootstrap_failures: BTreeMap::new(),
            timings: BTreeMap::new(),
            notes: vec![
                "mlp weights and biases start from U(-1/sqrt(fan_in), 1/sqrt(fan_in)), one draw per Monte Carlo sample shared across loss scales and checkpoints".into(),
                "pilot predictions come from every learner, control and loss scale on separate pilot samples".into(),
                "the training loss is scaled by t; for kernel ridge this is ridge/t, for the network the gradient is scaled before Adam".into(),
            ],
        }
    }
}

/// A failed stage, with everything computed before it.
#[derive(Debug)]
pub struct ExperimentFailure {
    pub stage: String,
    pub error: Error,
    pub partial: ExperimentReport,
}

impl std::fmt::Display for ExperimentFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "experiment stage {} failed: {}", self.stage, self.error)
    }
}

impl std::error::Error for ExperimentFailure {}

/// Predictions of one learner on one sample: `[control][t]`.
enum Learner {
    Kernel { smoothers: Vec<Vec<Option<KernelSmoother>>> },
    Net { config: MlpConfig, steps: Vec<usize> },
}

impl Learner {
    fn build(spec: &LearnerSpec, task: &RegressionTask, controls: &[f64], ts: &[f64]) -> Result<Self> {
        Ok(match *spec {
            LearnerSpec::KernelRidge { lengthscale, .. } => {
                let smoothers = controls
                    .iter()
                    .map(|&ridge| {
                        ts.iter()
                            .map(|&t| if t == 0.0 { Ok(None) } else { KernelSmoother::new(task, lengthscale, ridge / t).map(Some) })
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()?;
                Learner::Kernel { smoothers }
            }
            LearnerSpec::Mlp { hidden, lr, .. } => Learner::Net {
                config: MlpConfig {
                    hidden,
                    lr,
                    ..MlpConfig::default()
                },
                steps: controls.iter().map(|&c| c as usize).collect(),
            },
        })
    }

    fn predict(&self, task: &RegressionTask, y: &[f64], ts: &[f64], init_seed: u64) -> Result<Vec<Vec<Vec<f64>>>> {
        match self {
            Learner::Kernel { smoothers } => Ok(smoothers
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|s| s.as_ref().map_or_else(|| vec![0.0; task.n()], |s| s.apply(y)))
                        .collect()
                })
                .collect()),
            Learner::Net { config, steps } => {
                let by_t: Vec<Vec<Vec<f64>>> = ts
                    .iter()
                    .map(|&t| mlp_checkpoints(task, y, config, steps, t, init_seed))
                    .collect::<Result<_>>()?;
                Ok((0..steps.len()).map(|c| by_t.iter().map(|v| v[c].clone()).collect()).collect())
            }
        }
    }
}

/// Per-sample summaries for one learner: expected empirical loss `[control][t]` and
/// the response row at `t = 1` for each control.
struct SampleSummary {
    loss: Vec<Vec<f64>>,
    rows: Vec<Vec<f64>>,
}

struct Point {
    loss: f64,
    certificate: f64,
    beta: f64,
    native: f64,
    shannon: f64,
}

fn aggregate(
    data: &[Vec<SampleSummary>],
    learner: usize,
    idx: &[usize],
    controls: &[f64],
    ts: &[f64],
    n: usize,
    anchor: f64,
) -> (Vec<Point>, Option<Error>) {
    let m = idx.len() as f64;
    let mut points = Vec::with_capacity(controls.len());
    let mut records = Vec::with_capacity(controls.len());
    for (c, &control) in controls.iter().enumerate() {
        let nodes: Vec<(f64, f64)> = ts
            .iter()
            .enumerate()
            .map(|(k, &t)| (t, idx.iter().map(|&j| data[j][learner].loss[c][k]).sum::<f64>() / m))
            .collect();
        let loss = nodes.last().unwrap().1;
        let certificate = trapezoid(&nodes);
        let k = data[idx[0]][learner].rows[c].len();
        let mut marginal = vec![0.0; k];
        for &j in idx {
            for (acc, v) in marginal.iter_mut().zip(&data[j][learner].rows[c]) {
                *acc += v / m;
            }
        }
        let info: f64 = idx
            .iter()
            .map(|&j| {
                data[j][learner].rows[c]
                    .iter()
                    .zip(&marginal)
                    .filter(|(q, _)| **q > 0.0)
                    .map(|(q, p)| q * (q / p).ln())
                    .sum::<f64>()
            })
            .sum::<f64>()
            / m;
        records.push(ProbeRecord {
            control,
            loss_hat: loss,
            certificate_hat: certificate,
            beta_hat: f64::NAN,
            info_hat: f64::NAN,
            quadrature_nodes: nodes,
        });
        points.push(Point {
            loss,
            certificate,
            beta: f64::NAN,
            native: f64::NAN,
            shannon: info / n as f64,
        });
    }
    match recover_path(&records, anchor) {
        Ok(rec) => {
            for (p, r) in points.iter_mut().zip(rec) {
                p.beta = r.beta_hat;
                p.native = r.info_hat;
            }
            (points, None)
        }
        Err(e) => (points, Some(e)),
    }
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn band(values: impl Iterator<Item = f64>) -> Band {
    let mut v: Vec<f64> = values.filter(|x| x.is_finite()).collect();
    v.sort_by(f64::total_cmp);
    Band {
        p05: percentile(&v, 0.05),
        p10: percentile(&v, 0.10),
        p90: percentile(&v, 0.90),
        p95: percentile(&v, 0.95),
    }
}

fn summarize(codebook: &Codebook, preds: &[Vec<Vec<f64>>], y: &[f64], t_one: usize) -> SampleSummary {
    let code_loss: Vec<f64> = codebook.codes.iter().map(|c| empirical_loss(c, y)).collect();
    let mut loss = Vec::with_capacity(preds.len());
    let mut rows = Vec::with_capacity(preds.len());
    for per_t in preds {
        let mut lt = Vec::with_capacity(per_t.len());
        for (k, p) in per_t.iter().enumerate() {
            let w = soft_assign(p, codebook);
            lt.push(w.iter().zip(&code_loss).map(|(a, b)| a * b).sum());
            if k == t_one {
                rows.push(w);
            }
        }
        loss.push(lt);
    }
    SampleSummary { loss, rows }
}

/// Runs the full experiment. Stages: config, pilot, codebook, monte_carlo,
/// path_recovery, bootstrap.
pub fn run_experiment(config: &ExperimentConfig) -> std::result::Result<ExperimentReport, Box<ExperimentFailure>> {
    let mut report = ExperimentReport::empty(config);
    let fail = |stage: &str, error: Error, partial: &ExperimentReport| {
        Box::new(ExperimentFailure {
            stage: stage.into(),
            error,
            partial: partial.clone(),
        })
    };
    if let Err(e) = config.validate() {
        return Err(fail("config", e, &report));
    }
    let task = RegressionTask::new(config.n, config.noise_sd).expect("validated");
    let ts = default_t_nodes(config.t_nodes);
    let t_one = ts.len() - 1;
    let controls: Vec<Vec<f64>> = config.learners.iter().map(|l| l.controls(config.controls)).collect();
    let learners: Vec<Learner> = match config
        .learners
        .iter()
        .zip(&controls)
        .map(|(l, c)| Learner::build(l, &task, c, &ts))
        .collect::<Result<_>>()
    {
        Ok(l) => l,
        Err(e) => return Err(fail("config", e, &report)),
    };

    // pilot predictions from every learner, control and loss scale
    let clock = Instant::now();
    let pilots: Result<Vec<Vec<f64>>> = (0..config.pilot)
        .into_par_iter()
        .map(|j| {
            let y = task.sample(derive(config.seed, &[TAG_PILOT, j as u64]));
            let init = derive(config.seed, &[TAG_PILOT_INIT, j as u64]);
            let mut out = Vec::new();
            for l in &learners {
                for per_t in l.predict(&task, &y, &ts, init)? {
                    out.extend(per_t);
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()
        .map(|v| v.into_iter().flatten().collect());
    let pilots = match pilots {
        Ok(p) => p,
        Err(e) => return Err(fail("pilot", e, &report)),
    };
    report.timings.insert("pilot".into(), clock.elapsed().as_secs_f64());

    let clock = Instant::now();
    let codebook = match build_codebook(&pilots, config.codes, derive(config.seed, &[TAG_CODEBOOK]), config.temperature) {
        Ok(c) => c,
        Err(e) => return Err(fail("codebook", e, &report)),
    };
    report.codebook_size = codebook.k();
    report.temperature = codebook.temperature;
    report.timings.insert("codebook".into(), clock.elapsed().as_secs_f64());

    let clock = Instant::now();
    let data: Result<Vec<Vec<SampleSummary>>> = (0..config.mc)
        .into_par_iter()
        .map(|j| {
            let y = task.sample(derive(config.seed, &[TAG_MC, j as u64]));
            let init = derive(config.seed, &[TAG_MC_INIT, j as u64]);
            learners
                .iter()
                .map(|l| Ok(summarize(&codebook, &l.predict(&task, &y, &ts, init)?, &y, t_one)))
                .collect()
        })
        .collect();
    let data = match data {
        Ok(d) => d,
        Err(e) => return Err(fail("monte_carlo", e, &report)),
    };
    report.timings.insert("monte_carlo".into(), clock.elapsed().as_secs_f64());

    let clock = Instant::now();
    let all: Vec<usize> = (0..config.mc).collect();
    let mut points = Vec::new();
    for (li, spec) in config.learners.iter().enumerate() {
        let (p, err) = aggregate(&data, li, &all, &controls[li], &ts, config.n, config.anchor_beta);
        if let Some(e) = err {
            let mut partial = report.clone();
            partial.curves = rows_without_bands(&config.learners[..li], &controls, &points);
            partial.curves.extend(rows_without_bands(std::slice::from_ref(spec), &controls[li..], std::slice::from_ref(&p)));
            return Err(fail("path_recovery", Error::numeric(spec.name(), e.to_string()), &partial));
        }
        points.push(p);
    }
    report.timings.insert("path_recovery".into(), clock.elapsed().as_secs_f64());
    report.curves = rows_without_bands(&config.learners, &controls, &points);

    let clock = Instant::now();
    let boots: Vec<Vec<(Vec<Point>, bool)>> = (0..config.bootstrap)
        .into_par_iter()
        .map(|b| {
            let mut rng = crate::seed::rng(config.seed, &[TAG_BOOT, b as u64]);
            let idx: Vec<usize> = (0..config.mc).map(|_| rng.random_range(0..config.mc)).collect();
            (0..config.learners.len())
                .map(|li| {
                    let (p, err) = aggregate(&data, li, &idx, &controls[li], &ts, config.n, config.anchor_beta);
                    (p, err.is_some())
                })
                .collect()
        })
        .collect();
    let mut row = 0;
    for (li, spec) in config.learners.iter().enumerate() {
        let failures = boots.iter().filter(|b| b[li].1).count();
        report.bootstrap_failures.insert(spec.name().into(), failures);
        for c in 0..controls[li].len() {
            let pick = |f: fn(&Point) -> f64| band(boots.iter().map(move |b| f(&b[li].0[c])));
            let r = &mut report.curves[row];
            r.beta_band = pick(|p| p.beta);
            r.native_band = pick(|p| p.native);
            r.shannon_band = pick(|p| p.shannon);
            r.loss_band = pick(|p| p.loss);
            r.certificate_band = pick(|p| p.certificate);
            row += 1;
        }
    }
    report.timings.insert("bootstrap".into(), clock.elapsed().as_secs_f64());
    Ok(report)
}

fn rows_without_bands(specs: &[LearnerSpec], controls: &[Vec<f64>], points: &[Vec<Point>]) -> Vec<CurveRow> {
    let nan = Band {
        p05: f64::NAN,
        p10: f64::NAN,
        p90: f64::NAN,
        p95: f64::NAN,
    };
    let mut out = Vec::new();
    for ((spec, ctrl), pts) in specs.iter().zip(controls).zip(points) {
        for (&control, p) in ctrl.iter().zip(pts) {
            out.push(CurveRow {
                learner: spec.name().into(),
                control,
                beta_hat: p.beta,
                i_native: p.native,
                i_shannon_per_n: p.shannon,
                loss: p.loss,
                certificate: p.certificate,
                beta_band: nan,
                native_band: nan,
                shannon_band: nan,
                loss_band: nan,
                certificate_band: nan,
            });
        }
    }
    out
}
