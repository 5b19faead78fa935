use super::experiment::LearnerSpec;
use super::{build_codebook, empirical_loss, mlp_checkpoints, soft_assign, Codebook, KernelSmoother, MlpConfig, RegressionTask};
use crate::error::{Error, Result};
use crate::probe::{BlackBox, Response};
use crate::seed::derive;
use crate::table::Table;

/// A learner seen as a black box: stimuli are fixed training samples, actions are
/// codebook entries, and the control is the learner's own operating control.
///
/// Learners only know their training loss, so the box accepts loss tables that are
/// a nonnegative multiple `t` of its reference table and trains on `t` times the
/// squared error.
pub struct LearnerBox {
    spec: LearnerSpec,
    task: RegressionTask,
    samples: Vec<Vec<f64>>,
    init_seeds: Vec<u64>,
    codebook: Codebook,
    prior: Vec<f64>,
    reference: Table<f64>,
}

impl LearnerBox {
    /// Draws `n_samples` training samples and builds a `codes`-entry codebook from
    /// `pilot` further samples run at every control in `controls` and every scale in `ts`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        spec: LearnerSpec,
        task: RegressionTask,
        n_samples: usize,
        pilot: usize,
        codes: usize,
        controls: &[f64],
        ts: &[f64],
        seed: u64,
    ) -> Result<Self> {
        if n_samples == 0 {
            return Err(Error::Invalid("a learner box needs at least one sample".into()));
        }
        let mut pool = Vec::new();
        for j in 0..pilot as u64 {
            let y = task.sample(derive(seed, &[11, j]));
            let init = derive(seed, &[12, j]);
            for &c in controls {
                for &t in ts {
                    pool.push(predict(&spec, &task, &y, c, t, init)?);
                }
            }
        }
        let codebook = build_codebook(&pool, codes, derive(seed, &[13]), None)?;
        let samples: Vec<Vec<f64>> = (0..n_samples as u64).map(|j| task.sample(derive(seed, &[14, j]))).collect();
        let init_seeds = (0..n_samples as u64).map(|j| derive(seed, &[15, j])).collect();
        let reference = Table::from_fn(n_samples, codebook.k(), |s, a| empirical_loss(&codebook.codes[a], &samples[s]));
        Ok(Self {
            spec,
            task,
            samples,
            init_seeds,
            codebook,
            prior: vec![1.0 / n_samples as f64; n_samples],
            reference,
        })
    }

    /// Mean squared error of each code on each sample: the loss the box is probed with.
    pub fn reference_loss(&self) -> &Table<f64> {
        &self.reference
    }

    pub fn codebook(&self) -> &Codebook {
        &self.codebook
    }

    fn scale_of(&self, loss: &Table<f64>) -> Result<f64> {
        let (mut num, mut den) = (0.0, 0.0);
        for (l, r) in loss.as_slice().iter().zip(self.reference.as_slice()) {
            num += l * r;
            den += r * r;
        }
        let t = num / den;
        let fits = loss
            .as_slice()
            .iter()
            .zip(self.reference.as_slice())
            .all(|(l, r)| (l - t * r).abs() <= 1e-9 * (1.0 + r.abs()));
        if !fits || t < -1e-12 {
            return Err(Error::Invalid(
                "learner boxes only accept nonnegative multiples of their reference loss".into(),
            ));
        }
        Ok(t.max(0.0))
    }
}

fn predict(spec: &LearnerSpec, task: &RegressionTask, y: &[f64], control: f64, t: f64, init: u64) -> Result<Vec<f64>> {
    match *spec {
        LearnerSpec::KernelRidge { lengthscale, .. } => {
            if t == 0.0 {
                Ok(vec![0.0; task.n()])
            } else {
                Ok(KernelSmoother::new(task, lengthscale, control / t)?.apply(y))
            }
        }
        LearnerSpec::Mlp { hidden, lr, .. } => {
            if !(control >= 0.0) || control.fract() != 0.0 {
                return Err(Error::Invalid(format!("mlp control must be a whole number of steps, got {control}")));
            }
            let config = MlpConfig {
                hidden,
                lr,
                ..MlpConfig::default()
            };
            Ok(mlp_checkpoints(task, y, &config, &[control as usize], t, init)?.remove(0))
        }
    }
}

impl BlackBox for LearnerBox {
    fn prior(&self) -> &[f64] {
        &self.prior
    }

    fn n_actions(&self) -> usize {
        self.codebook.k()
    }

    fn respond(&self, loss: &Table<f64>, control: f64, _seed: u64) -> Result<Response> {
        let t = self.scale_of(loss)?;
        let smoother = match self.spec {
            LearnerSpec::KernelRidge { lengthscale, .. } if t > 0.0 => Some(KernelSmoother::new(&self.task, lengthscale, control / t)?),
            _ => None,
        };
        let mut rows = Vec::with_capacity(self.samples.len());
        for (y, &init) in self.samples.iter().zip(&self.init_seeds) {
            let p = match &smoother {
                Some(s) => s.apply(y),
                None => predict(&self.spec, &self.task, y, control, t, init)?,
            };
            rows.push(soft_assign(&p, &self.codebook));
        }
        Ok(Response::Rows(rows))
    }
}
