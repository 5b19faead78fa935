//! Finite decision problems, channels, and the loss/information functionals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ext::{weighted_sum, Ext};
use crate::generators::Generator;
use crate::scalar::{compensated_sum, Scalar};
use crate::table::Table;

/// Drift allowed in a probability vector before it is rejected.
pub const SIMPLEX_TOL: f64 = 1e-9;
/// Drift beyond which an induced marginal is rescaled.
pub const MARGINAL_RENORM_TOL: f64 = 1e-12;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Labels {
    #[serde(default)]
    pub stimuli: Vec<String>,
    #[serde(default)]
    pub actions: Vec<String>,
}

/// Prior over stimuli together with a stimulus × action loss matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProblemFile<T>", into = "ProblemFile<T>")]
#[serde(bound(
    serialize = "T: Scalar + Serialize",
    deserialize = "T: Scalar + Deserialize<'de>"
))]
pub struct DiscreteProblem<T> {
    prior: Vec<T>,
    loss: Table<T>,
    labels: Option<Labels>,
}

#[derive(Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize + Clone", deserialize = "T: Deserialize<'de> + Clone"))]
struct ProblemFile<T> {
    prior: Vec<T>,
    loss: Vec<Vec<T>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Labels>,
}

impl<T: Scalar> TryFrom<ProblemFile<T>> for DiscreteProblem<T> {
    type Error = Error;

    fn try_from(file: ProblemFile<T>) -> Result<Self> {
        let loss = Table::from_rows(file.loss)?;
        let p = DiscreteProblem::new(file.prior, loss)?;
        match file.labels {
            Some(l) => p.with_labels(l),
            None => Ok(p),
        }
    }
}

impl<T: Scalar> From<DiscreteProblem<T>> for ProblemFile<T> {
    fn from(p: DiscreteProblem<T>) -> Self {
        ProblemFile {
            prior: p.prior,
            loss: p.loss.to_rows(),
            labels: p.labels,
        }
    }
}

fn simplex_tol<T: Scalar>() -> T {
    T::lit(SIMPLEX_TOL).max(T::epsilon() * T::lit(64.0))
}

/// Checks nonnegativity and unit mass, then divides out the residual drift.
pub(crate) fn normalized_distribution<T: Scalar>(what: &str, v: &[T]) -> Result<Vec<T>> {
    if v.is_empty() {
        return Err(Error::Invalid(format!("{what} is empty")));
    }
    if v.iter().any(|x| !(x.is_finite() && *x >= T::zero())) {
        return Err(Error::Invalid(format!("{what} has negative or non-finite entries")));
    }
    let sum = compensated_sum(v.iter().copied());
    if (sum - T::one()).abs() > simplex_tol() {
        return Err(Error::Invalid(format!("{what} sums to {sum}, not 1")));
    }
    Ok(v.iter().map(|&x| x / sum).collect())
}

impl<T: Scalar> DiscreteProblem<T> {
    pub fn new(prior: Vec<T>, loss: Table<T>) -> Result<Self> {
        if prior.len() != loss.n_rows() {
            return Err(Error::Shape(format!(
                "prior has {} stimuli but the loss matrix has {} rows",
                prior.len(),
                loss.n_rows()
            )));
        }
        if loss.n_cols() == 0 {
            return Err(Error::Shape("loss matrix has no actions".into()));
        }
        if loss.as_slice().iter().any(|x| !x.is_finite()) {
            return Err(Error::Invalid("loss matrix has non-finite entries".into()));
        }
        let prior = normalized_distribution("prior", &prior)?;
        Ok(DiscreteProblem { prior, loss, labels: None })
    }

    pub fn uniform_prior(loss: Table<T>) -> Result<Self> {
        let n = loss.n_rows();
        Self::new(vec![T::one() / T::from_usize(n.max(1)).unwrap(); n], loss)
    }

    pub fn with_labels(mut self, labels: Labels) -> Result<Self> {
        if !labels.stimuli.is_empty() && labels.stimuli.len() != self.n_stimuli() {
            return Err(Error::Shape("stimulus labels do not match the prior".into()));
        }
        if !labels.actions.is_empty() && labels.actions.len() != self.n_actions() {
            return Err(Error::Shape("action labels do not match the loss columns".into()));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn prior(&self) -> &[T] {
        &self.prior
    }

    pub fn loss(&self) -> &Table<T> {
        &self.loss
    }

    pub fn labels(&self) -> Option<&Labels> {
        self.labels.as_ref()
    }

    pub fn n_stimuli(&self) -> usize {
        self.prior.len()
    }

    pub fn n_actions(&self) -> usize {
        self.loss.n_cols()
    }

    /// Same prior, different loss (used by loss scaling and perturbation).
    pub fn with_loss(&self, loss: Table<T>) -> Result<Self> {
        let mut p = DiscreteProblem::new(self.prior.clone(), loss)?;
        p.labels = self.labels.clone();
        Ok(p)
    }

    pub fn scaled(&self, t: T) -> Self {
        DiscreteProblem {
            prior: self.prior.clone(),
            loss: self.loss.map(|&l| l * t),
            labels: self.labels.clone(),
        }
    }

    /// Action labels, falling back to `a0, a1, ...`.
    pub fn action_names(&self) -> Vec<String> {
        match &self.labels {
            Some(l) if !l.actions.is_empty() => l.actions.clone(),
            _ => (0..self.n_actions()).map(|a| format!("a{a}")).collect(),
        }
    }

    pub fn stimulus_names(&self) -> Vec<String> {
        match &self.labels {
            Some(l) if !l.stimuli.is_empty() => l.stimuli.clone(),
            _ => (0..self.n_stimuli()).map(|s| format!("s{s}")).collect(),
        }
    }
}

/// Row-stochastic conditional law with its cached induced marginal.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound(serialize = "T: Scalar + Serialize"))]
pub struct Channel<T> {
    rows: Table<T>,
    marginal: Vec<T>,
}

impl<T: Scalar> Channel<T> {
    pub fn new(prior: &[T], rows: Table<T>) -> Result<Self> {
        if rows.n_rows() != prior.len() {
            return Err(Error::Shape(format!(
                "channel has {} rows for {} stimuli",
                rows.n_rows(),
                prior.len()
            )));
        }
        let mut rows = rows;
        for s in 0..rows.n_rows() {
            let r = normalized_distribution(&format!("channel row {s}"), rows.row(s))?;
            rows.row_mut(s).copy_from_slice(&r);
        }
        let marginal = induced_marginal(prior, &rows)?;
        Ok(Channel { rows, marginal })
    }

    /// Every stimulus answered with the same action law.
    pub fn independent(prior: &[T], law: &[T]) -> Result<Self> {
        let law = normalized_distribution("action law", law)?;
        let rows = Table::from_fn(prior.len(), law.len(), |_, a| law[a]);
        Channel::new(prior, rows)
    }

    pub fn uniform(prior: &[T], n_actions: usize) -> Self {
        let u = T::one() / T::from_usize(n_actions).unwrap();
        let rows = Table::filled(prior.len(), n_actions, u);
        let marginal = vec![u; n_actions];
        Channel { rows, marginal }
    }

    /// Deterministic channel playing `choice[s]` at stimulus `s`.
    pub fn deterministic(prior: &[T], n_actions: usize, choice: &[usize]) -> Result<Self> {
        if choice.len() != prior.len() || choice.iter().any(|&a| a >= n_actions) {
            return Err(Error::Shape("deterministic choice does not fit the problem".into()));
        }
        let rows = Table::from_fn(prior.len(), n_actions, |s, a| if choice[s] == a { T::one() } else { T::zero() });
        Channel::new(prior, rows)
    }

    /// Builds a channel from rows already known to be stochastic.
    pub(crate) fn from_parts(rows: Table<T>, marginal: Vec<T>) -> Self {
        Channel { rows, marginal }
    }

    pub fn rows(&self) -> &Table<T> {
        &self.rows
    }

    pub fn marginal(&self) -> &[T] {
        &self.marginal
    }

    pub fn n_stimuli(&self) -> usize {
        self.rows.n_rows()
    }

    pub fn n_actions(&self) -> usize {
        self.rows.n_cols()
    }

    pub fn get(&self, s: usize, a: usize) -> T {
        self.rows.get(s, a)
    }

    /// Actions never played, excluded from divergence sums.
    pub fn unused_actions(&self) -> Vec<usize> {
        (0..self.n_actions()).filter(|&a| self.marginal[a] == T::zero()).collect()
    }

    /// Recomputes the marginal for a different prior (bootstrap reweighting).
    pub fn reweighted(&self, prior: &[T]) -> Result<Self> {
        Channel::new(prior, self.rows.clone())
    }

    pub fn into_rows(self) -> Table<T> {
        self.rows
    }
}

/// `P(a) = sum_s P(s) P(a|s)`, rescaled only if it drifts from unit mass.
pub fn induced_marginal<T: Scalar>(prior: &[T], rows: &Table<T>) -> Result<Vec<T>> {
    if prior.len() != rows.n_rows() {
        return Err(Error::Shape(format!(
            "prior has {} entries, rows has {}",
            prior.len(),
            rows.n_rows()
        )));
    }
    let mut m: Vec<T> = (0..rows.n_cols())
        .map(|a| compensated_sum(prior.iter().enumerate().map(|(s, &p)| p * rows.get(s, a))))
        .collect();
    let total = compensated_sum(m.iter().copied());
    if (total - T::one()).abs() > T::lit(MARGINAL_RENORM_TOL) && total > T::zero() {
        m.iter_mut().for_each(|x| *x = *x / total);
    }
    Ok(m)
}

fn check_shapes<T: Scalar>(problem: &DiscreteProblem<T>, channel: &Channel<T>) -> Result<()> {
    if problem.n_stimuli() != channel.n_stimuli() || problem.n_actions() != channel.n_actions() {
        return Err(Error::Shape(format!(
            "problem is {}x{}, channel is {}x{}",
            problem.n_stimuli(),
            problem.n_actions(),
            channel.n_stimuli(),
            channel.n_actions()
        )));
    }
    Ok(())
}

/// `L = sum_{s,a} P(s) P(a|s) l(s,a)`.
pub fn expected_loss<T: Scalar>(problem: &DiscreteProblem<T>, channel: &Channel<T>) -> Result<T> {
    check_shapes(problem, channel)?;
    Ok(joint_expectation(problem.prior(), channel.rows(), problem.loss()))
}

/// `sum_{s,a} P(s) rows(s,a) values(s,a)`; shapes are assumed consistent.
pub(crate) fn joint_expectation<T: Scalar>(prior: &[T], rows: &Table<T>, values: &Table<T>) -> T {
    compensated_sum(prior.iter().enumerate().flat_map(|(s, &p)| {
        rows.row(s)
            .iter()
            .zip(values.row(s))
            .map(move |(&q, &l)| p * q * l)
    }))
}

/// Native information `I_f(S;A) = sum_s P(s) D_f(P(.|s) || P(.))`, in nats.
pub fn f_mutual_information<T: Scalar>(
    gen: &Generator<T>,
    problem: &DiscreteProblem<T>,
    channel: &Channel<T>,
) -> Result<Ext<T>> {
    check_shapes(problem, channel)?;
    Ok(information_from_parts(gen, problem.prior(), channel.rows(), channel.marginal()))
}

/// I_f for possibly unnormalized rows, with the marginal supplied.
pub(crate) fn information_from_parts<T: Scalar>(
    gen: &Generator<T>,
    prior: &[T],
    rows: &Table<T>,
    marginal: &[T],
) -> Ext<T> {
    weighted_sum(prior.iter().enumerate().flat_map(|(s, &p)| {
        let row = rows.row(s);
        marginal.iter().enumerate().filter_map(move |(a, &m)| {
            let q = row[a];
            if m > T::zero() {
                let v = gen.f_value(q / m).unwrap_or(Ext::PosInf);
                Some((p * m, v))
            } else if q > T::zero() {
                Some((p, gen.recession_slope().weight(q)))
            } else {
                None
            }
        })
    }))
}

/// `D_f(q || p) = sum_a p(a) f(q(a)/p(a))` with `0 f(0/0) = 0` and mass of
/// `q` outside the support of `p` priced at the recession slope.
pub fn divergence<T: Scalar>(gen: &Generator<T>, q: &[T], p: &[T]) -> Result<Ext<T>> {
    if q.len() != p.len() {
        return Err(Error::Shape(format!("q has {} entries, p has {}", q.len(), p.len())));
    }
    let p = normalized_distribution("reference law", p)?;
    if q.iter().any(|x| !(x.is_finite() && *x >= T::zero())) {
        return Err(Error::Invalid("q has negative or non-finite entries".into()));
    }
    let terms: Result<Vec<(T, Ext<T>)>> = q
        .iter()
        .zip(&p)
        .filter(|(&qa, &pa)| qa > T::zero() || pa > T::zero())
        .map(|(&qa, &pa)| {
            if pa > T::zero() {
                Ok((pa, gen.f_value(qa / pa)?))
            } else {
                Ok((T::one(), gen.recession_slope().weight(qa)))
            }
        })
        .collect();
    Ok(weighted_sum(terms?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::GeneratorKind;
    use approx::assert_abs_diff_eq;

    fn t(rows: &[&[f64]]) -> Table<f64> {
        Table::from_rows(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn marginal_examples() {
        let m = induced_marginal(&[0.5, 0.5], &t(&[&[1.0, 0.0], &[0.0, 1.0]])).unwrap();
        assert_eq!(m, vec![0.5, 0.5]);
        let m = induced_marginal(&[1.0, 0.0], &t(&[&[0.2, 0.8], &[0.9, 0.1]])).unwrap();
        assert_eq!(m, vec![0.2, 0.8]);
        let m = induced_marginal(&[0.5, 0.5], &t(&[&[0.75, 0.25], &[0.25, 0.75]])).unwrap();
        assert_eq!(m, vec![0.5, 0.5]);
        assert!(induced_marginal(&[1.0], &t(&[&[1.0], &[1.0]])).is_err());
    }

    #[test]
    fn expected_loss_examples() {
        let p = DiscreteProblem::new(vec![0.3, 0.7], t(&[&[2.0, 2.0], &[2.0, 2.0]])).unwrap();
        let c = Channel::new(p.prior(), t(&[&[0.1, 0.9], &[0.6, 0.4]])).unwrap();
        assert_abs_diff_eq!(expected_loss(&p, &c).unwrap(), 2.0, epsilon = 1e-15);

        let p = DiscreteProblem::new(vec![0.3, 0.7], t(&[&[1.0, 0.2], &[0.5, 3.0]])).unwrap();
        let c = Channel::deterministic(p.prior(), 2, &[1, 0]).unwrap();
        assert_abs_diff_eq!(expected_loss(&p, &c).unwrap(), 0.3 * 0.2 + 0.7 * 0.5, epsilon = 1e-15);
    }

    #[test]
    fn information_examples() {
        let p = DiscreteProblem::uniform_prior(t(&[&[0.0, 1.0], &[1.0, 0.0]])).unwrap();
        let ind = Channel::independent(p.prior(), &[0.3, 0.7]).unwrap();
        for k in GeneratorKind::MAIN {
            let g = Generator::new(k).unwrap();
            assert_eq!(f_mutual_information(&g, &p, &ind).unwrap(), Ext::Finite(0.0));
        }
        let c = Channel::new(p.prior(), t(&[&[0.75, 0.25], &[0.25, 0.75]])).unwrap();
        let i = f_mutual_information(&Generator::kl(), &p, &c).unwrap().to_float();
        assert_abs_diff_eq!(i, 0.75 * 1.5f64.ln() + 0.25 * 0.5f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn divergence_examples() {
        let kl = Generator::<f64>::kl();
        let p = [0.2, 0.3, 0.5];
        for k in GeneratorKind::ALL {
            let g = match k {
                GeneratorKind::HockeyStick => Generator::hockey_stick(1.5).unwrap(),
                k => Generator::new(k).unwrap(),
            };
            assert_abs_diff_eq!(divergence(&g, &p, &p).unwrap().to_float(), 0.0, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(
            divergence(&kl, &[1.0, 0.0], &[0.5, 0.5]).unwrap().to_float(),
            2f64.ln(),
            epsilon = 1e-15
        );
        let tv = Generator::new(GeneratorKind::TotalVariation).unwrap();
        assert_abs_diff_eq!(divergence(&tv, &[0.8, 0.2], &[0.5, 0.5]).unwrap().to_float(), 0.3, epsilon = 1e-15);
        assert_eq!(divergence(&kl, &[0.5, 0.5], &[1.0, 0.0]).unwrap(), Ext::PosInf);
        let h = Generator::sq_hellinger();
        assert_abs_diff_eq!(divergence(&h, &[0.5, 0.5], &[1.0, 0.0]).unwrap().to_float(), 0.5 * (0.5f64.sqrt() - 1.0).powi(2) * 2.0 + 0.5, epsilon = 1e-12);
    }

    #[test]
    fn problem_json_round_trip_and_validation() {
        let json = r#"{"prior":[0.5,0.5],"loss":[[0.0,1.0],[1.0,0.0]],"labels":{"stimuli":["x","y"],"actions":["l","r"]}}"#;
        let p: DiscreteProblem<f64> = serde_json::from_str(json).unwrap();
        assert_eq!(p.action_names(), vec!["l", "r"]);
        let back = serde_json::to_string(&p).unwrap();
        let again: DiscreteProblem<f64> = serde_json::from_str(&back).unwrap();
        assert_eq!(again, p);
        assert!(serde_json::from_str::<DiscreteProblem<f64>>(r#"{"prior":[0.5,0.6],"loss":[[0],[1]]}"#).is_err());
        assert!(serde_json::from_str::<DiscreteProblem<f64>>(r#"{"prior":[1.0],"loss":[[0],[1]]}"#).is_err());
    }

    #[test]
    fn zero_marginal_actions_are_flagged() {
        let c = Channel::new(&[0.5, 0.5], t(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]])).unwrap();
        assert_eq!(c.unused_actions(), vec![2]);
    }
}
