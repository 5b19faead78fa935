//! High-probability bounds: product-law tail estimates and their transfer
//! to the joint law through the binary f-divergence.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ext::Ext;
use crate::generators::{Generator, GeneratorKind};
use crate::problem::{Channel, DiscreteProblem};
use crate::scalar::Scalar;
use crate::table::Table;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TailQuery<T> {
    pub gen: Generator<T>,
    /// Threshold in loss units.
    pub u: T,
    /// `I_f(S;A)` in nats.
    pub info: T,
    /// Adversarial penalty `Phi(C)` in loss units.
    pub phi: T,
    pub beta: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TailBound<T> {
    pub q_bar: T,
    pub delta: T,
}

impl<T: Scalar> TailQuery<T> {
    fn validate(&self) -> Result<()> {
        if !(self.info >= T::zero()) || !(self.phi >= T::zero()) {
            return Err(Error::Invalid(format!(
                "info and phi must be nonnegative, got info={} phi={}",
                self.info, self.phi
            )));
        }
        if !(self.beta > T::zero() && self.beta.is_finite()) {
            return Err(Error::Invalid(format!("beta must be positive, got {}", self.beta)));
        }
        if !(self.u > T::zero()) {
            return Err(Error::Domain(format!("threshold u must be positive, got {}", self.u)));
        }
        Ok(())
    }
}

/// `q_bar = min(1, (1 + beta Phi) / (1 + f*(beta u)))`.
pub fn product_tail_bound<T: Scalar>(query: &TailQuery<T>) -> Result<T> {
    query.validate()?;
    let one = T::one();
    let y = query.beta * query.u;
    let numerator = one + query.beta * query.phi;
    let q = match query.gen.kind() {
        GeneratorKind::Kl => numerator * (-y).exp(),
        GeneratorKind::PearsonChi2 => {
            let d = one + y / T::lit(2.0);
            numerator / (d * d)
        }
        GeneratorKind::SqHellinger => {
            if y >= one {
                return Err(Error::Domain(format!(
                    "sq_hellinger tail bound needs beta*u < 1, got {y}"
                )));
            }
            numerator * (one - y)
        }
        _ => match query.gen.f_conjugate(y) {
            Ext::Finite(c) if c > -one => numerator / (one + c),
            Ext::PosInf => T::zero(),
            other => {
                return Err(Error::Domain(format!(
                    "{}: f*(beta u) = {other} gives no tail bound",
                    query.gen
                )))
            }
        },
    };
    Ok(q.max(T::zero()).min(one))
}

/// Binary divergence `D_f(Bern(p) || Bern(q))`.
pub fn binary_divergence<T: Scalar>(gen: &Generator<T>, p: T, q: T) -> Result<Ext<T>> {
    crate::problem::divergence(gen, &[p, T::one() - p], &[q, T::one() - q])
}

/// Largest `p` in `[q_bar, 1]` with `D_f(Bern(p) || Bern(q_bar)) <= info`.
pub fn tail_transfer<T: Scalar>(gen: &Generator<T>, q_bar: T, info: T) -> Result<T> {
    if !(q_bar >= T::zero() && q_bar <= T::one()) {
        return Err(Error::Invalid(format!("q_bar must lie in [0,1], got {q_bar}")));
    }
    if !(info >= T::zero()) {
        return Err(Error::Invalid(format!("info must be nonnegative, got {info}")));
    }
    let one = T::one();
    if q_bar == T::zero() || q_bar == one || info == T::zero() {
        return Ok(q_bar);
    }
    let p = match gen.kind() {
        GeneratorKind::PearsonChi2 => q_bar + (info * q_bar * (one - q_bar)).sqrt(),
        GeneratorKind::SqHellinger => {
            // With sqrt(p) = sin(theta), the constraint reads
            // cos(theta_p - theta_q) >= 1 - I/2; past a right angle p = 1.
            let c = one - info / T::lit(2.0);
            if c <= T::zero() || q_bar.sqrt().asin() + c.acos() >= T::FRAC_PI_2() {
                one
            } else {
                let s = (info - info * info / T::lit(4.0)).sqrt();
                let root = q_bar.sqrt() * c + (one - q_bar).sqrt() * s;
                root * root
            }
        }
        _ => bisect_transfer(gen, q_bar, info)?,
    };
    Ok(p.max(q_bar).min(one))
}

fn bisect_transfer<T: Scalar>(gen: &Generator<T>, q_bar: T, info: T) -> Result<T> {
    let within = |p: T| -> Result<bool> {
        Ok(match binary_divergence(gen, p, q_bar)? {
            Ext::Finite(d) => d <= info,
            Ext::PosInf => false,
            Ext::NegInf => true,
        })
    };
    if within(T::one())? {
        return Ok(T::one());
    }
    let mut lo = q_bar;
    let mut hi = T::one();
    let tol = T::lit(1e-12).max(T::epsilon() * T::lit(4.0));
    while hi - lo > tol {
        let mid = T::lit(0.5) * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if within(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Both stages at once; a supplied `q_bar` overrides the product bound.
pub fn tail_bound<T: Scalar>(query: &TailQuery<T>, q_bar: Option<T>) -> Result<TailBound<T>> {
    let q_bar = match q_bar {
        Some(q) => q,
        None => product_tail_bound(query)?,
    };
    query.validate()?;
    Ok(TailBound {
        q_bar,
        delta: tail_transfer(&query.gen, q_bar, query.info)?,
    })
}

/// Exact probabilities of the event `C_S(A) > u` under the joint law and
/// under the product of marginals: `(p, q)`.
pub fn event_probabilities<T: Scalar>(
    problem: &DiscreteProblem<T>,
    channel: &Channel<T>,
    table: &Table<T>,
    u: T,
) -> Result<(T, T)> {
    if table.shape() != (problem.n_stimuli(), problem.n_actions())
        || channel.rows().shape() != table.shape()
    {
        return Err(Error::Shape("table, channel and problem disagree in shape".into()));
    }
    let prior = problem.prior();
    let m = channel.marginal();
    let mut p = Vec::new();
    let mut q = Vec::new();
    for s in 0..table.n_rows() {
        for a in 0..table.n_cols() {
            if table.get(s, a) > u {
                p.push(prior[s] * channel.get(s, a));
                q.push(prior[s] * m[a]);
            }
        }
    }
    Ok((crate::scalar::compensated_sum(p), crate::scalar::compensated_sum(q)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn query(gen: Generator<f64>, beta: f64, u: f64) -> TailQuery<f64> {
        TailQuery { gen, u, info: 0.0, phi: 0.0, beta }
    }

    #[test]
    fn product_bounds_closed_forms() {
        let kl = product_tail_bound(&query(Generator::kl(), 1.0, 4f64.ln())).unwrap();
        assert!((kl - 0.25).abs() < 1e-15);
        let p = product_tail_bound(&query(Generator::pearson_chi2(), 1.0, 2.0)).unwrap();
        assert!((p - 0.25).abs() < 1e-15);
        let h = product_tail_bound(&query(Generator::sq_hellinger(), 1.0, 0.5)).unwrap();
        assert!((h - 0.5).abs() < 1e-15);
        assert!(product_tail_bound(&query(Generator::sq_hellinger(), 2.0, 0.5)).is_err());
    }

    #[test]
    fn transfer_examples() {
        for g in [Generator::<f64>::kl(), Generator::pearson_chi2(), Generator::sq_hellinger()] {
            assert_eq!(tail_transfer(&g, 0.3, 0.0).unwrap(), 0.3);
            assert_eq!(tail_transfer(&g, 0.0, 0.4).unwrap(), 0.0);
        }
        let p = tail_transfer(&Generator::pearson_chi2(), 0.25, 0.12).unwrap();
        assert!((p - (0.25 + (0.12f64 * 0.25 * 0.75).sqrt())).abs() < 1e-15);
    }

    #[test]
    fn hellinger_past_right_angle_is_one() {
        let g = Generator::<f64>::sq_hellinger();
        // theta_q = pi/4 + arccos(1 - 0.5) = pi/3 exceeds pi/2 in sum.
        assert_eq!(tail_transfer(&g, 0.5, 1.0).unwrap(), 1.0);
        assert_eq!(tail_transfer(&g, 0.1, 2.5).unwrap(), 1.0);
    }

    #[test]
    fn kl_transfer_solves_binary_equation() {
        let g = Generator::<f64>::kl();
        let p = tail_transfer(&g, 0.1, 0.5).unwrap();
        let d = p * (p / 0.1).ln() + (1.0 - p) * ((1.0 - p) / 0.9).ln();
        assert!((d - 0.5).abs() < 1e-9);
    }
}
