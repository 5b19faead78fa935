use crate::error::{Error, Result};
use crate::generators::{Generator, GeneratorKind};
use crate::problem::normalized_distribution;
use crate::scalar::Scalar;

/// Fixed-marginal best response: `q(a) = m(a) f'^-1(beta (lambda - l(a)))`
/// with `lambda` chosen so that `q` sums to one.
pub fn per_stimulus_response<T: Scalar>(gen: &Generator<T>, marginal: &[T], loss_row: &[T], beta: T) -> Result<Vec<T>> {
    if marginal.len() != loss_row.len() {
        return Err(Error::Shape(format!(
            "marginal has {} entries, loss row has {}",
            marginal.len(),
            loss_row.len()
        )));
    }
    let m = normalized_distribution("marginal", marginal)?;
    if m.iter().any(|&x| x <= T::zero()) {
        return Err(Error::Invalid("marginal must be strictly positive".into()));
    }
    if !(beta > T::zero() && beta.is_finite()) {
        return Err(Error::Invalid(format!("beta must be positive and finite, got {beta}")));
    }
    response_row(gen, &m, loss_row, beta)
}

/// As above, but zero-marginal actions simply receive zero mass.
pub(crate) fn response_row<T: Scalar>(gen: &Generator<T>, m: &[T], loss: &[T], beta: T) -> Result<Vec<T>> {
    if !gen.is_smooth() {
        return Err(Error::Unsupported {
            op: "per_stimulus_response",
            generator: gen.to_string(),
        });
    }
    let live: Vec<usize> = (0..m.len()).filter(|&a| m[a] > T::zero()).collect();
    if live.is_empty() {
        return Err(Error::Invalid("marginal has no mass".into()));
    }
    let lo_loss = live.iter().map(|&a| loss[a]).fold(T::infinity(), T::min);
    let hi_loss = live.iter().map(|&a| loss[a]).fold(T::neg_infinity(), T::max);
    let mut q = vec![T::zero(); m.len()];

    if gen.kind() == GeneratorKind::Kl {
        let mut total = T::zero();
        for &a in &live {
            q[a] = m[a] * (-beta * (loss[a] - lo_loss)).exp();
            total = total + q[a];
        }
        q.iter_mut().for_each(|x| *x = *x / total);
        return Ok(q);
    }
    if hi_loss == lo_loss {
        for &a in &live {
            q[a] = m[a];
        }
        return Ok(q);
    }

    let range_hi = gen.fprime_range().hi;
    let cap = if range_hi.is_finite() {
        lo_loss + range_hi / beta
    } else {
        T::infinity()
    };
    // Canonical gauge gives f'^-1(0) = 1, so the row mass is at most one at
    // the smallest loss and at least one at the largest.
    let mass = |lambda: T| -> Result<T> {
        if lambda >= cap {
            return Ok(T::infinity());
        }
        let mut total = T::zero();
        for &a in &live {
            total = total + m[a] * gen.f_prime_inverse(beta * (lambda - loss[a]))?;
        }
        Ok(total)
    };
    let mut lo = lo_loss;
    let mut hi = hi_loss.min(cap);
    if mass(lo)? > T::one() + T::lit(1e3) * T::epsilon() || mass(hi)? < T::one() - T::lit(1e3) * T::epsilon() {
        return Err(Error::numeric(
            "per_stimulus_response",
            format!("could not bracket the row multiplier in [{lo}, {hi}]"),
        ));
    }
    for _ in 0..400 {
        let mid = T::lit(0.5) * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if mass(mid)? < T::one() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Whichever end lands closer to unit mass, then renormalize.
    let (m_lo, m_hi) = (mass(lo)?, mass(hi)?);
    let lambda = if !m_hi.is_finite() || (T::one() - m_lo).abs() <= (m_hi - T::one()).abs() {
        lo
    } else {
        hi
    };
    let mut total = T::zero();
    for &a in &live {
        q[a] = m[a] * gen.f_prime_inverse(beta * (lambda - loss[a]))?;
        total = total + q[a];
    }
    if !(total > T::zero() && total.is_finite()) {
        return Err(Error::numeric("per_stimulus_response", "row mass degenerated"));
    }
    q.iter_mut().for_each(|x| *x = *x / total);
    Ok(q)
}
