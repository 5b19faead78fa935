//! Extended reals: finite values plus explicit infinities.
//!
//! Penalty integrals and divergences can leave the finite range. Keeping the
//! infinities as variants means a `0 * inf` never turns into a NaN silently.

use std::cmp::Ordering;
use std::fmt;

use serde::{Serialize, Serializer};

use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Ext<T> {
    NegInf,
    Finite(T),
    PosInf,
}

impl<T: Scalar> Ext<T> {
    pub fn zero() -> Self {
        Ext::Finite(T::zero())
    }

    /// Maps IEEE infinities onto the explicit variants. NaN is passed through
    /// as a finite payload so callers can still detect it.
    pub fn from_float(x: T) -> Self {
        if x == T::infinity() {
            Ext::PosInf
        } else if x == T::neg_infinity() {
            Ext::NegInf
        } else {
            Ext::Finite(x)
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Ext::Finite(_))
    }

    pub fn finite(self) -> Option<T> {
        match self {
            Ext::Finite(x) => Some(x),
            _ => None,
        }
    }

    pub fn to_float(self) -> T {
        match self {
            Ext::NegInf => T::neg_infinity(),
            Ext::Finite(x) => x,
            Ext::PosInf => T::infinity(),
        }
    }

    /// Sum, with `+inf + -inf` resolved to `+inf` (an infinite penalty wins).
    pub fn add(self, other: Self) -> Self {
        match (self, other) {
            (Ext::PosInf, _) | (_, Ext::PosInf) => Ext::PosInf,
            (Ext::NegInf, _) | (_, Ext::NegInf) => Ext::NegInf,
            (Ext::Finite(a), Ext::Finite(b)) => Ext::Finite(a + b),
        }
    }

    /// Scales by a nonnegative weight with the measure-theoretic `0 * inf = 0`.
    pub fn weight(self, w: T) -> Self {
        if w == T::zero() {
            return Ext::zero();
        }
        match self {
            Ext::Finite(x) => Ext::Finite(w * x),
            inf if w > T::zero() => inf,
            Ext::PosInf => Ext::NegInf,
            Ext::NegInf => Ext::PosInf,
        }
    }

    pub fn neg(self) -> Self {
        match self {
            Ext::NegInf => Ext::PosInf,
            Ext::Finite(x) => Ext::Finite(-x),
            Ext::PosInf => Ext::NegInf,
        }
    }

    pub fn map(self, f: impl FnOnce(T) -> T) -> Self {
        match self {
            Ext::Finite(x) => Ext::Finite(f(x)),
            other => other,
        }
    }
}

impl<T: Scalar> PartialOrd for Ext<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.to_float().partial_cmp(&other.to_float())
    }
}

impl<T: Scalar> fmt::Display for Ext<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ext::NegInf => write!(f, "-inf"),
            Ext::Finite(x) => write!(f, "{x}"),
            Ext::PosInf => write!(f, "inf"),
        }
    }
}

impl<T: Scalar> Serialize for Ext<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Ext::Finite(x) => s.serialize_f64(x.to_f64_lossy()),
            Ext::PosInf => s.serialize_str("inf"),
            Ext::NegInf => s.serialize_str("-inf"),
        }
    }
}

/// Adds up weighted extended values, compensating the finite part.
pub fn weighted_sum<T: Scalar>(terms: impl IntoIterator<Item = (T, Ext<T>)>) -> Ext<T> {
    let mut finite = Vec::new();
    let mut pos = false;
    let mut neg = false;
    for (w, v) in terms {
        match v.weight(w) {
            Ext::Finite(x) => finite.push(x),
            Ext::PosInf => pos = true,
            Ext::NegInf => neg = true,
        }
    }
    if pos {
        Ext::PosInf
    } else if neg {
        Ext::NegInf
    } else {
        Ext::Finite(crate::scalar::compensated_sum(finite))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weight_kills_infinity() {
        assert_eq!(Ext::<f64>::PosInf.weight(0.0), Ext::Finite(0.0));
        assert_eq!(Ext::<f64>::NegInf.weight(0.0), Ext::Finite(0.0));
    }

    #[test]
    fn positive_infinity_dominates_sums() {
        let s = weighted_sum([(0.5, Ext::PosInf), (0.5, Ext::NegInf), (1.0, Ext::Finite(2.0))]);
        assert_eq!(s, Ext::PosInf);
        let s = weighted_sum([(0.5, Ext::Finite(1.0)), (0.5, Ext::Finite(3.0))]);
        assert_eq!(s, Ext::Finite(2.0));
    }

    #[test]
    fn ordering_follows_the_real_line() {
        assert!(Ext::<f64>::NegInf < Ext::Finite(-1e300));
        assert!(Ext::Finite(1e300) < Ext::<f64>::PosInf);
    }
}
