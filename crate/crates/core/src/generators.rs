//! Catalog of f-divergence generators in canonical gauge.
//!
//! Every generator is stored as a raw closed form plus a gauge slope `c` with
//! `f(x) = raw(x) - c (x - 1)`, where `c = raw'(1)` whenever the raw form is
//! differentiable at one. The shift leaves every divergence unchanged and
//! makes `f'(1) = 0`, which the hedge formulas rely on.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ext::Ext;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    Kl,
    PearsonChi2,
    SqHellinger,
    ReverseKl,
    NeymanChi2,
    TotalVariation,
    JensenShannon,
    Triangular,
    HockeyStick,
}

impl GeneratorKind {
    pub const ALL: [GeneratorKind; 9] = [
        GeneratorKind::Kl,
        GeneratorKind::PearsonChi2,
        GeneratorKind::SqHellinger,
        GeneratorKind::ReverseKl,
        GeneratorKind::NeymanChi2,
        GeneratorKind::TotalVariation,
        GeneratorKind::JensenShannon,
        GeneratorKind::Triangular,
        GeneratorKind::HockeyStick,
    ];

    /// The three generators with closed-form hedges and tail bounds.
    pub const MAIN: [GeneratorKind; 3] = [
        GeneratorKind::Kl,
        GeneratorKind::PearsonChi2,
        GeneratorKind::SqHellinger,
    ];

    pub fn id(self) -> &'static str {
        match self {
            GeneratorKind::Kl => "kl",
            GeneratorKind::PearsonChi2 => "pearson_chi2",
            GeneratorKind::SqHellinger => "sq_hellinger",
            GeneratorKind::ReverseKl => "reverse_kl",
            GeneratorKind::NeymanChi2 => "neyman_chi2",
            GeneratorKind::TotalVariation => "total_variation",
            GeneratorKind::JensenShannon => "jensen_shannon",
            GeneratorKind::Triangular => "triangular",
            GeneratorKind::HockeyStick => "hockey_stick",
        }
    }

    pub fn valid_ids() -> String {
        Self::ALL.iter().map(|k| k.id()).collect::<Vec<_>>().join(", ")
    }
}

impl fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for GeneratorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        GeneratorKind::ALL
            .iter()
            .copied()
            .find(|k| k.id() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown generator `{s}`; valid ids: {}", GeneratorKind::valid_ids())))
    }
}

/// Interval with optional closed ends; unbounded ends use IEEE infinities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Interval<T> {
    pub lo: T,
    pub lo_closed: bool,
    pub hi: T,
    pub hi_closed: bool,
}

impl<T: Scalar> Interval<T> {
    fn new(lo: f64, lo_closed: bool, hi: f64, hi_closed: bool) -> Self {
        Interval {
            lo: T::lit(lo),
            lo_closed,
            hi: T::lit(hi),
            hi_closed,
        }
    }

    pub fn contains(&self, y: T) -> bool {
        let above = if self.lo_closed { y >= self.lo } else { y > self.lo };
        let below = if self.hi_closed { y <= self.hi } else { y < self.hi };
        above && below
    }

    fn shifted(self, by: T) -> Self {
        Interval {
            lo: self.lo + by,
            hi: self.hi + by,
            ..self
        }
    }
}

/// An f-divergence generator in canonical gauge.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Generator<T> {
    kind: GeneratorKind,
    gamma: T,
    gauge: T,
    smooth: bool,
    fprime_range: Interval<T>,
    conjugate_domain: Interval<T>,
}

impl<T: Scalar> Generator<T> {
    pub fn new(kind: GeneratorKind) -> Result<Self> {
        if kind == GeneratorKind::HockeyStick {
            return Err(Error::Invalid("hockey_stick requires a gamma > 1".into()));
        }
        Ok(Self::build(kind, T::zero()))
    }

    pub fn hockey_stick(gamma: T) -> Result<Self> {
        if !(gamma > T::one()) || !gamma.is_finite() {
            return Err(Error::Invalid(format!("hockey_stick gamma must be finite and > 1, got {gamma}")));
        }
        Ok(Self::build(GeneratorKind::HockeyStick, gamma))
    }

    /// Parses a catalog id; `gamma` is required for `hockey_stick` and
    /// rejected for every other id.
    pub fn from_id(id: &str, gamma: Option<T>) -> Result<Self> {
        let kind: GeneratorKind = id.parse()?;
        match (kind, gamma) {
            (GeneratorKind::HockeyStick, Some(g)) => Self::hockey_stick(g),
            (GeneratorKind::HockeyStick, None) => Self::new(kind),
            (_, Some(_)) => Err(Error::Invalid(format!("generator `{id}` takes no gamma parameter"))),
            (_, None) => Self::new(kind),
        }
    }

    pub fn kl() -> Self {
        Self::build(GeneratorKind::Kl, T::zero())
    }

    pub fn pearson_chi2() -> Self {
        Self::build(GeneratorKind::PearsonChi2, T::zero())
    }

    pub fn sq_hellinger() -> Self {
        Self::build(GeneratorKind::SqHellinger, T::zero())
    }

    fn build(kind: GeneratorKind, gamma: T) -> Self {
        use GeneratorKind::*;
        let inf = f64::INFINITY;
        let half_ln2 = 0.5 * std::f64::consts::LN_2;
        let (smooth, range, domain): (bool, Interval<T>, Interval<T>) = match kind {
            Kl => (true, Interval::new(-inf, false, inf, false), Interval::new(-inf, false, inf, false)),
            PearsonChi2 => (true, Interval::new(-2.0, true, inf, false), Interval::new(-inf, false, inf, false)),
            SqHellinger => (true, Interval::new(-inf, false, 1.0, false), Interval::new(-inf, false, 1.0, false)),
            ReverseKl => (true, Interval::new(-inf, false, 1.0, false), Interval::new(-inf, false, 1.0, false)),
            NeymanChi2 => (true, Interval::new(-inf, false, 1.0, false), Interval::new(-inf, false, 1.0, true)),
            TotalVariation => (false, Interval::new(-0.5, true, 0.5, true), Interval::new(-inf, false, 0.5, true)),
            JensenShannon => (
                true,
                Interval::new(-inf, false, half_ln2, false),
                Interval::new(-inf, false, half_ln2, false),
            ),
            Triangular => (true, Interval::new(-1.5, true, 0.5, false), Interval::new(-inf, false, 0.5, true)),
            HockeyStick => (false, Interval::new(0.0, true, 1.0, true), Interval::new(-inf, false, 1.0, true)),
        };
        let mut g = Generator {
            kind,
            gamma,
            gauge: T::zero(),
            smooth,
            fprime_range: range,
            conjugate_domain: domain,
        };
        // TV is the only catalog member with a kink at one; it keeps gauge 0.
        if kind != TotalVariation {
            if let Ext::Finite(c) = g.raw_fprime(T::one()) {
                g.gauge = c;
                g.fprime_range = range.shifted(-c);
                g.conjugate_domain = domain.shifted(-c);
            }
        }
        g
    }

    pub fn kind(&self) -> GeneratorKind {
        self.kind
    }

    pub fn id(&self) -> &'static str {
        self.kind.id()
    }

    pub fn gamma(&self) -> Option<T> {
        (self.kind == GeneratorKind::HockeyStick).then_some(self.gamma)
    }

    pub fn is_smooth(&self) -> bool {
        self.smooth
    }

    pub fn fprime_range(&self) -> Interval<T> {
        self.fprime_range
    }

    pub fn conjugate_domain(&self) -> Interval<T> {
        self.conjugate_domain
    }

    /// `f(0)`, possibly infinite.
    pub fn value_at_zero(&self) -> Ext<T> {
        self.raw_f(T::zero()).map(|v| v + self.gauge)
    }

    /// Asymptotic slope `lim f(x)/x`, which prices mass placed where the
    /// reference measure vanishes.
    pub fn recession_slope(&self) -> Ext<T> {
        use GeneratorKind::*;
        let raw = match self.kind {
            Kl | PearsonChi2 => return Ext::PosInf,
            SqHellinger | ReverseKl | NeymanChi2 | HockeyStick => T::one(),
            TotalVariation | Triangular => T::lit(0.5),
            JensenShannon => T::lit(0.5) * T::LN_2(),
        };
        Ext::Finite(raw - self.gauge)
    }

    fn unsupported(&self, op: &'static str) -> Error {
        Error::Unsupported {
            op,
            generator: self.to_string(),
        }
    }

    fn require_smooth(&self, op: &'static str) -> Result<()> {
        if self.smooth {
            Ok(())
        } else {
            Err(self.unsupported(op))
        }
    }

    /// `f(x)` in canonical gauge.
    pub fn f_value(&self, x: T) -> Result<Ext<T>> {
        if !(x >= T::zero()) {
            return Err(Error::Domain(format!("{}: f is defined on x >= 0, got {x}", self.id())));
        }
        Ok(self.raw_f(x).map(|v| v - self.gauge * (x - T::one())))
    }

    /// `f'(x)`; at `x = 0` the right limit is returned.
    pub fn f_prime(&self, x: T) -> Result<Ext<T>> {
        self.require_smooth("f_prime")?;
        if !(x >= T::zero()) {
            return Err(Error::Domain(format!("{}: f' is defined on x >= 0, got {x}", self.id())));
        }
        Ok(self.raw_fprime(x).map(|v| v - self.gauge))
    }

    /// `f''(x)` for `x > 0`.
    pub fn f_second(&self, x: T) -> Result<T> {
        self.require_smooth("f_second")?;
        if !(x > T::zero()) {
            return Err(Error::Domain(format!("{}: f'' needs x > 0, got {x}", self.id())));
        }
        use GeneratorKind::*;
        let one = T::one();
        let two = T::lit(2.0);
        Ok(match self.kind {
            Kl => one / x,
            PearsonChi2 => two,
            SqHellinger => T::lit(0.5) / (x * x.sqrt()),
            ReverseKl => one / (x * x),
            NeymanChi2 => two / (x * x * x),
            JensenShannon => one / (two * x * (one + x)),
            Triangular => T::lit(4.0) / (one + x).powi(3),
            TotalVariation | HockeyStick => unreachable!("guarded by require_smooth"),
        })
    }

    /// `f(x) - x f'(x)`, the integrand of the marginal correction. At `x = 0`
    /// this is `f(0)` because `x f'(x) -> 0` wherever `f(0)` is finite.
    pub fn legendre_tail(&self, x: T) -> Result<Ext<T>> {
        self.require_smooth("legendre_tail")?;
        if x == T::zero() {
            return Ok(self.value_at_zero());
        }
        use GeneratorKind::*;
        let one = T::one();
        // Closed forms avoid cancellation for small x.
        let raw = match self.kind {
            Kl => Ext::Finite(one - x),
            PearsonChi2 => Ext::Finite(one - x * x),
            SqHellinger => Ext::Finite(one - x.sqrt()),
            _ => {
                let f = self.raw_f(x);
                let d = self.raw_fprime(x);
                match (f, d) {
                    (Ext::Finite(f), Ext::Finite(d)) => Ext::Finite(f - x * d),
                    _ => Ext::PosInf,
                }
            }
        };
        // f - x f' is gauge invariant up to the constant c.
        Ok(raw.map(|v| v + self.gauge))
    }

    /// Inverse of `f'`. Values below the attainable range clamp to zero;
    /// values above it fail with a saturation error carrying the boundary.
    pub fn f_prime_inverse(&self, y: T) -> Result<T> {
        self.require_smooth("f_prime_inverse")?;
        if y.is_nan() {
            return Err(Error::Domain(format!("{}: f'^-1 of NaN", self.id())));
        }
        let range = self.fprime_range;
        if y > range.hi || (y == range.hi && !range.hi_closed) {
            return Err(Error::Saturation {
                generator: self.to_string(),
                value: y.to_f64_lossy(),
                boundary: range.hi.to_f64_lossy(),
            });
        }
        if y < range.lo || (y == range.lo && range.lo_closed) {
            return Ok(T::zero());
        }
        let z = y + self.gauge;
        let one = T::one();
        use GeneratorKind::*;
        Ok(match self.kind {
            Kl => z.exp(),
            PearsonChi2 => (one + z / T::lit(2.0)).max(T::zero()),
            SqHellinger => one / ((one - z) * (one - z)),
            ReverseKl => one / (one - z),
            NeymanChi2 => one / (one - z).sqrt(),
            JensenShannon | Triangular => self.bisect_fprime(y),
            TotalVariation | HockeyStick => unreachable!("guarded by require_smooth"),
        })
    }

    /// Guarded bisection for generators whose derivative has no inverse in
    /// the catalog. Works geometrically so it resolves tiny and huge roots.
    fn bisect_fprime(&self, y: T) -> T {
        let d = |x: T| self.raw_fprime(x).map(|v| v - self.gauge).to_float();
        let mut lo = T::min_positive_value();
        if d(lo) >= y {
            return T::zero();
        }
        let mut hi = T::one();
        while d(hi) < y {
            lo = hi;
            hi = hi * T::lit(2.0);
            if !hi.is_finite() {
                return T::max_value();
            }
        }
        for _ in 0..400 {
            let mid = if hi / lo > T::lit(4.0) {
                (lo * hi).sqrt()
            } else {
                T::lit(0.5) * (lo + hi)
            };
            if mid <= lo || mid >= hi {
                break;
            }
            if d(mid) < y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        T::lit(0.5) * (lo + hi)
    }

    /// Convex conjugate `f*(y) = sup_x { x y - f(x) }` of the canonical form.
    pub fn f_conjugate(&self, y: T) -> Ext<T> {
        if y.is_nan() {
            return Ext::Finite(y);
        }
        // f*_canonical(y) = f*_raw(y + c) - c
        self.raw_conjugate(y + self.gauge).map(|v| v - self.gauge)
    }

    /// `inf_y f*(y) = -f(0)`, the limit as `y -> -inf`.
    pub fn conjugate_floor(&self) -> Ext<T> {
        self.value_at_zero().neg()
    }

    fn raw_f(&self, x: T) -> Ext<T> {
        use GeneratorKind::*;
        let one = T::one();
        let half = T::lit(0.5);
        let zero = T::zero();
        match self.kind {
            Kl => {
                if x == zero {
                    Ext::Finite(one)
                } else {
                    Ext::Finite(x * x.ln() - x + one)
                }
            }
            PearsonChi2 => Ext::Finite((x - one) * (x - one)),
            SqHellinger => {
                let r = x.sqrt() - one;
                Ext::Finite(r * r)
            }
            ReverseKl => {
                if x == zero {
                    Ext::PosInf
                } else {
                    Ext::Finite(-x.ln() + x - one)
                }
            }
            NeymanChi2 => {
                if x == zero {
                    Ext::PosInf
                } else {
                    Ext::Finite((x - one) * (x - one) / x)
                }
            }
            TotalVariation => Ext::Finite(half * (x - one).abs()),
            JensenShannon => {
                let two = T::lit(2.0);
                let tail = half * (two / (one + x)).ln();
                if x == zero {
                    Ext::Finite(tail)
                } else {
                    Ext::Finite(half * x * (two * x / (one + x)).ln() + tail)
                }
            }
            Triangular => Ext::Finite((x - one) * (x - one) / (T::lit(2.0) * (x + one))),
            HockeyStick => Ext::Finite((x - self.gamma).max(zero)),
        }
    }

    fn raw_fprime(&self, x: T) -> Ext<T> {
        use GeneratorKind::*;
        let one = T::one();
        let zero = T::zero();
        let two = T::lit(2.0);
        match self.kind {
            Kl => {
                if x == zero {
                    Ext::NegInf
                } else {
                    Ext::Finite(x.ln())
                }
            }
            PearsonChi2 => Ext::Finite(two * (x - one)),
            SqHellinger | ReverseKl | NeymanChi2 | JensenShannon if x == zero => Ext::NegInf,
            SqHellinger => Ext::Finite(one - one / x.sqrt()),
            ReverseKl => Ext::Finite(one - one / x),
            NeymanChi2 => Ext::Finite(one - one / (x * x)),
            JensenShannon => Ext::Finite(T::lit(0.5) * (two * x / (one + x)).ln()),
            Triangular => Ext::Finite(T::lit(0.5) - two / ((one + x) * (one + x))),
            // Subgradient representatives, used only to compute the gauge.
            TotalVariation => Ext::Finite(if x < one { -T::lit(0.5) } else { T::lit(0.5) }),
            HockeyStick => Ext::Finite(if x < self.gamma { zero } else { one }),
        }
    }

    fn raw_conjugate(&self, y: T) -> Ext<T> {
        use GeneratorKind::*;
        let one = T::one();
        let two = T::lit(2.0);
        let half = T::lit(0.5);
        match self.kind {
            Kl => Ext::from_float(y.exp() - one),
            PearsonChi2 => {
                if y >= -two {
                    Ext::from_float(y + y * y / T::lit(4.0))
                } else {
                    Ext::Finite(-one)
                }
            }
            SqHellinger => {
                if y < one {
                    Ext::Finite(y / (one - y))
                } else {
                    Ext::PosInf
                }
            }
            ReverseKl => {
                if y < one {
                    Ext::Finite(-(one - y).ln())
                } else {
                    Ext::PosInf
                }
            }
            NeymanChi2 => {
                if y <= one {
                    Ext::Finite(two - two * (one - y).sqrt())
                } else {
                    Ext::PosInf
                }
            }
            TotalVariation => {
                if y <= half {
                    Ext::Finite(y.max(-half))
                } else {
                    Ext::PosInf
                }
            }
            HockeyStick => {
                if y <= one {
                    Ext::Finite(self.gamma * y.max(T::zero()))
                } else {
                    Ext::PosInf
                }
            }
            JensenShannon | Triangular => {
                let hi = if self.kind == JensenShannon { half * T::LN_2() } else { half };
                if y > hi {
                    return Ext::PosInf;
                }
                if y == hi {
                    // Supremum approached as x -> inf.
                    return if self.kind == JensenShannon {
                        Ext::PosInf
                    } else {
                        Ext::Finite(T::lit(1.5))
                    };
                }
                let x = self.bisect_fprime(y + self.gauge);
                match self.raw_f(x) {
                    Ext::Finite(fx) => Ext::Finite(x * y - fx),
                    other => other.neg(),
                }
            }
        }
    }
}

impl<T: Scalar> fmt::Display for Generator<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.gamma() {
            Some(g) => write!(f, "hockey_stick(gamma={g})"),
            None => f.write_str(self.id()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn all() -> Vec<Generator<f64>> {
        GeneratorKind::ALL
            .iter()
            .map(|&k| match k {
                GeneratorKind::HockeyStick => Generator::hockey_stick(2.0).unwrap(),
                k => Generator::new(k).unwrap(),
            })
            .collect()
    }

    #[test]
    fn value_examples() {
        let kl = Generator::<f64>::kl();
        assert_eq!(kl.f_value(1.0).unwrap(), Ext::Finite(0.0));
        assert_abs_diff_eq!(kl.f_value(2.0).unwrap().to_float(), 2.0 * 2f64.ln() - 1.0, epsilon = 1e-15);
        assert_eq!(Generator::<f64>::pearson_chi2().f_value(3.0).unwrap(), Ext::Finite(4.0));
        let hs = Generator::<f64>::hockey_stick(2.0).unwrap();
        assert_eq!(hs.f_value(1.5).unwrap(), Ext::Finite(0.0));
        assert_eq!(Generator::<f64>::new(GeneratorKind::ReverseKl).unwrap().f_value(0.0).unwrap(), Ext::PosInf);
    }

    #[test]
    fn negative_argument_is_a_domain_error() {
        assert!(matches!(Generator::<f64>::kl().f_value(-0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn derivative_examples() {
        assert_eq!(Generator::<f64>::kl().f_prime(1.0).unwrap(), Ext::Finite(0.0));
        assert_eq!(Generator::<f64>::pearson_chi2().f_prime(0.0).unwrap(), Ext::Finite(-2.0));
        assert_eq!(Generator::<f64>::sq_hellinger().f_prime(4.0).unwrap(), Ext::Finite(0.5));
        assert_eq!(Generator::<f64>::kl().f_prime(0.0).unwrap(), Ext::NegInf);
    }

    #[test]
    fn nonsmooth_generators_refuse_derivatives() {
        let tv = Generator::<f64>::new(GeneratorKind::TotalVariation).unwrap();
        assert!(matches!(tv.f_prime(0.5), Err(Error::Unsupported { .. })));
        assert!(matches!(tv.f_prime_inverse(0.0), Err(Error::Unsupported { .. })));
        let hs = Generator::<f64>::hockey_stick(3.0).unwrap();
        assert!(matches!(hs.f_prime(3.0), Err(Error::Unsupported { .. })));
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(Generator::<f64>::kl().f_prime_inverse(0.0).unwrap(), 1.0);
        assert_eq!(Generator::<f64>::pearson_chi2().f_prime_inverse(-4.0).unwrap(), 0.0);
        assert_abs_diff_eq!(Generator::<f64>::sq_hellinger().f_prime_inverse(0.5).unwrap(), 4.0, epsilon = 1e-12);
        match Generator::<f64>::sq_hellinger().f_prime_inverse(1.0) {
            Err(Error::Saturation { boundary, .. }) => assert_eq!(boundary, 1.0),
            other => panic!("expected saturation, got {other:?}"),
        }
    }

    #[test]
    fn conjugate_examples() {
        assert_eq!(Generator::<f64>::kl().f_conjugate(0.0), Ext::Finite(0.0));
        assert_eq!(Generator::<f64>::pearson_chi2().f_conjugate(2.0), Ext::Finite(3.0));
        assert_eq!(Generator::<f64>::sq_hellinger().f_conjugate(0.5), Ext::Finite(1.0));
        assert_abs_diff_eq!(
            Generator::<f64>::kl().f_conjugate(1.0).to_float(),
            std::f64::consts::E - 1.0,
            epsilon = 1e-15
        );
        assert_eq!(Generator::<f64>::sq_hellinger().f_conjugate(1.0), Ext::PosInf);
    }

    #[test]
    fn canonical_gauge_holds_across_the_catalog() {
        for g in all() {
            assert_abs_diff_eq!(g.f_value(1.0).unwrap().to_float(), 0.0, epsilon = 1e-15);
            if g.is_smooth() {
                assert_abs_diff_eq!(g.f_prime(1.0).unwrap().to_float(), 0.0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn ids_parse_and_unknown_ids_list_the_catalog() {
        for k in GeneratorKind::ALL {
            assert_eq!(k.id().parse::<GeneratorKind>().unwrap(), k);
        }
        let err = "bogus".parse::<GeneratorKind>().unwrap_err().to_string();
        assert!(err.contains("pearson_chi2") && err.contains("hockey_stick"));
        assert!(Generator::<f64>::from_id("hockey_stick", Some(1.0)).is_err());
        assert!(Generator::<f64>::from_id("hockey_stick", None).is_err());
        assert!(Generator::<f64>::from_id("kl", Some(2.0)).is_err());
    }

    #[test]
    fn conjugate_floor_is_minus_one_for_main_generators() {
        for k in GeneratorKind::MAIN {
            let g = Generator::<f64>::new(k).unwrap();
            assert_eq!(g.conjugate_floor(), Ext::Finite(-1.0));
            for i in -200..100 {
                let y = i as f64 * 0.0099;
                if let Ext::Finite(v) = g.f_conjugate(y) {
                    assert!(v >= -1.0, "{k} at {y}: {v}");
                }
            }
        }
    }

    #[test]
    fn works_in_single_precision() {
        let g = Generator::<f32>::sq_hellinger();
        assert!((g.f_prime_inverse(0.5).unwrap() - 4.0).abs() < 1e-5);
        assert_eq!(g.f_conjugate(0.5), Ext::Finite(1.0f32));
    }
}
