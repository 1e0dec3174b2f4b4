//! Scalar abstraction and the extended reals `[-inf, +inf)` used for
//! spectral potentials and entropies.

use std::cmp::Ordering;
use std::fmt::{self, Debug, Display};
use std::iter::Sum;
use std::ops::{Add, Mul, Neg, Sub};

use num_traits::{Float, FloatConst, FromPrimitive};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Floating point scalars the numerical routines are generic over.
pub trait Real:
    Float + FloatConst + FromPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal into `Self`.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// A tolerance of at least `x`, widened to a small multiple of machine
    /// epsilon so that `f64` tolerances stay meaningful for `f32`.
    fn tol(x: f64) -> Self {
        let floor = Self::epsilon() * Self::lit(64.0);
        Self::lit(x).max(floor)
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// A value in `{-inf} ∪ R`.
///
/// Spectral potentials of nilpotent operators and the entropy of measures
/// charging dead states are genuinely `-inf`; this type keeps that apart
/// from ordinary floats instead of relying on `NEG_INFINITY` leaking
/// through arithmetic.
#[derive(Clone, Copy, PartialEq)]
pub enum ExtReal<T> {
    NegInf,
    Finite(T),
}

impl<T: Real> ExtReal<T> {
    pub fn finite(x: T) -> Self {
        debug_assert!(x.is_finite(), "ExtReal::finite with non-finite {x}");
        ExtReal::Finite(x)
    }

    /// `ln x` for `x >= 0`, mapping `ln 0` to `-inf`.
    pub fn ln(x: T) -> Self {
        if x > T::zero() {
            ExtReal::Finite(x.ln())
        } else {
            ExtReal::NegInf
        }
    }

    /// Converts a float, treating `-inf` as [`ExtReal::NegInf`].
    pub fn from_float(x: T) -> Self {
        if x == T::neg_infinity() {
            ExtReal::NegInf
        } else {
            ExtReal::Finite(x)
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    pub fn is_neg_inf(&self) -> bool {
        matches!(self, ExtReal::NegInf)
    }

    pub fn value(&self) -> Option<T> {
        match *self {
            ExtReal::Finite(x) => Some(x),
            ExtReal::NegInf => None,
        }
    }

    /// The value as a float with `-inf` mapped to `T::neg_infinity()`.
    pub fn to_float(&self) -> T {
        match *self {
            ExtReal::Finite(x) => x,
            ExtReal::NegInf => T::neg_infinity(),
        }
    }

    pub fn exp(&self) -> T {
        match *self {
            ExtReal::Finite(x) => x.exp(),
            ExtReal::NegInf => T::zero(),
        }
    }

    pub fn max(self, other: Self) -> Self {
        if self >= other {
            self
        } else {
            other
        }
    }

    pub fn min(self, other: Self) -> Self {
        if self <= other {
            self
        } else {
            other
        }
    }

    /// Multiplication by a nonnegative weight with the measure-theoretic
    /// convention `0 * (-inf) = 0`.
    pub fn scale(self, w: T) -> Self {
        debug_assert!(w >= T::zero());
        if w == T::zero() {
            return ExtReal::Finite(T::zero());
        }
        match self {
            ExtReal::Finite(x) => ExtReal::Finite(w * x),
            ExtReal::NegInf => ExtReal::NegInf,
        }
    }

    /// `|a - b|` when both are finite, `0` when both are `-inf`, `+inf`
    /// (as a float) otherwise.
    pub fn abs_diff(self, other: Self) -> T {
        match (self, other) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => (a - b).abs(),
            (ExtReal::NegInf, ExtReal::NegInf) => T::zero(),
            _ => T::infinity(),
        }
    }
}

impl<T: Real> From<T> for ExtReal<T> {
    fn from(x: T) -> Self {
        ExtReal::from_float(x)
    }
}

impl<T: Real> PartialOrd for ExtReal<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (ExtReal::NegInf, ExtReal::NegInf) => Some(Ordering::Equal),
            (ExtReal::NegInf, ExtReal::Finite(_)) => Some(Ordering::Less),
            (ExtReal::Finite(_), ExtReal::NegInf) => Some(Ordering::Greater),
            (ExtReal::Finite(a), ExtReal::Finite(b)) => a.partial_cmp(b),
        }
    }
}

impl<T: Real> Add for ExtReal<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        match (self, rhs) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => ExtReal::Finite(a + b),
            _ => ExtReal::NegInf,
        }
    }
}

impl<T: Real> Add<T> for ExtReal<T> {
    type Output = Self;
    fn add(self, rhs: T) -> Self {
        match self {
            ExtReal::Finite(a) => ExtReal::Finite(a + rhs),
            ExtReal::NegInf => ExtReal::NegInf,
        }
    }
}

impl<T: Real> Sub<T> for ExtReal<T> {
    type Output = Self;
    fn sub(self, rhs: T) -> Self {
        self + (-rhs)
    }
}

/// Multiplication by a positive finite factor.
impl<T: Real> Mul<T> for ExtReal<T> {
    type Output = Self;
    fn mul(self, rhs: T) -> Self {
        debug_assert!(rhs > T::zero());
        match self {
            ExtReal::Finite(a) => ExtReal::Finite(a * rhs),
            ExtReal::NegInf => ExtReal::NegInf,
        }
    }
}

impl<T: Real> Sum for ExtReal<T> {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(ExtReal::Finite(T::zero()), |a, b| a + b)
    }
}

impl<T: Real> Neg for ExtReal<T> {
    type Output = Option<T>;
    fn neg(self) -> Option<T> {
        self.value().map(|x| -x)
    }
}

impl<T: Real> Debug for ExtReal<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::Finite(x) => write!(f, "{x:?}"),
            ExtReal::NegInf => f.write_str("-inf"),
        }
    }
}

impl<T: Real> Display for ExtReal<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::Finite(x) => write!(f, "{x}"),
            ExtReal::NegInf => f.write_str("-inf"),
        }
    }
}

/// Finite values serialize as numbers, `-inf` as the string `"-inf"`.
impl<T: Real + Serialize> Serialize for ExtReal<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            ExtReal::Finite(x) => x.serialize(serializer),
            ExtReal::NegInf => serializer.serialize_str("-inf"),
        }
    }
}

impl<'de, T: Real + Deserialize<'de>> Deserialize<'de> for ExtReal<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr<T> {
            Num(T),
            Str(String),
        }
        match Repr::<T>::deserialize(deserializer)? {
            Repr::Num(x) if x.is_finite() => Ok(ExtReal::Finite(x)),
            Repr::Num(_) => Err(serde::de::Error::custom("non-finite number")),
            Repr::Str(s) if s == "-inf" => Ok(ExtReal::NegInf),
            Repr::Str(s) => Err(serde::de::Error::custom(format!(
                "expected a number or \"-inf\", got {s:?}"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neg_inf_absorbs_addition() {
        let a = ExtReal::finite(3.0_f64);
        assert!((a + ExtReal::NegInf).is_neg_inf());
        assert!((ExtReal::<f64>::NegInf + 1.0).is_neg_inf());
        assert_eq!(a + 1.0, ExtReal::Finite(4.0));
    }

    #[test]
    fn ordering_puts_neg_inf_first() {
        let a = ExtReal::finite(-1e300_f64);
        assert!(ExtReal::NegInf < a);
        assert_eq!(ExtReal::NegInf.max(a), a);
        assert!(ExtReal::NegInf.min(a).is_neg_inf());
    }

    #[test]
    fn zero_weight_kills_neg_inf() {
        assert_eq!(ExtReal::<f64>::NegInf.scale(0.0), ExtReal::Finite(0.0));
        assert!(ExtReal::<f64>::NegInf.scale(0.5).is_neg_inf());
    }

    #[test]
    fn json_round_trip() {
        let v = vec![ExtReal::Finite(1.5_f64), ExtReal::NegInf];
        let s = serde_json::to_string(&v).unwrap();
        assert_eq!(s, r#"[1.5,"-inf"]"#);
        let back: Vec<ExtReal<f64>> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, v);
        assert!(serde_json::from_str::<ExtReal<f64>>(r#""inf""#).is_err());
    }

    #[test]
    fn tolerance_floor_for_f32() {
        assert_eq!(f64::tol(1e-12), 1e-12);
        assert!(f32::tol(1e-12) > 1e-6);
    }
}
