//! Scalar arithmetic for state amplitudes.
//!
//! Two amplitude fields are supported and never mixed inside one state:
//! [`ExactScalar`], the real field ℚ(√2) with arbitrary-precision rational
//! coordinates, and [`FloatScalar`] (complex `f64`) for finite-dimensional
//! numerics. Every amplitude appearing in the exact shift protocol lies in
//! {0, ±1, ±1/√2, ±1/2}, so ℚ(√2) closes over the whole construction and
//! equality stays decidable.

use std::f64::consts::SQRT_2;
use std::fmt;

use num::complex::Complex64;
use num::{BigInt, BigRational, One, ToPrimitive, Zero};
use serde_json::{json, Value};

use crate::error::{Error, Result};

/// Arbitrary-precision rational, always in lowest terms with positive
/// denominator.
pub type Rational = BigRational;

/// Complex double-precision amplitude used by the float mode.
pub type FloatScalar = Complex64;

/// Default comparison tolerance for float-mode states.
pub const EPS_F: f64 = 1e-9;

/// Builds a rational from an integer pair. Panics on zero denominator.
pub fn rat(num: i64, den: i64) -> Rational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Canonical `"p/q"` rendering of a rational (the `/q` part is always
/// present, e.g. `"3/1"`).
pub fn rational_to_string(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Parses `"p/q"` or a bare integer `"p"`.
pub fn rational_from_str(s: &str) -> Result<Rational> {
    let parse_int = |t: &str| -> Result<BigInt> {
        t.trim()
            .parse::<BigInt>()
            .map_err(|e| Error::Usage(format!("bad integer {t:?}: {e}")))
    };
    match s.split_once('/') {
        Some((p, q)) => {
            let den = parse_int(q)?;
            if den.is_zero() {
                return Err(Error::Usage(format!("zero denominator in {s:?}")));
            }
            Ok(BigRational::new(parse_int(p)?, den))
        }
        None => Ok(BigRational::from_integer(parse_int(s)?)),
    }
}

/// An element `a + b·√2` of ℚ(√2).
///
/// The representation is unique because √2 is irrational, so equality is
/// plain coordinate equality.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ExactScalar {
    a: Rational,
    b: Rational,
}

impl ExactScalar {
    pub fn new(a: Rational, b: Rational) -> Self {
        ExactScalar { a, b }
    }

    pub fn from_int(n: i64) -> Self {
        ExactScalar::new(rat(n, 1), rat(0, 1))
    }

    pub fn from_rational(a: Rational) -> Self {
        ExactScalar::new(a, rat(0, 1))
    }

    /// The rational part `a`.
    pub fn rational_part(&self) -> &Rational {
        &self.a
    }

    /// The √2 coordinate `b`.
    pub fn sqrt2_part(&self) -> &Rational {
        &self.b
    }

    pub fn sqrt_two() -> Self {
        ExactScalar::new(rat(0, 1), rat(1, 1))
    }

    /// 1/√2 = √2/2.
    pub fn sqrt_half() -> Self {
        ExactScalar::new(rat(0, 1), rat(1, 2))
    }

    pub fn half() -> Self {
        ExactScalar::new(rat(1, 2), rat(0, 1))
    }

    pub fn add(&self, o: &Self) -> Self {
        ExactScalar::new(&self.a + &o.a, &self.b + &o.b)
    }

    pub fn sub(&self, o: &Self) -> Self {
        ExactScalar::new(&self.a - &o.a, &self.b - &o.b)
    }

    /// (a + b√2)(a' + b'√2) = (aa' + 2bb') + (ab' + a'b)√2.
    pub fn mul(&self, o: &Self) -> Self {
        let two = rat(2, 1);
        ExactScalar::new(
            &self.a * &o.a + &two * &self.b * &o.b,
            &self.a * &o.b + &o.a * &self.b,
        )
    }

    pub fn neg(&self) -> Self {
        ExactScalar::new(-self.a.clone(), -self.b.clone())
    }

    /// Multiplicative inverse via the conjugate: 1/(a+b√2) = (a−b√2)/(a²−2b²).
    pub fn inv(&self) -> Result<Self> {
        if self.is_zero() {
            return Err(Error::ZeroInverse);
        }
        let norm = &self.a * &self.a - rat(2, 1) * &self.b * &self.b;
        // norm = 0 would force a/b = ±√2, impossible for rationals with b ≠ 0.
        debug_assert!(!norm.is_zero());
        Ok(ExactScalar::new(&self.a / &norm, -(&self.b / &norm)))
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.a.is_one() && self.b.is_zero()
    }

    /// Evaluates `a + b·√2` in double precision.
    pub fn to_f64(&self) -> f64 {
        self.a.to_f64().unwrap_or(f64::NAN) + self.b.to_f64().unwrap_or(f64::NAN) * SQRT_2
    }

    pub fn to_json(&self) -> Value {
        json!({ "a": rational_to_string(&self.a), "b": rational_to_string(&self.b) })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let field = |k: &str| -> Result<Rational> {
            let s = v
                .get(k)
                .and_then(Value::as_str)
                .ok_or_else(|| Error::Usage(format!("missing scalar field {k:?}")))?;
            rational_from_str(s)
        };
        Ok(ExactScalar::new(field("a")?, field("b")?))
    }
}

impl fmt::Debug for ExactScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} + {}·√2", self.a, self.b)
    }
}

impl fmt::Display for ExactScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Amplitude interface shared by the exact and float modes.
///
/// All protocol kernels are generic over this trait; only operations
/// expressible in both fields belong here.
pub trait Scalar: Clone + PartialEq + fmt::Debug + Send + Sync + 'static {
    /// True for decidable exact arithmetic, false for tolerance-based floats.
    const EXACT: bool;
    /// Human tag used in state-file headers: "exact" or "float".
    const MODE: &'static str;

    fn zero() -> Self;
    fn one() -> Self;
    fn sqrt_half() -> Self;
    fn sqrt_two() -> Self;
    fn add(&self, other: &Self) -> Self;
    fn sub(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn neg(&self) -> Self;
    fn conj(&self) -> Self;
    /// Exact zero test (used for pruning; never tolerance-based).
    fn is_zero(&self) -> bool;
    fn abs(&self) -> f64;
    fn to_complex(&self) -> Complex64;
    fn to_json(&self) -> Value;
    fn from_json(v: &Value) -> Result<Self>;
}

impl Scalar for ExactScalar {
    const EXACT: bool = true;
    const MODE: &'static str = "exact";

    fn zero() -> Self {
        ExactScalar::from_int(0)
    }
    fn one() -> Self {
        ExactScalar::from_int(1)
    }
    fn sqrt_half() -> Self {
        ExactScalar::sqrt_half()
    }
    fn sqrt_two() -> Self {
        ExactScalar::sqrt_two()
    }
    fn add(&self, other: &Self) -> Self {
        ExactScalar::add(self, other)
    }
    fn sub(&self, other: &Self) -> Self {
        ExactScalar::sub(self, other)
    }
    fn mul(&self, other: &Self) -> Self {
        ExactScalar::mul(self, other)
    }
    fn neg(&self) -> Self {
        ExactScalar::neg(self)
    }
    fn conj(&self) -> Self {
        // Amplitudes are real in exact mode.
        self.clone()
    }
    fn is_zero(&self) -> bool {
        ExactScalar::is_zero(self)
    }
    fn abs(&self) -> f64 {
        self.to_f64().abs()
    }
    fn to_complex(&self) -> Complex64 {
        Complex64::new(self.to_f64(), 0.0)
    }
    fn to_json(&self) -> Value {
        ExactScalar::to_json(self)
    }
    fn from_json(v: &Value) -> Result<Self> {
        ExactScalar::from_json(v)
    }
}

impl Scalar for Complex64 {
    const EXACT: bool = false;
    const MODE: &'static str = "float";

    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn sqrt_half() -> Self {
        Complex64::new(1.0 / SQRT_2, 0.0)
    }
    fn sqrt_two() -> Self {
        Complex64::new(SQRT_2, 0.0)
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn neg(&self) -> Self {
        -self
    }
    fn conj(&self) -> Self {
        Complex64::conj(self)
    }
    fn is_zero(&self) -> bool {
        self.re == 0.0 && self.im == 0.0
    }
    fn abs(&self) -> f64 {
        self.norm()
    }
    fn to_complex(&self) -> Complex64 {
        *self
    }
    fn to_json(&self) -> Value {
        json!({ "re": self.re, "im": self.im })
    }
    fn from_json(v: &Value) -> Result<Self> {
        let field = |k: &str| -> Result<f64> {
            v.get(k)
                .and_then(Value::as_f64)
                .ok_or_else(|| Error::Usage(format!("missing scalar field {k:?}")))
        };
        Ok(Complex64::new(field("re")?, field("im")?))
    }
}

/// Converts an exact amplitude into the float field.
pub fn exact_to_float(x: &ExactScalar) -> FloatScalar {
    x.to_complex()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn es(a: (i64, i64), b: (i64, i64)) -> ExactScalar {
        ExactScalar::new(rat(a.0, a.1), rat(b.0, b.1))
    }

    #[test]
    fn sqrt_half_squares_to_half() {
        let h = ExactScalar::sqrt_half();
        assert_eq!(h.mul(&h), es((1, 2), (0, 1)));
    }

    #[test]
    fn inverse_of_sqrt_half_is_sqrt_two() {
        assert_eq!(ExactScalar::sqrt_half().inv().unwrap(), es((0, 1), (1, 1)));
    }

    #[test]
    fn difference_of_squares() {
        let p = es((1, 1), (1, 1));
        let q = es((1, 1), (-1, 1));
        assert_eq!(p.mul(&q), ExactScalar::from_int(-1));
    }

    #[test]
    fn inverse_of_zero_fails() {
        assert!(matches!(
            ExactScalar::zero().inv(),
            Err(Error::ZeroInverse)
        ));
    }

    #[test]
    fn float_embedding_examples() {
        assert!((ExactScalar::sqrt_half().to_f64() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert_eq!(ExactScalar::zero().to_f64(), 0.0);
        assert_eq!(es((-3, 4), (0, 1)).to_f64(), -0.75);
    }

    #[test]
    fn json_round_trip() {
        let x = es((-3, 4), (5, 7));
        assert_eq!(ExactScalar::from_json(&x.to_json()).unwrap(), x);
        assert_eq!(
            x.to_json(),
            json!({"a": "-3/4", "b": "5/7"})
        );
    }

    fn arb_exact() -> impl Strategy<Value = ExactScalar> {
        (
            -20i64..=20,
            1i64..=12,
            -20i64..=20,
            1i64..=12,
        )
            .prop_map(|(an, ad, bn, bd)| es((an, ad), (bn, bd)))
    }

    proptest! {
        #[test]
        fn field_axioms(x in arb_exact(), y in arb_exact(), z in arb_exact()) {
            // associativity and commutativity
            prop_assert_eq!(x.add(&y).add(&z), x.add(&y.add(&z)));
            prop_assert_eq!(x.mul(&y).mul(&z), x.mul(&y.mul(&z)));
            prop_assert_eq!(x.mul(&y), y.mul(&x));
            // distributivity
            prop_assert_eq!(x.mul(&y.add(&z)), x.mul(&y).add(&x.mul(&z)));
        }

        #[test]
        fn inverse_round_trip(x in arb_exact()) {
            if !x.is_zero() {
                prop_assert!(x.mul(&x.inv().unwrap()).is_one());
            }
        }

        #[test]
        fn embedding_is_a_homomorphism(x in arb_exact(), y in arb_exact()) {
            let lhs = x.mul(&y).to_f64();
            let rhs = x.to_f64() * y.to_f64();
            prop_assert!((lhs - rhs).abs() < 1e-6 * (1.0 + lhs.abs()));
            let lhs = x.add(&y).to_f64();
            let rhs = x.to_f64() + y.to_f64();
            prop_assert!((lhs - rhs).abs() < 1e-6 * (1.0 + lhs.abs()));
        }
    }
}
