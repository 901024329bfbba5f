//! Dyadic rationals and the labeled orthonormal basis of the resource space.
//!
//! Resource basis labels are `|r, x, y⟩` with `r ∈ ℤ` (Alice's leftward shift
//! offset) and `x, y` nonnegative dyadic rationals. The shift protocols only
//! ever read and write individual digits of `x` and `y`, so [`Dyadic`] is
//! built around digit surgery rather than general arithmetic. The same type
//! carries base-`d` digits for the float-mode d-dimensional protocols; base 2
//! is used everywhere in exact mode.

use std::cmp::Ordering;
use std::fmt;

use num::{BigUint, ToPrimitive, Zero};
use serde_json::{json, Value};

use crate::error::{Error, Result};

/// A nonnegative base-`b` rational with finitely many digits, stored as
/// `num / b^exp` with canonical form `b ∤ num` (or `num = 0, exp = 0`).
///
/// `exp` may be negative, e.g. 6 = 3/2⁻¹ in base 2.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Dyadic {
    base: u32,
    num: BigUint,
    exp: i64,
}

fn base_pow(base: u32, k: u64) -> BigUint {
    BigUint::from(base).pow(u32::try_from(k).expect("digit exponent out of range"))
}

impl Dyadic {
    /// The zero value in the given base.
    pub fn zero(base: u32) -> Self {
        assert!(base >= 2, "digit base must be at least 2");
        Dyadic { base, num: BigUint::zero(), exp: 0 }
    }

    pub fn from_int(base: u32, n: u64) -> Self {
        Dyadic::new(base, BigUint::from(n), 0)
    }

    /// Builds `num / base^exp`, reducing to canonical form.
    pub fn new(base: u32, mut num: BigUint, mut exp: i64) -> Self {
        assert!(base >= 2, "digit base must be at least 2");
        if num.is_zero() {
            return Dyadic::zero(base);
        }
        let b = BigUint::from(base);
        while (&num % &b).is_zero() {
            num /= &b;
            exp -= 1;
        }
        Dyadic { base, num, exp }
    }

    /// Convenience constructor for base-2 values `num / 2^exp`.
    #[allow(clippy::self_named_constructors)]
    pub fn dyadic(num: u64, exp: i64) -> Self {
        Dyadic::new(2, BigUint::from(num), exp)
    }

    pub fn base(&self) -> u32 {
        self.base
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    /// Digit at position `j`: the coefficient of `base^j`, i.e.
    /// `⌊value · base^(−j)⌋ mod base`.
    pub fn digit(&self, j: i64) -> u32 {
        let t = self.exp + j;
        if t < 0 || self.num.is_zero() {
            return 0;
        }
        let shifted = &self.num / base_pow(self.base, t as u64);
        (shifted % BigUint::from(self.base)).to_u32().unwrap()
    }

    /// Bit accessor; identical to [`Dyadic::digit`], named for base 2.
    pub fn bit(&self, j: i64) -> u8 {
        self.digit(j) as u8
    }

    /// Returns a copy agreeing with `self` on all digits except position `j`,
    /// which is set to `v`. Arithmetically this is `self + (v − digit(j))·base^j`.
    pub fn with_digit(&self, j: i64, v: u32) -> Result<Self> {
        if v >= self.base {
            return Err(Error::Usage(format!(
                "digit {v} out of range for base {}",
                self.base
            )));
        }
        let old = self.digit(j);
        if old == v {
            return Ok(self.clone());
        }
        // Re-express over the common denominator base^m.
        let m = self.exp.max(-j);
        let scaled = &self.num * base_pow(self.base, (m - self.exp) as u64);
        let unit = base_pow(self.base, (m + j) as u64);
        let raised = scaled + &unit * BigUint::from(v);
        let removed = &unit * BigUint::from(old);
        if removed > raised {
            return Err(Error::NegativeDyadic);
        }
        Ok(Dyadic::new(self.base, raised - removed, m))
    }

    /// `set_bit`: base-2 spelling of [`Dyadic::with_digit`].
    pub fn set_bit(&self, j: i64, v: u8) -> Result<Self> {
        self.with_digit(j, v as u32)
    }

    /// Multiplies by the base: all digits shift one position up.
    pub fn shifted_up(&self) -> Self {
        if self.num.is_zero() {
            return self.clone();
        }
        Dyadic { base: self.base, num: self.num.clone(), exp: self.exp - 1 }
    }

    /// Divides by the base: all digits shift one position down.
    pub fn shifted_down(&self) -> Self {
        if self.num.is_zero() {
            return self.clone();
        }
        Dyadic { base: self.base, num: self.num.clone(), exp: self.exp + 1 }
    }

    pub fn to_f64(&self) -> f64 {
        self.num.to_f64().unwrap_or(f64::NAN) * (self.base as f64).powi(-self.exp as i32)
    }

    /// Truncated value as u64, only meaningful for integer-valued labels
    /// (vdh catalyst indices).
    pub fn to_u64(&self) -> Option<u64> {
        if self.exp > 0 {
            return None;
        }
        (&self.num * base_pow(self.base, (-self.exp) as u64)).to_u64()
    }

    /// Fraction rendering `"m/b^e"` with a nonnegative exponent, e.g. `"3/2^2"`.
    pub fn to_fraction_string(&self) -> String {
        if self.exp <= 0 {
            let whole = &self.num * base_pow(self.base, (-self.exp) as u64);
            format!("{whole}/{}^0", self.base)
        } else {
            format!("{}/{}^{}", self.num, self.base, self.exp)
        }
    }

    /// Positional rendering with a point, e.g. `"110.01"` (base 2 digits).
    pub fn to_point_string(&self) -> String {
        let frac_digits = self.exp.max(0) as u64;
        let scaled = if self.exp <= 0 {
            &self.num * base_pow(self.base, (-self.exp) as u64)
        } else {
            self.num.clone()
        };
        let digits = scaled.to_radix_be(self.base);
        let mut s: String = digits
            .iter()
            .map(|d| char::from_digit(*d as u32, 36).unwrap())
            .collect();
        while (s.len() as u64) < frac_digits + 1 {
            s.insert(0, '0');
        }
        let point_at = s.len() - frac_digits as usize;
        s.insert(point_at, '.');
        s
    }

    /// Parses either the fraction form `"m/b^e"` or the positional form
    /// `"110.01"` (the base is taken from context, not the string).
    pub fn parse(base: u32, s: &str) -> Result<Self> {
        let bad = |msg: &str| Error::Usage(format!("bad dyadic {s:?}: {msg}"));
        if let Some((m, rest)) = s.split_once('/') {
            let num: BigUint = m.trim().parse().map_err(|_| bad("bad numerator"))?;
            let (b, e) = rest
                .split_once('^')
                .ok_or_else(|| bad("expected m/b^e"))?;
            let got: u32 = b.trim().parse().map_err(|_| bad("bad base"))?;
            if got != base {
                return Err(bad("base mismatch"));
            }
            let exp: i64 = e.trim().parse().map_err(|_| bad("bad exponent"))?;
            Ok(Dyadic::new(base, num, exp))
        } else {
            let (int_part, frac_part) = match s.split_once('.') {
                Some((i, f)) => (i, f),
                None => (s, ""),
            };
            let mut num = BigUint::zero();
            for ch in int_part.chars().chain(frac_part.chars()) {
                let d = ch.to_digit(base).ok_or_else(|| bad("bad digit"))?;
                num = num * BigUint::from(base) + BigUint::from(d);
            }
            Ok(Dyadic::new(base, num, frac_part.len() as i64))
        }
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dyadic {
    /// Numeric order within one base; values of different bases are ordered
    /// by base first (states never mix bases).
    fn cmp(&self, other: &Self) -> Ordering {
        if self.base != other.base {
            return self.base.cmp(&other.base);
        }
        let e = self.exp.max(other.exp);
        let lhs = &self.num * base_pow(self.base, (e - self.exp) as u64);
        let rhs = &other.num * base_pow(self.base, (e - other.exp) as u64);
        lhs.cmp(&rhs)
    }
}

impl fmt::Debug for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_point_string())
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_point_string())
    }
}

/// A resource basis label `|r, x, y⟩`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ResourceLabel {
    pub r: i64,
    pub x: Dyadic,
    pub y: Dyadic,
}

impl ResourceLabel {
    pub fn new(r: i64, x: Dyadic, y: Dyadic) -> Self {
        debug_assert_eq!(x.base(), y.base());
        ResourceLabel { r, x, y }
    }

    /// The protocol catalyst label `|0, 0, 0⟩`.
    pub fn origin(base: u32) -> Self {
        ResourceLabel::new(0, Dyadic::zero(base), Dyadic::zero(base))
    }

    pub fn base(&self) -> u32 {
        self.x.base()
    }
}

impl fmt::Debug for ResourceLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{}, {}, {}⟩", self.r, self.x, self.y)
    }
}

/// A basis label for register qudits tensored with the resource space.
///
/// `regs` is the ordered register content (e.g. `[a, b]` for the two logical
/// output qubits, or `[a1, a2, b2, b1]` in the game layout); every label in
/// one state carries the same register arity.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CompositeLabel {
    pub regs: Vec<u8>,
    pub res: ResourceLabel,
}

impl CompositeLabel {
    pub fn new(regs: Vec<u8>, res: ResourceLabel) -> Self {
        CompositeLabel { regs, res }
    }

    /// Resource-only label (register arity 0).
    pub fn resource(res: ResourceLabel) -> Self {
        CompositeLabel { regs: Vec::new(), res }
    }

    pub fn arity(&self) -> usize {
        self.regs.len()
    }

    pub fn base(&self) -> u32 {
        self.res.base()
    }

    /// Copy with one register replaced.
    pub fn with_reg(&self, pos: usize, v: u8) -> Self {
        let mut regs = self.regs.clone();
        regs[pos] = v;
        CompositeLabel { regs, res: self.res.clone() }
    }

    /// Copy with a register inserted at `pos`.
    pub fn insert_reg(&self, pos: usize, v: u8) -> Self {
        let mut regs = self.regs.clone();
        regs.insert(pos, v);
        CompositeLabel { regs, res: self.res.clone() }
    }

    /// Copy with the register at `pos` removed.
    pub fn remove_reg(&self, pos: usize) -> Self {
        let mut regs = self.regs.clone();
        regs.remove(pos);
        CompositeLabel { regs, res: self.res.clone() }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "regs": self.regs,
            "r": self.res.r,
            "x": self.res.x.to_fraction_string(),
            "y": self.res.y.to_fraction_string(),
        })
    }

    pub fn from_json(v: &Value, base: u32) -> Result<Self> {
        let regs: Vec<u8> = v
            .get("regs")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Usage("label missing regs".into()))?
            .iter()
            .map(|x| {
                x.as_u64()
                    .and_then(|n| u8::try_from(n).ok())
                    .ok_or_else(|| Error::Usage("bad register value".into()))
            })
            .collect::<Result<_>>()?;
        let r = v
            .get("r")
            .and_then(Value::as_i64)
            .ok_or_else(|| Error::Usage("label missing r".into()))?;
        let coord = |k: &str| -> Result<Dyadic> {
            let s = v
                .get(k)
                .and_then(Value::as_str)
                .ok_or_else(|| Error::Usage(format!("label missing {k}")))?;
            Dyadic::parse(base, s)
        };
        Ok(CompositeLabel::new(regs, ResourceLabel::new(r, coord("x")?, coord("y")?)))
    }
}

impl fmt::Debug for CompositeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.regs.is_empty() {
            return write!(f, "{:?}", self.res);
        }
        let regs: Vec<String> = self.regs.iter().map(|b| b.to_string()).collect();
        write!(f, "|{}⟩⊗{:?}", regs.join(""), self.res)
    }
}
