//! Finite-support state vectors over composite basis labels.
//!
//! A [`SparseState`] is a map from [`CompositeLabel`] to a nonzero amplitude.
//! Zero amplitudes are pruned after every operation, iteration follows the
//! total label order, and states are never auto-normalized: the shift
//! operators are isometric on their domain, so norm preservation is a
//! checkable invariant rather than a silent correction.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde_json::{json, Value};

use crate::basis::{CompositeLabel, ResourceLabel};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Guard against runaway kernel compositions.
pub const DEFAULT_SUPPORT_CAP: usize = 1_000_000;

#[derive(Clone, PartialEq)]
pub struct SparseState<S: Scalar> {
    arity: usize,
    base: u32,
    cap: usize,
    terms: BTreeMap<CompositeLabel, S>,
}

impl<S: Scalar> SparseState<S> {
    /// The zero state with the given register arity and digit base.
    pub fn zero(arity: usize, base: u32) -> Self {
        SparseState { arity, base, cap: DEFAULT_SUPPORT_CAP, terms: BTreeMap::new() }
    }

    /// A single basis label with amplitude one.
    pub fn basis(label: CompositeLabel) -> Self {
        let mut s = SparseState::zero(label.arity(), label.base());
        s.terms.insert(label, S::one());
        s
    }

    /// The resource catalyst `|0, 0, 0⟩`.
    pub fn origin(base: u32) -> Self {
        SparseState::basis(CompositeLabel::resource(ResourceLabel::origin(base)))
    }

    /// Builds a state from raw terms; labels must agree on arity and base.
    pub fn from_terms<I>(arity: usize, base: u32, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (CompositeLabel, S)>,
    {
        let mut s = SparseState::zero(arity, base);
        for (label, amp) in terms {
            s.check_label(&label)?;
            if amp.is_zero() {
                continue;
            }
            let entry = s.terms.entry(label).or_insert_with(S::zero);
            *entry = entry.add(&amp);
        }
        s.prune();
        s.check_cap()?;
        Ok(s)
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.cap = cap;
        self
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn base(&self) -> u32 {
        self.base
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Terms in label order.
    pub fn terms(&self) -> impl Iterator<Item = (&CompositeLabel, &S)> {
        self.terms.iter()
    }

    pub fn amplitude(&self, label: &CompositeLabel) -> S {
        self.terms.get(label).cloned().unwrap_or_else(S::zero)
    }

    fn check_label(&self, label: &CompositeLabel) -> Result<()> {
        if label.arity() != self.arity {
            return Err(Error::Mismatch(format!(
                "label arity {} vs state arity {}",
                label.arity(),
                self.arity
            )));
        }
        if label.base() != self.base {
            return Err(Error::Mismatch(format!(
                "label base {} vs state base {}",
                label.base(),
                self.base
            )));
        }
        Ok(())
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.arity != other.arity || self.base != other.base {
            return Err(Error::Mismatch(format!(
                "arity {}/{} base {}/{}",
                self.arity, other.arity, self.base, other.base
            )));
        }
        Ok(())
    }

    fn prune(&mut self) {
        self.terms.retain(|_, a| !a.is_zero());
    }

    fn check_cap(&self) -> Result<()> {
        if self.terms.len() > self.cap {
            return Err(Error::SupportCap { terms: self.terms.len(), cap: self.cap });
        }
        Ok(())
    }

    /// Pointwise sum.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        for (label, amp) in &other.terms {
            let entry = out.terms.entry(label.clone()).or_insert_with(S::zero);
            *entry = entry.add(amp);
        }
        out.prune();
        out.check_cap()?;
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(&S::one().neg()))
    }

    pub fn scale(&self, c: &S) -> Self {
        let mut out = self.clone();
        if c.is_zero() {
            out.terms.clear();
            return out;
        }
        for amp in out.terms.values_mut() {
            *amp = amp.mul(c);
        }
        out.prune();
        out
    }

    /// `⟨self, other⟩ = Σ conj(self)·other` over common labels.
    pub fn inner(&self, other: &Self) -> Result<S> {
        self.check_compatible(other)?;
        let (small, big, flip) = if self.terms.len() <= other.terms.len() {
            (self, other, false)
        } else {
            (other, self, true)
        };
        let mut acc = S::zero();
        for (label, amp) in &small.terms {
            if let Some(b) = big.terms.get(label) {
                let term = if flip {
                    // small = other: contribute conj(self)·other = conj(b)·amp
                    b.conj().mul(amp)
                } else {
                    amp.conj().mul(b)
                };
                acc = acc.add(&term);
            }
        }
        Ok(acc)
    }

    /// `⟨self, self⟩`, exact in exact mode.
    pub fn norm_sq(&self) -> S {
        let mut acc = S::zero();
        for amp in self.terms.values() {
            acc = acc.add(&amp.conj().mul(amp));
        }
        acc
    }

    /// Equality per mode: exact term-by-term in exact mode, sup-norm
    /// difference below `eps` in float mode.
    pub fn equal(&self, other: &Self, eps: f64) -> Result<bool> {
        self.check_compatible(other)?;
        if S::EXACT {
            return Ok(self.terms == other.terms);
        }
        Ok(self.sup_distance(other) < eps)
    }

    /// Largest per-label amplitude difference (0 for identical states).
    pub fn sup_distance(&self, other: &Self) -> f64 {
        let mut worst = 0.0f64;
        for (label, amp) in &self.terms {
            let d = amp.sub(&other.amplitude(label)).abs();
            worst = worst.max(d);
        }
        for (label, amp) in &other.terms {
            if !self.terms.contains_key(label) {
                worst = worst.max(amp.abs());
            }
        }
        worst
    }

    /// New state with register `v` inserted at position `pos` in every label.
    pub fn insert_register(&self, pos: usize, v: u8) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|(l, a)| (l.insert_reg(pos, v), a.clone()))
            .collect();
        SparseState { arity: self.arity + 1, base: self.base, cap: self.cap, terms }
    }

    /// Projection onto `regs[pos] == v`, keeping the register (not renormalized).
    pub fn project(&self, pos: usize, v: u8) -> Self {
        let terms = self
            .terms
            .iter()
            .filter(|(l, _)| l.regs[pos] == v)
            .map(|(l, a)| (l.clone(), a.clone()))
            .collect();
        SparseState { arity: self.arity, base: self.base, cap: self.cap, terms }
    }

    /// The `regs[pos] == v` component with that register removed (arity − 1).
    pub fn component(&self, pos: usize, v: u8) -> Self {
        let terms = self
            .terms
            .iter()
            .filter(|(l, _)| l.regs[pos] == v)
            .map(|(l, a)| (l.remove_reg(pos), a.clone()))
            .collect();
        SparseState { arity: self.arity - 1, base: self.base, cap: self.cap, terms }
    }

    /// Tensors register patterns against a resource-only state:
    /// `Σ_k amp_k |regs_k⟩ ⊗ resource`.
    pub fn compose_registers(patterns: &[(Vec<u8>, S)], resource: &Self) -> Result<Self> {
        if resource.arity != 0 {
            return Err(Error::Mismatch("resource factor must have arity 0".into()));
        }
        let arity = patterns.first().map(|(r, _)| r.len()).unwrap_or(0);
        let mut terms = Vec::new();
        for (regs, amp) in patterns {
            if regs.len() != arity {
                return Err(Error::Mismatch("inconsistent register patterns".into()));
            }
            for (res_label, res_amp) in &resource.terms {
                terms.push((
                    CompositeLabel::new(regs.clone(), res_label.res.clone()),
                    amp.mul(res_amp),
                ));
            }
        }
        SparseState::from_terms(arity, resource.base, terms)
    }

    /// Writes the JSON Lines state format: a header line carrying the mode
    /// and arity, then one term per line in label order.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        let header = json!({ "mode": S::MODE, "arity": self.arity, "base": self.base });
        writeln!(w, "{header}")?;
        for (label, amp) in &self.terms {
            writeln!(w, "{}", json!({ "label": label.to_json(), "amp": amp.to_json() }))?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let (_, first) = lines
            .next()
            .ok_or_else(|| Error::Parse { line: 1, msg: "empty state file".into() })?;
        let header: Value = serde_json::from_str(&first?)
            .map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?;
        let mode = header.get("mode").and_then(Value::as_str).unwrap_or("");
        if mode != S::MODE {
            return Err(Error::Parse {
                line: 1,
                msg: format!("mode {mode:?} does not match requested {:?}", S::MODE),
            });
        }
        let arity = header
            .get("arity")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::Parse { line: 1, msg: "missing arity".into() })? as usize;
        let base = header.get("base").and_then(Value::as_u64).unwrap_or(2) as u32;
        let mut terms = Vec::new();
        for (idx, line) in lines {
            let lineno = idx + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let v: Value = serde_json::from_str(&line)
                .map_err(|e| Error::Parse { line: lineno, msg: e.to_string() })?;
            let label = v
                .get("label")
                .ok_or_else(|| Error::Parse { line: lineno, msg: "missing label".into() })
                .and_then(|l| {
                    CompositeLabel::from_json(l, base)
                        .map_err(|e| Error::Parse { line: lineno, msg: e.to_string() })
                })?;
            let amp = v
                .get("amp")
                .ok_or_else(|| Error::Parse { line: lineno, msg: "missing amp".into() })
                .and_then(|a| {
                    S::from_json(a).map_err(|e| Error::Parse { line: lineno, msg: e.to_string() })
                })?;
            terms.push((label, amp));
        }
        SparseState::from_terms(arity, base, terms)
    }

    /// Terms as a JSON array (used to embed small states in reports).
    pub fn to_json_terms(&self) -> Value {
        Value::Array(
            self.terms
                .iter()
                .map(|(l, a)| json!({ "label": l.to_json(), "amp": a.to_json() }))
                .collect(),
        )
    }
}

impl<S: Scalar> std::fmt::Debug for SparseState<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SparseState[")?;
        for (i, (label, amp)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({amp:?})·{label:?}")?;
        }
        write!(f, "]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::Dyadic;
    use crate::scalar::{ExactScalar, FloatScalar};
    use num::complex::Complex64;
    use proptest::prelude::*;

    fn label(r: i64, x: u64, y: u64) -> CompositeLabel {
        CompositeLabel::resource(ResourceLabel::new(
            r,
            Dyadic::from_int(2, x),
            Dyadic::from_int(2, y),
        ))
    }

    #[test]
    fn cancellation_prunes_to_zero_state() {
        let s = SparseState::<ExactScalar>::basis(label(0, 0, 0));
        let t = s.scale(&ExactScalar::from_int(-1));
        let sum = s.add(&t).unwrap();
        assert!(sum.is_empty());
        assert!(sum.norm_sq().is_zero());
    }

    #[test]
    fn scale_by_sqrt_half() {
        let s = SparseState::<ExactScalar>::basis(label(0, 0, 0));
        let t = s.scale(&ExactScalar::sqrt_half());
        assert_eq!(t.len(), 1);
        assert_eq!(t.amplitude(&label(0, 0, 0)), ExactScalar::sqrt_half());
    }

    #[test]
    fn orthogonal_two_term_state_has_unit_norm() {
        let h = ExactScalar::sqrt_half();
        let s = SparseState::basis(label(0, 0, 0)).scale(&h);
        let t = SparseState::basis(label(0, 1, 1)).scale(&h);
        let sum = s.add(&t).unwrap();
        assert_eq!(sum.len(), 2);
        assert!(sum.norm_sq().is_one());
    }

    #[test]
    fn inner_product_on_basis_labels() {
        let s = SparseState::<ExactScalar>::basis(label(0, 0, 0));
        let t = SparseState::<ExactScalar>::basis(label(1, 0, 0));
        assert!(s.inner(&s).unwrap().is_one());
        assert!(s.inner(&t).unwrap().is_zero());
    }

    #[test]
    fn equality_after_pruning() {
        let s = SparseState::<ExactScalar>::basis(label(0, 3, 1));
        let zero = SparseState::zero(0, 2);
        let t = s.scale(&ExactScalar::from_int(1)).add(&zero).unwrap();
        assert!(s.equal(&t, 0.0).unwrap());
    }

    #[test]
    fn arity_mismatch_is_reported() {
        let s = SparseState::<ExactScalar>::basis(label(0, 0, 0));
        let t = s.insert_register(0, 0);
        assert!(matches!(s.add(&t), Err(Error::Mismatch(_))));
        assert!(matches!(s.inner(&t), Err(Error::Mismatch(_))));
    }

    #[test]
    fn support_cap_guards_growth() {
        let mut terms = Vec::new();
        for x in 0..8u64 {
            terms.push((label(0, x, 0), ExactScalar::one()));
        }
        let err = SparseState::zero(0, 2)
            .with_cap(4)
            .add(&SparseState::from_terms(0, 2, terms).unwrap());
        assert!(matches!(err, Err(Error::SupportCap { .. })));
    }

    #[test]
    fn jsonl_round_trip() {
        let h = ExactScalar::sqrt_half();
        let s = SparseState::basis(label(0, 0, 0))
            .scale(&h)
            .add(&SparseState::basis(label(0, 1, 1)).scale(&h))
            .unwrap()
            .insert_register(0, 1);
        let mut buf = Vec::new();
        s.write_jsonl(&mut buf).unwrap();
        let back = SparseState::<ExactScalar>::read_jsonl(buf.as_slice()).unwrap();
        assert!(s.equal(&back, 0.0).unwrap());
        // float reader must reject an exact file
        assert!(SparseState::<FloatScalar>::read_jsonl(buf.as_slice()).is_err());
    }

    proptest! {
        #[test]
        fn state_files_round_trip(entries in proptest::collection::vec(
            (0i64..6, 0u64..64, 0u64..64, 0u8..2, -6i64..6, 1i64..4), 1..8)) {
            let terms: Vec<_> = entries
                .iter()
                .map(|(r, xn, yn, reg, an, ad)| {
                    (
                        CompositeLabel::new(
                            vec![*reg],
                            ResourceLabel::new(*r, Dyadic::dyadic(*xn, 3), Dyadic::dyadic(*yn, 2)),
                        ),
                        ExactScalar::new(crate::scalar::rat(*an, *ad), crate::scalar::rat(1, 3)),
                    )
                })
                .collect();
            let s = SparseState::from_terms(1, 2, terms).unwrap();
            let mut buf = Vec::new();
            s.write_jsonl(&mut buf).unwrap();
            let back = SparseState::<ExactScalar>::read_jsonl(buf.as_slice()).unwrap();
            prop_assert!(s.equal(&back, 0.0).unwrap());
        }

        #[test]
        fn cauchy_schwarz_float(amps in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..6),
                                bmps in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..6)) {
            let mk = |v: &[(f64, f64)]| {
                let terms: Vec<_> = v
                    .iter()
                    .enumerate()
                    .map(|(i, (re, im))| (label(0, i as u64, 0), Complex64::new(*re, *im)))
                    .collect();
                SparseState::from_terms(0, 2, terms).unwrap()
            };
            let s = mk(&amps);
            let t = mk(&bmps);
            let ip = s.inner(&t).unwrap().norm();
            let bound = s.norm_sq().re.sqrt() * t.norm_sq().re.sqrt();
            prop_assert!(ip <= bound + 1e-9);
            // conjugate symmetry
            let a = s.inner(&t).unwrap();
            let b = t.inner(&s).unwrap();
            prop_assert!((a - b.conj()).norm() < 1e-12);
        }
    }
}
