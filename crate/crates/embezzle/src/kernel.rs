//! Operators represented by their action on basis labels.
//!
//! A [`Kernel`] is a pair of label-to-terms functions, one for the operator
//! and one for its adjoint. Operators are never materialized as matrices:
//! the resource space is infinite-dimensional, but every generator maps a
//! basis label to a handful of labels, so lazy kernels keep protocol states
//! tiny. Adjoints are supplied in closed form and validated against the
//! pairing `⟨K u, v⟩ = conj(⟨u, K* v⟩)` in the test suite.

use std::sync::Arc;

use crate::basis::CompositeLabel;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::state::SparseState;

pub type LabelImage<S> = Vec<(CompositeLabel, S)>;
type KernelFn<S> = Arc<dyn Fn(&CompositeLabel) -> Result<LabelImage<S>> + Send + Sync>;
type StateFn<S> = Arc<dyn Fn(&SparseState<S>) -> Result<SparseState<S>> + Send + Sync>;

pub struct Kernel<S: Scalar> {
    name: String,
    arity: usize,
    forward: KernelFn<S>,
    adjoint: KernelFn<S>,
    /// Optional whole-state actions. The label functions stay authoritative
    /// (blocks and lifts need them); an override exists purely so staged
    /// operators can prune between stages instead of expanding per label.
    state_forward: Option<StateFn<S>>,
    state_adjoint: Option<StateFn<S>>,
}

impl<S: Scalar> Clone for Kernel<S> {
    fn clone(&self) -> Self {
        Kernel {
            name: self.name.clone(),
            arity: self.arity,
            forward: Arc::clone(&self.forward),
            adjoint: Arc::clone(&self.adjoint),
            state_forward: self.state_forward.clone(),
            state_adjoint: self.state_adjoint.clone(),
        }
    }
}

impl<S: Scalar> Kernel<S> {
    pub fn new<F, G>(name: impl Into<String>, arity: usize, forward: F, adjoint: G) -> Self
    where
        F: Fn(&CompositeLabel) -> Result<LabelImage<S>> + Send + Sync + 'static,
        G: Fn(&CompositeLabel) -> Result<LabelImage<S>> + Send + Sync + 'static,
    {
        Kernel {
            name: name.into(),
            arity,
            forward: Arc::new(forward),
            adjoint: Arc::new(adjoint),
            state_forward: None,
            state_adjoint: None,
        }
    }

    /// Attaches whole-state actions that must agree with the label
    /// functions (validated in tests).
    pub fn with_state_actions<F, G>(mut self, forward: F, adjoint: G) -> Self
    where
        F: Fn(&SparseState<S>) -> Result<SparseState<S>> + Send + Sync + 'static,
        G: Fn(&SparseState<S>) -> Result<SparseState<S>> + Send + Sync + 'static,
    {
        self.state_forward = Some(Arc::new(forward));
        self.state_adjoint = Some(Arc::new(adjoint));
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn forward_label(&self, label: &CompositeLabel) -> Result<LabelImage<S>> {
        (self.forward)(label)
    }

    pub fn adjoint_label(&self, label: &CompositeLabel) -> Result<LabelImage<S>> {
        (self.adjoint)(label)
    }

    /// Same kernel under a new display name.
    pub fn renamed(mut self, name: impl Into<String>) -> Kernel<S> {
        self.name = name.into();
        self
    }

    /// The adjoint operator (forward and adjoint actions swapped).
    pub fn adjoint(&self) -> Kernel<S> {
        let name = if let Some(stripped) = self.name.strip_suffix('*') {
            stripped.to_string()
        } else {
            format!("{}*", self.name)
        };
        Kernel {
            name,
            arity: self.arity,
            forward: Arc::clone(&self.adjoint),
            adjoint: Arc::clone(&self.forward),
            state_forward: self.state_adjoint.clone(),
            state_adjoint: self.state_forward.clone(),
        }
    }

    /// Identity on any label.
    pub fn identity(arity: usize) -> Kernel<S> {
        let id = |l: &CompositeLabel| Ok(vec![(l.clone(), S::one())]);
        Kernel::new("I", arity, id, id)
    }

    /// Applies the kernel to a state, accumulating and pruning term by term.
    pub fn apply(&self, s: &SparseState<S>) -> Result<SparseState<S>> {
        if let Some(f) = &self.state_forward {
            self.check_arity(s)?;
            return f(s);
        }
        self.apply_fn(s, &self.forward)
    }

    pub fn apply_adjoint(&self, s: &SparseState<S>) -> Result<SparseState<S>> {
        if let Some(f) = &self.state_adjoint {
            self.check_arity(s)?;
            return f(s);
        }
        self.apply_fn(s, &self.adjoint)
    }

    fn check_arity(&self, s: &SparseState<S>) -> Result<()> {
        if s.arity() != self.arity {
            return Err(Error::Mismatch(format!(
                "kernel {} expects arity {}, state has {}",
                self.name,
                self.arity,
                s.arity()
            )));
        }
        Ok(())
    }

    fn apply_fn(&self, s: &SparseState<S>, f: &KernelFn<S>) -> Result<SparseState<S>> {
        self.check_arity(s)?;
        let mut out = Vec::new();
        for (label, amp) in s.terms() {
            for (out_label, coeff) in f(label)? {
                out.push((out_label, amp.mul(&coeff)));
            }
        }
        SparseState::from_terms(s.arity(), s.base(), out)
    }

    /// `self` followed by `after` (operator product `after ∘ self`).
    pub fn then(&self, after: &Kernel<S>) -> Kernel<S> {
        assert_eq!(self.arity, after.arity, "composed kernels must share arity");
        let name = format!("{}·{}", after.name, self.name);
        let f1 = Arc::clone(&self.forward);
        let f2 = Arc::clone(&after.forward);
        let a1 = Arc::clone(&self.adjoint);
        let a2 = Arc::clone(&after.adjoint);
        let fwd = move |l: &CompositeLabel| -> Result<LabelImage<S>> {
            let mut out = Vec::new();
            for (mid, c1) in f1(l)? {
                for (fin, c2) in f2(&mid)? {
                    out.push((fin, c1.mul(&c2)));
                }
            }
            Ok(out)
        };
        let adj = move |l: &CompositeLabel| -> Result<LabelImage<S>> {
            let mut out = Vec::new();
            for (mid, c1) in a2(l)? {
                for (fin, c2) in a1(&mid)? {
                    out.push((fin, c1.mul(&c2)));
                }
            }
            Ok(out)
        };
        // Whole-state application goes stage by stage so cancellations
        // between the factors are pruned.
        let first = self.clone();
        let second = after.clone();
        let first_a = self.clone();
        let second_a = after.clone();
        Kernel::new(name, self.arity, fwd, adj).with_state_actions(
            move |s| second.apply(&first.apply(s)?),
            move |s| first_a.apply_adjoint(&second_a.apply_adjoint(s)?),
        )
    }

    /// Embeds a kernel into a wider register layout: register `i` of `self`
    /// becomes register `positions[i]` of the lifted kernel; all other
    /// registers pass through and the resource part is shared.
    pub fn lift(&self, arity: usize, positions: &[usize]) -> Kernel<S> {
        assert_eq!(positions.len(), self.arity, "one position per kernel register");
        assert!(positions.iter().all(|p| *p < arity));
        let positions: Vec<usize> = positions.to_vec();
        let make = |inner: KernelFn<S>, positions: Vec<usize>| {
            move |l: &CompositeLabel| -> Result<LabelImage<S>> {
                let sub = CompositeLabel::new(
                    positions.iter().map(|p| l.regs[*p]).collect(),
                    l.res.clone(),
                );
                let mut out = Vec::new();
                for (sub_out, coeff) in inner(&sub)? {
                    let mut regs = l.regs.clone();
                    for (i, p) in positions.iter().enumerate() {
                        regs[*p] = sub_out.regs[i];
                    }
                    out.push((CompositeLabel::new(regs, sub_out.res), coeff));
                }
                Ok(out)
            }
        };
        Kernel::new(
            self.name.clone(),
            arity,
            make(Arc::clone(&self.forward), positions.clone()),
            make(Arc::clone(&self.adjoint), positions),
        )
    }

    /// Controlled version: acts as `self` on labels whose register `ctrl` is
    /// nonzero, as the identity otherwise. The controlled register must not
    /// be one the kernel itself touches.
    pub fn controlled(&self, ctrl: usize) -> Kernel<S> {
        let make = |inner: KernelFn<S>| {
            move |l: &CompositeLabel| -> Result<LabelImage<S>> {
                if l.regs[ctrl] != 0 {
                    inner(l)
                } else {
                    Ok(vec![(l.clone(), S::one())])
                }
            }
        };
        Kernel::new(
            format!("ctrl[{ctrl}]{}", self.name),
            self.arity,
            make(Arc::clone(&self.forward)),
            make(Arc::clone(&self.adjoint)),
        )
    }
}

impl<S: Scalar> std::fmt::Debug for Kernel<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Kernel({}, arity {})", self.name, self.arity)
    }
}

/// Hadamard on one qubit register: `|b⟩ ↦ (|0⟩ + (−1)^b |1⟩)/√2`.
pub fn hadamard<S: Scalar>(arity: usize, reg: usize) -> Kernel<S> {
    let act = move |l: &CompositeLabel| -> Result<LabelImage<S>> {
        let h = S::sqrt_half();
        let b = l.regs[reg];
        let sign = if b == 1 { h.neg() } else { h.clone() };
        Ok(vec![(l.with_reg(reg, 0), h), (l.with_reg(reg, 1), sign)])
    };
    Kernel::new(format!("H[{reg}]"), arity, act, act)
}

/// Bit flip on one qubit register.
pub fn pauli_x<S: Scalar>(arity: usize, reg: usize) -> Kernel<S> {
    let act = move |l: &CompositeLabel| -> Result<LabelImage<S>> {
        Ok(vec![(l.with_reg(reg, 1 - l.regs[reg]), S::one())])
    };
    Kernel::new(format!("X[{reg}]"), arity, act, act)
}

/// Phase flip on one qubit register.
pub fn pauli_z<S: Scalar>(arity: usize, reg: usize) -> Kernel<S> {
    let act = move |l: &CompositeLabel| -> Result<LabelImage<S>> {
        let amp = if l.regs[reg] == 1 { S::one().neg() } else { S::one() };
        Ok(vec![(l.clone(), amp)])
    };
    Kernel::new(format!("Z[{reg}]"), arity, act, act)
}
