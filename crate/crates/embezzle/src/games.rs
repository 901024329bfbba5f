//! The coherent two-input game: a referee hands the players one of two
//! orthogonal qutrit-pair states `φ_c` and wins are decided by the parity
//! of the measured bits, `a ⊕ b = c`.
//!
//! Qutrits are carried as qubit pairs with the encoding 0 ≡ 00,
//! 1 ≡ 10 (Alice) / 01 (Bob), 2 ≡ 11; the register layout is
//! `[A₁, A₂, B₂, B₁]` with the resource space shared in the middle.
//! Strategies are one unitary procedure per side (the two sides must
//! commute) followed by exact projective readout of `A₁` and `B₁`; win
//! probabilities are computed from squared projection norms, never sampled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::error::Result;
use crate::kernel::{hadamard, pauli_x, pauli_z, Kernel};
use crate::protocol::{random_composite_label, CheckConfig, Protocol, Witness};
use crate::scalar::Scalar;
use crate::state::SparseState;
use crate::vdh::VdhProtocol;

/// Register indices in the game layout.
pub const A1: usize = 0;
pub const A2: usize = 1;
pub const B2: usize = 2;
pub const B1: usize = 3;

/// The register patterns of `φ_c` with their amplitudes:
/// `1/√2 |00⟩⊗|00⟩ + (−1)^c (1/2 |10⟩⊗|01⟩ + 1/2 |11⟩⊗|11⟩)`
/// written over `[A₁, A₂, B₂, B₁]`.
pub fn phi_patterns<S: Scalar>(c: u8) -> Vec<(Vec<u8>, S)> {
    let h = S::sqrt_half();
    let half = h.mul(&h);
    let signed = if c == 1 { half.neg() } else { half.clone() };
    vec![
        (vec![0, 0, 0, 0], h),
        (vec![1, 0, 0, 1], signed.clone()),
        (vec![1, 1, 1, 1], signed),
    ]
}

/// `φ_c` as an arity-4 state over a trivial resource label.
pub fn build_phi<S: Scalar>(c: u8, base: u32) -> Result<SparseState<S>> {
    SparseState::compose_registers(&phi_patterns(c), &SparseState::origin(base))
}

/// A strategy: commuting side procedures plus the catalyst they consume.
pub struct Strategy<S: Scalar> {
    pub name: String,
    pub base: u32,
    /// Alice's full side (arity 4), including her Hadamard.
    pub a_side: Kernel<S>,
    /// Bob's full side (arity 4).
    pub b_side: Kernel<S>,
    pub catalyst: SparseState<S>,
}

/// Exact outcome distribution over the measured bits `(a, b)`.
pub struct GameOutcome<S: Scalar> {
    pub c: u8,
    pub distribution: Vec<((u8, u8), S)>,
    pub win_probability: S,
}

impl<S: Scalar> GameOutcome<S> {
    pub fn to_json(&self) -> Value {
        let mut dist = serde_json::Map::new();
        for ((a, b), p) in &self.distribution {
            dist.insert(format!("{a}{b}"), p.to_json());
        }
        json!({
            "c": self.c,
            "distribution": Value::Object(dist),
            "win_probability": self.win_probability.to_json(),
        })
    }
}

/// Wires an embezzlement protocol into the game: controlled `U*` on each
/// side (control on the first/last register), then Hadamards on the
/// measured bits.
pub fn strategy_from_protocol<S: Scalar>(p: &Protocol<S>, name: impl Into<String>) -> Strategy<S> {
    let ctrl_ua = p.alice.adjoint().lift(4, &[A2]).controlled(A1);
    let ctrl_ub = p.bob.adjoint().lift(4, &[B2]).controlled(B1);
    Strategy {
        name: name.into(),
        base: p.base,
        a_side: ctrl_ua.then(&hadamard(4, A1)),
        b_side: ctrl_ub.then(&hadamard(4, B1)),
        catalyst: p.catalyst.clone(),
    }
}

/// The exact winning strategy built on the shift protocol.
pub fn perfect_strategy<S: Scalar>() -> Strategy<S> {
    strategy_from_protocol(&Protocol::bell(), "perfect")
}

/// Finite strategy built on the size-`n` permutation protocol.
pub fn vdh_strategy(n: usize) -> Strategy<num::complex::Complex64> {
    strategy_from_protocol(&VdhProtocol::new(n).as_protocol(), format!("vdh-{n}"))
}

impl<S: Scalar> Strategy<S> {
    /// Evolves `φ_c ⊗ catalyst` and returns the exact distribution of the
    /// measured bits together with `P(a ⊕ b = c)`.
    pub fn play(&self, c: u8) -> Result<GameOutcome<S>> {
        let input = SparseState::compose_registers(&phi_patterns(c), &self.catalyst)?;
        let out = self.b_side.apply(&self.a_side.apply(&input)?)?;
        let mut distribution = Vec::new();
        let mut win = S::zero();
        for a in 0..2u8 {
            for b in 0..2u8 {
                let p = out.project(A1, a).project(B1, b).norm_sq();
                if (a ^ b) == c {
                    win = win.add(&p);
                }
                distribution.push(((a, b), p));
            }
        }
        Ok(GameOutcome { c, distribution, win_probability: win })
    }

    /// The side procedures applied to an arbitrary arity-4 state (used by
    /// the reduction and by commutation sampling).
    fn both_sides(&self, s: &SparseState<S>) -> Result<SparseState<S>> {
        self.b_side.apply(&self.a_side.apply(s)?)
    }

    /// Runs the reduction circuit on `|00⟩⊗|00⟩ ⊗ catalyst`: the strategy,
    /// `Z` on both measured bits, the inverse strategy, then `X` on both
    /// measured bits. For a winning strategy the output carries the target
    /// pair in `(A₂, B₂)` with the catalyst restored.
    pub fn reduction_to_embezzlement(&self) -> Result<SparseState<S>> {
        let start = SparseState::compose_registers(
            &[(vec![0, 0, 0, 0], S::one())],
            &self.catalyst,
        )?;
        let mut s = self.both_sides(&start)?;
        s = pauli_z(4, A1).apply(&s)?;
        s = pauli_z(4, B1).apply(&s)?;
        s = self.a_side.apply_adjoint(&self.b_side.apply_adjoint(&s)?)?;
        s = pauli_x(4, A1).apply(&s)?;
        s = pauli_x(4, B1).apply(&s)?;
        Ok(s)
    }

    /// Sampled commutation of the two sides on random arity-4 labels.
    pub fn commutation_check(&self, cfg: &CheckConfig) -> Result<Option<Witness>> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        for _ in 0..cfg.samples {
            let label = random_composite_label(&mut rng, self.base, 2, 4, &cfg.bounds);
            let s = SparseState::<S>::basis(label.clone());
            let ab = self.b_side.apply(&self.a_side.apply(&s)?)?;
            let ba = self.a_side.apply(&self.b_side.apply(&s)?)?;
            if !ab.equal(&ba, cfg.eps)? {
                return Ok(Some(Witness {
                    check: "strategy_side_commutation".into(),
                    label: format!("{label:?}"),
                }));
            }
        }
        Ok(None)
    }
}
