//! The explicit commuting-operator construction on the shift-labeled
//! resource space, together with its verification machinery: block
//! extraction, the four-value state functional, sampled commutation and
//! unitarity checks, and the shift-orbit isometry witness.
//!
//! Generators act on labels `|r, x, y⟩`:
//!
//! * `L1 |r,x,y⟩ = |r, bx, by⟩` shifts all digits up.
//! * `L2` applies a fixed `d²×d²` unitary to the digit pair `(x₀, y₀)`.
//! * `L = L2·L1`; `LA` increments `r`; `LB = LA*·L`.
//! * `C` applies `L^r` to the `(x, y)` part, making swaps shift-covariant.
//! * `SB` swaps the Bob register with digit 0 of `y`; `SA` is the naive
//!   `x`-digit swap conjugated by `C` so that it targets Alice's logical
//!   digit at position `-r` regardless of the current shift offset.
//! * `UA = SA·LA` and `UB = SB·LB` are the two party operators.
//!
//! `SA` is applied through a closed form (decode the crossing digit pair,
//! swap, re-encode) rather than by expanding the conjugation; the two agree
//! and the test suite checks them against each other and against an
//! independent brute-force oracle.

use std::collections::BTreeMap;
use std::sync::Arc;

use num::complex::Complex64;
use num::{BigUint, Zero};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::basis::{CompositeLabel, Dyadic, ResourceLabel};
use crate::error::{Error, Result};
use crate::kernel::{Kernel, LabelImage};
use crate::par;
use crate::scalar::{Scalar, EPS_F};
use crate::state::SparseState;

/// The digit-pair unitary applied by `L2`.
///
/// `entry(out, inp)` is the matrix element mapping input digit pair
/// `inp = (x₀, y₀)` to output pair `out`.
pub enum L2Block<S: Scalar> {
    /// The maximally-entangling base-2 block: column `(x₀, y₀)` is
    /// `(|0, y₀⟩ + (−1)^{x₀} |1, ȳ₀⟩)/√2`.
    Bell,
    /// An arbitrary unitary on ℂ^d ⊗ ℂ^d, row-major `d² × d²`.
    Matrix { d: u32, w: Vec<S> },
}

impl<S: Scalar> L2Block<S> {
    pub fn dim(&self) -> u32 {
        match self {
            L2Block::Bell => 2,
            L2Block::Matrix { d, .. } => *d,
        }
    }

    pub fn entry(&self, out: (u32, u32), inp: (u32, u32)) -> S {
        match self {
            L2Block::Bell => {
                let (a, b) = out;
                let (x0, y0) = inp;
                if a == 0 {
                    if b == y0 {
                        S::sqrt_half()
                    } else {
                        S::zero()
                    }
                } else if b == 1 - y0 {
                    if x0 == 1 {
                        S::sqrt_half().neg()
                    } else {
                        S::sqrt_half()
                    }
                } else {
                    S::zero()
                }
            }
            L2Block::Matrix { d, w } => {
                let dd = (*d as usize) * (*d as usize);
                let row = (out.0 * d + out.1) as usize;
                let col = (inp.0 * d + inp.1) as usize;
                w[row * dd + col].clone()
            }
        }
    }
}

/// The generator family for one digit base and one `L2` block.
pub struct Generators<S: Scalar> {
    base: u32,
    block: Arc<L2Block<S>>,
}

impl<S: Scalar> Clone for Generators<S> {
    fn clone(&self) -> Self {
        Generators { base: self.base, block: Arc::clone(&self.block) }
    }
}

impl<S: Scalar> Generators<S> {
    /// Base-2 generators with the Bell `L2` block.
    pub fn bell() -> Self {
        Generators { base: 2, block: Arc::new(L2Block::Bell) }
    }

    /// Base-`d` generators around an explicit `L2` unitary.
    pub fn with_block(d: u32, block: L2Block<S>) -> Self {
        assert_eq!(block.dim(), d);
        Generators { base: d, block: Arc::new(block) }
    }

    pub fn base(&self) -> u32 {
        self.base
    }

    /// `L1 |r,x,y⟩ = |r, bx, by⟩`.
    pub fn l1(&self) -> Kernel<S> {
        let fwd = |l: &CompositeLabel| -> Result<LabelImage<S>> {
            let res = ResourceLabel::new(l.res.r, l.res.x.shifted_up(), l.res.y.shifted_up());
            Ok(vec![(CompositeLabel::resource(res), S::one())])
        };
        let adj = |l: &CompositeLabel| -> Result<LabelImage<S>> {
            let res = ResourceLabel::new(l.res.r, l.res.x.shifted_down(), l.res.y.shifted_down());
            Ok(vec![(CompositeLabel::resource(res), S::one())])
        };
        Kernel::new("L1", 0, fwd, adj)
    }

    /// `L2`: the block unitary on the digit pair `(x₀, y₀)`.
    pub fn l2(&self) -> Kernel<S> {
        let d = self.base;
        let block = Arc::clone(&self.block);
        let block_a = Arc::clone(&self.block);
        let fwd = move |l: &CompositeLabel| -> Result<LabelImage<S>> {
            let inp = (l.res.x.digit(0), l.res.y.digit(0));
            let mut out = Vec::new();
            for a in 0..d {
                for b in 0..d {
                    let coeff = block.entry((a, b), inp);
                    if coeff.is_zero() {
                        continue;
                    }
                    let res = ResourceLabel::new(
                        l.res.r,
                        l.res.x.with_digit(0, a)?,
                        l.res.y.with_digit(0, b)?,
                    );
                    out.push((CompositeLabel::resource(res), coeff));
                }
            }
            Ok(out)
        };
        let adj = move |l: &CompositeLabel| -> Result<LabelImage<S>> {
            let inp = (l.res.x.digit(0), l.res.y.digit(0));
            let mut out = Vec::new();
            for a in 0..d {
                for b in 0..d {
                    let coeff = block_a.entry(inp, (a, b)).conj();
                    if coeff.is_zero() {
                        continue;
                    }
                    let res = ResourceLabel::new(
                        l.res.r,
                        l.res.x.with_digit(0, a)?,
                        l.res.y.with_digit(0, b)?,
                    );
                    out.push((CompositeLabel::resource(res), coeff));
                }
            }
            Ok(out)
        };
        Kernel::new("L2", 0, fwd, adj)
    }

    /// `L = L2·L1`.
    pub fn l(&self) -> Kernel<S> {
        self.l1().then(&self.l2()).renamed("L")
    }

    /// `LA |r,x,y⟩ = |r+1,x,y⟩`.
    pub fn la(&self) -> Kernel<S> {
        let fwd = |l: &CompositeLabel| -> Result<LabelImage<S>> {
            let res = ResourceLabel::new(l.res.r + 1, l.res.x.clone(), l.res.y.clone());
            Ok(vec![(CompositeLabel::resource(res), S::one())])
        };
        let adj = |l: &CompositeLabel| -> Result<LabelImage<S>> {
            let res = ResourceLabel::new(l.res.r - 1, l.res.x.clone(), l.res.y.clone());
            Ok(vec![(CompositeLabel::resource(res), S::one())])
        };
        Kernel::new("LA", 0, fwd, adj)
    }

    /// `LB = LA*·L`: both rows shift, then Alice's shift is undone.
    pub fn lb(&self) -> Kernel<S> {
        self.l().then(&self.la().adjoint()).renamed("LB")
    }

    /// `L^k` applied to the `(x, y)` part of one label, `(L*)^{|k|}` for
    /// negative `k`. Terms accumulate and cancel between steps.
    fn l_power(l: &Kernel<S>, label: &CompositeLabel, k: i64) -> Result<LabelImage<S>> {
        if k.unsigned_abs() > 64 {
            return Err(Error::Usage(format!("shift power {k} out of supported range")));
        }
        let mut acc: BTreeMap<CompositeLabel, S> = BTreeMap::new();
        acc.insert(label.clone(), S::one());
        for _ in 0..k.unsigned_abs() {
            let mut next: BTreeMap<CompositeLabel, S> = BTreeMap::new();
            for (lab, amp) in &acc {
                let image = if k >= 0 { l.forward_label(lab)? } else { l.adjoint_label(lab)? };
                for (out, coeff) in image {
                    let entry = next.entry(out).or_insert_with(S::zero);
                    *entry = entry.add(&amp.mul(&coeff));
                }
            }
            next.retain(|_, a| !a.is_zero());
            acc = next;
        }
        Ok(acc.into_iter().collect())
    }

    /// `L^{±r}` on a whole state, stage by stage per shift-offset group so
    /// cancellations between terms are pruned as they arise.
    fn c_state(l: &Kernel<S>, s: &SparseState<S>, star: bool) -> Result<SparseState<S>> {
        let mut groups: BTreeMap<i64, Vec<(CompositeLabel, S)>> = BTreeMap::new();
        for (label, amp) in s.terms() {
            groups.entry(label.res.r).or_default().push((label.clone(), amp.clone()));
        }
        let mut out = SparseState::zero(s.arity(), s.base());
        for (r, terms) in groups {
            let k = if star { -r } else { r };
            if k.unsigned_abs() > 64 {
                return Err(Error::Usage(format!("shift power {k} out of supported range")));
            }
            let mut st = SparseState::from_terms(s.arity(), s.base(), terms)?;
            for _ in 0..k.unsigned_abs() {
                st = if k >= 0 { l.apply(&st)? } else { l.apply_adjoint(&st)? };
            }
            out = out.add(&st)?;
        }
        Ok(out)
    }

    /// Controlled shift `C |r,x,y⟩ = L^r |r,x,y⟩` (adjoint powers for r < 0).
    pub fn c(&self) -> Kernel<S> {
        let lf = self.l();
        let la = self.l();
        let fwd = move |l: &CompositeLabel| Self::l_power(&lf, l, l.res.r);
        let adj = move |l: &CompositeLabel| Self::l_power(&la, l, -l.res.r);
        let l_fwd = self.l();
        let l_adj = self.l();
        Kernel::new("C", 0, fwd, adj).with_state_actions(
            move |s| Self::c_state(&l_fwd, s, false),
            move |s| Self::c_state(&l_adj, s, true),
        )
    }

    /// Bob swap: `|t⟩ ⊗ |r,x,y⟩ ↦ |y₀⟩ ⊗ |r, x, y − y₀ + t⟩`.
    pub fn sb(&self) -> Kernel<S> {
        let act = |l: &CompositeLabel| -> Result<LabelImage<S>> {
            let t = l.regs[0] as u32;
            let y0 = l.res.y.digit(0);
            let res = ResourceLabel::new(l.res.r, l.res.x.clone(), l.res.y.with_digit(0, t)?);
            Ok(vec![(CompositeLabel::new(vec![y0 as u8], res), S::one())])
        };
        Kernel::new("SB", 1, act, act)
    }

    /// Naive Alice swap on the literal digit 0 of `x`; does not commute
    /// with `LB` and is only a building block (or a deliberate fault).
    pub fn sa_naive(&self) -> Kernel<S> {
        let act = |l: &CompositeLabel| -> Result<LabelImage<S>> {
            let s = l.regs[0] as u32;
            let x0 = l.res.x.digit(0);
            let res = ResourceLabel::new(l.res.r, l.res.x.with_digit(0, s)?, l.res.y.clone());
            Ok(vec![(CompositeLabel::new(vec![x0 as u8], res), S::one())])
        };
        Kernel::new("SA~", 1, act, act)
    }

    /// Alice swap targeting the logical digit at position `p = −r`.
    ///
    /// For `p ≥ 0` this is a literal digit swap. For `p < 0` the digit pair
    /// at `p` is stored in the converted basis, so the swap decodes it
    /// through the `L2` block, swaps, and re-encodes:
    /// `amp(a, x', y') = Σ_b W[(a,b),(x_p,y_p)] · conj(W[(s,b),(x',y')])`.
    /// This is the conjugation `C*·SA~·C` in closed form; both routes are
    /// checked against each other in the tests.
    pub fn sa(&self) -> Kernel<S> {
        let d = self.base;
        let block = Arc::clone(&self.block);
        let act = move |l: &CompositeLabel| -> Result<LabelImage<S>> {
            let s = l.regs[0] as u32;
            let p = -l.res.r;
            if p >= 0 {
                let xp = l.res.x.digit(p);
                let res =
                    ResourceLabel::new(l.res.r, l.res.x.with_digit(p, s)?, l.res.y.clone());
                return Ok(vec![(CompositeLabel::new(vec![xp as u8], res), S::one())]);
            }
            let xt = l.res.x.digit(p);
            let yt = l.res.y.digit(p);
            let mut out = Vec::new();
            for a in 0..d {
                for x2 in 0..d {
                    for y2 in 0..d {
                        let mut coeff = S::zero();
                        for b in 0..d {
                            let lhs = block.entry((a, b), (xt, yt));
                            let rhs = block.entry((s, b), (x2, y2)).conj();
                            coeff = coeff.add(&lhs.mul(&rhs));
                        }
                        if coeff.is_zero() {
                            continue;
                        }
                        let res = ResourceLabel::new(
                            l.res.r,
                            l.res.x.with_digit(p, x2)?,
                            l.res.y.with_digit(p, y2)?,
                        );
                        out.push((CompositeLabel::new(vec![a as u8], res), coeff));
                    }
                }
            }
            Ok(out)
        };
        Kernel::new("SA", 1, act.clone(), act)
    }

    /// The swap conjugation spelled out as `C* · SA~ · C` (shift first).
    /// Exponential in `|r|`; kept for cross-validation.
    pub fn sa_via_conjugation(&self) -> Kernel<S> {
        let c = self.c().lift(1, &[]);
        c.then(&self.sa_naive()).then(&c.adjoint()).renamed("SA(conj)")
    }

    /// Alice's protocol unitary `UA = SA·LA`.
    pub fn ua(&self) -> Kernel<S> {
        self.la().lift(1, &[]).then(&self.sa()).renamed("UA")
    }

    /// Bob's protocol unitary `UB = SB·LB`.
    pub fn ub(&self) -> Kernel<S> {
        self.lb().lift(1, &[]).then(&self.sb()).renamed("UB")
    }

    /// All named generators with their register arities, for sampled
    /// unitarity checks.
    pub fn named_kernels(&self) -> Vec<Kernel<S>> {
        vec![
            self.l1(),
            self.l2(),
            self.l(),
            self.la(),
            self.lb(),
            self.c(),
            self.sb(),
            self.sa_naive(),
            self.sa(),
            self.ua(),
            self.ub(),
        ]
    }
}

/// Bounds for sampled basis labels.
#[derive(Clone, Debug)]
pub struct LabelBounds {
    pub max_r: i64,
    pub max_int_bits: u32,
    pub max_frac_bits: u32,
}

impl Default for LabelBounds {
    fn default() -> Self {
        LabelBounds { max_r: 8, max_int_bits: 8, max_frac_bits: 8 }
    }
}

/// Seeded configuration for the randomized checks.
#[derive(Clone, Debug)]
pub struct CheckConfig {
    pub seed: u64,
    pub samples: usize,
    pub bounds: LabelBounds,
    pub eps: f64,
    pub witness_n: usize,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            seed: 42,
            samples: 200,
            bounds: LabelBounds::default(),
            eps: EPS_F,
            witness_n: 8,
        }
    }
}

pub fn random_dyadic<R: Rng>(rng: &mut R, base: u32, bounds: &LabelBounds) -> Dyadic {
    let digits = bounds.max_int_bits + bounds.max_frac_bits;
    let mut num = BigUint::zero();
    for _ in 0..digits {
        num = num * BigUint::from(base) + BigUint::from(rng.gen_range(0..base));
    }
    Dyadic::new(base, num, bounds.max_frac_bits as i64)
}

pub fn random_resource_label<R: Rng>(
    rng: &mut R,
    base: u32,
    bounds: &LabelBounds,
) -> ResourceLabel {
    ResourceLabel::new(
        rng.gen_range(-bounds.max_r..=bounds.max_r),
        random_dyadic(rng, base, bounds),
        random_dyadic(rng, base, bounds),
    )
}

pub fn random_composite_label<R: Rng>(
    rng: &mut R,
    base: u32,
    dim: u32,
    arity: usize,
    bounds: &LabelBounds,
) -> CompositeLabel {
    let regs = (0..arity).map(|_| rng.gen_range(0..dim) as u8).collect();
    CompositeLabel::new(regs, random_resource_label(rng, base, bounds))
}

/// Resource-space block `K_{ij}: h ↦ ⟨i| K (|j⟩ ⊗ h)` of an arity-1 kernel.
/// The adjoint block is the `(j, i)` block of the adjoint.
pub fn block<S: Scalar>(k: &Kernel<S>, i: u8, j: u8) -> Kernel<S> {
    assert_eq!(k.arity(), 1, "block extraction expects a (register, resource) kernel");
    let name = format!("{}[{i}{j}]", k.name());
    let kf = k.clone();
    let ka = k.clone();
    let fwd = move |l: &CompositeLabel| -> Result<LabelImage<S>> {
        let full = l.insert_reg(0, j);
        let mut out = Vec::new();
        for (lab, coeff) in kf.forward_label(&full)? {
            if lab.regs[0] == i {
                out.push((lab.remove_reg(0), coeff));
            }
        }
        Ok(out)
    };
    let adj = move |l: &CompositeLabel| -> Result<LabelImage<S>> {
        let full = l.insert_reg(0, i);
        let mut out = Vec::new();
        for (lab, coeff) in ka.adjoint_label(&full)? {
            if lab.regs[0] == j {
                out.push((lab.remove_reg(0), coeff));
            }
        }
        Ok(out)
    };
    Kernel::new(name, 0, fwd, adj)
}

/// A two-party protocol: commuting unitaries on (register, resource) plus a
/// unit catalyst state and the register amplitudes it claims to produce.
pub struct Protocol<S: Scalar> {
    pub name: String,
    /// Register dimension (2 for qubit protocols).
    pub dim: u32,
    /// Digit base of the resource labels.
    pub base: u32,
    /// Alice's unitary on (her register, resource); arity 1.
    pub alice: Kernel<S>,
    /// Bob's unitary on (his register, resource); arity 1.
    pub bob: Kernel<S>,
    pub catalyst: SparseState<S>,
    /// Target coefficients `α[i][j]` of the state to be produced.
    pub target: Vec<Vec<S>>,
    /// Present for shift protocols; enables generator-level unitarity checks.
    pub generators: Option<Generators<S>>,
}

fn bell_target<S: Scalar>() -> Vec<Vec<S>> {
    let h = S::sqrt_half();
    vec![vec![h.clone(), S::zero()], vec![S::zero(), h]]
}

impl<S: Scalar> Protocol<S> {
    /// The exact shift protocol producing a Bell pair.
    pub fn bell() -> Self {
        let gens = Generators::<S>::bell();
        Protocol {
            name: "shift-bell".into(),
            dim: 2,
            base: 2,
            alice: gens.ua(),
            bob: gens.ub(),
            catalyst: SparseState::origin(2),
            target: bell_target(),
            generators: Some(gens),
        }
    }

    /// Deliberately broken variant: the naive Alice swap replaces the
    /// shift-covariant one, so the party operators no longer commute.
    pub fn bell_with_naive_swap() -> Self {
        let gens = Generators::<S>::bell();
        let alice = gens.la().lift(1, &[]).then(&gens.sa_naive()).renamed("UA~");
        Protocol {
            name: "shift-bell-naive-swap".into(),
            dim: 2,
            base: 2,
            alice,
            bob: gens.ub(),
            catalyst: SparseState::origin(2),
            target: bell_target(),
            generators: Some(gens),
        }
    }

    /// Deliberately broken variant: Bob's shift skips the digit-pair basis
    /// conversion (`L1` alone instead of `L2·L1`), so the run output misses
    /// the target state.
    pub fn bell_without_basis_change() -> Self {
        let gens = Generators::<S>::bell();
        let lb = gens.l1().then(&gens.la().adjoint());
        let bob = lb.lift(1, &[]).then(&gens.sb()).renamed("UB~");
        Protocol {
            name: "shift-bell-skip-basis-change".into(),
            dim: 2,
            base: 2,
            alice: gens.ua(),
            bob,
            catalyst: SparseState::origin(2),
            target: bell_target(),
            generators: Some(gens),
        }
    }

    /// Both parties do nothing. Commutes and preserves norms, but produces
    /// no entanglement; useful as a negative control.
    pub fn identity() -> Self {
        Protocol {
            name: "identity".into(),
            dim: 2,
            base: 2,
            alice: Kernel::identity(1),
            bob: Kernel::identity(1),
            catalyst: SparseState::origin(2),
            target: bell_target(),
            generators: None,
        }
    }

    /// The target state `Σ α_ij |i⟩|j⟩ ⊗ ψ` as an arity-2 composite.
    pub fn target_state(&self) -> Result<SparseState<S>> {
        let mut patterns = Vec::new();
        for (i, row) in self.target.iter().enumerate() {
            for (j, amp) in row.iter().enumerate() {
                if !amp.is_zero() {
                    patterns.push((vec![i as u8, j as u8], amp.clone()));
                }
            }
        }
        SparseState::compose_registers(&patterns, &self.catalyst)
    }

    /// Runs `(U_A ⊗ I)(I ⊗ U_B) |a₀⟩ ⊗ ψ ⊗ |b₀⟩`, returning the arity-2
    /// state with Alice's register first.
    pub fn run(&self, a0: u8, b0: u8) -> Result<SparseState<S>> {
        if u32::from(a0) >= self.dim || u32::from(b0) >= self.dim {
            return Err(Error::Usage(format!(
                "register inputs ({a0}, {b0}) out of range for dimension {}",
                self.dim
            )));
        }
        let input = self.catalyst.insert_register(0, a0).insert_register(1, b0);
        let after_bob = self.bob.lift(2, &[1]).apply(&input)?;
        self.alice.lift(2, &[0]).apply(&after_bob)
    }

    /// The values `s_ij = ⟨U_{i0} V_{j0} ψ, ψ⟩` for all `i, j`.
    pub fn state_functional(&self) -> Result<Functional<S>> {
        let d = self.dim as usize;
        let mut values = vec![S::zero(); d * d];
        for j in 0..d {
            let vj = block(&self.bob, j as u8, 0);
            let w = vj.apply(&self.catalyst)?;
            for (i, slot) in values[j * d..(j + 1) * d].iter_mut().enumerate() {
                let ui = block(&self.alice, i as u8, 0);
                let v = ui.apply(&w)?;
                *slot = v.inner(&self.catalyst)?;
            }
        }
        Ok(Functional { dim: self.dim, values })
    }

    /// Checks party-level commutation and block-level *-commutation on
    /// seeded random basis labels. Returns the first counterexample found.
    pub fn commutation_check(&self, cfg: &CheckConfig) -> Result<CommutationReport> {
        self.commutation_check_impl(cfg, false)
    }

    /// Sequential twin of [`Protocol::commutation_check`] (same result).
    pub fn commutation_check_sequential(&self, cfg: &CheckConfig) -> Result<CommutationReport> {
        self.commutation_check_impl(cfg, true)
    }

    fn commutation_check_impl(&self, cfg: &CheckConfig, sequential: bool) -> Result<CommutationReport> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let samples: Vec<(CompositeLabel, ResourceLabel)> = (0..cfg.samples)
            .map(|_| {
                (
                    random_composite_label(&mut rng, self.base, self.dim, 2, &cfg.bounds),
                    random_resource_label(&mut rng, self.base, &cfg.bounds),
                )
            })
            .collect();
        let ua = self.alice.lift(2, &[0]);
        let ub = self.bob.lift(2, &[1]);
        let d = self.dim as u8;
        let mut blocks_a = Vec::new();
        let mut blocks_b = Vec::new();
        for i in 0..d {
            for j in 0..d {
                blocks_a.push(block(&self.alice, i, j));
                blocks_b.push(block(&self.bob, i, j));
            }
        }
        let eps = cfg.eps;
        let check_one = |(comp, res): &(CompositeLabel, ResourceLabel)| -> Result<Option<Witness>> {
            let s = SparseState::<S>::basis(comp.clone());
            let lhs = ua.apply(&ub.apply(&s)?)?;
            let rhs = ub.apply(&ua.apply(&s)?)?;
            if !lhs.equal(&rhs, eps)? {
                return Ok(Some(Witness {
                    check: "party_commutation".into(),
                    label: format!("{comp:?}"),
                }));
            }
            let u = SparseState::<S>::basis(CompositeLabel::resource(res.clone()));
            for ba in &blocks_a {
                for bb in &blocks_b {
                    let vb = bb.apply(&u)?;
                    if !ba.apply(&vb)?.equal(&bb.apply(&ba.apply(&u)?)?, eps)? {
                        return Ok(Some(Witness {
                            check: format!("block_commutation {} vs {}", ba.name(), bb.name()),
                            label: format!("{res:?}"),
                        }));
                    }
                    if !ba.apply_adjoint(&vb)?.equal(&bb.apply(&ba.apply_adjoint(&u)?)?, eps)? {
                        return Ok(Some(Witness {
                            check: format!("block_star_commutation {}* vs {}", ba.name(), bb.name()),
                            label: format!("{res:?}"),
                        }));
                    }
                }
            }
            Ok(None)
        };
        let results: Vec<Result<Option<Witness>>> = if sequential {
            par::map_sequential(&samples, check_one)
        } else {
            par::map(&samples, check_one)
        };
        let mut witness = None;
        for r in results {
            if let Some(w) = r? {
                witness = Some(w);
                break;
            }
        }
        Ok(CommutationReport {
            pass: witness.is_none(),
            samples: cfg.samples,
            seed: cfg.seed,
            witness,
        })
    }

    /// Sampled block completeness `Σ_i K_{ij}* K_{ij} = I` for each column
    /// `j`, for both parties.
    pub fn block_completeness_check(&self, cfg: &CheckConfig) -> Result<UnitarityReport> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
        let d = self.dim as u8;
        let mut witness = None;
        'outer: for _ in 0..cfg.samples.min(64) {
            let res = random_resource_label(&mut rng, self.base, &cfg.bounds);
            let u = SparseState::<S>::basis(CompositeLabel::resource(res.clone()));
            for (party, kernel) in [("A", &self.alice), ("B", &self.bob)] {
                for j in 0..d {
                    let mut acc = SparseState::zero(0, self.base);
                    for i in 0..d {
                        let bij = block(kernel, i, j);
                        acc = acc.add(&bij.apply_adjoint(&bij.apply(&u)?)?)?;
                    }
                    if !acc.equal(&u, cfg.eps)? {
                        witness = Some(Witness {
                            check: format!("block_completeness party {party} column {j}"),
                            label: format!("{res:?}"),
                        });
                        break 'outer;
                    }
                }
            }
        }
        Ok(UnitarityReport { pass: witness.is_none(), samples: cfg.samples.min(64), witness })
    }

    /// Shift-orbit witness: Gram matrix of `e_n = U₀₀*ⁿ ψ` and the orbit
    /// relations that force the non-surjective isometry.
    pub fn isometry_witness(&self, cfg: &CheckConfig) -> Result<WitnessReport> {
        let n = cfg.witness_n;
        let u00 = block(&self.alice, 0, 0);
        let v00 = block(&self.bob, 0, 0);
        let mut orbit = vec![self.catalyst.clone()];
        for _ in 0..n {
            orbit.push(u00.apply_adjoint(orbit.last().unwrap())?);
        }
        let mut gram = Vec::new();
        let mut gram_is_identity = true;
        for (m, em) in orbit.iter().enumerate() {
            let mut row = Vec::new();
            for (k, ek) in orbit.iter().enumerate() {
                let entry = em.inner(ek)?;
                let expected = if m == k { S::one() } else { S::zero() };
                if S::EXACT {
                    gram_is_identity &= entry == expected;
                } else {
                    gram_is_identity &= entry.sub(&expected).abs() < cfg.eps;
                }
                row.push(entry.to_json());
            }
            gram.push(row);
        }
        // ψ is orthogonal to U₀₀*·span{e_n}, so the restricted isometry
        // cannot be surjective.
        let range_escape = orbit
            .iter()
            .skip(1)
            .map(|e| self.catalyst.inner(e))
            .collect::<Result<Vec<_>>>()?
            .iter()
            .all(|v| v.is_zero() || (!S::EXACT && v.abs() < cfg.eps));

        let sqrt2 = S::sqrt_two();
        let inv_sqrt2 = S::sqrt_half();
        let mut restore = true;
        let mut bob_star_orbit = true;
        let mut bob_orbit = true;
        let mut fwd = self.catalyst.clone(); // (√2 U₀₀)ⁿ ψ
        let mut bob_star = self.catalyst.clone(); // (V₀₀*)ⁿ ψ
        let mut bob_fwd = self.catalyst.clone(); // V₀₀ⁿ ψ
        let mut alice_scaled = self.catalyst.clone(); // (U₀₀*/√2)ⁿ ψ
        for (k, ek) in orbit.iter().enumerate().skip(1) {
            // U₀₀ᵏ U₀₀*ᵏ ψ = ψ
            let mut back = ek.clone();
            for _ in 0..k {
                back = u00.apply(&back)?;
            }
            restore &= back.equal(&self.catalyst, cfg.eps)?;
            fwd = u00.apply(&fwd)?.scale(&sqrt2);
            bob_star = v00.apply_adjoint(&bob_star)?;
            bob_star_orbit &= bob_star.equal(&fwd, cfg.eps)?;
            bob_fwd = v00.apply(&bob_fwd)?;
            alice_scaled = u00.apply_adjoint(&alice_scaled)?.scale(&inv_sqrt2);
            bob_orbit &= bob_fwd.equal(&alice_scaled, cfg.eps)?;
        }
        let pass = gram_is_identity && range_escape && restore && bob_star_orbit && bob_orbit;
        Ok(WitnessReport {
            n_max: n,
            gram,
            gram_is_identity,
            range_escape,
            orbit_restores_catalyst: restore,
            bob_adjoint_orbit_matches: bob_star_orbit,
            bob_orbit_matches: bob_orbit,
            pass,
        })
    }

    /// Generator-level unitarity: adjoint pairing and `KK* = K*K = I` on
    /// sampled basis states, for every named kernel.
    pub fn kernel_unitarity_check(&self, cfg: &CheckConfig) -> Result<Option<UnitarityReport>> {
        let Some(gens) = &self.generators else {
            return Ok(None);
        };
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(2));
        let kernels = gens.named_kernels();
        let n = cfg.samples.min(64);
        let samples: Vec<Vec<(CompositeLabel, CompositeLabel)>> = (0..n)
            .map(|_| {
                kernels
                    .iter()
                    .map(|k| {
                        let a = random_composite_label(&mut rng, self.base, self.dim, k.arity(), &cfg.bounds);
                        let b = random_composite_label(&mut rng, self.base, self.dim, k.arity(), &cfg.bounds);
                        (a, b)
                    })
                    .collect()
            })
            .collect();
        let eps = cfg.eps;
        let check_one = |pairs: &Vec<(CompositeLabel, CompositeLabel)>| -> Result<Option<Witness>> {
            for (k, (label, other)) in kernels.iter().zip(pairs) {
                let u = SparseState::<S>::basis(label.clone());
                let v = SparseState::<S>::basis(other.clone());
                let ku = k.apply(&u)?;
                // K*K u = u and K K* u = u
                let back = k.apply_adjoint(&ku)?;
                let fwd = k.apply(&k.apply_adjoint(&u)?)?;
                // ⟨K u, v⟩ = conj(⟨u, K* v⟩)
                let lhs = ku.inner(&v)?;
                let rhs = u.inner(&k.apply_adjoint(&v)?)?.conj();
                let pairing_ok = if S::EXACT { lhs == rhs } else { lhs.sub(&rhs).abs() < eps };
                if !back.equal(&u, eps)? || !fwd.equal(&u, eps)? || !pairing_ok {
                    return Ok(Some(Witness {
                        check: format!("kernel_unitarity {}", k.name()),
                        label: format!("{label:?}"),
                    }));
                }
            }
            Ok(None)
        };
        let results = par::map(&samples, check_one);
        let mut witness = None;
        for r in results {
            if let Some(w) = r? {
                witness = Some(w);
                break;
            }
        }
        Ok(Some(UnitarityReport { pass: witness.is_none(), samples: n, witness }))
    }

    /// Runs the verification battery (commutation, block unitarity, the
    /// functional values, the isometry witness, and the run itself) and
    /// aggregates pass/fail. Generator-level unitarity is a separate,
    /// heavier check; see [`Protocol::kernel_unitarity_check`].
    pub fn verify(&self, cfg: &CheckConfig) -> Result<VerifyReport> {
        let commutation = self.commutation_check(cfg)?;
        let completeness = self.block_completeness_check(cfg)?;
        let functional = self.state_functional()?;
        let mut functional_ok = true;
        for i in 0..self.dim as usize {
            for j in 0..self.dim as usize {
                let got = functional.value(i, j);
                let want = &self.target[i][j];
                functional_ok &= if S::EXACT {
                    got == want.clone()
                } else {
                    got.sub(want).abs() < cfg.eps
                };
            }
        }
        let witness = self.isometry_witness(cfg)?;
        let output = self.run(0, 0)?;
        let embezzlement_exact = output.equal(&self.target_state()?, cfg.eps)?;
        let pass = commutation.pass
            && completeness.pass
            && functional_ok
            && witness.pass
            && embezzlement_exact;
        Ok(VerifyReport {
            protocol: self.name.clone(),
            commutation,
            block_completeness: completeness,
            state_functional: functional.to_json(),
            functional_matches_target: functional_ok,
            isometry: witness,
            embezzlement_exact,
            pass,
        })
    }
}

/// The matrix of functional values `s_ij`.
pub struct Functional<S: Scalar> {
    pub dim: u32,
    values: Vec<S>,
}

impl<S: Scalar> Functional<S> {
    pub fn value(&self, i: usize, j: usize) -> S {
        self.values[j * self.dim as usize + i].clone()
    }

    /// The four qubit-protocol values in the order (s₀₀, s₁₀, s₀₁, s₁₁).
    pub fn bell_tuple(&self) -> [S; 4] {
        assert_eq!(self.dim, 2);
        [self.value(0, 0), self.value(1, 0), self.value(0, 1), self.value(1, 1)]
    }

    pub fn to_json(&self) -> Value {
        if self.dim == 2 {
            Value::Array(self.bell_tuple().iter().map(|v| v.to_json()).collect())
        } else {
            Value::Array(self.values.iter().map(|v| v.to_json()).collect())
        }
    }
}

#[derive(Clone, Debug)]
pub struct Witness {
    pub check: String,
    pub label: String,
}

impl Witness {
    pub fn to_json(&self) -> Value {
        json!({ "check": self.check, "label": self.label })
    }
}

#[derive(Debug)]
pub struct CommutationReport {
    pub pass: bool,
    pub samples: usize,
    pub seed: u64,
    pub witness: Option<Witness>,
}

impl CommutationReport {
    pub fn to_json(&self) -> Value {
        json!({
            "pass": self.pass,
            "samples": self.samples,
            "seed": self.seed,
            "witness": self.witness.as_ref().map(|w| w.to_json()),
        })
    }
}

#[derive(Debug)]
pub struct UnitarityReport {
    pub pass: bool,
    pub samples: usize,
    pub witness: Option<Witness>,
}

impl UnitarityReport {
    pub fn to_json(&self) -> Value {
        json!({
            "pass": self.pass,
            "samples": self.samples,
            "witness": self.witness.as_ref().map(|w| w.to_json()),
        })
    }
}

#[derive(Debug)]
pub struct WitnessReport {
    pub n_max: usize,
    pub gram: Vec<Vec<Value>>,
    pub gram_is_identity: bool,
    pub range_escape: bool,
    pub orbit_restores_catalyst: bool,
    pub bob_adjoint_orbit_matches: bool,
    pub bob_orbit_matches: bool,
    pub pass: bool,
}

impl WitnessReport {
    pub fn to_json(&self) -> Value {
        json!({
            "n_max": self.n_max,
            "gram": self.gram,
            "gram_is_identity": self.gram_is_identity,
            "range_escape": self.range_escape,
            "orbit_restores_catalyst": self.orbit_restores_catalyst,
            "bob_adjoint_orbit_matches": self.bob_adjoint_orbit_matches,
            "bob_orbit_matches": self.bob_orbit_matches,
            "pass": self.pass,
        })
    }
}

#[derive(Debug)]
pub struct VerifyReport {
    pub protocol: String,
    pub commutation: CommutationReport,
    pub block_completeness: UnitarityReport,
    pub state_functional: Value,
    pub functional_matches_target: bool,
    pub isometry: WitnessReport,
    pub embezzlement_exact: bool,
    pub pass: bool,
}

impl VerifyReport {
    pub fn to_json(&self) -> Value {
        json!({
            "protocol": self.protocol,
            "commutation": self.commutation.to_json(),
            "block_completeness": self.block_completeness.to_json(),
            "state_functional": self.state_functional,
            "functional_matches_target": self.functional_matches_target,
            "isometry": self.isometry.to_json(),
            "embezzlement_exact": self.embezzlement_exact,
            "pass": self.pass,
        })
    }
}

/// Gram–Schmidt completion of the unit column `phi` to a `dd × dd` unitary
/// whose first column (the image of digit pair `(0,0)`) is `phi`.
fn unitary_completion(dd: usize, phi: &[Complex64]) -> Vec<Complex64> {
    let mut cols: Vec<Vec<Complex64>> = vec![phi.to_vec()];
    for k in 0..dd {
        if cols.len() == dd {
            break;
        }
        let mut v = vec![Complex64::new(0.0, 0.0); dd];
        v[k] = Complex64::new(1.0, 0.0);
        for c in &cols {
            let overlap: Complex64 = c.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
            for (vi, ci) in v.iter_mut().zip(c) {
                *vi -= overlap * ci;
            }
        }
        let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-8 {
            for vi in &mut v {
                *vi /= norm;
            }
            cols.push(v);
        }
    }
    assert_eq!(cols.len(), dd, "unitary completion failed");
    let mut w = vec![Complex64::new(0.0, 0.0); dd * dd];
    for (c, col) in cols.iter().enumerate() {
        for (r, val) in col.iter().enumerate() {
            w[r * dd + c] = *val;
        }
    }
    w
}

/// Builds the float-mode base-`d` protocol for the target coefficients
/// `α[i][j]` (row-major, `Σ|α|² = 1`): the `L2` block becomes any unitary
/// completion of the column `φ = Σ α_ij |i,j⟩`, and the rest of the
/// construction is unchanged.
#[allow(clippy::needless_range_loop)]
pub fn general_protocol(d: u32, targets: &[Complex64]) -> Result<Protocol<Complex64>> {
    let dd = (d as usize) * (d as usize);
    if d < 2 {
        return Err(Error::Usage("dimension must be at least 2".into()));
    }
    if targets.len() != dd {
        return Err(Error::Usage(format!("expected {dd} target coefficients")));
    }
    let norm: f64 = targets.iter().map(|z| z.norm_sqr()).sum();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::Usage(format!("target coefficients have norm² {norm}, expected 1")));
    }
    let w = unitary_completion(dd, targets);
    let gens = Generators::with_block(d, L2Block::Matrix { d, w });
    let target: Vec<Vec<Complex64>> = (0..d as usize)
        .map(|i| (0..d as usize).map(|j| targets[i * d as usize + j]).collect())
        .collect();
    Ok(Protocol {
        name: format!("shift-general-d{d}"),
        dim: d,
        base: d,
        alice: gens.ua(),
        bob: gens.ub(),
        catalyst: SparseState::origin(d),
        target,
        generators: Some(gens),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ExactScalar;

    type ExactState = SparseState<ExactScalar>;

    fn res(r: i64, x: Dyadic, y: Dyadic) -> CompositeLabel {
        CompositeLabel::resource(ResourceLabel::new(r, x, y))
    }

    fn dy(num: u64, exp: i64) -> Dyadic {
        Dyadic::dyadic(num, exp)
    }

    fn basis(l: CompositeLabel) -> ExactState {
        SparseState::basis(l)
    }

    fn h() -> ExactScalar {
        ExactScalar::sqrt_half()
    }

    fn two_terms(a: (CompositeLabel, ExactScalar), b: (CompositeLabel, ExactScalar)) -> ExactState {
        SparseState::from_terms(a.0.arity(), 2, vec![a, b]).unwrap()
    }

    fn gens() -> Generators<ExactScalar> {
        Generators::bell()
    }

    #[test]
    fn l1_doubles_both_coordinates() {
        let l1 = gens().l1();
        let out = l1.apply(&basis(res(0, dy(0, 0), dy(0, 0)))).unwrap();
        assert!(out.equal(&basis(res(0, dy(0, 0), dy(0, 0))), 0.0).unwrap());
        let out = l1.apply(&basis(res(0, dy(1, 1), dy(1, 1)))).unwrap();
        assert!(out.equal(&basis(res(0, dy(1, 0), dy(1, 0))), 0.0).unwrap());
        let out = l1.apply(&basis(res(0, dy(3, 0), dy(1, 2)))).unwrap();
        assert!(out.equal(&basis(res(0, dy(6, 0), dy(1, 1))), 0.0).unwrap());
    }

    #[test]
    fn l2_branches_on_the_low_digits() {
        let l2 = gens().l2();
        // |0,0⟩ → (|0,0⟩ + |1,1⟩)/√2
        let out = l2.apply(&basis(res(0, dy(0, 0), dy(0, 0)))).unwrap();
        let want = two_terms(
            (res(0, dy(0, 0), dy(0, 0)), h()),
            (res(0, dy(1, 0), dy(1, 0)), h()),
        );
        assert!(out.equal(&want, 0.0).unwrap());
        // |1,1⟩ → (|0,1⟩ − |1,0⟩)/√2
        let out = l2.apply(&basis(res(0, dy(1, 0), dy(1, 0)))).unwrap();
        let want = two_terms(
            (res(0, dy(0, 0), dy(1, 0)), h()),
            (res(0, dy(1, 0), dy(0, 0)), h().neg()),
        );
        assert!(out.equal(&want, 0.0).unwrap());
        // |2,2⟩ → (|2,2⟩ + |3,3⟩)/√2
        let out = l2.apply(&basis(res(0, dy(2, 0), dy(2, 0)))).unwrap();
        let want = two_terms(
            (res(0, dy(2, 0), dy(2, 0)), h()),
            (res(0, dy(3, 0), dy(3, 0)), h()),
        );
        assert!(out.equal(&want, 0.0).unwrap());
    }

    #[test]
    fn shift_splits_the_origin() {
        let l = gens().l();
        let out = l.apply(&basis(res(0, dy(0, 0), dy(0, 0)))).unwrap();
        let want = two_terms(
            (res(0, dy(0, 0), dy(0, 0)), h()),
            (res(0, dy(1, 0), dy(1, 0)), h()),
        );
        assert!(out.equal(&want, 0.0).unwrap());
    }

    #[test]
    fn alice_shift_and_the_product_form() {
        let g = gens();
        let out = g.la().apply(&basis(res(0, dy(0, 0), dy(0, 0)))).unwrap();
        assert!(out.equal(&basis(res(1, dy(0, 0), dy(0, 0))), 0.0).unwrap());
        // LA·LB = L on any label
        let via_parts = g
            .la()
            .apply(&g.lb().apply(&basis(res(0, dy(0, 0), dy(0, 0)))).unwrap())
            .unwrap();
        let direct = g.l().apply(&basis(res(0, dy(0, 0), dy(0, 0)))).unwrap();
        assert!(via_parts.equal(&direct, 0.0).unwrap());
    }

    #[test]
    fn controlled_shift_examples() {
        let c = gens().c();
        // r = 0: identity
        let s = basis(res(0, dy(5, 1), dy(3, 2)));
        assert!(c.apply(&s).unwrap().equal(&s, 0.0).unwrap());
        // r = 1: one shift application on the coordinates
        let out = c.apply(&basis(res(1, dy(0, 0), dy(0, 0)))).unwrap();
        let want = two_terms(
            (res(1, dy(0, 0), dy(0, 0)), h()),
            (res(1, dy(1, 0), dy(1, 0)), h()),
        );
        assert!(out.equal(&want, 0.0).unwrap());
    }

    #[test]
    fn kernels_preserve_norms_of_multi_term_states() {
        use proptest::prelude::*;
        use rand::SeedableRng;
        let g = gens();
        let bounds = LabelBounds { max_r: 3, max_int_bits: 3, max_frac_bits: 3 };
        let mut runner = proptest::test_runner::TestRunner::default();
        let amp = (-4i64..=4, 1i64..=3, -4i64..=4, 1i64..=3)
            .prop_map(|(an, ad, bn, bd)| {
                ExactScalar::new(crate::scalar::rat(an, ad), crate::scalar::rat(bn, bd))
            });
        let case = (proptest::collection::vec(amp, 1..4), any::<u64>());
        runner
            .run(&case, |(amps, seed)| {
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                for k in g.named_kernels() {
                    let terms: Vec<_> = amps
                        .iter()
                        .map(|a| {
                            (
                                random_composite_label(&mut rng, 2, 2, k.arity(), &bounds),
                                a.clone(),
                            )
                        })
                        .collect();
                    let s = SparseState::from_terms(k.arity(), 2, terms).unwrap();
                    let ks = k.apply(&s).unwrap();
                    prop_assert_eq!(ks.norm_sq(), s.norm_sq());
                    prop_assert!(k.apply_adjoint(&ks).unwrap().equal(&s, 0.0).unwrap());
                }
                Ok(())
            })
            .unwrap();
    }

    #[test]
    fn bob_shift_ignores_alice_logical_data() {
        use rand::SeedableRng;
        // Matrix-element form of "LB has no net effect on Alice's logical
        // qubits": the swap probing Alice's logical digit at any position k
        // (SA conjugated by LA^k) commutes with LB exactly, and LB preserves
        // orthogonality of labels that differ only in x.
        let g = gens();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        let bounds = LabelBounds { max_r: 3, max_int_bits: 3, max_frac_bits: 3 };
        let lb = g.lb().lift(1, &[]);
        for k in -2i64..=2 {
            // LA^k SA LA^{-k}
            let la = g.la().lift(1, &[]);
            let mut probe = g.sa();
            for _ in 0..k.unsigned_abs() {
                probe = if k > 0 {
                    la.adjoint().then(&probe).then(&la)
                } else {
                    la.then(&probe).then(&la.adjoint())
                };
            }
            for _ in 0..8 {
                let label = random_composite_label(&mut rng, 2, 2, 1, &bounds);
                let s = SparseState::<ExactScalar>::basis(label.clone());
                let ab = probe.apply(&lb.apply(&s).unwrap()).unwrap();
                let ba = lb.apply(&probe.apply(&s).unwrap()).unwrap();
                assert!(ab.equal(&ba, 0.0).unwrap(), "k={k} label={label:?}");
            }
        }
        for _ in 0..16 {
            let a = random_composite_label(&mut rng, 2, 0, 0, &bounds);
            let mut b = a.clone();
            b.res.x = random_dyadic(&mut rng, 2, &bounds);
            let sa = SparseState::<ExactScalar>::basis(a.clone());
            let sb = SparseState::<ExactScalar>::basis(b.clone());
            let before = sa.inner(&sb).unwrap();
            let after = g.lb().apply(&sa).unwrap().inner(&g.lb().apply(&sb).unwrap()).unwrap();
            assert_eq!(before, after, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn controlled_shift_state_action_matches_per_label() {
        let c = gens().c();
        let h = h();
        let s = SparseState::from_terms(
            0,
            2,
            vec![
                (res(2, dy(1, 1), dy(3, 0)), h.clone()),
                (res(-2, dy(2, 0), dy(1, 2)), h.clone().neg()),
                (res(0, dy(0, 0), dy(0, 0)), h.mul(&h)),
            ],
        )
        .unwrap();
        for adjoint in [false, true] {
            let fast = if adjoint { c.apply_adjoint(&s).unwrap() } else { c.apply(&s).unwrap() };
            let mut slow_terms = Vec::new();
            for (label, amp) in s.terms() {
                let image = if adjoint {
                    c.adjoint_label(label).unwrap()
                } else {
                    c.forward_label(label).unwrap()
                };
                for (out, coeff) in image {
                    slow_terms.push((out, amp.mul(&coeff)));
                }
            }
            let slow = SparseState::from_terms(0, 2, slow_terms).unwrap();
            assert!(fast.equal(&slow, 0.0).unwrap(), "adjoint={adjoint}");
        }
    }

    fn with_reg(v: u8, l: CompositeLabel) -> CompositeLabel {
        l.insert_reg(0, v)
    }

    #[test]
    fn bob_swap_examples() {
        let sb = gens().sb();
        let fixed = basis(with_reg(0, res(0, dy(3, 0), dy(0, 0))));
        assert!(sb.apply(&fixed).unwrap().equal(&fixed, 0.0).unwrap());
        let out = sb.apply(&basis(with_reg(1, res(0, dy(0, 0), dy(0, 0))))).unwrap();
        assert!(out
            .equal(&basis(with_reg(0, res(0, dy(0, 0), dy(1, 0)))), 0.0)
            .unwrap());
        // |0⟩⊗|0,0,3/2⟩ → |1⟩⊗|0,0,1/2⟩
        let out = sb.apply(&basis(with_reg(0, res(0, dy(0, 0), dy(3, 1))))).unwrap();
        assert!(out
            .equal(&basis(with_reg(1, res(0, dy(0, 0), dy(1, 1)))), 0.0)
            .unwrap());
    }

    #[test]
    fn alice_swap_at_zero_shift_is_the_naive_swap() {
        let g = gens();
        for y in [dy(0, 0), dy(5, 2)] {
            let out = g
                .sa()
                .apply(&basis(with_reg(1, res(0, dy(0, 0), y.clone()))))
                .unwrap();
            assert!(out
                .equal(&basis(with_reg(0, res(0, dy(1, 0), y.clone()))), 0.0)
                .unwrap());
            let fixed = basis(with_reg(0, res(0, dy(0, 0), y)));
            assert!(g.sa().apply(&fixed).unwrap().equal(&fixed, 0.0).unwrap());
        }
    }

    #[test]
    fn alice_swap_matches_the_conjugation_chain() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let g = gens();
        let fast = g.sa();
        let slow = g.sa_via_conjugation();
        let bounds = LabelBounds { max_r: 3, max_int_bits: 3, max_frac_bits: 3 };
        for _ in 0..60 {
            let label = random_composite_label(&mut rng, 2, 2, 1, &bounds);
            let s = basis(label.clone());
            let a = fast.apply(&s).unwrap();
            let b = slow.apply(&s).unwrap();
            assert!(a.equal(&b, 0.0).unwrap(), "mismatch at {label:?}");
            let a = fast.apply_adjoint(&s).unwrap();
            let b = slow.apply_adjoint(&s).unwrap();
            assert!(a.equal(&b, 0.0).unwrap(), "adjoint mismatch at {label:?}");
        }
    }

    #[test]
    fn protocol_step_list() {
        let p = Protocol::<ExactScalar>::bell();
        let start = p.catalyst.insert_register(0, 0).insert_register(1, 0);
        // both party operators applied, either order
        let g = gens();
        let la2 = g.la().lift(2, &[]);
        let lb2 = g.lb().lift(2, &[]);
        let sa2 = g.sa().lift(2, &[0]);
        let sb2 = g.sb().lift(2, &[1]);
        // after LA·LB: the origin splits with r back at 0
        let mid = la2.apply(&lb2.apply(&start).unwrap()).unwrap();
        let expect_mid = SparseState::compose_registers(
            &[(vec![0, 0], ExactScalar::one())],
            &two_terms(
                (res(0, dy(0, 0), dy(0, 0)), h()),
                (res(0, dy(1, 0), dy(1, 0)), h()),
            ),
        )
        .unwrap();
        assert!(mid.equal(&expect_mid, 0.0).unwrap());
        // after SA·SB: the target pair with the catalyst restored
        let fin = sa2.apply(&sb2.apply(&mid).unwrap()).unwrap();
        assert!(fin.equal(&p.target_state().unwrap(), 0.0).unwrap());
    }

    #[test]
    fn run_produces_the_target_exactly() {
        let p = Protocol::<ExactScalar>::bell();
        let out = p.run(0, 0).unwrap();
        assert!(out.equal(&p.target_state().unwrap(), 0.0).unwrap());
        assert!(out.norm_sq().is_one());
        // both orders agree
        let input = p.catalyst.insert_register(0, 0).insert_register(1, 0);
        let ab = p.alice.lift(2, &[0]).apply(&p.bob.lift(2, &[1]).apply(&input).unwrap()).unwrap();
        let ba = p.bob.lift(2, &[1]).apply(&p.alice.lift(2, &[0]).apply(&input).unwrap()).unwrap();
        assert!(ab.equal(&ba, 0.0).unwrap());
    }

    #[test]
    fn catalyst_restoration_in_each_branch() {
        let p = Protocol::<ExactScalar>::bell();
        let out = p.run(0, 0).unwrap();
        for b in 0..2u8 {
            let branch = out.component(0, b).component(0, b);
            let want = p.catalyst.scale(&h());
            assert!(branch.equal(&want, 0.0).unwrap(), "branch {b}");
        }
        // overlap with the unentangled start is exactly 1/√2
        let start = p.catalyst.insert_register(0, 0).insert_register(1, 0);
        assert_eq!(out.inner(&start).unwrap(), h());
    }

    #[test]
    fn state_functional_hits_the_target_values() {
        let f = Protocol::<ExactScalar>::bell().state_functional().unwrap();
        let [s00, s10, s01, s11] = f.bell_tuple();
        assert_eq!(s00, h());
        assert!(s10.is_zero());
        assert!(s01.is_zero());
        assert_eq!(s11, h());
    }

    #[test]
    fn identity_protocol_functional() {
        let f = Protocol::<ExactScalar>::identity().state_functional().unwrap();
        let [s00, s10, s01, s11] = f.bell_tuple();
        assert!(s00.is_one());
        assert!(s10.is_zero() && s01.is_zero() && s11.is_zero());
    }

    #[test]
    fn block_values_on_the_catalyst() {
        let p = Protocol::<ExactScalar>::bell();
        let u00 = block(&p.alice, 0, 0);
        let v00 = block(&p.bob, 0, 0);
        let val = u00
            .apply(&v00.apply(&p.catalyst).unwrap())
            .unwrap()
            .inner(&p.catalyst)
            .unwrap();
        assert_eq!(val, h());
        // the adjoint orbit stays on unit vectors
        let mut e = p.catalyst.clone();
        for _ in 0..8 {
            e = u00.apply_adjoint(&e).unwrap();
            assert!(e.norm_sq().is_one());
        }
    }

    fn small_cfg(samples: usize) -> CheckConfig {
        CheckConfig {
            samples,
            bounds: LabelBounds { max_r: 4, max_int_bits: 4, max_frac_bits: 4 },
            ..CheckConfig::default()
        }
    }

    #[test]
    fn commutation_passes_for_the_shift_protocol() {
        let report = Protocol::<ExactScalar>::bell().commutation_check(&small_cfg(24)).unwrap();
        assert!(report.pass, "witness: {:?}", report.witness);
    }

    #[test]
    fn commutation_passes_for_identity() {
        let report = Protocol::<ExactScalar>::identity().commutation_check(&small_cfg(8)).unwrap();
        assert!(report.pass);
    }

    #[test]
    fn naive_swap_breaks_commutation_with_witness() {
        let report = Protocol::<ExactScalar>::bell_with_naive_swap()
            .commutation_check(&small_cfg(64))
            .unwrap();
        assert!(!report.pass);
        assert!(report.witness.is_some());
    }

    #[test]
    fn block_completeness_holds() {
        let report = Protocol::<ExactScalar>::bell().block_completeness_check(&small_cfg(16)).unwrap();
        assert!(report.pass, "witness: {:?}", report.witness);
    }

    #[test]
    fn kernel_unitarity_holds() {
        let report = Protocol::<ExactScalar>::bell()
            .kernel_unitarity_check(&small_cfg(12))
            .unwrap()
            .expect("shift protocol carries generators");
        assert!(report.pass, "witness: {:?}", report.witness);
    }

    #[test]
    fn isometry_witness_is_exact() {
        let report = Protocol::<ExactScalar>::bell()
            .isometry_witness(&CheckConfig { witness_n: 8, ..CheckConfig::default() })
            .unwrap();
        assert!(report.gram_is_identity);
        assert!(report.range_escape);
        assert!(report.orbit_restores_catalyst);
        assert!(report.bob_adjoint_orbit_matches);
        assert!(report.bob_orbit_matches);
        assert!(report.pass);
    }

    #[test]
    fn verify_aggregates() {
        let cfg = small_cfg(12);
        assert!(Protocol::<ExactScalar>::bell().verify(&cfg).unwrap().pass);
        let id = Protocol::<ExactScalar>::identity().verify(&cfg).unwrap();
        assert!(id.commutation.pass);
        assert!(id.block_completeness.pass);
        assert!(!id.embezzlement_exact);
        assert!(!id.pass);
    }

    #[test]
    fn general_protocol_reproduces_the_exact_case() {
        let h = 1.0 / std::f64::consts::SQRT_2;
        let bell = [
            Complex64::new(h, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(h, 0.0),
        ];
        let p = general_protocol(2, &bell).unwrap();
        let f = p.state_functional().unwrap();
        let exact = Protocol::<ExactScalar>::bell().state_functional().unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let want = exact.value(i, j).to_complex();
                assert!((f.value(i, j) - want).norm() < 1e-12);
            }
        }
        assert!(p.run(0, 0).unwrap().equal(&p.target_state().unwrap(), 1e-12).unwrap());
    }

    #[test]
    fn general_protocol_skewed_and_qutrit_targets() {
        let a = (1.0f64 / 3.0).sqrt();
        let b = (2.0f64 / 3.0).sqrt();
        let skew = [
            Complex64::new(a, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(b, 0.0),
        ];
        let p = general_protocol(2, &skew).unwrap();
        let f = p.state_functional().unwrap();
        for (i, want) in [(0usize, 0usize, a), (1, 1, b)].iter().map(|&(i, j, w)| ((i, j), w)) {
            assert!((f.value(i.0, i.1) - Complex64::new(want, 0.0)).norm() < 1e-9);
        }
        assert!(f.value(1, 0).norm() < 1e-9 && f.value(0, 1).norm() < 1e-9);

        let third = Complex64::new(1.0 / 3.0, 0.0);
        let uniform = [third; 9];
        let p = general_protocol(3, &uniform).unwrap();
        let f = p.state_functional().unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((f.value(i, j) - third).norm() < 1e-9, "({i},{j})");
            }
        }
    }

    #[test]
    fn general_protocol_rejects_unnormalized_targets() {
        let bad = [Complex64::new(1.0, 0.0); 4];
        assert!(matches!(general_protocol(2, &bad), Err(Error::Usage(_))));
    }

    #[test]
    fn run_rejects_out_of_range_registers() {
        assert!(Protocol::<ExactScalar>::bell().run(2, 0).is_err());
    }
}
