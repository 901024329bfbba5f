//! Finite-dimensional approximate protocols built on the harmonic catalyst
//! `μ_n = Σ_j (H_n·j)^{-1/2} |j⟩|j⟩` and a sorted-amplitude matching
//! permutation applied by each party.
//!
//! The permutation is pinned for reproducibility: enumerating each party's
//! local labels as `(0,1), …, (0,n), (1,1), …, (1,n)` — i.e. `k = 1..2n` —
//! label `k` maps to `(b, j) = ((k−1) mod 2, ⌈k/2⌉)`. The first `n` entries
//! implement the sorted-amplitude pairing; the remaining labels `(1, j)`
//! fill the leftover slots in order under the same formula.
//!
//! These protocols feed the same block-extraction and state-functional
//! interfaces as the exact shift protocol, as the tensor-product special
//! case of commuting operators: Alice's permutation acts on (her register,
//! the `x` index), Bob's on (his register, the `y` index).

use num::complex::Complex64;

use crate::basis::{CompositeLabel, Dyadic, ResourceLabel};
use crate::error::Result;
use crate::kernel::{Kernel, LabelImage};
use crate::par;
use crate::protocol::Protocol;
use crate::scalar::Scalar;
use crate::state::SparseState;

const C_ONE: Complex64 = Complex64::new(1.0, 0.0);

/// One finite protocol instance: catalyst size, amplitudes `m_j`, and the
/// party permutation on `2n` labels.
#[derive(Clone, Debug)]
pub struct VdhProtocol {
    pub n: usize,
    /// `m_j = 1/√(H_n · j)` at index `j − 1`.
    pub amps: Vec<f64>,
    /// Partial harmonic sum `H_n`.
    pub harmonic: f64,
}

impl VdhProtocol {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let harmonic: f64 = (1..=n).map(|j| 1.0 / j as f64).sum();
        let amps = (1..=n).map(|j| 1.0 / (harmonic * j as f64).sqrt()).collect();
        VdhProtocol { n, amps, harmonic }
    }

    /// The party permutation `P(b, j)` on labels with `j = 1..n`.
    pub fn perm(&self, b: u8, j: usize) -> (u8, usize) {
        debug_assert!((1..=self.n).contains(&j));
        let k = if b == 0 { j } else { self.n + j };
        (((k - 1) % 2) as u8, k.div_ceil(2))
    }

    pub fn perm_inverse(&self, b: u8, j: usize) -> (u8, usize) {
        let k = 2 * j - 1 + b as usize;
        if k <= self.n {
            (0, k)
        } else {
            (1, k - self.n)
        }
    }

    /// The permutation as a `2n × 2n` 0/1 matrix over (bit, index) with
    /// row-major pair index `b·n + (j−1)`; used by the dense oracle and for
    /// inspection.
    pub fn perm_matrix(&self) -> crate::dense::DenseMatrix {
        let m = 2 * self.n;
        let mut out = crate::dense::DenseMatrix::zeros(m, m);
        for b in 0..2u8 {
            for j in 1..=self.n {
                let (b2, j2) = self.perm(b, j);
                out[(b2 as usize * self.n + (j2 - 1), b as usize * self.n + (j - 1))] = C_ONE;
            }
        }
        out
    }

    /// Catalyst `μ_n = Σ_j m_j |0, j, j⟩` on integer-valued labels.
    pub fn catalyst(&self) -> SparseState<Complex64> {
        let terms = self.amps.iter().enumerate().map(|(idx, m)| {
            let j = (idx + 1) as u64;
            (
                CompositeLabel::resource(ResourceLabel::new(
                    0,
                    Dyadic::from_int(2, j),
                    Dyadic::from_int(2, j),
                )),
                Complex64::new(*m, 0.0),
            )
        });
        SparseState::from_terms(0, 2, terms).expect("catalyst labels are consistent")
    }

    fn side_kernel(&self, alice: bool) -> Kernel<Complex64> {
        let this = self.clone();
        let that = self.clone();
        let pick = move |l: &CompositeLabel| -> u64 {
            let d = if alice { &l.res.x } else { &l.res.y };
            d.to_u64().unwrap_or(0)
        };
        let rebuild = move |l: &CompositeLabel, b: u8, j: usize| -> CompositeLabel {
            let idx = Dyadic::from_int(2, j as u64);
            let res = if alice {
                ResourceLabel::new(l.res.r, idx, l.res.y.clone())
            } else {
                ResourceLabel::new(l.res.r, l.res.x.clone(), idx)
            };
            CompositeLabel::new(vec![b], res)
        };
        let pick2 = pick;
        let rebuild2 = rebuild;
        let fwd = move |l: &CompositeLabel| -> Result<LabelImage<Complex64>> {
            let j = pick(l) as usize;
            if !(1..=this.n).contains(&j) {
                return Ok(vec![(l.clone(), C_ONE)]);
            }
            let (b2, j2) = this.perm(l.regs[0], j);
            Ok(vec![(rebuild(l, b2, j2), C_ONE)])
        };
        let adj = move |l: &CompositeLabel| -> Result<LabelImage<Complex64>> {
            let j = pick2(l) as usize;
            if !(1..=that.n).contains(&j) {
                return Ok(vec![(l.clone(), C_ONE)]);
            }
            let (b2, j2) = that.perm_inverse(l.regs[0], j);
            Ok(vec![(rebuild2(l, b2, j2), C_ONE)])
        };
        Kernel::new(if alice { "P_A" } else { "P_B" }, 1, fwd, adj)
    }

    /// One party's `n × n` block `P_{ij}` of the permutation as a dense
    /// operator: the part mapping catalyst indices with register `j` to
    /// register `i`.
    pub fn block_matrix(&self, i: u8, j: u8) -> crate::dense::DenseMatrix {
        let mut out = crate::dense::DenseMatrix::zeros(self.n, self.n);
        for col in 1..=self.n {
            let (b2, j2) = self.perm(j, col);
            if b2 == i {
                out[(j2 - 1, col - 1)] = C_ONE;
            }
        }
        out
    }

    /// The catalyst written densely over ℂⁿ ⊗ ℂⁿ.
    pub fn dense_catalyst(&self) -> crate::dense::DenseState {
        let mut amps = vec![Complex64::zero(); self.n * self.n];
        for (idx, m) in self.amps.iter().enumerate() {
            amps[idx * self.n + idx] = Complex64::new(*m, 0.0);
        }
        crate::dense::DenseState { dims: vec![self.n, self.n], amps }
    }

    /// The run output written densely over (ℂ²⊗ℂⁿ) ⊗ (ℂ²⊗ℂⁿ), party-major.
    pub fn dense_output(&self) -> Result<crate::dense::DenseState> {
        let out = self.as_protocol().run(0, 0)?;
        let side = 2 * self.n;
        let mut amps = vec![Complex64::zero(); side * side];
        for (label, amp) in out.terms() {
            let j = label.res.x.to_u64().unwrap() as usize;
            let k = label.res.y.to_u64().unwrap() as usize;
            let pa = label.regs[0] as usize * self.n + (j - 1);
            let pb = label.regs[1] as usize * self.n + (k - 1);
            amps[pa * side + pb] = *amp;
        }
        crate::dense::DenseState::new(vec![2, self.n, 2, self.n], amps)
    }

    /// Packages the permutation pair as a [`Protocol`] in float mode.
    pub fn as_protocol(&self) -> Protocol<Complex64> {
        let h = Complex64::sqrt_half();
        Protocol {
            name: format!("vdh-{}", self.n),
            dim: 2,
            base: 2,
            alice: self.side_kernel(true),
            bob: self.side_kernel(false),
            catalyst: self.catalyst(),
            target: vec![vec![h, Complex64::zero()], vec![Complex64::zero(), h]],
            generators: None,
        }
    }

    /// Target state `Φ⁺ ⊗ μ_n` as an arity-2 composite.
    pub fn target_state(&self) -> Result<SparseState<Complex64>> {
        let h = Complex64::sqrt_half();
        let patterns = vec![(vec![0u8, 0u8], h), (vec![1u8, 1u8], h)];
        SparseState::compose_registers(&patterns, &self.catalyst())
    }

    /// `|⟨Φ⁺ ⊗ μ_n, (P ⊗ P)(|00⟩ ⊗ μ_n)⟩|`, computed by applying the party
    /// kernels to the sparse input state.
    pub fn fidelity(&self) -> Result<f64> {
        let p = self.as_protocol();
        let out = p.run(0, 0)?;
        Ok(self.target_state()?.inner(&out)?.norm())
    }
}

/// One row of the sweep output.
#[derive(Clone, Debug)]
pub struct SweepRow {
    pub n: usize,
    pub fidelity: f64,
    /// `(|s₀₀ − 1/√2|, |s₁₀|, |s₀₁|, |s₁₁ − 1/√2|)`.
    pub deviations: [f64; 4],
}

impl SweepRow {
    pub fn csv_header() -> &'static str {
        "n,fidelity,s00_dev,s10_dev,s01_dev,s11_dev"
    }

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.n,
            self.fidelity,
            self.deviations[0],
            self.deviations[1],
            self.deviations[2],
            self.deviations[3]
        )
    }
}

fn sweep_cell(n: usize) -> Result<SweepRow> {
    let vdh = VdhProtocol::new(n);
    let fidelity = vdh.fidelity()?;
    let p = vdh.as_protocol();
    let f = p.state_functional()?;
    let h = 1.0 / std::f64::consts::SQRT_2;
    let [s00, s10, s01, s11] = f.bell_tuple();
    Ok(SweepRow {
        n,
        fidelity,
        deviations: [
            (s00 - Complex64::new(h, 0.0)).norm(),
            s10.norm(),
            s01.norm(),
            (s11 - Complex64::new(h, 0.0)).norm(),
        ],
    })
}

/// Sweeps `n = 2^k` for each exponent, in parallel when enabled.
pub fn sweep(exponents: &[u32]) -> Result<Vec<SweepRow>> {
    par::map(exponents, |k| sweep_cell(1usize << *k))
        .into_iter()
        .collect()
}

/// Sequential twin of [`sweep`] (same rows).
pub fn sweep_sequential(exponents: &[u32]) -> Result<Vec<SweepRow>> {
    par::map_sequential(exponents, |k| sweep_cell(1usize << *k))
        .into_iter()
        .collect()
}
