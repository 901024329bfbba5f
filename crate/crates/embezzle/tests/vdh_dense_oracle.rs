//! Dense brute-force checks of the harmonic-catalyst protocol for small
//! sizes: the full `(2n)²`-dimensional state vector is materialized, the
//! permutation is applied by index relabeling, and the fidelity and
//! functional values are read off directly.

use embezzle::vdh::VdhProtocol;
use num::complex::Complex64;

const H: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// The pinned pairing, written independently: label `k = 1..2n` (first the
/// `(0, j)` labels, then `(1, j)`) maps to `((k−1) mod 2, ⌈k/2⌉)`.
fn perm_flat(n: usize, p: usize) -> usize {
    let (b, j) = (p / n, p % n + 1);
    let k = b * n + j;
    let b2 = (k - 1) % 2;
    let j2 = k.div_ceil(2);
    b2 * n + (j2 - 1)
}

fn amps(n: usize) -> Vec<f64> {
    let h: f64 = (1..=n).map(|j| 1.0 / j as f64).sum();
    (1..=n).map(|j| 1.0 / (h * j as f64).sqrt()).collect()
}

fn dense_fidelity(n: usize) -> f64 {
    let m = amps(n);
    let dim = 2 * n;
    // |0⟩⊗μ per party, i.e. amplitude m_j on ((0,j),(0,j))
    let mut state = vec![0.0f64; dim * dim];
    for (j, mj) in m.iter().enumerate() {
        state[j * dim + j] = *mj;
    }
    // P ⊗ P
    let mut permuted = vec![0.0f64; dim * dim];
    for pa in 0..dim {
        for pb in 0..dim {
            permuted[perm_flat(n, pa) * dim + perm_flat(n, pb)] += state[pa * dim + pb];
        }
    }
    // target (Φ⁺ ⊗ μ): amplitude m_j/√2 on ((b,j),(b,j))
    let mut target = vec![0.0f64; dim * dim];
    for b in 0..2 {
        for (j, mj) in m.iter().enumerate() {
            let p = b * n + j;
            target[p * dim + p] = H * mj;
        }
    }
    target
        .iter()
        .zip(&permuted)
        .map(|(t, o)| t * o)
        .sum::<f64>()
        .abs()
}

/// Functional values from the dense blocks: `s_ij = ⟨(U_i0 ⊗ V_j0) μ, μ⟩`
/// with `U = V = P` restricted to bit blocks.
fn dense_functional(n: usize) -> [f64; 4] {
    let m = amps(n);
    // block(i,0) maps |j⟩ to |j2⟩ when perm(0·n + j) lands in bit band i
    let block = |i: usize, j: usize| -> Option<usize> {
        let q = perm_flat(n, j);
        (q / n == i).then_some(q % n)
    };
    let mut out = [0.0f64; 4];
    for (slot, (i, j)) in [(0, 0), (1, 0), (0, 1), (1, 1)].iter().enumerate() {
        let mut acc = 0.0;
        for k in 0..n {
            if let (Some(a), Some(b)) = (block(*i, k), block(*j, k)) {
                if a == b {
                    acc += m[k] * m[a];
                }
            }
        }
        out[slot] = acc;
    }
    out
}

#[test]
fn sparse_fidelity_matches_the_dense_oracle() {
    for n in [1usize, 2, 3, 4, 8, 16] {
        let dense = dense_fidelity(n);
        let sparse = VdhProtocol::new(n).fidelity().unwrap();
        assert!((dense - sparse).abs() < 1e-12, "n={n}: dense {dense} sparse {sparse}");
    }
}

#[test]
fn frozen_fidelity_values() {
    assert!((dense_fidelity(1) - H).abs() < 1e-15);
    assert!((dense_fidelity(2) - 0.8047378541243652).abs() < 1e-12);
    assert!((VdhProtocol::new(2).fidelity().unwrap() - 0.8047378541243652).abs() < 1e-9);
}

#[test]
fn functional_matches_the_dense_oracle() {
    for n in [1usize, 2, 5, 16] {
        let want = dense_functional(n);
        let f = VdhProtocol::new(n).as_protocol().state_functional().unwrap();
        let got = f.bell_tuple();
        for (w, g) in want.iter().zip(&got) {
            assert!((Complex64::new(*w, 0.0) - g).norm() < 1e-12, "n={n}");
        }
    }
    // size one is the identity permutation: functional collapses to (1,0,0,0)
    let one = dense_functional(1);
    assert_eq!(one, [1.0, 0.0, 0.0, 0.0]);
}

#[test]
fn deviations_shrink_with_size() {
    let dev = |n: usize| -> [f64; 4] {
        let f = dense_functional(n);
        [(f[0] - H).abs(), f[1].abs(), f[2].abs(), (f[3] - H).abs()]
    };
    let small = dev(16);
    let large = dev(128);
    assert!(large[0] < small[0]);
    assert!(large[3] < small[3]);
    // cross terms are identically zero at every size
    assert_eq!(small[1], 0.0);
    assert_eq!(small[2], 0.0);
    assert_eq!(large[1], 0.0);
    assert_eq!(large[2], 0.0);
}
