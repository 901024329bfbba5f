//! Second-route check of the Schmidt coefficients: an independent
//! two-sided Jacobi eigensolver diagonalizes the Gram matrix `X*X`, and the
//! square roots of its eigenvalues must match the coefficients produced by
//! the one-sided main path.

// Sweep loops read clearest with plain indices.
#![allow(clippy::needless_range_loop)]

use embezzle::dense::{random_state, schmidt_decompose, DenseMatrix};
use num::complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const C_ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Eigenvalues of a Hermitian matrix by cyclic two-sided Jacobi rotations,
/// returned in nonincreasing order.
fn hermitian_eigenvalues(mut h: Vec<Vec<Complex64>>) -> Vec<f64> {
    let n = h.len();
    for _ in 0..100 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(h[p][q].norm());
            }
        }
        if off < 1e-14 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let hpq = h[p][q];
                if hpq.norm() < 1e-16 {
                    continue;
                }
                let g = hpq / hpq.norm();
                let tau = (h[q][q].re - h[p][p].re) / (2.0 * hpq.norm());
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                // columns: [col_p, col_q] ← [col_p, col_q]·diag(1, conj(g))·R
                for row in h.iter_mut() {
                    let a = row[p];
                    let b = row[q] * g.conj();
                    row[p] = c * a - s * b;
                    row[q] = s * a + c * b;
                }
                // rows: the conjugate-transposed update
                for i in 0..n {
                    let a = h[p][i];
                    let b = h[q][i] * g;
                    h[p][i] = c * a - s * b;
                    h[q][i] = s * a + c * b;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| h[i][i].re.max(0.0)).collect();
    eig.sort_by(|a, b| b.partial_cmp(a).unwrap());
    eig
}

fn gram(x: &DenseMatrix) -> Vec<Vec<Complex64>> {
    let n = x.cols;
    let mut g = vec![vec![C_ZERO; n]; n];
    for (i, row) in g.iter_mut().enumerate() {
        for (j, entry) in row.iter_mut().enumerate() {
            for k in 0..x.rows {
                *entry += x[(k, i)].conj() * x[(k, j)];
            }
        }
    }
    g
}

#[test]
fn coefficients_match_the_gram_eigenvalues() {
    let mut rng = ChaCha8Rng::seed_from_u64(271);
    for dims in [vec![3, 4], vec![4, 4], vec![2, 6], vec![8, 8]] {
        for round in 0..4 {
            let s = random_state(&mut rng, dims.clone());
            let coeffs = schmidt_decompose(&s, 1).unwrap().coeffs;
            let eig = hermitian_eigenvalues(gram(&s.as_matrix(1).unwrap()));
            for (k, d) in coeffs.iter().enumerate() {
                let want = eig[k].sqrt();
                assert!(
                    (d - want).abs() < 1e-9,
                    "dims {dims:?} round {round} k={k}: {d} vs {want}"
                );
            }
            // trimmed coefficients correspond to numerically zero
            // eigenvalues (their square roots sit at the noise floor)
            for e in eig.iter().skip(coeffs.len()) {
                assert!(*e < 1e-12, "trailing eigenvalue {e}");
            }
        }
    }
}

#[test]
fn degenerate_spectrum_round_trips() {
    // A maximally entangled 4×4 state has a fourfold-degenerate Gram
    // spectrum; both routes must agree on the flat coefficient list.
    let mut amps = vec![C_ZERO; 16];
    for i in 0..4 {
        amps[i * 4 + i] = Complex64::new(0.5, 0.0);
    }
    let s = embezzle::dense::DenseState::new(vec![4, 4], amps).unwrap();
    let coeffs = schmidt_decompose(&s, 1).unwrap().coeffs;
    let eig = hermitian_eigenvalues(gram(&s.as_matrix(1).unwrap()));
    assert_eq!(coeffs.len(), 4);
    for (d, e) in coeffs.iter().zip(&eig) {
        assert!((d - 0.5).abs() < 1e-12);
        assert!((e.sqrt() - 0.5).abs() < 1e-12);
    }
}
