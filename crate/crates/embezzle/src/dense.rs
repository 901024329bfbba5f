//! Finite-dimensional numerics: dense states over register products,
//! Schmidt and polar decompositions, and local-unitary invariance demos.
//!
//! The singular value decomposition is a one-sided Jacobi iteration
//! (convergence threshold 1e-12, at most 100 sweeps); small dense problems
//! only, no external linear algebra.

use std::io::{BufRead, Write};

use num::complex::Complex64;
use rand::Rng;
use serde_json::{json, Value};

use crate::error::{Error, Result};

pub const SVD_THRESHOLD: f64 = 1e-12;
pub const SVD_MAX_SWEEPS: usize = 100;

const C_ZERO: Complex64 = Complex64::new(0.0, 0.0);
const C_ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Dense row-major complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    pub rows: usize,
    pub cols: usize,
    data: Vec<Complex64>,
}

/// Square operator over a stated register product.
pub type DenseOperator = DenseMatrix;

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix { rows, cols, data: vec![C_ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C_ONE;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map(Vec::len).unwrap_or(0);
        assert!(rows.iter().all(|row| row.len() == c));
        DenseMatrix { rows: r, cols: c, data: rows.concat() }
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn adjoint(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn mul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.rows);
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == C_ZERO {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn sub(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a -= b;
        }
        out
    }

    pub fn add(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        out
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `‖U*U − I‖_max < eps`.
    pub fn is_unitary(&self, eps: f64) -> bool {
        self.rows == self.cols
            && self
                .adjoint()
                .mul(self)
                .sub(&DenseMatrix::identity(self.rows))
                .max_abs()
                < eps
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Flat amplitude vector over a product of finite registers, row-major
/// over `dims`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseState {
    pub dims: Vec<usize>,
    pub amps: Vec<Complex64>,
}

impl DenseState {
    pub fn new(dims: Vec<usize>, amps: Vec<Complex64>) -> Result<Self> {
        let len: usize = dims.iter().product();
        if amps.len() != len {
            return Err(Error::Usage(format!(
                "expected {len} amplitudes for dims {dims:?}, got {}",
                amps.len()
            )));
        }
        Ok(DenseState { dims, amps })
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn inner(&self, other: &DenseState) -> Complex64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    /// Groups the registers into (first `cut`) × (rest) and reshapes into a
    /// matrix.
    pub fn as_matrix(&self, cut: usize) -> Result<DenseMatrix> {
        if cut == 0 || cut >= self.dims.len() {
            return Err(Error::Usage(format!(
                "cut {cut} must split {} registers into two nonempty groups",
                self.dims.len()
            )));
        }
        let dl: usize = self.dims[..cut].iter().product();
        let dr: usize = self.dims[cut..].iter().product();
        let mut m = DenseMatrix::zeros(dl, dr);
        for i in 0..dl {
            for j in 0..dr {
                m[(i, j)] = self.amps[i * dr + j];
            }
        }
        Ok(m)
    }

    /// Applies `u ⊗ v` across the cut.
    pub fn apply_two_sided(&self, cut: usize, u: &DenseMatrix, v: &DenseMatrix) -> Result<DenseState> {
        let m = self.as_matrix(cut)?;
        if u.rows != m.rows || v.rows != m.cols {
            return Err(Error::Usage("local operator dimensions do not match the cut".into()));
        }
        // (u ⊗ v) vec(M) = u · M · vᵀ
        let out = u.mul(&m).mul(&transpose(v));
        DenseState::new(self.dims.clone(), out.data)
    }

    /// JSON Lines dense state format: header with the dims, then one line
    /// per (multi-index, amplitude) in index order.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", json!({ "mode": "float", "dims": self.dims }))?;
        for (k, amp) in self.amps.iter().enumerate() {
            if *amp == C_ZERO {
                continue;
            }
            writeln!(
                w,
                "{}",
                json!({ "label": { "idx": self.unravel(k) }, "amp": { "re": amp.re, "im": amp.im } })
            )?;
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
        let dims: Vec<usize> = header
            .get("dims")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Parse { line: 1, msg: "missing dims".into() })?
            .iter()
            .map(|v| v.as_u64().map(|n| n as usize))
            .collect::<Option<_>>()
            .ok_or_else(|| Error::Parse { line: 1, msg: "bad dims".into() })?;
        let len: usize = dims.iter().product();
        let mut amps = vec![C_ZERO; len];
        for (idx, line) in lines {
            let lineno = idx + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let v: Value = serde_json::from_str(&line)
                .map_err(|e| Error::Parse { line: lineno, msg: e.to_string() })?;
            let bad = |msg: &str| Error::Parse { line: lineno, msg: msg.into() };
            let multi = v
                .pointer("/label/idx")
                .and_then(Value::as_array)
                .ok_or_else(|| bad("missing label.idx"))?;
            if multi.len() != dims.len() {
                return Err(bad("index arity does not match dims"));
            }
            let mut flat = 0usize;
            for (d, ix) in dims.iter().zip(multi) {
                let ix = ix.as_u64().ok_or_else(|| bad("bad index"))? as usize;
                if ix >= *d {
                    return Err(bad("index out of range"));
                }
                flat = flat * d + ix;
            }
            let re = v.pointer("/amp/re").and_then(Value::as_f64).ok_or_else(|| bad("missing amp.re"))?;
            let im = v.pointer("/amp/im").and_then(Value::as_f64).ok_or_else(|| bad("missing amp.im"))?;
            amps[flat] = Complex64::new(re, im);
        }
        DenseState::new(dims, amps)
    }

    fn unravel(&self, mut k: usize) -> Vec<usize> {
        let mut idx = vec![0usize; self.dims.len()];
        for (slot, d) in idx.iter_mut().zip(&self.dims).rev() {
            *slot = k % d;
            k /= d;
        }
        idx
    }
}

fn transpose(m: &DenseMatrix) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(m.cols, m.rows);
    for i in 0..m.rows {
        for j in 0..m.cols {
            out[(j, i)] = m[(i, j)];
        }
    }
    out
}

/// Thin SVD `X = U Σ V*` with singular values in nonincreasing order.
pub struct Svd {
    pub u: DenseMatrix,
    pub sigma: Vec<f64>,
    pub v: DenseMatrix,
}

/// One-sided Jacobi: right-multiplies by plane rotations until the columns
/// of `X·V` are mutually orthogonal, then reads off `σ_k = ‖column k‖`.
pub fn svd_jacobi(x: &DenseMatrix) -> Svd {
    let n = x.cols;
    let mut b = x.clone();
    let mut v = DenseMatrix::identity(n);
    for _ in 0..SVD_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let mut app = 0.0;
                let mut aqq = 0.0;
                let mut apq = C_ZERO;
                for i in 0..b.rows {
                    app += b[(i, p)].norm_sqr();
                    aqq += b[(i, q)].norm_sqr();
                    apq += b[(i, p)].conj() * b[(i, q)];
                }
                if apq.norm() <= SVD_THRESHOLD * (app * aqq).sqrt() || apq.norm() == 0.0 {
                    continue;
                }
                rotated = true;
                // Absorb the phase so the 2×2 Gram block is real symmetric,
                // then apply a classical Jacobi rotation.
                let g = apq / apq.norm();
                let tau = (aqq - app) / (2.0 * apq.norm());
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for m in [&mut b, &mut v] {
                    for i in 0..m.rows {
                        let bp = m[(i, p)];
                        let bq = m[(i, q)] * g.conj();
                        m[(i, p)] = c * bp - s * bq;
                        m[(i, q)] = s * bp + c * bq;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = (0..n)
        .map(|j| (0..b.rows).map(|i| b[(i, j)].norm_sqr()).sum::<f64>().sqrt())
        .collect();
    order.sort_by(|a, c| norms[*c].partial_cmp(&norms[*a]).unwrap());
    let k = n.min(b.rows);
    let mut u = DenseMatrix::zeros(b.rows, k);
    let mut vv = DenseMatrix::zeros(n, k);
    let mut sigma = Vec::with_capacity(k);
    for (slot, &j) in order.iter().take(k).enumerate() {
        let s = norms[j];
        sigma.push(s);
        for i in 0..n {
            vv[(i, slot)] = v[(i, j)];
        }
        if s > 0.0 {
            for i in 0..b.rows {
                u[(i, slot)] = b[(i, j)] / s;
            }
        }
    }
    // Deterministic phases: first significant component of each left vector
    // becomes positive real (also fixes tie order output).
    for kcol in 0..k {
        if sigma[kcol] == 0.0 {
            continue;
        }
        let mut phase = C_ONE;
        for i in 0..u.rows {
            if u[(i, kcol)].norm() > 1e-12 {
                phase = u[(i, kcol)] / u[(i, kcol)].norm();
                break;
            }
        }
        for i in 0..u.rows {
            let val = u[(i, kcol)] * phase.conj();
            u[(i, kcol)] = val;
        }
        for i in 0..vv.rows {
            let val = vv[(i, kcol)] * phase.conj();
            vv[(i, kcol)] = val;
        }
    }
    Svd { u, sigma, v: vv }
}

/// One Schmidt term list: coefficients with their left/right vectors.
pub struct Schmidt {
    pub coeffs: Vec<f64>,
    pub left: Vec<Vec<Complex64>>,
    pub right: Vec<Vec<Complex64>>,
}

/// Schmidt decomposition across (first `cut` registers) | (rest):
/// `s = Σ_k d_k u_k ⊗ v_k` with `d_k ≥ d_{k+1} ≥ 0` and orthonormal
/// vectors. Coefficients below `1e-12 · d₀` are trimmed.
pub fn schmidt_decompose(s: &DenseState, cut: usize) -> Result<Schmidt> {
    let m = s.as_matrix(cut)?;
    let svd = svd_jacobi(&m);
    let top = svd.sigma.first().copied().unwrap_or(0.0);
    let keep = svd.sigma.iter().take_while(|&&d| d > 1e-12 * top.max(1e-300)).count();
    let mut left = Vec::with_capacity(keep);
    let mut right = Vec::with_capacity(keep);
    for k in 0..keep {
        left.push(svd.u.column(k));
        right.push(svd.v.column(k).iter().map(|z| z.conj()).collect());
    }
    Ok(Schmidt { coeffs: svd.sigma[..keep].to_vec(), left, right })
}

/// Polar decomposition `X = W·|X|` with `|X| = (X*X)^{1/2}` positive and
/// `W` a partial isometry onto the closure of the range.
pub fn polar_decompose(x: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
    if x.rows != x.cols {
        return Err(Error::Usage("polar decomposition expects a square matrix".into()));
    }
    let n = x.rows;
    let svd = svd_jacobi(x);
    let top = svd.sigma.first().copied().unwrap_or(0.0);
    let cut = 1e-12 * top.max(1e-300);
    let mut w = DenseMatrix::zeros(n, n);
    let mut p = DenseMatrix::zeros(n, n);
    for (k, &s) in svd.sigma.iter().enumerate() {
        if s <= cut {
            continue;
        }
        for i in 0..n {
            for j in 0..n {
                let vk_j = svd.v[(j, k)].conj();
                w[(i, j)] += svd.u[(i, k)] * vk_j;
                p[(i, j)] += s * svd.v[(i, k)] * vk_j;
            }
        }
    }
    Ok((w, p))
}

/// True iff the rows form an orthonormal family (`R R* = I` within `eps`).
pub fn coisometry_check(rows: &[Vec<Complex64>], eps: f64) -> Result<bool> {
    let len = rows.first().map(Vec::len).unwrap_or(0);
    if rows.iter().any(|r| r.len() != len) {
        return Err(Error::Usage("rows must have equal length".into()));
    }
    for (i, a) in rows.iter().enumerate() {
        for (j, b) in rows.iter().enumerate() {
            let g: Complex64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
            let expected = if i == j { C_ONE } else { C_ZERO };
            if (g - expected).norm() >= eps {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Report of the local-unitary invariance demonstration.
#[derive(Debug)]
pub struct InvarianceReport {
    pub coeffs_before: Vec<f64>,
    pub coeffs_after: Vec<f64>,
    pub max_coeff_diff: f64,
    pub invariant: bool,
    /// Top coefficient of the evolved state.
    pub top_coeff: f64,
    /// Top coefficient of the corresponding embezzlement target, `α₀/√2`.
    pub target_top_coeff: f64,
    /// The unbridgeable gap `α₀ − α₀/√2`.
    pub gap: f64,
}

impl InvarianceReport {
    pub fn to_json(&self) -> Value {
        json!({
            "coeffs_before": self.coeffs_before,
            "coeffs_after": self.coeffs_after,
            "max_coeff_diff": self.max_coeff_diff,
            "invariant": self.invariant,
            "top_coeff": self.top_coeff,
            "target_top_coeff": self.target_top_coeff,
            "gap": self.gap,
        })
    }
}

/// Applies local unitaries across the cut and compares Schmidt coefficients
/// before and after; they must agree elementwise, which is exactly why local
/// operations cannot reach the `α₀/√2` target profile.
pub fn schmidt_invariance_demo(
    s: &DenseState,
    cut: usize,
    u: &DenseMatrix,
    v: &DenseMatrix,
    eps: f64,
) -> Result<InvarianceReport> {
    if !u.is_unitary(eps.max(1e-9)) || !v.is_unitary(eps.max(1e-9)) {
        return Err(Error::Usage("local operators must be unitary".into()));
    }
    let before = schmidt_decompose(s, cut)?.coeffs;
    let evolved = s.apply_two_sided(cut, u, v)?;
    let after = schmidt_decompose(&evolved, cut)?.coeffs;
    let len = before.len().max(after.len());
    let get = |v: &Vec<f64>, i: usize| v.get(i).copied().unwrap_or(0.0);
    let max_diff = (0..len)
        .map(|i| (get(&before, i) - get(&after, i)).abs())
        .fold(0.0, f64::max);
    let top = get(&after, 0);
    Ok(InvarianceReport {
        coeffs_before: before,
        coeffs_after: after,
        max_coeff_diff: max_diff,
        invariant: max_diff < eps,
        top_coeff: top,
        target_top_coeff: top / std::f64::consts::SQRT_2,
        gap: top - top / std::f64::consts::SQRT_2,
    })
}

/// Haar-ish random unitary via Gram–Schmidt on a Gaussian matrix.
pub fn random_unitary<R: Rng>(rng: &mut R, n: usize) -> DenseMatrix {
    let gauss = |rng: &mut R| {
        // Box-Muller keeps us off rand_distr.
        let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
        let u2: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        (-2.0 * u1.ln()).sqrt() * u2.cos()
    };
    let mut cols: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    while cols.len() < n {
        let mut v: Vec<Complex64> =
            (0..n).map(|_| Complex64::new(gauss(rng), gauss(rng))).collect();
        for _ in 0..2 {
            for c in &cols {
                let overlap: Complex64 = c.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                for (vi, ci) in v.iter_mut().zip(c) {
                    *vi -= overlap * ci;
                }
            }
        }
        let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-6 {
            for vi in &mut v {
                *vi /= norm;
            }
            cols.push(v);
        }
    }
    let mut m = DenseMatrix::zeros(n, n);
    for (j, col) in cols.iter().enumerate() {
        for (i, z) in col.iter().enumerate() {
            m[(i, j)] = *z;
        }
    }
    m
}

/// Random normalized state over the given register dims.
pub fn random_state<R: Rng>(rng: &mut R, dims: Vec<usize>) -> DenseState {
    let len: usize = dims.iter().product();
    let mut amps: Vec<Complex64> = (0..len)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let norm: f64 = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for a in &mut amps {
        *a /= norm;
    }
    DenseState { dims, amps }
}
