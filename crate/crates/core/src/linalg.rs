//! Dense Hermitian and density-operator linear algebra.
//!
//! All matrices are `faer::Mat<c64>`. Hermitian inputs are symmetrized as
//! `(A + A†)/2` before any eigendecomposition so that roundoff in the
//! anti-Hermitian part never leaks into spectra. Entropies are in bits.

use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use faer::c64;

pub type CMat = Mat<c64>;

/// Absolute tolerance on `max |A - A†|` entries.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Smallest eigenvalue accepted as positive semi-definite.
pub const PSD_TOL: f64 = 1e-10;
/// Allowed deviation of a density operator's trace from one.
pub const TRACE_TOL: f64 = 1e-10;
/// Relative eigenvalue cutoff of [`pseudo_sqrt_inverse`].
pub const DEFAULT_PINV_REL_TOL: f64 = 1e-10;
/// Largest total Hilbert-space dimension that is ever materialized densely.
pub const DEFAULT_DIM_CAP: usize = 4096;
/// Eigenvalues at or below this are treated as exact zeros (support, logs).
pub const ZERO_EIGENVALUE: f64 = 1e-12;

pub fn identity(dim: usize) -> CMat {
    Mat::identity(dim, dim)
}

pub fn zeros(dim: usize) -> CMat {
    Mat::zeros(dim, dim)
}

pub fn diagonal(values: &[f64]) -> CMat {
    let d = values.len();
    Mat::from_fn(d, d, |i, j| if i == j { c64::new(values[i], 0.0) } else { c64::new(0.0, 0.0) })
}

/// `|ψ⟩⟨ψ| / ⟨ψ|ψ⟩`.
pub fn projector_onto(amplitudes: &[c64]) -> CMat {
    let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
    let d = amplitudes.len();
    Mat::from_fn(d, d, |i, j| amplitudes[i] * amplitudes[j].conj() / norm)
}

pub fn trace(a: &CMat) -> c64 {
    (0..a.nrows().min(a.ncols())).map(|i| a[(i, i)]).sum()
}

/// `tr(A B)` without forming the product.
pub fn trace_product(a: &CMat, b: &CMat) -> c64 {
    debug_assert_eq!(a.ncols(), b.nrows());
    debug_assert_eq!(a.nrows(), b.ncols());
    let mut acc = c64::new(0.0, 0.0);
    for j in 0..b.ncols() {
        for k in 0..a.ncols() {
            acc += a[(j, k)] * b[(k, j)];
        }
    }
    acc
}

/// `tr(A† B)`; equals `tr(A B)` when `A` is Hermitian, and runs over both
/// matrices column by column.
pub fn hilbert_schmidt(a: &CMat, b: &CMat) -> c64 {
    debug_assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    let mut acc = c64::new(0.0, 0.0);
    for k in 0..a.ncols() {
        for (x, y) in a.col_as_slice(k).iter().zip(b.col_as_slice(k)) {
            acc += x.conj() * y;
        }
    }
    acc
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    assert_eq!(a.nrows(), b.nrows());
    assert_eq!(a.ncols(), b.ncols());
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    m
}

/// `max |A - A†|` over entries; infinite for non-square input.
pub fn hermitian_deviation(a: &CMat) -> f64 {
    if a.nrows() != a.ncols() {
        return f64::INFINITY;
    }
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..=j {
            m = m.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    m
}

pub fn hermitian_part(a: &CMat) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5)
}

pub fn scaled(a: &CMat, s: f64) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * s)
}

/// `acc += s * a`.
pub fn add_scaled(acc: &mut CMat, a: &CMat, s: f64) {
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            acc[(i, j)] += a[(i, j)] * s;
        }
    }
}

pub fn is_finite(a: &CMat) -> bool {
    (0..a.ncols()).all(|j| (0..a.nrows()).all(|i| a[(i, j)].re.is_finite() && a[(i, j)].im.is_finite()))
}

fn is_exactly_diagonal(a: &CMat) -> bool {
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            if i != j && a[(i, j)] != c64::new(0.0, 0.0) {
                return false;
            }
        }
    }
    true
}

/// Spectral decomposition `A = U diag(values) U†` with eigenvalues descending.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

impl Eigen {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `U f(Λ) U†`, summing only over eigenpairs where `f` is nonzero.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> CMat {
        let d = self.dim();
        let mapped: Vec<(usize, f64)> = self
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| (i, f(v)))
            .filter(|&(_, v)| v != 0.0)
            .collect();
        if mapped.is_empty() {
            return zeros(d);
        }
        let u = &self.vectors;
        let weighted = Mat::from_fn(d, mapped.len(), |r, c| u[(r, mapped[c].0)] * mapped[c].1);
        let basis = Mat::from_fn(d, mapped.len(), |r, c| u[(r, mapped[c].0)]);
        &weighted * basis.adjoint()
    }

    pub fn reconstruct(&self) -> CMat {
        self.map_spectrum(|v| v)
    }
}

/// Eigendecomposition of the Hermitian part of `a`, no tolerance check.
///
/// Exactly diagonal inputs return the standard basis (ties broken by index),
/// which keeps degenerate spectra such as `id/2` deterministic.
pub(crate) fn eigh(a: &CMat) -> Eigen {
    let d = a.nrows();
    if is_exactly_diagonal(a) {
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&i, &j| a[(j, j)].re.total_cmp(&a[(i, i)].re));
        let values = order.iter().map(|&i| a[(i, i)].re).collect();
        let vectors = Mat::from_fn(d, d, |r, c| if r == order[c] { c64::new(1.0, 0.0) } else { c64::new(0.0, 0.0) });
        return Eigen { values, vectors };
    }
    let h = hermitian_part(a);
    let evd = h
        .self_adjoint_eigen(Side::Lower)
        .expect("self-adjoint eigendecomposition of a finite matrix");
    let s = evd.S().column_vector();
    let u = evd.U();
    let values = (0..d).rev().map(|i| s[i].re).collect();
    let vectors = Mat::from_fn(d, d, |r, c| u[(r, d - 1 - c)]);
    Eigen { values, vectors }
}

/// Eigenvalues (descending) and an orthonormal eigenbasis of a Hermitian matrix.
pub fn hermitian_eigendecomposition(a: &CMat) -> Result<Eigen> {
    check_hermitian(a)?;
    Ok(eigh(a))
}

pub fn eigenvalues(a: &CMat) -> Vec<f64> {
    eigh(a).values
}

fn check_hermitian(a: &CMat) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::invalid(format!("matrix is {}x{}, not square", a.nrows(), a.ncols())));
    }
    if !is_finite(a) {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    let dev = hermitian_deviation(a);
    if dev > HERMITIAN_TOL {
        return Err(Error::invalid(format!("matrix is not Hermitian (max |A - A†| = {dev:e})")));
    }
    Ok(())
}

/// Kronecker product; entry `((i1,i2),(j1,j2))` is `A(i1,j1) B(i2,j2)`.
pub fn tensor_product(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac, br, bc) = (a.nrows(), a.ncols(), b.nrows(), b.ncols());
    let mut out = Mat::zeros(ar * br, ac * bc);
    for ja in 0..ac {
        let acol = a.col_as_slice(ja);
        for jb in 0..bc {
            let bcol = b.col_as_slice(jb);
            let dst = out.col_as_slice_mut(ja * bc + jb);
            for (ia, &x) in acol.iter().enumerate() {
                for (d, &y) in dst[ia * br..(ia + 1) * br].iter_mut().zip(bcol) {
                    *d = x * y;
                }
            }
        }
    }
    out
}

/// `A_1 ⊗ A_2 ⊗ … ⊗ A_n`; the empty product is the 1x1 identity.
pub fn tensor_all<'a>(factors: impl IntoIterator<Item = &'a CMat>) -> CMat {
    factors.into_iter().fold(identity(1), |acc, f| tensor_product(&acc, f))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Subsystem {
    First,
    Second,
}

/// Traces out the subsystem that is not `keep` from an operator on `C^d1 ⊗ C^d2`.
pub fn partial_trace(a: &CMat, dims: (usize, usize), keep: Subsystem) -> Result<CMat> {
    let (d1, d2) = dims;
    if a.nrows() != a.ncols() || a.nrows() != d1 * d2 {
        return Err(Error::invalid(format!(
            "partial trace: operator of size {}x{} does not act on {d1}x{d2}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(match keep {
        Subsystem::First => Mat::from_fn(d1, d1, |i, j| (0..d2).map(|k| a[(i * d2 + k, j * d2 + k)]).sum()),
        Subsystem::Second => Mat::from_fn(d2, d2, |i, j| (0..d1).map(|k| a[(k * d2 + i, k * d2 + j)]).sum()),
    })
}

/// Sum of absolute eigenvalues of a Hermitian matrix.
pub fn trace_norm(a: &CMat) -> Result<f64> {
    check_hermitian(a)?;
    Ok(eigh(a).values.iter().map(|v| v.abs()).sum())
}

/// Generalized inverse square root on the support: eigenvalues at or below
/// `rel_tol * λ_max` are mapped to zero.
pub fn pinv_sqrt(a: &CMat, rel_tol: f64) -> CMat {
    let e = eigh(a);
    let lmax = e.values.first().copied().unwrap_or(0.0);
    if lmax <= 0.0 {
        return zeros(a.nrows());
    }
    let cut = rel_tol * lmax;
    e.map_spectrum(|v| if v > cut { v.powf(-0.5) } else { 0.0 })
}

/// Projector onto eigenvectors with eigenvalue above `rel_tol * λ_max`.
pub fn support_projector(a: &CMat, rel_tol: f64) -> CMat {
    let e = eigh(a);
    let lmax = e.values.first().copied().unwrap_or(0.0);
    if lmax <= 0.0 {
        return zeros(a.nrows());
    }
    let cut = rel_tol * lmax;
    e.map_spectrum(|v| if v > cut { 1.0 } else { 0.0 })
}

pub fn pseudo_sqrt_inverse(a: &PositiveOperator, rel_tol: f64) -> PositiveOperator {
    PositiveOperator { matrix: pinv_sqrt(a.matrix(), rel_tol), sub_unital: false }
}

/// `-Σ λ log₂ λ` over a spectrum, with `0 log 0 = 0`.
pub fn spectral_entropy(values: &[f64]) -> f64 {
    values
        .iter()
        .filter(|&&v| v > ZERO_EIGENVALUE)
        .map(|&v| -v * v.log2())
        .sum::<f64>()
        .max(0.0)
}

pub fn von_neumann_entropy(rho: &DensityOperator) -> f64 {
    spectral_entropy(&rho.eigenvalues())
}

/// Trace-one positive semi-definite operator.
#[derive(Clone, Debug)]
pub struct DensityOperator(CMat);

impl DensityOperator {
    pub fn new(matrix: CMat) -> Result<Self> {
        check_hermitian(&matrix)?;
        let tr = trace(&matrix);
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::invalid(format!("trace is {} (expected 1)", tr.re)));
        }
        let h = hermitian_part(&matrix);
        let min = eigh(&h).values.last().copied().unwrap_or(0.0);
        if min < -PSD_TOL {
            return Err(Error::invalid(format!("not positive semi-definite (min eigenvalue {min:e})")));
        }
        Ok(DensityOperator(h))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        DensityOperator(scaled(&identity(dim), 1.0 / dim as f64))
    }

    pub fn pure(amplitudes: &[c64]) -> Self {
        DensityOperator(projector_onto(amplitudes))
    }

    /// Diagonal state in the computational basis. Panics unless `probs` is a distribution.
    pub fn diagonal(probs: &[f64]) -> Self {
        DensityOperator::new(diagonal(probs)).expect("diagonal entries must form a probability vector")
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    pub fn into_matrix(self) -> CMat {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        eigenvalues(&self.0)
    }

    pub fn eigen(&self) -> Eigen {
        eigh(&self.0)
    }

    pub fn tensor(&self, other: &DensityOperator) -> DensityOperator {
        DensityOperator(tensor_product(&self.0, &other.0))
    }

    /// Wraps a matrix the caller has already established to be a state.
    pub(crate) fn from_trusted(matrix: CMat) -> Self {
        DensityOperator(matrix)
    }
}

/// Hermitian positive semi-definite operator, optionally bounded by the identity.
#[derive(Clone, Debug)]
pub struct PositiveOperator {
    matrix: CMat,
    sub_unital: bool,
}

impl PositiveOperator {
    pub fn new(matrix: CMat, sub_unital: bool) -> Result<Self> {
        check_hermitian(&matrix)?;
        let h = hermitian_part(&matrix);
        let values = eigh(&h).values;
        let min = values.last().copied().unwrap_or(0.0);
        if min < -PSD_TOL {
            return Err(Error::invalid(format!("not positive semi-definite (min eigenvalue {min:e})")));
        }
        if sub_unital {
            let max = values.first().copied().unwrap_or(0.0);
            if max > 1.0 + PSD_TOL {
                return Err(Error::invalid(format!("operator exceeds the identity (max eigenvalue {max})")));
            }
        }
        Ok(PositiveOperator { matrix: h, sub_unital })
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn is_sub_unital(&self) -> bool {
        self.sub_unital
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Tolerance on the total mass of a [`ProbabilityDistribution`].
pub const PROBABILITY_SUM_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityDistribution {
    labels: Vec<String>,
    weights: Vec<f64>,
}

impl ProbabilityDistribution {
    pub fn new(labels: Vec<String>, weights: Vec<f64>) -> Result<Self> {
        if labels.len() != weights.len() {
            return Err(Error::invalid(format!(
                "distribution has {} labels but {} weights",
                labels.len(),
                weights.len()
            )));
        }
        if labels.is_empty() {
            return Err(Error::invalid("distribution over an empty alphabet"));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::invalid(format!("negative or non-finite weight {w}")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > PROBABILITY_SUM_TOL {
            return Err(Error::invalid(format!("weights sum to {sum}, not 1")));
        }
        Ok(ProbabilityDistribution { labels, weights })
    }

    /// Normalizes nonnegative weights before validating.
    pub fn normalized(labels: Vec<String>, weights: Vec<f64>) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0) || !sum.is_finite() {
            return Err(Error::invalid("weights have no positive finite mass"));
        }
        Self::new(labels, weights.iter().map(|w| w / sum).collect())
    }

    pub fn uniform(labels: Vec<String>) -> Self {
        let m = labels.len();
        ProbabilityDistribution { labels, weights: vec![1.0 / m as f64; m] }
    }

    pub fn point_mass(labels: Vec<String>, index: usize) -> Self {
        let mut weights = vec![0.0; labels.len()];
        weights[index] = 1.0;
        ProbabilityDistribution { labels, weights }
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Product distribution on pairs; labels are joined with a comma.
    pub fn product(&self, other: &ProbabilityDistribution) -> ProbabilityDistribution {
        let mut labels = Vec::with_capacity(self.len() * other.len());
        let mut weights = Vec::with_capacity(self.len() * other.len());
        for (la, wa) in self.labels.iter().zip(&self.weights) {
            for (lb, wb) in other.labels.iter().zip(&other.weights) {
                labels.push(format!("{la},{lb}"));
                weights.push(wa * wb);
            }
        }
        ProbabilityDistribution { labels, weights }
    }

    /// `P^n` on words, enumerated in lexicographic order of letter indices.
    pub fn power(&self, n: usize) -> ProbabilityDistribution {
        assert!(n >= 1);
        (1..n).fold(self.clone(), |acc, _| acc.product(self))
    }
}

/// Nested rows of `[re, im]` pairs.
pub type MatrixLiteral = Vec<Vec<[f64; 2]>>;

pub fn to_literal(a: &CMat) -> MatrixLiteral {
    (0..a.nrows()).map(|i| (0..a.ncols()).map(|j| [a[(i, j)].re, a[(i, j)].im]).collect()).collect()
}

pub fn from_literal(rows: &MatrixLiteral) -> Result<CMat> {
    let d = rows.len();
    if d == 0 {
        return Err(Error::invalid("empty matrix literal"));
    }
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != d) {
        return Err(Error::invalid(format!("matrix literal row {i} has {} entries, expected {d}", r.len())));
    }
    let m = Mat::from_fn(d, d, |i, j| c64::new(rows[i][j][0], rows[i][j][1]));
    if !is_finite(&m) {
        return Err(Error::invalid("matrix literal has non-finite entries"));
    }
    Ok(m)
}
