//! Frequency-typical sets and typical-subspace projectors.
//!
//! Projectors are diagonal in a product eigenbasis, so every scalar the
//! bounds need (captured mass, rank, largest compressed eigenvalue) is a sum
//! over type classes weighted by multinomial coefficients. Dense realization
//! is only needed for operator products and is capped by the dimension limit.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::channel::{checked_pow, word_from_index, CqChannel};
use crate::error::{Error, Result};
use crate::linalg::{c64, CMat, DensityOperator, ProbabilityDistribution, ZERO_EIGENVALUE};

/// Slack on frequency comparisons, relative to the word length.
const FREQ_EPS: f64 = 1e-12;

/// How the per-index threshold `τ` scales with the (sub)word length.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// `τ = α`
    Fixed,
    /// `τ = α / √len`
    #[serde(alias = "sqrt")]
    SqrtScaled,
}

impl Preset {
    pub fn threshold(self, alpha: f64, len: usize) -> f64 {
        match self {
            Preset::Fixed => alpha,
            Preset::SqrtScaled => alpha / (len.max(1) as f64).sqrt(),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Fixed => "fixed",
            Preset::SqrtScaled => "sqrt",
        })
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(Preset::Fixed),
            "sqrt" | "sqrt-scaled" => Ok(Preset::SqrtScaled),
            _ => Err(Error::invalid(format!("unknown preset {s:?} (expected fixed or sqrt)"))),
        }
    }
}

/// All count vectors of `parts` nonnegative integers summing to `total`,
/// in lexicographic order.
pub fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    fn rec(remaining: usize, parts: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 1 {
            prefix.push(remaining);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for c in 0..=remaining {
            prefix.push(c);
            rec(remaining - c, parts - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if parts == 0 {
        if total == 0 {
            out.push(Vec::new());
        }
        return out;
    }
    rec(total, parts, &mut Vec::with_capacity(parts), &mut out);
    out
}

/// `n! / Π c_i!` as a float.
pub fn multinomial(counts: &[usize]) -> f64 {
    let mut result = 1.0;
    let mut seen = 0usize;
    for &c in counts {
        for k in 1..=c {
            seen += 1;
            result = result * seen as f64 / k as f64;
        }
    }
    result
}

pub fn letter_counts(word: &[usize], alphabet_size: usize) -> Vec<usize> {
    let mut counts = vec![0; alphabet_size];
    for &a in word {
        counts[a] += 1;
    }
    counts
}

fn within(count: usize, len: usize, target: f64, tol: f64) -> bool {
    let len_f = len as f64;
    (count as f64 - len_f * target).abs() <= len_f * (tol + FREQ_EPS)
}

/// `T^n_{P,δ}`: words whose letter frequencies are within `δ/|A|` of `P`.
#[derive(Clone, Debug)]
pub struct TypicalSet {
    dist: ProbabilityDistribution,
    n: usize,
    delta: f64,
}

pub fn typical_sequences(dist: &ProbabilityDistribution, n: usize, delta: f64) -> Result<TypicalSet> {
    if n == 0 {
        return Err(Error::invalid("block length must be positive"));
    }
    if !(delta > 0.0) {
        return Err(Error::invalid(format!("typicality delta must be positive, got {delta}")));
    }
    Ok(TypicalSet { dist: dist.clone(), n, delta })
}

impl TypicalSet {
    pub fn block_length(&self) -> usize {
        self.n
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn distribution(&self) -> &ProbabilityDistribution {
        &self.dist
    }

    /// Per-letter tolerance on frequencies, `δ/|A|`.
    pub fn tolerance(&self) -> f64 {
        self.delta / self.dist.len() as f64
    }

    pub fn contains_counts(&self, counts: &[usize]) -> bool {
        let tol = self.tolerance();
        counts.iter().zip(self.dist.weights()).all(|(&c, &p)| within(c, self.n, p, tol))
    }

    pub fn contains(&self, word: &[usize]) -> bool {
        word.len() == self.n
            && word.iter().all(|&a| a < self.dist.len())
            && self.contains_counts(&letter_counts(word, self.dist.len()))
    }

    /// Every count vector (type class) inside the set.
    pub fn types(&self) -> Vec<Vec<usize>> {
        compositions(self.n, self.dist.len()).into_iter().filter(|c| self.contains_counts(c)).collect()
    }

    /// Number of member words.
    pub fn size(&self) -> f64 {
        self.types().iter().map(|c| multinomial(c)).sum()
    }

    /// `P^n(T)`.
    pub fn probability(&self) -> f64 {
        self.types()
            .iter()
            .map(|c| multinomial(c) * c.iter().zip(self.dist.weights()).map(|(&k, &p)| p.powi(k as i32)).product::<f64>())
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.types().is_empty()
    }

    /// All members in lexicographic order; refuses when `|A|^n > cap`.
    pub fn enumerate(&self, cap: usize) -> Result<Vec<Vec<usize>>> {
        let a = self.dist.len();
        let total = checked_pow(a, self.n)
            .filter(|&t| t <= cap)
            .ok_or_else(|| Error::resource(format!("enumerating {a}^{} words exceeds the cap {cap}", self.n)))?;
        Ok((0..total).map(|i| word_from_index(i, a, self.n)).filter(|w| self.contains(w)).collect())
    }
}

/// Whether a count vector over eigen-indices is `τ`-typical for `spectrum`.
/// Indices with zero eigenvalue may not occur at all.
pub fn spectrally_typical(counts: &[usize], spectrum: &[f64], tau: f64) -> bool {
    let len: usize = counts.iter().sum();
    counts.iter().zip(spectrum).all(|(&c, &l)| {
        if l <= ZERO_EIGENVALUE {
            c == 0
        } else {
            within(c, len, l, tau)
        }
    })
}

/// Exact scalars of a single-class typical projector of length `len`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    /// `tr(ρ^{⊗len} Π)`
    pub capture: f64,
    /// `tr Π`
    pub rank: f64,
    /// `‖Π ρ^{⊗len} Π‖_∞`
    pub max_eigenvalue: f64,
}

impl ClassStats {
    const EMPTY_WORD: ClassStats = ClassStats { capture: 1.0, rank: 1.0, max_eigenvalue: 1.0 };

    pub fn of(spectrum: &[f64], len: usize, tau: f64) -> ClassStats {
        if len == 0 {
            return Self::EMPTY_WORD;
        }
        let mut stats = ClassStats { capture: 0.0, rank: 0.0, max_eigenvalue: 0.0 };
        for counts in compositions(len, spectrum.len()) {
            if !spectrally_typical(&counts, spectrum, tau) {
                continue;
            }
            let mult = multinomial(&counts);
            let p: f64 = counts.iter().zip(spectrum).map(|(&c, &l)| l.max(0.0).powi(c as i32)).product();
            stats.capture += mult * p;
            stats.rank += mult;
            stats.max_eigenvalue = stats.max_eigenvalue.max(p);
        }
        stats
    }

    fn combine(self, other: ClassStats) -> ClassStats {
        ClassStats {
            capture: self.capture * other.capture,
            rank: self.rank * other.rank,
            max_eigenvalue: self.max_eigenvalue * other.max_eigenvalue,
        }
    }
}

/// `Σ_{λ>0} log₂(1/λ)`.
pub fn log_spread(spectrum: &[f64]) -> f64 {
    spectrum.iter().filter(|&&l| l > ZERO_EIGENVALUE).map(|l| -l.log2()).sum()
}

fn entropy_of(spectrum: &[f64]) -> f64 {
    crate::linalg::spectral_entropy(spectrum)
}

/// Columns `⊗_k basis_k[:, j_k]` for each included eigen-index word `j`.
fn product_columns(words: &[Vec<usize>], bases: &[&CMat]) -> CMat {
    let dim: usize = bases.iter().map(|b| b.nrows()).product();
    let mut out = Mat::<c64>::zeros(dim, words.len());
    let mut buf: Vec<c64> = Vec::with_capacity(dim);
    let mut next: Vec<c64> = Vec::with_capacity(dim);
    for (col, word) in words.iter().enumerate() {
        buf.clear();
        buf.push(c64::new(1.0, 0.0));
        for (k, &j) in word.iter().enumerate() {
            let b = bases[k];
            next.clear();
            for &v in &buf {
                for r in 0..b.nrows() {
                    next.push(v * b[(r, j)]);
                }
            }
            std::mem::swap(&mut buf, &mut next);
        }
        for (r, v) in buf.iter().enumerate() {
            out[(r, col)] = *v;
        }
    }
    out
}

/// `Π_{ρ,α}`: span of product eigenvectors of `ρ^{⊗n}` whose eigen-index
/// frequencies are within `τ` of the spectrum.
#[derive(Clone, Debug)]
pub struct TypicalProjector {
    n: usize,
    alpha: f64,
    preset: Preset,
    tau: f64,
    spectrum: Vec<f64>,
    basis: CMat,
}

/// Dense-realizable typical projector; fails when `dim^n` exceeds `dim_cap`.
pub fn typical_projector(
    rho: &DensityOperator,
    n: usize,
    alpha: f64,
    preset: Preset,
    dim_cap: usize,
) -> Result<TypicalProjector> {
    let proj = TypicalProjector::spectral(rho, n, alpha, preset)?;
    proj.check_cap(dim_cap)?;
    Ok(proj)
}

impl TypicalProjector {
    /// Construction without a dimension cap; only the scalar queries are cheap.
    pub fn spectral(rho: &DensityOperator, n: usize, alpha: f64, preset: Preset) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("block length must be positive"));
        }
        if !(alpha > 0.0) {
            return Err(Error::invalid(format!("alpha must be positive, got {alpha}")));
        }
        let e = rho.eigen();
        Ok(TypicalProjector {
            n,
            alpha,
            preset,
            tau: preset.threshold(alpha, n),
            spectrum: e.values,
            basis: e.vectors,
        })
    }

    pub fn block_length(&self) -> usize {
        self.n
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn preset(&self) -> Preset {
        self.preset
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    pub fn basis(&self) -> &CMat {
        &self.basis
    }

    pub fn local_dim(&self) -> usize {
        self.spectrum.len()
    }

    pub fn total_dim(&self) -> Option<usize> {
        checked_pow(self.local_dim(), self.n)
    }

    fn check_cap(&self, dim_cap: usize) -> Result<usize> {
        self.total_dim().filter(|&t| t <= dim_cap).ok_or_else(|| {
            Error::resource(format!("dimension {}^{} exceeds the cap {dim_cap}", self.local_dim(), self.n))
        })
    }

    pub fn contains(&self, eigen_word: &[usize]) -> bool {
        eigen_word.len() == self.n
            && spectrally_typical(&letter_counts(eigen_word, self.local_dim()), &self.spectrum, self.tau)
    }

    pub fn stats(&self) -> ClassStats {
        ClassStats::of(&self.spectrum, self.n, self.tau)
    }

    /// Included eigen-index words in lexicographic order.
    pub fn included_words(&self, dim_cap: usize) -> Result<Vec<Vec<usize>>> {
        let total = self.check_cap(dim_cap)?;
        let d = self.local_dim();
        Ok((0..total).map(|i| word_from_index(i, d, self.n)).filter(|w| self.contains(w)).collect())
    }

    /// Orthonormal columns spanning the projector's range.
    pub fn isometry(&self, dim_cap: usize) -> Result<CMat> {
        let words = self.included_words(dim_cap)?;
        let bases: Vec<&CMat> = vec![&self.basis; self.n];
        Ok(product_columns(&words, &bases))
    }

    pub fn to_dense(&self, dim_cap: usize) -> Result<CMat> {
        let v = self.isometry(dim_cap)?;
        Ok(&v * v.adjoint())
    }

    /// Exact `tr(V^{⊗n}(x^n) Π)` for a word over the channel's alphabet.
    ///
    /// Measuring each output in the eigenbasis gives independent outcomes with
    /// distribution `q_a(i) = ⟨e_i|V(a)|e_i⟩`; the trace is the probability that
    /// the joint outcome counts form a typical type, computed by convolution.
    pub fn cross_capture(&self, channel: &CqChannel, word: &[usize]) -> Result<f64> {
        if word.len() != self.n {
            return Err(Error::invalid(format!("word has length {}, expected {}", word.len(), self.n)));
        }
        if channel.dim() != self.local_dim() {
            return Err(Error::invalid("channel output dimension does not match the projector"));
        }
        let q = basis_marginals(channel, &self.basis);
        let mut dist: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
        dist.insert(vec![0; self.local_dim()], 1.0);
        for &a in word {
            let mut next: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
            for (counts, p) in &dist {
                for (i, &qi) in q[a].iter().enumerate() {
                    if qi <= 0.0 {
                        continue;
                    }
                    let mut c = counts.clone();
                    c[i] += 1;
                    *next.entry(c).or_insert(0.0) += p * qi;
                }
            }
            dist = next;
        }
        Ok(dist
            .iter()
            .filter(|(c, _)| spectrally_typical(c, &self.spectrum, self.tau))
            .map(|(_, p)| p)
            .sum())
    }
}

/// `q[a][i] = ⟨e_i|V(a)|e_i⟩` for the columns `e_i` of `basis`.
fn basis_marginals(channel: &CqChannel, basis: &CMat) -> Vec<Vec<f64>> {
    let d = basis.nrows();
    channel
        .states()
        .iter()
        .map(|s| {
            let m = s.matrix();
            (0..basis.ncols())
                .map(|i| {
                    let mut acc = c64::new(0.0, 0.0);
                    for r in 0..d {
                        for c in 0..d {
                            acc += basis[(r, i)].conj() * m[(r, c)] * basis[(c, i)];
                        }
                    }
                    acc.re.max(0.0)
                })
                .collect()
        })
        .collect()
}

#[derive(Clone, Debug)]
struct LetterClass {
    spectrum: Vec<f64>,
    basis: CMat,
    len: usize,
    tau: f64,
}

/// `Π_{V,α}(x^n)`: per input letter `a`, the sub-word on positions with
/// `x_k = a` must be typical for the spectrum of `V(a)`.
#[derive(Clone, Debug)]
pub struct ConditionalTypicalProjector {
    word: Vec<usize>,
    alpha: f64,
    preset: Preset,
    classes: Vec<LetterClass>,
}

pub fn conditional_typical_projector(
    channel: &CqChannel,
    word: &[usize],
    alpha: f64,
    preset: Preset,
    dim_cap: usize,
) -> Result<ConditionalTypicalProjector> {
    let proj = ConditionalTypicalProjector::spectral(channel, word, alpha, preset)?;
    proj.check_cap(dim_cap)?;
    Ok(proj)
}

impl ConditionalTypicalProjector {
    pub fn spectral(channel: &CqChannel, word: &[usize], alpha: f64, preset: Preset) -> Result<Self> {
        if word.is_empty() {
            return Err(Error::invalid("conditioning word is empty"));
        }
        if !(alpha > 0.0) {
            return Err(Error::invalid(format!("alpha must be positive, got {alpha}")));
        }
        let a = channel.alphabet_size();
        if let Some(&bad) = word.iter().find(|&&x| x >= a) {
            return Err(Error::invalid(format!("letter index {bad} outside the alphabet")));
        }
        let counts = letter_counts(word, a);
        let classes = channel
            .states()
            .iter()
            .zip(&counts)
            .map(|(s, &len)| {
                let e = s.eigen();
                LetterClass { spectrum: e.values, basis: e.vectors, len, tau: preset.threshold(alpha, len) }
            })
            .collect();
        Ok(ConditionalTypicalProjector { word: word.to_vec(), alpha, preset, classes })
    }

    pub fn word(&self) -> &[usize] {
        &self.word
    }

    pub fn block_length(&self) -> usize {
        self.word.len()
    }

    pub fn local_dim(&self) -> usize {
        self.classes[0].spectrum.len()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn preset(&self) -> Preset {
        self.preset
    }

    /// `τ_a` for each letter (the threshold of its class length).
    pub fn class_thresholds(&self) -> Vec<f64> {
        self.classes.iter().map(|c| c.tau).collect()
    }

    pub fn class_lengths(&self) -> Vec<usize> {
        self.classes.iter().map(|c| c.len).collect()
    }

    fn check_cap(&self, dim_cap: usize) -> Result<usize> {
        checked_pow(self.local_dim(), self.word.len()).filter(|&t| t <= dim_cap).ok_or_else(|| {
            Error::resource(format!("dimension {}^{} exceeds the cap {dim_cap}", self.local_dim(), self.word.len()))
        })
    }

    pub fn contains(&self, eigen_word: &[usize]) -> bool {
        if eigen_word.len() != self.word.len() {
            return false;
        }
        let d = self.local_dim();
        let mut counts = vec![vec![0usize; d]; self.classes.len()];
        for (&x, &j) in self.word.iter().zip(eigen_word) {
            counts[x][j] += 1;
        }
        self.classes.iter().zip(&counts).all(|(c, k)| spectrally_typical(k, &c.spectrum, c.tau))
    }

    /// Product over letter classes of the single-class scalars; `capture` is
    /// `tr(V^{⊗n}(x^n) Π)`.
    pub fn stats(&self) -> ClassStats {
        self.classes
            .iter()
            .map(|c| ClassStats::of(&c.spectrum, c.len, c.tau))
            .fold(ClassStats::EMPTY_WORD, ClassStats::combine)
    }

    pub fn included_words(&self, dim_cap: usize) -> Result<Vec<Vec<usize>>> {
        let total = self.check_cap(dim_cap)?;
        let d = self.local_dim();
        let n = self.word.len();
        Ok((0..total).map(|i| word_from_index(i, d, n)).filter(|w| self.contains(w)).collect())
    }

    pub fn isometry(&self, dim_cap: usize) -> Result<CMat> {
        let words = self.included_words(dim_cap)?;
        let bases: Vec<&CMat> = self.word.iter().map(|&x| &self.classes[x].basis).collect();
        Ok(product_columns(&words, &bases))
    }

    pub fn to_dense(&self, dim_cap: usize) -> Result<CMat> {
        let v = self.isometry(dim_cap)?;
        Ok(&v * v.adjoint())
    }
}

/// One measured quantity against one bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub name: String,
    pub measured: f64,
    pub bound: f64,
    /// `true` when the bound is an upper bound on `measured`.
    pub upper: bool,
    pub holds: bool,
    /// Whether the bound is a guarantee of the construction at these
    /// parameters; unasserted checks are reported for comparison only.
    pub asserted: bool,
}

impl BoundCheck {
    fn lower(name: &str, measured: f64, bound: f64, asserted: bool) -> Self {
        BoundCheck { name: name.into(), measured, bound, upper: false, holds: measured >= bound - 1e-12, asserted }
    }

    fn upper(name: &str, measured: f64, bound: f64, asserted: bool) -> Self {
        BoundCheck {
            name: name.into(),
            measured,
            bound,
            upper: true,
            holds: measured <= bound * (1.0 + 1e-12) + 1e-300,
            asserted,
        }
    }

    /// Signed margin: positive when the check holds.
    pub fn slack(&self) -> f64 {
        if self.upper {
            self.bound - self.measured
        } else {
            self.measured - self.bound
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportKind {
    Unconditional,
    Conditional,
}

/// Exact projector measurements compared with their bounds.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProjectorBoundReport {
    pub kind: ReportKind,
    pub n: usize,
    pub alpha: f64,
    pub preset: Preset,
    /// Output dimension `d`.
    pub dim: usize,
    /// Input alphabet size `a` (conditional reports only).
    pub alphabet_size: Option<usize>,
    /// `S(ρ)` or `S(V|P)`.
    pub entropy: f64,
    pub capture: f64,
    pub rank: f64,
    pub max_eigenvalue: f64,
    /// `tr(V^{⊗n}(x^n) Π_{PV, α√a})` (conditional reports only).
    pub cross_capture: Option<f64>,
    /// Whether the conditioning word lies in `T^n_{P,δ}`.
    pub word_typical: Option<bool>,
    pub checks: Vec<BoundCheck>,
    /// Smallest `K ≥ 0` for which the `2^{nS ± K d α √n}`-shaped bounds hold
    /// (`a d` in place of `d` for conditional reports).
    pub empirical_k: f64,
}

impl ProjectorBoundReport {
    pub fn asserted_hold(&self) -> bool {
        self.checks.iter().filter(|c| c.asserted).all(|c| c.holds)
    }

    pub fn check(&self, name: &str) -> Option<&BoundCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn empirical_k(rank: f64, max_eigenvalue: f64, entropy: f64, n: usize, scale: f64) -> f64 {
    let n_f = n as f64;
    let k_count = (rank.log2() - n_f * entropy) / scale;
    let k_equi = (max_eigenvalue.log2() + n_f * entropy) / scale;
    [k_count, k_equi, 0.0].into_iter().filter(|k| k.is_finite()).fold(0.0, f64::max)
}

/// Bounds for `Π_{ρ,α}` at block length `n`.
pub fn verify_projector_bounds(
    rho: &DensityOperator,
    n: usize,
    alpha: f64,
    preset: Preset,
) -> Result<ProjectorBoundReport> {
    let proj = TypicalProjector::spectral(rho, n, alpha, preset)?;
    let stats = proj.stats();
    let spectrum = proj.spectrum();
    let d = spectrum.len();
    let n_f = n as f64;
    let tau = proj.tau();
    let entropy = entropy_of(spectrum);
    let c = log_spread(spectrum);
    let variance: f64 = spectrum.iter().filter(|&&l| l > ZERO_EIGENVALUE).map(|l| l * (1.0 - l)).sum();

    let checks = vec![
        BoundCheck::lower("capture", stats.capture, 1.0 - d as f64 / (4.0 * n_f * alpha * alpha), preset == Preset::Fixed),
        BoundCheck::lower("capture_chebyshev", stats.capture, 1.0 - variance / (n_f * tau * tau), true),
        BoundCheck::upper("counting", stats.rank, (n_f * (entropy + tau * c)).exp2(), true),
        BoundCheck::upper("equipartition", stats.max_eigenvalue, (-n_f * (entropy - tau * c)).exp2(), true),
    ];
    Ok(ProjectorBoundReport {
        kind: ReportKind::Unconditional,
        n,
        alpha,
        preset,
        dim: d,
        alphabet_size: None,
        entropy,
        capture: stats.capture,
        rank: stats.rank,
        max_eigenvalue: stats.max_eigenvalue,
        cross_capture: None,
        word_typical: None,
        checks,
        empirical_k: empirical_k(stats.rank, stats.max_eigenvalue, entropy, n, d as f64 * alpha * n_f.sqrt()),
    })
}

/// Bounds for `Π_{V,α}(x^n)` and the cross-capture of `Π_{PV, α√a}`.
pub fn verify_conditional_bounds(
    channel: &CqChannel,
    word: &[usize],
    dist: &ProbabilityDistribution,
    alpha: f64,
    preset: Preset,
    delta: f64,
) -> Result<ProjectorBoundReport> {
    if dist.labels() != channel.alphabet() {
        return Err(Error::invalid("distribution alphabet does not match the channel"));
    }
    let n = word.len();
    let n_f = n as f64;
    let a = channel.alphabet_size();
    let d = channel.dim();
    let typical = typical_sequences(dist, n, delta)?;
    let word_typical = typical.contains(word);

    let proj = ConditionalTypicalProjector::spectral(channel, word, alpha, preset)?;
    let stats = proj.stats();
    let lens = proj.class_lengths();
    let taus = proj.class_thresholds();
    let spectra: Vec<Vec<f64>> = channel.states().iter().map(|s| s.eigenvalues()).collect();
    let letter_s = channel.letter_entropies();
    let cond_entropy = channel.conditional_entropy(dist)?;

    let mut chebyshev_deficit = 0.0;
    let mut exact_exponent_count = 0.0;
    let mut exact_exponent_equi = 0.0;
    let mut spread_term = 0.0;
    for x in 0..a {
        if lens[x] == 0 {
            continue;
        }
        let len = lens[x] as f64;
        let var: f64 = spectra[x].iter().filter(|&&l| l > ZERO_EIGENVALUE).map(|l| l * (1.0 - l)).sum();
        chebyshev_deficit += var / (len * taus[x] * taus[x]);
        let c = log_spread(&spectra[x]);
        exact_exponent_count += len * (letter_s[x] + taus[x] * c);
        exact_exponent_equi += len * (letter_s[x] - taus[x] * c);
        spread_term += len * taus[x] * c;
    }
    // |Σ n_a S_a − n S(V|P)| ≤ n (δ/|A|) Σ_a S_a on typical words
    let type_slack = n_f * typical.tolerance() * letter_s.iter().sum::<f64>();

    // cross capture of the average-state projector at α√a
    let avg = channel.output_state(dist)?;
    let avg_alpha = alpha * (a as f64).sqrt();
    let avg_proj = TypicalProjector::spectral(&avg, n, avg_alpha, preset)?;
    let cross = avg_proj.cross_capture(channel, word)?;
    let exact_type = letter_counts(word, a)
        .iter()
        .zip(dist.weights())
        .all(|(&c, &p)| (c as f64 - n_f * p).abs() < 1e-9);
    let cross_bound = cross_capture_chebyshev(channel, word, dist, &avg_proj);

    let stated_bound = 1.0 - (a * d) as f64 / (4.0 * n_f * alpha * alpha);
    let checks = vec![
        BoundCheck::lower("conditional_capture", stats.capture, stated_bound, false),
        BoundCheck::lower("capture_chebyshev", stats.capture, 1.0 - chebyshev_deficit, true),
        BoundCheck::upper("counting", stats.rank, exact_exponent_count.exp2(), true),
        BoundCheck::upper("equipartition", stats.max_eigenvalue, (-exact_exponent_equi).exp2(), true),
        BoundCheck::upper(
            "conditional_counting",
            stats.rank,
            (n_f * cond_entropy + type_slack + spread_term).exp2(),
            word_typical,
        ),
        BoundCheck::upper(
            "conditional_equipartition",
            stats.max_eigenvalue,
            (-n_f * cond_entropy + type_slack + spread_term).exp2(),
            word_typical,
        ),
        BoundCheck::lower("cross_capture", cross, stated_bound, preset == Preset::Fixed && exact_type),
        BoundCheck::lower("cross_capture_chebyshev", cross, cross_bound, true),
    ];
    Ok(ProjectorBoundReport {
        kind: ReportKind::Conditional,
        n,
        alpha,
        preset,
        dim: d,
        alphabet_size: Some(a),
        entropy: cond_entropy,
        capture: stats.capture,
        rank: stats.rank,
        max_eigenvalue: stats.max_eigenvalue,
        cross_capture: Some(cross),
        word_typical: Some(word_typical),
        checks,
        empirical_k: empirical_k(
            stats.rank,
            stats.max_eigenvalue,
            cond_entropy,
            n,
            (a * d) as f64 * alpha * n_f.sqrt(),
        ),
    })
}

/// Chebyshev lower bound on the cross capture: outcome frequencies have mean
/// within `μ_i` of `λ_i` and variance `Σ_k q(1-q)/n²`; zero-eigenvalue indices
/// contribute their total occurrence probability.
fn cross_capture_chebyshev(
    channel: &CqChannel,
    word: &[usize],
    dist: &ProbabilityDistribution,
    avg_proj: &TypicalProjector,
) -> f64 {
    let n_f = word.len() as f64;
    let q = basis_marginals(channel, avg_proj.basis());
    let counts = letter_counts(word, channel.alphabet_size());
    let tau = avg_proj.tau();
    let mut deficit = 0.0;
    for (i, &lambda) in avg_proj.spectrum().iter().enumerate() {
        if lambda <= ZERO_EIGENVALUE {
            deficit += word.iter().map(|&x| q[x][i]).sum::<f64>();
            continue;
        }
        let mean_offset: f64 = counts
            .iter()
            .zip(dist.weights())
            .enumerate()
            .map(|(x, (&c, &p))| (c as f64 / n_f - p) * q[x][i])
            .sum::<f64>()
            .abs();
        if tau <= mean_offset {
            return 0.0;
        }
        let var: f64 = word.iter().map(|&x| q[x][i] * (1.0 - q[x][i])).sum::<f64>() / (n_f * n_f);
        deficit += var / ((tau - mean_offset) * (tau - mean_offset));
    }
    (1.0 - deficit).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::families;
    use crate::linalg::{diagonal, max_abs_diff, tensor_all, trace};
    use crate::random::random_density;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn labels(k: usize) -> Vec<String> {
        (0..k).map(|i| i.to_string()).collect()
    }

    /// Brute force over all words.
    fn all_words(k: usize, n: usize) -> Vec<Vec<usize>> {
        let mut out = vec![vec![]];
        for _ in 0..n {
            out = out.into_iter().flat_map(|w| (0..k).map(move |a| [w.clone(), vec![a]].concat())).collect();
        }
        out
    }

    #[test]
    fn compositions_and_multinomials() {
        assert_eq!(compositions(2, 2), vec![vec![0, 2], vec![1, 1], vec![2, 0]]);
        assert_eq!(compositions(4, 3).len(), 15);
        assert_eq!(multinomial(&[2, 2]), 6.0);
        assert_eq!(multinomial(&[1, 1, 1]), 6.0);
        assert_eq!(multinomial(&[0, 5]), 1.0);
    }

    #[test]
    fn typical_set_examples() {
        let point = ProbabilityDistribution::point_mass(labels(2), 0);
        let t = typical_sequences(&point, 5, 0.1).unwrap();
        assert_eq!(t.enumerate(1 << 10).unwrap(), vec![vec![0; 5]]);

        let uni = ProbabilityDistribution::uniform(labels(2));
        let t = typical_sequences(&uni, 2, 1.0).unwrap();
        assert_eq!(t.enumerate(64).unwrap().len(), 4);

        let t = typical_sequences(&uni, 4, 0.2).unwrap();
        let oracle: Vec<Vec<usize>> =
            all_words(2, 4).into_iter().filter(|w| w.iter().filter(|&&a| a == 1).count() == 2).collect();
        assert_eq!(oracle.len(), 6);
        assert_eq!(t.enumerate(64).unwrap(), oracle);
        assert_eq!(t.size(), 6.0);
        assert!((t.probability() - 6.0 / 16.0).abs() < 1e-15);

        assert!(matches!(t.enumerate(8), Err(Error::ResourceLimit(_))));
        assert!(typical_sequences(&uni, 0, 0.1).is_err());
        assert!(typical_sequences(&uni, 3, 0.0).is_err());
    }

    #[test]
    fn projector_of_pure_state_is_rank_one() {
        let rho = DensityOperator::pure(&[c64::new(0.6, 0.0), c64::new(0.0, 0.8)]);
        for n in 1..=4 {
            let p = typical_projector(&rho, n, 0.3, Preset::Fixed, 4096).unwrap();
            let dense = p.to_dense(4096).unwrap();
            let rho_n = tensor_all(std::iter::repeat_n(rho.matrix(), n));
            assert!(max_abs_diff(&dense, &rho_n) < 1e-12);
            let s = p.stats();
            assert_eq!(s.rank, 1.0);
            assert!((s.capture - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn maximally_mixed_gives_full_projector() {
        let rho = DensityOperator::maximally_mixed(2);
        let p = typical_projector(&rho, 4, 0.5, Preset::Fixed, 4096).unwrap();
        assert_eq!(p.stats().rank, 16.0);
        assert!(max_abs_diff(&p.to_dense(4096).unwrap(), &crate::linalg::identity(16)) < 1e-14);
    }

    #[test]
    fn rank_matches_exhaustive_enumeration() {
        let rho = DensityOperator::diagonal(&[0.75, 0.25]);
        let p = typical_projector(&rho, 4, 0.25, Preset::Fixed, 4096).unwrap();
        // eigen-index 1 carries eigenvalue 1/4; keep words whose frequency of it is within 1/4 of 1/4
        let oracle = all_words(2, 4)
            .into_iter()
            .filter(|w| {
                let f = w.iter().filter(|&&j| j == 1).count() as f64 / 4.0;
                (f - 0.25).abs() <= 0.25 + 1e-12
            })
            .count();
        assert_eq!(oracle, 11);
        assert_eq!(p.stats().rank, oracle as f64);
        let dense = p.to_dense(4096).unwrap();
        assert!((trace(&dense).re - 11.0).abs() < 1e-12);
    }

    #[test]
    fn dense_and_combinatorial_routes_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for (d, n, alpha, preset) in [(2, 6, 0.2, Preset::Fixed), (3, 4, 0.3, Preset::Fixed), (2, 7, 0.8, Preset::SqrtScaled)] {
            let rho = random_density(&mut rng, d, d);
            let p = typical_projector(&rho, n, alpha, preset, 4096).unwrap();
            let dense = p.to_dense(4096).unwrap();
            let rho_n = tensor_all(std::iter::repeat_n(rho.matrix(), n));
            let s = p.stats();
            assert!((crate::linalg::trace_product(&rho_n, &dense).re - s.capture).abs() < 1e-9);
            assert!((trace(&dense).re - s.rank).abs() < 1e-9);
            assert!(max_abs_diff(&(&dense * &dense), &dense) < 1e-9);
            assert!(crate::linalg::hermitian_deviation(&dense) < 1e-9);
            assert!(max_abs_diff(&(&dense * &rho_n), &(&rho_n * &dense)) < 1e-10);
            let compressed = &(&dense * &rho_n) * &dense;
            let top = crate::linalg::eigenvalues(&compressed)[0];
            assert!((top - s.max_eigenvalue).abs() < 1e-9);
        }
    }

    #[test]
    fn conditional_projector_examples() {
        // pure outputs: rank one onto V^{⊗n}(x^n)
        let v = families::overlap_pair();
        let word = [0, 1, 1, 0];
        let p = conditional_typical_projector(&v, &word, 0.2, Preset::Fixed, 4096).unwrap();
        let out = crate::channel::product_state(&v, &word);
        assert!(max_abs_diff(&p.to_dense(4096).unwrap(), &out) < 1e-12);

        // constant word reduces to the unconditional projector
        let dep = families::depolarized(0.3).unwrap();
        let cp = conditional_typical_projector(&dep, &[1, 1, 1, 1], 0.2, Preset::Fixed, 4096).unwrap();
        let up = typical_projector(dep.state(1), 4, 0.2, Preset::Fixed, 4096).unwrap();
        assert!(max_abs_diff(&cp.to_dense(4096).unwrap(), &up.to_dense(4096).unwrap()) < 1e-12);

        // depolarized qubit, x = 0101, τ = 0.3: each class has length 2 and
        // spectrum (0.95, 0.05) in the basis (|x⟩, |1-x⟩); a class of length 2 admits
        // flip counts k with |k/2 - 0.05| <= 0.3, i.e. k = 0 only
        let dep = families::depolarized(0.1).unwrap();
        let cp = conditional_typical_projector(&dep, &[0, 1, 0, 1], 0.3, Preset::Fixed, 4096).unwrap();
        let per_class = (0..=2usize)
            .filter(|&k| ((k as f64) / 2.0 - 0.05).abs() <= 0.3 + 1e-12)
            .map(|k| if k == 1 { 2 } else { 1 })
            .sum::<usize>();
        assert_eq!(cp.stats().rank, (per_class * per_class) as f64);
        let dense = cp.to_dense(4096).unwrap();
        assert!((trace(&dense).re - cp.stats().rank).abs() < 1e-12);
        let out = crate::channel::product_state(&dep, &[0, 1, 0, 1]);
        assert!(max_abs_diff(&(&dense * &out), &(&out * &dense)) < 1e-12);
    }

    #[test]
    fn conditional_dense_capture_matches_product_of_classes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ch = CqChannel::indexed((0..3).map(|_| random_density(&mut rng, 2, 2)).collect()).unwrap();
        let word = [0, 2, 1, 2, 0, 2];
        for preset in [Preset::Fixed, Preset::SqrtScaled] {
            let p = conditional_typical_projector(&ch, &word, 0.4, preset, 4096).unwrap();
            let dense = p.to_dense(4096).unwrap();
            let out = crate::channel::product_state(&ch, &word);
            let s = p.stats();
            assert!((crate::linalg::trace_product(&out, &dense).re - s.capture).abs() < 1e-9);
            assert!(max_abs_diff(&(&dense * &out), &(&out * &dense)) < 1e-10);
        }
    }

    #[test]
    fn cross_capture_matches_dense_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let ch = CqChannel::indexed((0..2).map(|_| random_density(&mut rng, 2, 2)).collect()).unwrap();
        let p = ProbabilityDistribution::new(labels(2), vec![0.5, 0.5]).unwrap();
        let avg = ch.output_state(&p).unwrap();
        let word = [0, 1, 1, 0, 1, 0];
        let proj = typical_projector(&avg, 6, 0.25, Preset::Fixed, 4096).unwrap();
        let dense = proj.to_dense(4096).unwrap();
        let out = crate::channel::product_state(&ch, &word);
        let direct = crate::linalg::trace_product(&out, &dense).re;
        assert!((proj.cross_capture(&ch, &word).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn capture_bound_holds_for_example() {
        let rho = DensityOperator::diagonal(&[0.75, 0.25]);
        let r = verify_projector_bounds(&rho, 6, 1.0, Preset::Fixed).unwrap();
        assert!(r.check("capture").unwrap().holds);
        assert!(r.asserted_hold());
        let pure = DensityOperator::new(diagonal(&[1.0, 0.0])).unwrap();
        let r = verify_projector_bounds(&pure, 9, 0.1, Preset::Fixed).unwrap();
        assert_eq!(r.capture, 1.0);
    }

    #[test]
    fn equipartition_counting_random_qubits() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..30 {
            let rho = random_density(&mut rng, 2, 2);
            for n in [3, 8, 20, 40] {
                for preset in [Preset::Fixed, Preset::SqrtScaled] {
                    let r = verify_projector_bounds(&rho, n, 0.3, preset).unwrap();
                    assert!(r.asserted_hold(), "{r:?}");
                    assert!(r.empirical_k.is_finite());
                }
            }
        }
    }

    #[test]
    fn conditional_report_on_typical_words() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ch = CqChannel::indexed((0..2).map(|_| random_density(&mut rng, 2, 2)).collect()).unwrap();
        let p = ch.uniform();
        let word = [0, 1, 0, 1, 1, 0, 0, 1];
        for preset in [Preset::Fixed, Preset::SqrtScaled] {
            let r = verify_conditional_bounds(&ch, &word, &p, 1.0, preset, 0.5).unwrap();
            assert_eq!(r.word_typical, Some(true));
            assert!(r.asserted_hold(), "{:#?}", r.checks);
        }
        let r = verify_conditional_bounds(&ch, &word, &p, 1.0, Preset::Fixed, 0.5).unwrap();
        assert!(r.check("cross_capture").unwrap().asserted);
    }

    #[test]
    fn preset_parsing() {
        assert_eq!("fixed".parse::<Preset>().unwrap(), Preset::Fixed);
        assert_eq!("sqrt".parse::<Preset>().unwrap(), Preset::SqrtScaled);
        assert!("other".parse::<Preset>().is_err());
        assert_eq!(Preset::SqrtScaled.threshold(1.0, 4), 0.5);
    }
}
