//! Classical-quantum channels: single receiver, two-receiver broadcast, and
//! two-sender multiple access, plus the JSON channel file format.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    self, add_scaled, c64, from_literal, partial_trace, spectral_entropy, tensor_all, to_literal, zeros, CMat,
    DensityOperator, MatrixLiteral, ProbabilityDistribution, Subsystem,
};

/// Finite alphabet mapped to density operators of a common dimension.
#[derive(Clone, Debug)]
pub struct CqChannel {
    alphabet: Vec<String>,
    dim: usize,
    states: Vec<DensityOperator>,
    entropies: Vec<f64>,
}

/// `S(PV)`, `S(V|P)` and their difference `χ(P; V)`, all in bits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiReport {
    pub chi: f64,
    pub output_entropy: f64,
    pub conditional_entropy: f64,
}

fn check_labels(alphabet: &[String]) -> Result<()> {
    if alphabet.is_empty() {
        return Err(Error::invalid("empty alphabet"));
    }
    let mut seen = std::collections::BTreeSet::new();
    for l in alphabet {
        if !seen.insert(l) {
            return Err(Error::invalid(format!("duplicate label {l:?}")));
        }
    }
    Ok(())
}

impl CqChannel {
    pub fn new(alphabet: Vec<String>, states: Vec<DensityOperator>) -> Result<Self> {
        check_labels(&alphabet)?;
        if alphabet.len() != states.len() {
            return Err(Error::invalid(format!("{} labels but {} states", alphabet.len(), states.len())));
        }
        let dim = states[0].dim();
        if let Some((l, s)) = alphabet.iter().zip(&states).find(|(_, s)| s.dim() != dim) {
            return Err(Error::invalid(format!("state {l:?} has dimension {}, expected {dim}", s.dim())));
        }
        let entropies = states.iter().map(linalg::von_neumann_entropy).collect();
        Ok(CqChannel { alphabet, dim, states, entropies })
    }

    /// Labels `"0"`, `"1"`, ….
    pub fn indexed(states: Vec<DensityOperator>) -> Result<Self> {
        let alphabet = (0..states.len()).map(|i| i.to_string()).collect();
        Self::new(alphabet, states)
    }

    pub fn alphabet(&self) -> &[String] {
        &self.alphabet
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn state(&self, letter: usize) -> &DensityOperator {
        &self.states[letter]
    }

    pub fn states(&self) -> &[DensityOperator] {
        &self.states
    }

    /// `S(V(a))` for every letter.
    pub fn letter_entropies(&self) -> &[f64] {
        &self.entropies
    }

    pub fn letter_index(&self, label: &str) -> Option<usize> {
        self.alphabet.iter().position(|l| l == label)
    }

    pub fn uniform(&self) -> ProbabilityDistribution {
        ProbabilityDistribution::uniform(self.alphabet.clone())
    }

    fn check_distribution(&self, p: &ProbabilityDistribution) -> Result<()> {
        if p.labels() != self.alphabet.as_slice() {
            return Err(Error::invalid(format!(
                "distribution alphabet {:?} does not match channel alphabet {:?}",
                p.labels(),
                self.alphabet
            )));
        }
        Ok(())
    }

    /// `Σ_x w(x) σ_x` for raw weights aligned with the alphabet.
    pub fn average_state(&self, weights: &[f64]) -> CMat {
        assert_eq!(weights.len(), self.states.len());
        let mut acc = zeros(self.dim);
        for (s, &w) in self.states.iter().zip(weights) {
            if w != 0.0 {
                add_scaled(&mut acc, s.matrix(), w);
            }
        }
        acc
    }

    pub fn output_state(&self, p: &ProbabilityDistribution) -> Result<DensityOperator> {
        self.check_distribution(p)?;
        Ok(DensityOperator::from_trusted(self.average_state(p.weights())))
    }

    pub fn conditional_entropy(&self, p: &ProbabilityDistribution) -> Result<f64> {
        self.check_distribution(p)?;
        Ok(self.conditional_entropy_weights(p.weights()))
    }

    pub fn conditional_entropy_weights(&self, weights: &[f64]) -> f64 {
        weights.iter().zip(&self.entropies).map(|(w, s)| w * s).sum()
    }

    pub fn holevo_chi(&self, p: &ProbabilityDistribution) -> Result<f64> {
        Ok(self.holevo_report(p)?.chi)
    }

    pub fn holevo_report(&self, p: &ProbabilityDistribution) -> Result<ChiReport> {
        self.check_distribution(p)?;
        Ok(self.chi_report_weights(p.weights()))
    }

    pub fn chi_report_weights(&self, weights: &[f64]) -> ChiReport {
        let output_entropy = spectral_entropy(&linalg::eigenvalues(&self.average_state(weights)));
        let conditional_entropy = self.conditional_entropy_weights(weights);
        ChiReport { chi: (output_entropy - conditional_entropy).max(0.0), output_entropy, conditional_entropy }
    }

    /// `χ` for raw weights; the hot path of every distribution search.
    pub fn chi_weights(&self, weights: &[f64]) -> f64 {
        self.chi_report_weights(weights).chi
    }

    /// The `n`-fold memoryless extension over words in `A^n`.
    pub fn product_extension(&self, n: usize, dim_cap: usize) -> Result<ProductExtension<'_>> {
        if n == 0 {
            return Err(Error::invalid("block length must be positive"));
        }
        let total = checked_pow(self.dim, n)
            .filter(|&t| t <= dim_cap)
            .ok_or_else(|| Error::resource(format!("output dimension {}^{n} exceeds the cap {dim_cap}", self.dim)))?;
        Ok(ProductExtension { base: self, n, total_dim: total })
    }

    pub fn to_file(&self) -> ChannelFile {
        ChannelFile {
            kind: ChannelKind::Cq,
            alphabet: Some(self.alphabet.clone()),
            alphabets: None,
            dims: Dims::Single(self.dim),
            states: self
                .alphabet
                .iter()
                .zip(&self.states)
                .map(|(l, s)| (l.clone(), to_literal(s.matrix())))
                .collect(),
        }
    }
}

pub(crate) fn checked_pow(base: usize, exp: usize) -> Option<usize> {
    (0..exp).try_fold(1usize, |acc, _| acc.checked_mul(base))
}

/// Lazily materialized `V^{⊗n}`.
#[derive(Clone, Copy, Debug)]
pub struct ProductExtension<'a> {
    base: &'a CqChannel,
    n: usize,
    total_dim: usize,
}

impl<'a> ProductExtension<'a> {
    pub fn block_length(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.total_dim
    }

    pub fn base(&self) -> &'a CqChannel {
        self.base
    }

    /// `σ_{a_1} ⊗ … ⊗ σ_{a_n}` for a word of letter indices.
    pub fn state(&self, word: &[usize]) -> Result<DensityOperator> {
        if word.len() != self.n {
            return Err(Error::invalid(format!("word has length {}, expected {}", word.len(), self.n)));
        }
        if let Some(&a) = word.iter().find(|&&a| a >= self.base.alphabet_size()) {
            return Err(Error::invalid(format!("letter index {a} outside the alphabet")));
        }
        Ok(DensityOperator::from_trusted(product_state(self.base, word)))
    }

    /// Materializes every word as a channel over `A^n` (labels joined with commas,
    /// lexicographic order matching [`ProbabilityDistribution::power`]).
    pub fn to_channel(&self, max_words: usize) -> Result<CqChannel> {
        let a = self.base.alphabet_size();
        let count = checked_pow(a, self.n)
            .filter(|&c| c <= max_words)
            .ok_or_else(|| Error::resource(format!("{a}^{} input words exceed the cap {max_words}", self.n)))?;
        let mut labels = Vec::with_capacity(count);
        let mut states = Vec::with_capacity(count);
        for idx in 0..count {
            let word = word_from_index(idx, a, self.n);
            labels.push(word.iter().map(|&l| self.base.alphabet[l].as_str()).collect::<Vec<_>>().join(","));
            states.push(DensityOperator::from_trusted(product_state(self.base, &word)));
        }
        CqChannel::new(labels, states)
    }
}

/// Big-endian base-`radix` digits of `index`, `len` of them.
pub(crate) fn word_from_index(mut index: usize, radix: usize, len: usize) -> Vec<usize> {
    let mut w = vec![0; len];
    for k in (0..len).rev() {
        w[k] = index % radix;
        index /= radix;
    }
    w
}

pub(crate) fn product_state(ch: &CqChannel, word: &[usize]) -> CMat {
    tensor_all(word.iter().map(|&a| ch.state(a).matrix()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Receiver {
    One,
    Two,
}

/// Single sender, two receivers: joint outputs on `C^d1 ⊗ C^d2`.
#[derive(Clone, Debug)]
pub struct BroadcastChannel {
    alphabet: Vec<String>,
    dims: (usize, usize),
    joint: Vec<DensityOperator>,
}

impl BroadcastChannel {
    pub fn new(alphabet: Vec<String>, dims: (usize, usize), joint: Vec<DensityOperator>) -> Result<Self> {
        check_labels(&alphabet)?;
        if alphabet.len() != joint.len() {
            return Err(Error::invalid(format!("{} labels but {} joint states", alphabet.len(), joint.len())));
        }
        if dims.0 == 0 || dims.1 == 0 {
            return Err(Error::invalid("receiver dimensions must be positive"));
        }
        if let Some((l, s)) = alphabet.iter().zip(&joint).find(|(_, s)| s.dim() != dims.0 * dims.1) {
            return Err(Error::invalid(format!(
                "joint state {l:?} has dimension {}, expected {}x{}",
                s.dim(),
                dims.0,
                dims.1
            )));
        }
        Ok(BroadcastChannel { alphabet, dims, joint })
    }

    /// Joint outputs `W1(x) ⊗ W2(x)` from two channels on the same alphabet.
    pub fn from_product(w1: &CqChannel, w2: &CqChannel) -> Result<Self> {
        if w1.alphabet() != w2.alphabet() {
            return Err(Error::invalid("product broadcast needs both marginals on one alphabet"));
        }
        let joint = w1.states().iter().zip(w2.states()).map(|(a, b)| a.tensor(b)).collect();
        Self::new(w1.alphabet().to_vec(), (w1.dim(), w2.dim()), joint)
    }

    pub fn alphabet(&self) -> &[String] {
        &self.alphabet
    }

    pub fn dims(&self) -> (usize, usize) {
        self.dims
    }

    pub fn joint_state(&self, letter: usize) -> &DensityOperator {
        &self.joint[letter]
    }

    pub fn joint_channel(&self) -> CqChannel {
        CqChannel::new(self.alphabet.clone(), self.joint.clone()).expect("validated on construction")
    }

    /// `W1 = tr_2 N` or `W2 = tr_1 N`.
    pub fn marginal(&self, receiver: Receiver) -> CqChannel {
        let keep = match receiver {
            Receiver::One => Subsystem::First,
            Receiver::Two => Subsystem::Second,
        };
        let states = self
            .joint
            .iter()
            .map(|s| {
                DensityOperator::from_trusted(partial_trace(s.matrix(), self.dims, keep).expect("dims validated"))
            })
            .collect();
        CqChannel::new(self.alphabet.clone(), states).expect("partial traces of states are states")
    }

    /// Same channel with the two receivers exchanged.
    pub fn swapped(&self) -> BroadcastChannel {
        let (d1, d2) = self.dims;
        let joint = self
            .joint
            .iter()
            .map(|s| {
                let m = s.matrix();
                DensityOperator::from_trusted(faer::Mat::from_fn(d1 * d2, d1 * d2, |i, j| {
                    let (i2, i1) = (i / d1, i % d1);
                    let (j2, j1) = (j / d1, j % d1);
                    m[(i1 * d2 + i2, j1 * d2 + j2)]
                }))
            })
            .collect();
        BroadcastChannel { alphabet: self.alphabet.clone(), dims: (d2, d1), joint }
    }

    pub fn to_file(&self) -> ChannelFile {
        ChannelFile {
            kind: ChannelKind::Broadcast,
            alphabet: Some(self.alphabet.clone()),
            alphabets: None,
            dims: Dims::Pair { y1: self.dims.0, y2: self.dims.1 },
            states: self
                .alphabet
                .iter()
                .zip(&self.joint)
                .map(|(l, s)| (l.clone(), to_literal(s.matrix())))
                .collect(),
        }
    }
}

/// Two senders with alphabets `Y1`, `Y2`; states stored row-major in `(y1, y2)`.
#[derive(Clone, Debug)]
pub struct MacChannel {
    alphabets: (Vec<String>, Vec<String>),
    dim: usize,
    states: Vec<DensityOperator>,
}

impl MacChannel {
    pub fn new(alphabets: (Vec<String>, Vec<String>), states: Vec<DensityOperator>) -> Result<Self> {
        check_labels(&alphabets.0)?;
        check_labels(&alphabets.1)?;
        let expected = alphabets.0.len() * alphabets.1.len();
        if states.len() != expected {
            return Err(Error::invalid(format!("MAC table has {} states, expected {expected}", states.len())));
        }
        let dim = states[0].dim();
        if states.iter().any(|s| s.dim() != dim) {
            return Err(Error::invalid("MAC states differ in dimension"));
        }
        Ok(MacChannel { alphabets, dim, states })
    }

    pub fn alphabets(&self) -> (&[String], &[String]) {
        (&self.alphabets.0, &self.alphabets.1)
    }

    pub fn sizes(&self) -> (usize, usize) {
        (self.alphabets.0.len(), self.alphabets.1.len())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn state(&self, y1: usize, y2: usize) -> &DensityOperator {
        &self.states[y1 * self.alphabets.1.len() + y2]
    }

    /// `y1 ↦ N(y1, y2)` for a fixed second input.
    pub fn with_second_fixed(&self, y2: usize) -> CqChannel {
        let states = (0..self.sizes().0).map(|y1| self.state(y1, y2).clone()).collect();
        CqChannel::new(self.alphabets.0.clone(), states).expect("validated on construction")
    }

    /// `y2 ↦ N(y1, y2)` for a fixed first input.
    pub fn with_first_fixed(&self, y1: usize) -> CqChannel {
        let states = (0..self.sizes().1).map(|y2| self.state(y1, y2).clone()).collect();
        CqChannel::new(self.alphabets.1.clone(), states).expect("validated on construction")
    }

    /// The MAC viewed as one channel over pairs, labels `"y1,y2"`.
    pub fn joint_channel(&self) -> CqChannel {
        let mut labels = Vec::with_capacity(self.states.len());
        for a in &self.alphabets.0 {
            for b in &self.alphabets.1 {
                labels.push(format!("{a},{b}"));
            }
        }
        CqChannel::new(labels, self.states.clone()).expect("validated on construction")
    }

    /// `y1 ↦ Σ_{y2} q2(y2) N(y1, y2)`.
    pub fn averaged_over_second(&self, q2: &[f64]) -> CqChannel {
        let states = (0..self.sizes().0)
            .map(|y1| {
                let mut acc = zeros(self.dim);
                for (y2, &w) in q2.iter().enumerate() {
                    add_scaled(&mut acc, self.state(y1, y2).matrix(), w);
                }
                DensityOperator::from_trusted(acc)
            })
            .collect();
        CqChannel::new(self.alphabets.0.clone(), states).expect("validated on construction")
    }

    /// `y2 ↦ Σ_{y1} q1(y1) N(y1, y2)`.
    pub fn averaged_over_first(&self, q1: &[f64]) -> CqChannel {
        let states = (0..self.sizes().1)
            .map(|y2| {
                let mut acc = zeros(self.dim);
                for (y1, &w) in q1.iter().enumerate() {
                    add_scaled(&mut acc, self.state(y1, y2).matrix(), w);
                }
                DensityOperator::from_trusted(acc)
            })
            .collect();
        CqChannel::new(self.alphabets.1.clone(), states).expect("validated on construction")
    }

    pub fn to_file(&self) -> ChannelFile {
        let mut states = BTreeMap::new();
        for (i, a) in self.alphabets.0.iter().enumerate() {
            for (j, b) in self.alphabets.1.iter().enumerate() {
                states.insert(format!("{a},{b}"), to_literal(self.state(i, j).matrix()));
            }
        }
        ChannelFile {
            kind: ChannelKind::Mac,
            alphabet: None,
            alphabets: Some(vec![self.alphabets.0.clone(), self.alphabets.1.clone()]),
            dims: Dims::Single(self.dim),
            states,
        }
    }
}

#[derive(Clone, Debug)]
pub enum AnyChannel {
    Cq(CqChannel),
    Broadcast(BroadcastChannel),
    Mac(MacChannel),
}

impl AnyChannel {
    pub fn kind(&self) -> ChannelKind {
        match self {
            AnyChannel::Cq(_) => ChannelKind::Cq,
            AnyChannel::Broadcast(_) => ChannelKind::Broadcast,
            AnyChannel::Mac(_) => ChannelKind::Mac,
        }
    }

    pub fn to_file(&self) -> ChannelFile {
        match self {
            AnyChannel::Cq(c) => c.to_file(),
            AnyChannel::Broadcast(c) => c.to_file(),
            AnyChannel::Mac(c) => c.to_file(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("channel files always serialize")
    }

    pub fn into_cq(self) -> Result<CqChannel> {
        match self {
            AnyChannel::Cq(c) => Ok(c),
            other => Err(Error::invalid(format!("expected a cq channel, found {:?}", other.kind()))),
        }
    }

    pub fn into_broadcast(self) -> Result<BroadcastChannel> {
        match self {
            AnyChannel::Broadcast(c) => Ok(c),
            other => Err(Error::invalid(format!("expected a broadcast channel, found {:?}", other.kind()))),
        }
    }

    pub fn into_mac(self) -> Result<MacChannel> {
        match self {
            AnyChannel::Mac(c) => Ok(c),
            other => Err(Error::invalid(format!("expected a mac channel, found {:?}", other.kind()))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelKind {
    Cq,
    Broadcast,
    Mac,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Dims {
    Single(usize),
    Pair { y1: usize, y2: usize },
}

/// On-disk channel description.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelFile {
    pub kind: ChannelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphabet: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphabets: Option<Vec<Vec<String>>>,
    pub dims: Dims,
    pub states: BTreeMap<String, MatrixLiteral>,
}

fn labelled_state(states: &BTreeMap<String, MatrixLiteral>, label: &str, dim: usize) -> Result<DensityOperator> {
    let lit = states.get(label).ok_or_else(|| Error::invalid(format!("state {label:?}: missing")))?;
    let m = from_literal(lit).map_err(|e| Error::invalid(format!("state {label:?}: {e}")))?;
    if m.nrows() != dim {
        return Err(Error::invalid(format!("state {label:?}: dimension {} but dims say {dim}", m.nrows())));
    }
    DensityOperator::new(m).map_err(|e| Error::invalid(format!("state {label:?}: {e}")))
}

fn check_no_extra_states(states: &BTreeMap<String, MatrixLiteral>, labels: &[String]) -> Result<()> {
    if let Some(extra) = states.keys().find(|k| !labels.contains(k)) {
        return Err(Error::invalid(format!("state {extra:?}: label not in the alphabet")));
    }
    Ok(())
}

impl ChannelFile {
    pub fn into_channel(self) -> Result<AnyChannel> {
        match self.kind {
            ChannelKind::Cq => {
                let alphabet = self.alphabet.ok_or_else(|| Error::invalid("cq channel needs \"alphabet\""))?;
                let Dims::Single(dim) = self.dims else {
                    return Err(Error::invalid("cq channel needs an integer \"dims\""));
                };
                check_no_extra_states(&self.states, &alphabet)?;
                let states =
                    alphabet.iter().map(|l| labelled_state(&self.states, l, dim)).collect::<Result<Vec<_>>>()?;
                Ok(AnyChannel::Cq(CqChannel::new(alphabet, states)?))
            }
            ChannelKind::Broadcast => {
                let alphabet =
                    self.alphabet.ok_or_else(|| Error::invalid("broadcast channel needs \"alphabet\""))?;
                let Dims::Pair { y1, y2 } = self.dims else {
                    return Err(Error::invalid("broadcast channel needs \"dims\": {\"y1\": d1, \"y2\": d2}"));
                };
                check_no_extra_states(&self.states, &alphabet)?;
                let states = alphabet
                    .iter()
                    .map(|l| labelled_state(&self.states, l, y1 * y2))
                    .collect::<Result<Vec<_>>>()?;
                Ok(AnyChannel::Broadcast(BroadcastChannel::new(alphabet, (y1, y2), states)?))
            }
            ChannelKind::Mac => {
                let mut alphabets =
                    self.alphabets.ok_or_else(|| Error::invalid("mac channel needs \"alphabets\""))?;
                if alphabets.len() != 2 {
                    return Err(Error::invalid("mac channel needs exactly two alphabets"));
                }
                let a2 = alphabets.pop().unwrap();
                let a1 = alphabets.pop().unwrap();
                let Dims::Single(dim) = self.dims else {
                    return Err(Error::invalid("mac channel needs an integer \"dims\""));
                };
                let keys: Vec<String> =
                    a1.iter().flat_map(|a| a2.iter().map(move |b| format!("{a},{b}"))).collect();
                check_no_extra_states(&self.states, &keys)?;
                let states = keys.iter().map(|k| labelled_state(&self.states, k, dim)).collect::<Result<Vec<_>>>()?;
                Ok(AnyChannel::Mac(MacChannel::new((a1, a2), states)?))
            }
        }
    }
}

pub fn parse_channel(json: &str) -> Result<AnyChannel> {
    let file: ChannelFile = serde_json::from_str(json).map_err(|e| Error::invalid(format!("channel file: {e}")))?;
    file.into_channel()
}

pub fn load_channel(path: impl AsRef<Path>) -> Result<AnyChannel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::invalid(format!("cannot read {}: {e}", path.display())))?;
    parse_channel(&text)
}

/// Canonical channel families used by tests and the `generate` subcommand.
pub mod families {
    use super::*;

    fn ket(dim: usize, i: usize) -> Vec<c64> {
        (0..dim).map(|k| c64::new(if k == i { 1.0 } else { 0.0 }, 0.0)).collect()
    }

    /// `x ↦ |x⟩⟨x|` on `C^k`.
    pub fn orthogonal(k: usize) -> CqChannel {
        CqChannel::indexed((0..k).map(|i| DensityOperator::pure(&ket(k, i))).collect()).unwrap()
    }

    /// `{|0⟩⟨0|, |+⟩⟨+|}`.
    pub fn overlap_pair() -> CqChannel {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        CqChannel::indexed(vec![
            DensityOperator::pure(&ket(2, 0)),
            DensityOperator::pure(&[c64::new(s, 0.0), c64::new(s, 0.0)]),
        ])
        .unwrap()
    }

    /// `x ↦ (1-p)|x⟩⟨x| + p id/2` on a qubit.
    pub fn depolarized(p: f64) -> Result<CqChannel> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid(format!("depolarizing parameter {p} outside [0, 1]")));
        }
        let states = (0..2)
            .map(|x| {
                let mut probs = [p / 2.0; 2];
                probs[x] += 1.0 - p;
                DensityOperator::diagonal(&probs)
            })
            .collect();
        CqChannel::indexed(states)
    }

    /// `k` inputs, every output `|0⟩⟨0|`.
    pub fn constant(k: usize) -> CqChannel {
        CqChannel::indexed((0..k).map(|_| DensityOperator::pure(&ket(2, 0))).collect()).unwrap()
    }

    /// Binary inputs, output `|y1 + y2⟩⟨y1 + y2|` on `C^3`.
    pub fn adder_mac() -> MacChannel {
        let labels = vec!["0".to_string(), "1".to_string()];
        let states = (0..2)
            .flat_map(|a| (0..2).map(move |b| DensityOperator::pure(&ket(3, a + b))))
            .collect();
        MacChannel::new((labels.clone(), labels), states).unwrap()
    }

    /// `N(y1, y2) = V1(y1) ⊗ V2(y2)`.
    pub fn product_mac(v1: &CqChannel, v2: &CqChannel) -> MacChannel {
        let states = v1.states().iter().flat_map(|a| v2.states().iter().map(move |b| a.tensor(b))).collect();
        MacChannel::new((v1.alphabet().to_vec(), v2.alphabet().to_vec()), states).unwrap()
    }

    /// Every input yields the same output on both receivers.
    pub fn constant_mac(dim: usize) -> MacChannel {
        let labels = vec!["0".to_string(), "1".to_string()];
        let states = (0..4).map(|_| DensityOperator::maximally_mixed(dim)).collect();
        MacChannel::new((labels.clone(), labels), states).unwrap()
    }

    /// Parses `orthogonal`, `orthogonal:k`, `overlap-pair`, `depolarized:p`, `constant`.
    pub fn by_name(spec: &str) -> Result<CqChannel> {
        let (name, arg) = match spec.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (spec, None),
        };
        let num = |a: Option<&str>, default: f64| -> Result<f64> {
            a.map(|s| s.parse::<f64>().map_err(|_| Error::invalid(format!("bad parameter in {spec:?}"))))
                .unwrap_or(Ok(default))
        };
        match name {
            "orthogonal" | "noiseless" => Ok(orthogonal(num(arg, 2.0)? as usize)),
            "overlap-pair" => Ok(overlap_pair()),
            "depolarized" => depolarized(num(arg, 0.1)?),
            "constant" => Ok(constant(num(arg, 2.0)? as usize)),
            _ => Err(Error::invalid(format!("unknown channel family {spec:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::families::*;
    use super::*;
    use crate::linalg::{diagonal, max_abs_diff, projector_onto, tensor_product};
    use crate::random::random_density;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn h2(p: f64) -> f64 {
        -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
    }

    #[test]
    fn output_state_examples() {
        let ch = orthogonal(2);
        let avg = ch.output_state(&ch.uniform()).unwrap();
        assert!(max_abs_diff(avg.matrix(), &diagonal(&[0.5, 0.5])) < 1e-15);

        let point = ProbabilityDistribution::point_mass(ch.alphabet().to_vec(), 0);
        assert_eq!(max_abs_diff(ch.output_state(&point).unwrap().matrix(), ch.state(0).matrix()), 0.0);

        let ov = overlap_pair();
        let avg = ov.output_state(&ov.uniform()).unwrap();
        // direct average of [[1,0],[0,0]] and [[1/2,1/2],[1/2,1/2]]
        let oracle = faer::Mat::from_fn(2, 2, |i, j| {
            let a = if i == 0 && j == 0 { 1.0 } else { 0.0 };
            c64::new((a + 0.5) / 2.0, 0.0)
        });
        assert!(max_abs_diff(avg.matrix(), &oracle) < 1e-15);
        assert!((avg.matrix()[(0, 0)].re - 0.75).abs() < 1e-15);

        let wrong = ProbabilityDistribution::uniform(vec!["a".into(), "b".into()]);
        assert!(matches!(ch.output_state(&wrong), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn conditional_entropy_examples() {
        let ch = overlap_pair();
        assert!(ch.conditional_entropy(&ch.uniform()).unwrap().abs() < 1e-12);
        let mixed = CqChannel::indexed(vec![DensityOperator::maximally_mixed(2); 3]).unwrap();
        let p = ProbabilityDistribution::new(mixed.alphabet().to_vec(), vec![0.2, 0.3, 0.5]).unwrap();
        assert!((mixed.conditional_entropy(&p).unwrap() - 1.0).abs() < 1e-14);
        let dep = depolarized(0.2).unwrap();
        assert!((dep.conditional_entropy(&dep.uniform()).unwrap() - h2(0.1)).abs() < 1e-12);
    }

    #[test]
    fn holevo_examples() {
        let ch = orthogonal(2);
        assert!((ch.holevo_chi(&ch.uniform()).unwrap() - 1.0).abs() < 1e-12);
        let same = constant(2);
        let p = ProbabilityDistribution::new(same.alphabet().to_vec(), vec![0.3, 0.7]).unwrap();
        assert!(same.holevo_chi(&p).unwrap().abs() < 1e-12);
        // eigenvalues of [[3/4,1/4],[1/4,1/4]] are (1 ± 1/√2)/2
        let ov = overlap_pair();
        let oracle = h2((1.0 + std::f64::consts::FRAC_1_SQRT_2) / 2.0);
        assert!((ov.holevo_chi(&ov.uniform()).unwrap() - oracle).abs() < 1e-9);
    }

    #[test]
    fn marginals() {
        let w1 = overlap_pair();
        let w2 = depolarized(0.3).unwrap();
        let bc = BroadcastChannel::from_product(&w1, &w2).unwrap();
        let m1 = bc.marginal(Receiver::One);
        let m2 = bc.marginal(Receiver::Two);
        for x in 0..2 {
            assert!(max_abs_diff(m1.state(x).matrix(), w1.state(x).matrix()) < 1e-14);
            assert!(max_abs_diff(m2.state(x).matrix(), w2.state(x).matrix()) < 1e-14);
            assert!((linalg::trace(m2.state(x).matrix()).re - 1.0).abs() < 1e-14);
        }
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let zero = c64::new(0.0, 0.0);
        let bell = DensityOperator::new(projector_onto(&[c64::new(s, 0.0), zero, zero, c64::new(s, 0.0)])).unwrap();
        let bc = BroadcastChannel::new(vec!["0".into()], (2, 2), vec![bell]).unwrap();
        for r in [Receiver::One, Receiver::Two] {
            assert!(max_abs_diff(bc.marginal(r).state(0).matrix(), &diagonal(&[0.5, 0.5])) < 1e-15);
        }
    }

    #[test]
    fn swapped_broadcast_exchanges_marginals() {
        let bc = BroadcastChannel::from_product(&overlap_pair(), &depolarized(0.3).unwrap()).unwrap();
        let sw = bc.swapped();
        let m = sw.marginal(Receiver::One);
        let orig = bc.marginal(Receiver::Two);
        for x in 0..2 {
            assert!(max_abs_diff(m.state(x).matrix(), orig.state(x).matrix()) < 1e-15);
        }
    }

    #[test]
    fn output_state_commutes_with_marginal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let joint: Vec<_> = (0..3).map(|_| random_density(&mut rng, 6, 3)).collect();
        let bc = BroadcastChannel::new(vec!["a".into(), "b".into(), "c".into()], (2, 3), joint).unwrap();
        let p = ProbabilityDistribution::new(bc.alphabet().to_vec(), vec![0.2, 0.5, 0.3]).unwrap();
        let joint_avg = bc.joint_channel().output_state(&p).unwrap();
        for (r, keep) in [(Receiver::One, Subsystem::First), (Receiver::Two, Subsystem::Second)] {
            let lhs = partial_trace(joint_avg.matrix(), (2, 3), keep).unwrap();
            let rhs = bc.marginal(r).output_state(&p).unwrap();
            assert!(max_abs_diff(&lhs, rhs.matrix()) <= 1e-10);
        }
    }

    #[test]
    fn product_extension_examples() {
        let ch = overlap_pair();
        let one = ch.product_extension(1, 4096).unwrap().to_channel(64).unwrap();
        for x in 0..2 {
            assert_eq!(max_abs_diff(one.state(x).matrix(), ch.state(x).matrix()), 0.0);
        }
        let ext = ch.product_extension(3, 4096).unwrap();
        let s = ext.state(&[0, 1, 0]).unwrap();
        let oracle = tensor_product(&tensor_product(ch.state(0).matrix(), ch.state(1).matrix()), ch.state(0).matrix());
        assert_eq!(max_abs_diff(s.matrix(), &oracle), 0.0);
        assert!(matches!(ch.product_extension(13, 4096), Err(Error::ResourceLimit(_))));
        assert!(ext.state(&[0, 1]).is_err());
    }

    #[test]
    fn chi_is_additive_on_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let ch = CqChannel::indexed((0..2).map(|_| random_density(&mut rng, 2, 2)).collect()).unwrap();
        let p = ProbabilityDistribution::new(ch.alphabet().to_vec(), vec![0.35, 0.65]).unwrap();
        let base = ch.holevo_chi(&p).unwrap();
        let ext = ch.product_extension(2, 4096).unwrap().to_channel(64).unwrap();
        assert!((ext.holevo_chi(&p.power(2)).unwrap() - 2.0 * base).abs() <= 1e-9);
    }

    #[test]
    fn file_roundtrip_and_validation() {
        let json = orthogonal(2).to_file();
        let text = serde_json::to_string(&json).unwrap();
        let back = parse_channel(&text).unwrap().into_cq().unwrap();
        assert_eq!(back.dim(), 2);
        assert_eq!(back.alphabet(), &["0", "1"]);

        let bad = r#"{"kind":"cq","alphabet":["0","1"],"dims":2,
            "states":{"0":[[[1,0],[0,0]],[[0,0],[0,0]]],"1":[[[0.9,0],[0,0]],[[0,0],[0,0]]]}}"#;
        match parse_channel(bad) {
            Err(Error::InvalidInput(msg)) => assert!(msg.contains("\"1\""), "{msg}"),
            other => panic!("expected invalid input, got {other:?}"),
        }
        let missing = r#"{"kind":"cq","alphabet":["0","1"],"dims":2,"states":{"0":[[[1,0],[0,0]],[[0,0],[0,0]]]}}"#;
        assert!(matches!(parse_channel(missing), Err(Error::InvalidInput(m)) if m.contains("\"1\"")));

        let bc = BroadcastChannel::from_product(&orthogonal(2), &orthogonal(2)).unwrap();
        let text = serde_json::to_string(&bc.to_file()).unwrap();
        let back = parse_channel(&text).unwrap().into_broadcast().unwrap();
        assert_eq!(back.dims(), (2, 2));

        let mac = adder_mac();
        let text = serde_json::to_string(&mac.to_file()).unwrap();
        let back = parse_channel(&text).unwrap().into_mac().unwrap();
        assert_eq!(back.sizes(), (2, 2));
        assert!(max_abs_diff(back.state(1, 1).matrix(), mac.state(1, 1).matrix()) == 0.0);
    }
}
