//! Numerical witnesses for three operator inequalities: measurement on close
//! states, the tender (gentle) operator bound, and the Hayashi–Nagaoka
//! inequality for square-root normalized operators.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    eigenvalues, eigh, identity, pinv_sqrt, scaled, trace, trace_product, CMat, DensityOperator, PositiveOperator,
    DEFAULT_PINV_REL_TOL, PSD_TOL,
};
use crate::random::{random_density, random_psd, random_sub_unital, rng_for};
use rand::Rng;

/// Slack below which a check is reported as failing.
pub const SLACK_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaCheckResult {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub holds: bool,
    pub instance: String,
}

impl LemmaCheckResult {
    fn new(lhs: f64, rhs: f64, slack: f64, instance: String) -> Self {
        LemmaCheckResult { lhs, rhs, slack, holds: slack >= -SLACK_TOL, instance }
    }

    pub fn with_instance(mut self, instance: impl Into<String>) -> Self {
        self.instance = instance.into();
        self
    }
}

fn require_sub_unital(op: &PositiveOperator, what: &str) -> Result<()> {
    if op.is_sub_unital() {
        return Ok(());
    }
    let max = eigenvalues(op.matrix()).first().copied().unwrap_or(0.0);
    if max > 1.0 + PSD_TOL {
        return Err(Error::invalid(format!("{what} exceeds the identity (max eigenvalue {max})")));
    }
    Ok(())
}

fn same_dim(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::invalid(format!("dimension mismatch: {a} vs {b}")));
    }
    Ok(())
}

fn abs_eigen_sum(a: &CMat) -> f64 {
    eigh(a).values.iter().map(|v| v.abs()).sum()
}

/// `tr(Πσ) ≥ tr(Πρ) − ‖σ − ρ‖₁`.
pub fn check_measurement_on_close_states(
    sigma: &DensityOperator,
    rho: &DensityOperator,
    pi: &PositiveOperator,
) -> Result<LemmaCheckResult> {
    same_dim(sigma.dim(), rho.dim())?;
    same_dim(sigma.dim(), pi.dim())?;
    require_sub_unital(pi, "measurement operator")?;
    let distance = abs_eigen_sum(&(sigma.matrix() - rho.matrix()));
    let lhs = trace_product(pi.matrix(), rho.matrix()).re - distance;
    let rhs = trace_product(pi.matrix(), sigma.matrix()).re;
    Ok(LemmaCheckResult::new(lhs, rhs, rhs - lhs, format!("measurement d={}", rho.dim())))
}

/// `‖ρ − √X ρ √X‖₁ ≤ √(8 (1 − tr ρX))`.
pub fn check_tender_operator(rho: &DensityOperator, x: &PositiveOperator) -> Result<LemmaCheckResult> {
    same_dim(rho.dim(), x.dim())?;
    require_sub_unital(x, "tender operator")?;
    let root = eigh(x.matrix()).map_spectrum(|v| v.max(0.0).sqrt());
    let disturbed = &(&root * rho.matrix()) * &root;
    let lhs = abs_eigen_sum(&(rho.matrix() - &disturbed));
    let lambda = (1.0 - trace_product(rho.matrix(), x.matrix()).re).max(0.0);
    let rhs = (8.0 * lambda).sqrt();
    Ok(LemmaCheckResult::new(lhs, rhs, rhs - lhs, format!("tender d={}", rho.dim())))
}

/// `id − R S R ≤ (id − S) + 4T` with `R` the generalized inverse
/// square root on the support of `S + T`; `slack` is the smallest eigenvalue
/// of the difference, `lhs`/`rhs` the traces of the two sides.
///
/// This single-weight form fails for non-commuting pairs, e.g. `S = |0⟩⟨0|`,
/// `T = 0.01 |+⟩⟨+|` gives slack ≈ −0.026. See
/// [`check_hayashi_nagaoka_standard`] for the form with `2(id − S)`.
pub fn check_hayashi_nagaoka(s: &PositiveOperator, t: &PositiveOperator) -> Result<LemmaCheckResult> {
    hayashi_nagaoka(s, t, 1.0)
}

/// `id − R S R ≤ 2(id − S) + 4T`.
pub fn check_hayashi_nagaoka_standard(s: &PositiveOperator, t: &PositiveOperator) -> Result<LemmaCheckResult> {
    hayashi_nagaoka(s, t, 2.0)
}

fn hayashi_nagaoka(s: &PositiveOperator, t: &PositiveOperator, weight: f64) -> Result<LemmaCheckResult> {
    same_dim(s.dim(), t.dim())?;
    require_sub_unital(s, "S")?;
    let d = s.dim();
    let id = identity(d);
    let r = pinv_sqrt(&(s.matrix() + t.matrix()), DEFAULT_PINV_REL_TOL);
    let left = &id - &(&(&r * s.matrix()) * &r);
    let right = &scaled(&(&id - s.matrix()), weight) + &scaled(t.matrix(), 4.0);
    let slack = eigenvalues(&(&right - &left)).last().copied().unwrap_or(0.0);
    Ok(LemmaCheckResult::new(trace(&left).re, trace(&right).re, slack, format!("hayashi-nagaoka d={d}")))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Lemma {
    MeasurementOnCloseStates,
    TenderOperator,
    /// Single-weight form `(id − S) + 4T`.
    HayashiNagaoka,
    /// `2(id − S) + 4T`.
    HayashiNagaokaStandard,
}

impl Lemma {
    pub const ALL: [Lemma; 4] = [
        Lemma::MeasurementOnCloseStates,
        Lemma::TenderOperator,
        Lemma::HayashiNagaoka,
        Lemma::HayashiNagaokaStandard,
    ];

    fn stream(self) -> u64 {
        match self {
            Lemma::MeasurementOnCloseStates => 2,
            Lemma::TenderOperator => 3,
            Lemma::HayashiNagaoka | Lemma::HayashiNagaokaStandard => 4,
        }
    }
}

pub const MIN_SWEEP_DIM: usize = 2;
pub const MAX_SWEEP_DIM: usize = 8;

/// Instance `index` of the seeded sweep for `lemma`; dimensions cycle 2..=8.
pub fn random_instance(lemma: Lemma, seed: u64, index: u64) -> LemmaCheckResult {
    let mut rng = rng_for(seed, lemma.stream(), index);
    let d = MIN_SWEEP_DIM + (index as usize) % (MAX_SWEEP_DIM - MIN_SWEEP_DIM + 1);
    let rank = |rng: &mut rand_chacha::ChaCha8Rng| rng.random_range(1..=d);
    let result = match lemma {
        Lemma::MeasurementOnCloseStates => {
            let (r1, r2) = (rank(&mut rng), rank(&mut rng));
            let sigma = random_density(&mut rng, d, r1);
            let rho = random_density(&mut rng, d, r2);
            let pi = PositiveOperator::new(random_sub_unital(&mut rng, d), true);
            pi.and_then(|pi| check_measurement_on_close_states(&sigma, &rho, &pi))
        }
        Lemma::TenderOperator => {
            let r = rank(&mut rng);
            let rho = random_density(&mut rng, d, r);
            let x = PositiveOperator::new(random_sub_unital(&mut rng, d), true);
            x.and_then(|x| check_tender_operator(&rho, &x))
        }
        Lemma::HayashiNagaoka | Lemma::HayashiNagaokaStandard => {
            let s = PositiveOperator::new(random_sub_unital(&mut rng, d), true);
            let r = rank(&mut rng);
            let scale = rng.random::<f64>() * 2.0 / d as f64;
            let t = PositiveOperator::new(scaled(&random_psd(&mut rng, d, r), scale), false);
            let check = if lemma == Lemma::HayashiNagaoka {
                check_hayashi_nagaoka
            } else {
                check_hayashi_nagaoka_standard
            };
            s.and_then(|s| t.and_then(|t| check(&s, &t)))
        }
    };
    let descriptor = format!("{lemma:?} seed={seed} index={index} d={d}");
    match result {
        Ok(r) => r.with_instance(descriptor),
        // generators always produce valid operators; surface any surprise as a failure
        Err(e) => LemmaCheckResult::new(f64::NAN, f64::NAN, f64::NEG_INFINITY, format!("{descriptor}: {e}")),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaSweepSummary {
    pub lemma: Lemma,
    pub instances: usize,
    pub failures: usize,
    pub min_slack: f64,
    pub worst_instance: String,
    pub pass: bool,
}

pub fn sweep(lemma: Lemma, instances: usize, seed: u64) -> LemmaSweepSummary {
    let results: Vec<LemmaCheckResult> =
        (0..instances as u64).into_par_iter().map(|i| random_instance(lemma, seed, i)).collect();
    let failures = results.iter().filter(|r| !r.holds).count();
    let worst = results.iter().min_by(|a, b| a.slack.total_cmp(&b.slack));
    LemmaSweepSummary {
        lemma,
        instances,
        failures,
        min_slack: worst.map_or(f64::INFINITY, |w| w.slack),
        worst_instance: worst.map_or_else(String::new, |w| w.instance.clone()),
        pass: failures == 0,
    }
}
