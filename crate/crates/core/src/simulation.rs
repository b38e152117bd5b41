//! Two-class Gaussian mixture scenarios, their exact importance values, and a
//! replication engine for operating characteristics.
//!
//! `Y ~ Bernoulli(0.6)` and `X | Y = y ~ N(μ_y, I₂)` with `μ₀ = 0`. Normals
//! come from [`SimRng::normal_pair`] (Box–Muller), one pair per observation,
//! drawn after that observation's outcome.
//!
//! Exact values use the fact that the log-odds given any subset `K` of the
//! coordinates is `log 1.5 + μ₁ₖᵀxₖ − ‖μ₁ₖ‖²/2`, which depends on `xₖ` only
//! through `T = μ₁ₖᵀxₖ/d`, `d = ‖μ₁ₖ‖`, with `T | Y=1 ~ N(d, 1)` and
//! `T | Y=0 ~ N(0, 1)`:
//!
//! | measure  | value with `d > 0`                                       |
//! |----------|----------------------------------------------------------|
//! | AUC      | `Φ(d/√2)`                                                |
//! | accuracy | `0.6 Φ(d − c) + 0.4 Φ(c)`, `c = (d²/2 − log 1.5)/d`      |
//! | deviance | `1 − E[log-likelihood]/(0.6 log 0.6 + 0.4 log 0.4)`      |
//! | R²       | `1 − E[μ(1 − μ)]/0.24`                                   |
//!
//! The deviance and R² expectations are one-dimensional normal integrals,
//! evaluated by composite Simpson quadrature. With `d = 0` the values are
//! 0.5, 0.6, 0 and 0.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureSet, OutcomeKind};
use crate::error::{Result, VimError};
use crate::estimators::{estimate_vim, EstimationConfig};
use crate::inference::normal_cdf;
use crate::learners::expit;
use crate::measures::MeasureKind;
use crate::result::VimResult;
use crate::rng::{derive_seed, SimRng};

pub const PREVALENCE: f64 = 0.6;
/// Largest tolerated share of failed replications.
pub const MAX_FAILURE_RATE: f64 = 0.02;
const QUAD_INTERVALS: usize = 4000;
const QUAD_HALF_WIDTH: f64 = 12.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimScenario {
    pub mu1: [f64; 2],
}

impl SimScenario {
    /// Both features carry signal.
    pub fn scenario1() -> Self {
        SimScenario { mu1: [1.5, 2.0] }
    }

    /// Only the first feature carries signal.
    pub fn scenario2() -> Self {
        SimScenario { mu1: [1.5, 0.0] }
    }

    pub fn by_id(id: u32) -> Result<Self> {
        match id {
            1 => Ok(Self::scenario1()),
            2 => Ok(Self::scenario2()),
            _ => Err(VimError::Config(format!("unknown scenario {id}, expected 1 or 2"))),
        }
    }

    /// Exact conditional mean `P(Y = 1 | X = x)`.
    pub fn oracle_mu(&self, x: [f64; 2]) -> f64 {
        let [a, b] = self.mu1;
        expit((PREVALENCE / (1.0 - PREVALENCE)).ln() + a * x[0] + b * x[1] - (a * a + b * b) / 2.0)
    }

    /// Norm of `μ₁` restricted to the kept coordinates.
    fn separation(&self, keep: &[usize]) -> f64 {
        keep.iter().map(|&j| self.mu1[j].powi(2)).sum::<f64>().sqrt()
    }

    /// Exact predictiveness of the oracle that sees only the `keep` columns.
    pub fn oracle_value(&self, measure: MeasureKind, keep: &[usize]) -> Result<f64> {
        if keep.iter().any(|&j| j >= 2) {
            return Err(VimError::Config("scenarios have two features".into()));
        }
        Ok(value_at_separation(measure, self.separation(keep)))
    }

    /// Exact importance of `s`: full-model minus reduced-model predictiveness.
    pub fn oracle_truth(&self, measure: MeasureKind, s: &FeatureSet) -> Result<f64> {
        s.check(2)?;
        Ok(self.oracle_value(measure, &[0, 1])? - self.oracle_value(measure, &s.complement(2))?)
    }
}

fn value_at_separation(measure: MeasureKind, d: f64) -> f64 {
    let log_prior_odds = (PREVALENCE / (1.0 - PREVALENCE)).ln();
    if d == 0.0 {
        return match measure {
            MeasureKind::Auc => 0.5,
            MeasureKind::Accuracy => PREVALENCE,
            MeasureKind::Deviance | MeasureKind::RSquared => 0.0,
        };
    }
    let eta = |t: f64| log_prior_odds + d * t - d * d / 2.0;
    match measure {
        MeasureKind::Auc => normal_cdf(d / std::f64::consts::SQRT_2),
        MeasureKind::Accuracy => {
            let c = (d * d / 2.0 - log_prior_odds) / d;
            PREVALENCE * normal_cdf(d - c) + (1.0 - PREVALENCE) * normal_cdf(c)
        }
        MeasureKind::Deviance => {
            // log expit(η) = −softplus(−η), log(1 − expit(η)) = −softplus(η)
            let ll = PREVALENCE * normal_expectation(d, |t| -softplus(-eta(t)))
                + (1.0 - PREVALENCE) * normal_expectation(0.0, |t| -softplus(eta(t)));
            let denom =
                PREVALENCE * PREVALENCE.ln() + (1.0 - PREVALENCE) * (1.0 - PREVALENCE).ln();
            1.0 - ll / denom
        }
        MeasureKind::RSquared => {
            let h = |t: f64| {
                let m = expit(eta(t));
                m * (1.0 - m)
            };
            let mse =
                PREVALENCE * normal_expectation(d, h) + (1.0 - PREVALENCE) * normal_expectation(0.0, h);
            1.0 - mse / (PREVALENCE * (1.0 - PREVALENCE))
        }
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `E h(T)` for `T ~ N(mean, 1)` by composite Simpson on `mean ± 12`.
fn normal_expectation(mean: f64, h: impl Fn(f64) -> f64) -> f64 {
    let a = mean - QUAD_HALF_WIDTH;
    let step = 2.0 * QUAD_HALF_WIDTH / QUAD_INTERVALS as f64;
    let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    let g = |t: f64| h(t) * norm * (-(t - mean).powi(2) / 2.0).exp();
    let mut sum = g(a) + g(a + 2.0 * QUAD_HALF_WIDTH);
    for i in 1..QUAD_INTERVALS {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * g(a + i as f64 * step);
    }
    sum * step / 3.0
}

/// `n` independent draws; columns are named `x1`, `x2`.
pub fn generate(scenario: &SimScenario, n: usize, seed: u64) -> Dataset {
    let mut rng = SimRng::new(seed);
    let mut x = nalgebra::DMatrix::zeros(n, 2);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let yi = rng.uniform() < PREVALENCE;
        let (z1, z2) = rng.normal_pair();
        let shift = if yi { scenario.mu1 } else { [0.0, 0.0] };
        x[(i, 0)] = shift[0] + z1;
        x[(i, 1)] = shift[1] + z2;
        y.push(f64::from(u8::from(yi)));
    }
    let kind = OutcomeKind::detect(&y);
    Dataset::new(x, y, kind).expect("generated data are finite")
}

/// Value `E[max(X, 0)]` of the optimal rule in [`randomized_trial`].
pub const RULE_VALUE_TRUTH: f64 = 0.398_942_280_401_432_7;

/// Randomized trial with one covariate: `X ~ N(0, 1)`, `A ~ Bernoulli(1/2)`,
/// `Y = A·X + N(0, 1)`. The optimal rule treats when `X > 0`.
pub fn randomized_trial(n: usize, seed: u64) -> crate::coarsened::TreatmentDataset {
    let mut rng = SimRng::new(seed);
    let mut x = nalgebra::DMatrix::zeros(n, 1);
    let mut a = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let (xi, noise) = rng.normal_pair();
        let ai = f64::from(u8::from(rng.uniform() < 0.5));
        x[(i, 0)] = xi;
        a.push(ai);
        y.push(ai * xi + noise);
    }
    crate::coarsened::TreatmentDataset::new(x, a, y).expect("generated data are valid")
}

/// `P(Y = 1 | X = x)` in [`missing_at_random`]; depends on `x1` only.
pub fn mar_outcome_probability(x: [f64; 2]) -> f64 {
    expit(-0.3 + 1.2 * x[0])
}

/// `P(Δ = 1 | X = x)` in [`missing_at_random`].
pub fn mar_observation_probability(x: [f64; 2]) -> f64 {
    expit(0.8 + 0.6 * x[0] - 0.5 * x[1])
}

/// Two standard normal covariates, `Y ~ Bernoulli(mar_outcome_probability)`,
/// observed with probability [`mar_observation_probability`].
pub fn missing_at_random(n: usize, seed: u64) -> crate::coarsened::MissingnessDataset {
    let mut rng = SimRng::new(seed);
    let mut x = nalgebra::DMatrix::zeros(n, 2);
    let mut observed = Vec::with_capacity(n);
    let mut u = Vec::with_capacity(n);
    for i in 0..n {
        let (x1, x2) = rng.normal_pair();
        x[(i, 0)] = x1;
        x[(i, 1)] = x2;
        let y = f64::from(u8::from(rng.uniform() < mar_outcome_probability([x1, x2])));
        let d = f64::from(u8::from(rng.uniform() < mar_observation_probability([x1, x2])));
        observed.push(d);
        u.push(d * y);
    }
    crate::coarsened::MissingnessDataset::new(x, observed, u).expect("generated data are valid")
}

/// Accuracy of the Bayes classifier in [`missing_at_random`],
/// `E max(π(X), 1 − π(X))`, by quadrature.
pub fn mar_accuracy_truth() -> f64 {
    normal_expectation(0.0, |t| {
        let p = mar_outcome_probability([t, 0.0]);
        p.max(1.0 - p)
    })
}

/// Per-sample-size summary of a replication study, each proportion with its
/// binomial Monte Carlo standard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingCharacteristics {
    pub n: usize,
    pub n_reps: usize,
    pub failures: usize,
    pub truth: f64,
    pub mean_psi: f64,
    /// `n` times the empirical mean squared error.
    pub scaled_mse: f64,
    pub scaled_mse_se: f64,
    pub coverage: f64,
    pub coverage_se: f64,
    pub rejection_rate: f64,
    pub rejection_rate_se: f64,
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub scenario: SimScenario,
    pub s: FeatureSet,
    pub n_grid: Vec<usize>,
    pub n_reps: usize,
    /// Measure, learner and test settings; its seed is replaced per replication.
    pub config: EstimationConfig,
    pub seed: u64,
}

impl Experiment {
    /// Seeds for replication `rep` at grid position `grid_index`: data then estimation.
    pub fn replication_seeds(&self, grid_index: usize, rep: usize) -> (u64, u64) {
        let base = derive_seed(derive_seed(self.seed, grid_index as u64), rep as u64);
        (derive_seed(base, 0), derive_seed(base, 1))
    }

    pub fn run(&self) -> Result<Vec<OperatingCharacteristics>> {
        self.run_with(estimate_vim)
    }

    /// Runs with a custom estimator in place of [`estimate_vim`].
    pub fn run_with<E>(&self, estimator: E) -> Result<Vec<OperatingCharacteristics>>
    where
        E: Fn(&Dataset, &FeatureSet, &EstimationConfig) -> Result<VimResult> + Sync,
    {
        if self.n_reps == 0 {
            return Err(VimError::Config("need at least one replication".into()));
        }
        let truth = self.scenario.oracle_truth(self.config.measure.kind, &self.s)?;
        let mut out = Vec::with_capacity(self.n_grid.len());
        for (g, &n) in self.n_grid.iter().enumerate() {
            let results: Vec<Result<VimResult>> = (0..self.n_reps)
                .into_par_iter()
                .map(|rep| {
                    let (data_seed, est_seed) = self.replication_seeds(g, rep);
                    let d = generate(&self.scenario, n, data_seed);
                    let mut cfg = self.config.clone();
                    cfg.seed = est_seed;
                    estimator(&d, &self.s, &cfg)
                })
                .collect();
            out.push(summarize(n, truth, self.config.measure.name(), &results)?);
        }
        Ok(out)
    }
}

fn summarize(
    n: usize,
    truth: f64,
    measure: &'static str,
    results: &[Result<VimResult>],
) -> Result<OperatingCharacteristics> {
    let ok: Vec<&VimResult> = results.iter().filter_map(|r| r.as_ref().ok()).collect();
    let failures = results.len() - ok.len();
    if failures as f64 > MAX_FAILURE_RATE * results.len() as f64 || ok.is_empty() {
        let first = results
            .iter()
            .find_map(|r| r.as_ref().err())
            .map(|e| e.to_string())
            .unwrap_or_default();
        return Err(VimError::Degenerate {
            measure,
            reason: format!(
                "{failures} of {} replications failed at n = {n}; first: {first}",
                results.len()
            ),
        });
    }
    let r = ok.len() as f64;
    let mean = |v: &mut dyn Iterator<Item = f64>| v.sum::<f64>() / r;
    let binomial_se = |p: f64| (p * (1.0 - p) / r).sqrt();
    let sq_err: Vec<f64> = ok.iter().map(|v| (v.psi - truth).powi(2)).collect();
    let mse = sq_err.iter().sum::<f64>() / r;
    let mse_sd = if ok.len() > 1 {
        (sq_err.iter().map(|e| (e - mse).powi(2)).sum::<f64>() / (r - 1.0)).sqrt()
    } else {
        0.0
    };
    let coverage = mean(&mut ok.iter().map(|v| {
        f64::from(u8::from(v.ci_two_sided.0 <= truth && truth <= v.ci_two_sided.1))
    }));
    let rejection_rate = mean(&mut ok.iter().map(|v| f64::from(u8::from(v.reject))));
    Ok(OperatingCharacteristics {
        n,
        n_reps: results.len(),
        failures,
        truth,
        mean_psi: mean(&mut ok.iter().map(|v| v.psi)),
        scaled_mse: n as f64 * mse,
        scaled_mse_se: n as f64 * mse_sd / r.sqrt(),
        coverage,
        coverage_se: binomial_se(coverage),
        rejection_rate,
        rejection_rate_se: binomial_se(rejection_rate),
    })
}
