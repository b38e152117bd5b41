//! Predictiveness measures and their influence functions.
//!
//! Each measure is a standardized V-measure `a + V1(f, P) / V2(P)`, where `V1`
//! is the expectation of a symmetric kernel of `m` observations and `V2` is a
//! normalizer that does not depend on `f`:
//!
//! | measure    | a | kernel                                  | V2              | m |
//! |------------|---|-----------------------------------------|-----------------|---|
//! | R²         | 1 | `-(y - f)²`                             | `var(Y)`        | 1 |
//! | deviance   | 1 | `-{y log f + (1 - y) log(1 - f)}`       | `π log π + (1 - π) log(1 - π)` | 1 |
//! | accuracy   | 0 | `I(y = f)`                              | 1               | 1 |
//! | AUC        | 0 | pairwise concordance                    | `π(1 - π)`      | 2 |
//!
//! [`Measure::eif`] returns the Gâteaux derivative of `P ↦ V(f, P)` at the
//! empirical distribution in the direction of a point mass at each
//! observation, with `f` held fixed. The influence functions are exactly
//! centered under the empirical distribution they are evaluated on.

use serde::{Deserialize, Serialize};

use crate::data::OutcomeKind;
use crate::error::{Result, VimError};
use crate::result::PredictivenessEstimate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureKind {
    RSquared,
    Deviance,
    Accuracy,
    Auc,
}

impl MeasureKind {
    pub fn name(self) -> &'static str {
        match self {
            MeasureKind::RSquared => "r_squared",
            MeasureKind::Deviance => "deviance",
            MeasureKind::Accuracy => "accuracy",
            MeasureKind::Auc => "auc",
        }
    }

    pub fn parse(s: &str) -> Option<MeasureKind> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "r_squared" | "r2" | "rsquared" => Some(MeasureKind::RSquared),
            "deviance" => Some(MeasureKind::Deviance),
            "accuracy" => Some(MeasureKind::Accuracy),
            "auc" => Some(MeasureKind::Auc),
            _ => None,
        }
    }
}

/// Marginal outcome moments on an evaluation set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalMoments {
    pub mean_y: f64,
    /// Variance with divisor `n`.
    pub var_y: f64,
    /// Share of outcomes equal to 1.
    pub prob_y1: f64,
    /// `π log π + (1 - π) log(1 - π)`; `None` unless `π ∈ (0, 1)`.
    pub entropy_denom: Option<f64>,
}

impl EmpiricalMoments {
    pub fn from_outcomes(y: &[f64]) -> EmpiricalMoments {
        let n = y.len() as f64;
        let mean_y = y.iter().sum::<f64>() / n;
        let var_y = y.iter().map(|v| (v - mean_y).powi(2)).sum::<f64>() / n;
        let prob_y1 = y.iter().filter(|&&v| v == 1.0).count() as f64 / n;
        let entropy_denom = (prob_y1 > 0.0 && prob_y1 < 1.0)
            .then(|| prob_y1 * prob_y1.ln() + (1.0 - prob_y1) * (1.0 - prob_y1).ln());
        EmpiricalMoments {
            mean_y,
            var_y,
            prob_y1,
            entropy_denom,
        }
    }
}

pub const DEFAULT_DEVIANCE_CLIP: f64 = 1e-3;

/// A predictiveness measure together with its evaluation options.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measure {
    pub kind: MeasureKind,
    /// Predictions are clipped to `[clip, 1 - clip]` before taking logs.
    pub deviance_clip: f64,
    /// Count AUC ties as discordant instead of one half.
    pub strict_auc: bool,
}

impl From<MeasureKind> for Measure {
    fn from(kind: MeasureKind) -> Self {
        Measure::new(kind)
    }
}

impl Measure {
    pub fn new(kind: MeasureKind) -> Measure {
        Measure {
            kind,
            deviance_clip: DEFAULT_DEVIANCE_CLIP,
            strict_auc: false,
        }
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn requires_binary(&self) -> bool {
        !matches!(self.kind, MeasureKind::RSquared)
    }

    pub fn check_outcome_kind(&self, kind: OutcomeKind) -> Result<()> {
        if self.requires_binary() && kind != OutcomeKind::Binary {
            return Err(VimError::Config(format!(
                "measure {} requires a binary outcome",
                self.name()
            )));
        }
        Ok(())
    }

    /// Maps a conditional-mean prediction to the prediction the measure scores.
    /// Accuracy scores the Bayes classifier `I{μ > 1/2}`; the rest use `μ`.
    #[inline]
    pub fn to_prediction(&self, mu: f64) -> f64 {
        match self.kind {
            MeasureKind::Accuracy => f64::from(u8::from(mu > 0.5)),
            _ => mu,
        }
    }

    /// Empirical value `V(f, P_n)`.
    pub fn evaluate(&self, f: &[f64], y: &[f64]) -> Result<f64> {
        self.check_inputs(f, y)?;
        let n = y.len() as f64;
        match self.kind {
            MeasureKind::RSquared => {
                let m = EmpiricalMoments::from_outcomes(y);
                if m.var_y <= 0.0 {
                    return Err(VimError::degenerate(self.name(), "outcome has zero variance"));
                }
                let sse: f64 = f.iter().zip(y).map(|(f, y)| (y - f).powi(2)).sum();
                let sst: f64 = y.iter().map(|y| (y - m.mean_y).powi(2)).sum();
                Ok(1.0 - sse / sst)
            }
            MeasureKind::Deviance => {
                let m = EmpiricalMoments::from_outcomes(y);
                let denom = m.entropy_denom.ok_or_else(|| {
                    VimError::degenerate(self.name(), "outcome has a single class")
                })?;
                let ll: f64 = f
                    .iter()
                    .zip(y)
                    .map(|(&f, &y)| log_lik(y, self.clip(f)))
                    .sum::<f64>()
                    / n;
                Ok(1.0 - ll / denom)
            }
            MeasureKind::Accuracy => {
                let hits = f.iter().zip(y).filter(|(f, y)| f == y).count();
                Ok(hits as f64 / n)
            }
            MeasureKind::Auc => {
                let (neg, pos) = split_classes(f, y);
                if neg.is_empty() || pos.is_empty() {
                    return Err(VimError::degenerate(self.name(), "outcome has a single class"));
                }
                let mut neg = neg;
                neg.sort_by(f64::total_cmp);
                // Twice the concordance count keeps half-ties integral.
                let twice: u64 = pos
                    .iter()
                    .map(|&fj| {
                        let (lt, eq) = rank_counts(&neg, fj);
                        2 * lt + if self.strict_auc { 0 } else { eq }
                    })
                    .sum();
                Ok((twice as f64 * 0.5) / (neg.len() as f64 * pos.len() as f64))
            }
        }
    }

    /// Influence function values at each observation of the evaluation set.
    ///
    /// `mu` holds conditional-mean predictions; `v` must be the measure value
    /// on the same inputs, and `moments` computed on the same outcomes.
    pub fn eif(
        &self,
        mu: &[f64],
        y: &[f64],
        moments: &EmpiricalMoments,
        v: f64,
    ) -> Result<Vec<f64>> {
        if mu.len() != y.len() {
            return Err(VimError::Data("prediction and outcome lengths differ".into()));
        }
        match self.kind {
            MeasureKind::RSquared => {
                let s2 = moments.var_y;
                if s2 <= 0.0 {
                    return Err(VimError::degenerate(self.name(), "outcome has zero variance"));
                }
                Ok(mu
                    .iter()
                    .zip(y)
                    .map(|(&m, &y)| {
                        -(y - m).powi(2) / s2 + (1.0 - v) * (y - moments.mean_y).powi(2) / s2
                    })
                    .collect())
            }
            MeasureKind::Deviance => {
                let denom = moments.entropy_denom.ok_or_else(|| {
                    VimError::degenerate(self.name(), "outcome has a single class")
                })?;
                let pi = moments.prob_y1;
                let ll: Vec<f64> = mu
                    .iter()
                    .zip(y)
                    .map(|(&m, &y)| log_lik(y, self.clip(m)))
                    .collect();
                let ll_mean = ll.iter().sum::<f64>() / ll.len() as f64;
                let log_odds = (pi / (1.0 - pi)).ln();
                Ok(ll
                    .iter()
                    .zip(y)
                    .map(|(&l, &y)| {
                        -(l - ll_mean) / denom + (1.0 - v) * log_odds * (y - pi) / denom
                    })
                    .collect())
            }
            MeasureKind::Accuracy => Ok(mu
                .iter()
                .zip(y)
                .map(|(&m, &y)| {
                    let hit = if m > 0.5 { y } else { 1.0 - y };
                    hit - v
                })
                .collect()),
            MeasureKind::Auc => {
                let pi = moments.prob_y1;
                if !(pi > 0.0 && pi < 1.0) {
                    return Err(VimError::degenerate(self.name(), "outcome has a single class"));
                }
                let (mut neg, mut pos) = split_classes(mu, y);
                neg.sort_by(f64::total_cmp);
                pos.sort_by(f64::total_cmp);
                let half = if self.strict_auc { 0.0 } else { 0.5 };
                let (n0, n1) = (neg.len() as f64, pos.len() as f64);
                Ok(mu
                    .iter()
                    .zip(y)
                    .map(|(&m, &y)| {
                        let lead = if y == 1.0 {
                            // share of negatives ranked strictly below this positive
                            let (lt, eq) = rank_counts(&neg, m);
                            (lt as f64 + half * eq as f64) / n0 / pi
                        } else {
                            // share of positives ranked strictly above this negative
                            let (lt, eq) = rank_counts(&pos, m);
                            let gt = pos.len() as u64 - lt - eq;
                            (gt as f64 + half * eq as f64) / n1 / (1.0 - pi)
                        };
                        lead - v * (2.0 + (1.0 - 2.0 * pi) * (y - pi) / (pi * (1.0 - pi)))
                    })
                    .collect())
            }
        }
    }

    /// Value, influence function and its second moment from conditional-mean
    /// predictions on one evaluation set.
    pub fn predictiveness(&self, mu: &[f64], y: &[f64]) -> Result<PredictivenessEstimate> {
        let f: Vec<f64> = mu.iter().map(|&m| self.to_prediction(m)).collect();
        let v = self.evaluate(&f, y)?;
        let moments = EmpiricalMoments::from_outcomes(y);
        let eif = self.eif(mu, y, &moments, v)?;
        Ok(PredictivenessEstimate::from_eif(v, eif))
    }

    fn clip(&self, f: f64) -> f64 {
        f.clamp(self.deviance_clip, 1.0 - self.deviance_clip)
    }

    fn check_inputs(&self, f: &[f64], y: &[f64]) -> Result<()> {
        if f.len() != y.len() {
            return Err(VimError::Data(format!(
                "{} predictions for {} outcomes",
                f.len(),
                y.len()
            )));
        }
        if y.len() < 2 {
            return Err(VimError::degenerate(self.name(), "need at least 2 observations"));
        }
        if f.iter().chain(y).any(|v| !v.is_finite()) {
            return Err(VimError::Data("non-finite prediction or outcome".into()));
        }
        if self.requires_binary() && y.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(VimError::Data(format!(
                "measure {} requires outcomes in {{0, 1}}",
                self.name()
            )));
        }
        match self.kind {
            MeasureKind::Accuracy if f.iter().any(|&v| v != 0.0 && v != 1.0) => Err(
                VimError::Data("accuracy requires class predictions in {0, 1}".into()),
            ),
            MeasureKind::Deviance | MeasureKind::Auc
                if f.iter().any(|&v| !(0.0..=1.0).contains(&v)) =>
            {
                Err(VimError::Data(format!(
                    "measure {} requires probability predictions in [0, 1]",
                    self.name()
                )))
            }
            _ => Ok(()),
        }
    }
}

#[inline]
fn log_lik(y: f64, f: f64) -> f64 {
    y * f.ln() + (1.0 - y) * (1.0 - f).ln()
}

fn split_classes(f: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut neg = Vec::new();
    let mut pos = Vec::new();
    for (&f, &y) in f.iter().zip(y) {
        if y == 1.0 {
            pos.push(f);
        } else {
            neg.push(f);
        }
    }
    (neg, pos)
}

/// `(#{v < x}, #{v == x})` in an ascending slice.
#[inline]
fn rank_counts(sorted: &[f64], x: f64) -> (u64, u64) {
    let lt = sorted.partition_point(|&v| v < x);
    let le = sorted.partition_point(|&v| v <= x);
    (lt as u64, (le - lt) as u64)
}
