//! Estimators of conditional mean functions.
//!
//! A [`Learner`] turns a [`Dataset`] into a [`FittedModel`] whose predictions
//! are on the conditional-mean scale (probabilities for binary outcomes).
//! The measures derive their oracle prediction functions from these, e.g. the
//! accuracy measure thresholds them at one half.

mod boost;
mod glm;
mod stack;

use std::fmt::Debug;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureSet, OutcomeKind};
use crate::error::{Result, VimError};

pub use boost::{fit_boosted_stumps, BoostedStumps, Stump, StumpModel};
pub use glm::{
    fit_intercept_only, fit_linear, fit_logistic, LinearLearner, LinearModel, LogisticLearner,
    LogisticModel, MeanLearner, MeanModel,
};
pub use stack::{fit_stack, project_to_simplex, StackLearner, StackLoss, StackModel, StackSpec};

/// Fit procedure for a conditional mean estimator.
pub trait Learner: Send + Sync + Debug {
    fn name(&self) -> String;

    /// Fits on `d`. `seed` drives any internal randomness (inner CV folds).
    fn fit(&self, d: &Dataset, seed: u64) -> Result<Box<dyn FittedModel>>;
}

/// An immutable fitted model.
pub trait FittedModel: Send + Sync + Debug {
    /// Conditional-mean predictions, one per row of `x`.
    fn predict(&self, x: &DMatrix<f64>) -> Vec<f64>;
}

/// A model fit on `X_{-s}` that accepts full-width feature matrices.
#[derive(Debug)]
pub struct ReducedModel {
    keep: Vec<usize>,
    inner: Box<dyn FittedModel>,
}

impl ReducedModel {
    pub fn kept_columns(&self) -> &[usize] {
        &self.keep
    }
}

impl FittedModel for ReducedModel {
    fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        self.inner.predict(&x.select_columns(self.keep.iter()))
    }
}

/// Fits `learner` on the columns outside `s`.
pub fn fit_reduced(
    learner: &dyn Learner,
    d: &Dataset,
    s: &FeatureSet,
    seed: u64,
) -> Result<ReducedModel> {
    let reduced = d.complement_columns(s)?;
    Ok(ReducedModel {
        keep: s.complement(d.p()),
        inner: learner.fit(&reduced, seed)?,
    })
}

/// Serializable description of a learner, used by the CLI and reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LearnerSpec {
    Mean,
    Logistic {
        max_iter: usize,
        tol: f64,
    },
    Linear,
    BoostedStumps {
        rounds: usize,
        shrinkage: f64,
    },
    Stack {
        learners: Vec<LearnerSpec>,
        inner_folds: usize,
    },
}

impl LearnerSpec {
    pub fn logistic() -> Self {
        LearnerSpec::Logistic {
            max_iter: glm::DEFAULT_MAX_ITER,
            tol: glm::DEFAULT_TOL,
        }
    }

    pub fn boosted() -> Self {
        LearnerSpec::BoostedStumps {
            rounds: boost::DEFAULT_ROUNDS,
            shrinkage: boost::DEFAULT_SHRINKAGE,
        }
    }

    /// Sample mean plus a parametric model matched to the outcome type.
    pub fn default_stack(kind: OutcomeKind) -> Self {
        let model = match kind {
            OutcomeKind::Binary => LearnerSpec::logistic(),
            OutcomeKind::Continuous => LearnerSpec::Linear,
        };
        LearnerSpec::Stack {
            learners: vec![LearnerSpec::Mean, model],
            inner_folds: stack::DEFAULT_INNER_FOLDS,
        }
    }

    /// Parses `mean`, `logistic`, `linear`, `boosted`, `stack` (the default
    /// stack for `kind`) or `stack:a,b,...`.
    pub fn parse(s: &str, kind: OutcomeKind) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if let Some(list) = s.strip_prefix("stack:") {
            let learners = list
                .split(',')
                .map(|p| LearnerSpec::parse(p, kind))
                .collect::<Result<Vec<_>>>()?;
            if learners.iter().any(|l| matches!(l, LearnerSpec::Stack { .. })) {
                return Err(VimError::Config("stacks cannot be nested".into()));
            }
            return Ok(LearnerSpec::Stack {
                learners,
                inner_folds: stack::DEFAULT_INNER_FOLDS,
            });
        }
        match s.as_str() {
            "mean" => Ok(LearnerSpec::Mean),
            "logistic" => Ok(LearnerSpec::logistic()),
            "linear" => Ok(LearnerSpec::Linear),
            "boosted" | "boost" | "stumps" => Ok(LearnerSpec::boosted()),
            "stack" => Ok(LearnerSpec::default_stack(kind)),
            other => Err(VimError::Config(format!("unknown learner '{other}'"))),
        }
    }

    pub fn build(&self) -> Arc<dyn Learner> {
        match self {
            LearnerSpec::Mean => Arc::new(MeanLearner),
            LearnerSpec::Logistic { max_iter, tol } => Arc::new(LogisticLearner {
                max_iter: *max_iter,
                tol: *tol,
            }),
            LearnerSpec::Linear => Arc::new(LinearLearner),
            LearnerSpec::BoostedStumps { rounds, shrinkage } => Arc::new(BoostedStumps {
                rounds: *rounds,
                shrinkage: *shrinkage,
            }),
            LearnerSpec::Stack {
                learners,
                inner_folds,
            } => Arc::new(StackLearner::new(StackSpec {
                learners: learners.iter().map(LearnerSpec::build).collect(),
                inner_folds: *inner_folds,
                loss: None,
            })),
        }
    }
}

#[inline]
pub(crate) fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub(crate) fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}
