//! One-step estimators for predictiveness measures of coarsened data: the mean
//! outcome under a binary treatment rule, and classification accuracy when
//! some outcomes are missing at random.
//!
//! Nuisances are cross-fit on the same fold machinery as the estimators
//! module. The reduced rule is built by regressing the full-sample nuisance
//! predictions on the training rows onto the kept columns.

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::data::{Dataset, FeatureSet, OutcomeKind};
use crate::error::{Result, VimError};
use crate::folds::{make_fold_plan_with, FoldOptions};
use crate::inference::split_contrast;
use crate::learners::{fit_reduced, BoostedStumps, FittedModel, Learner, LogisticLearner};
use crate::result::{PredictivenessEstimate, VimResult};
use crate::rng::derive_seed;

pub const DEFAULT_TRUNCATION: f64 = 0.025;
/// Share of observations at the propensity bound above which a warning fires.
pub const POSITIVITY_WARN_SHARE: f64 = 0.05;
/// Treatment-effect magnitude below which the rule counts as a near tie.
pub const NEAR_TIE_GAP: f64 = 0.01;

/// Covariates, a binary treatment and a real outcome.
#[derive(Debug, Clone)]
pub struct TreatmentDataset {
    base: Dataset,
    treatment: Vec<f64>,
}

impl TreatmentDataset {
    pub fn new(features: DMatrix<f64>, treatment: Vec<f64>, outcome: Vec<f64>) -> Result<Self> {
        let names = (1..=features.ncols()).map(|j| format!("x{j}")).collect();
        Self::with_names(features, treatment, outcome, names)
    }

    pub fn with_names(
        features: DMatrix<f64>,
        treatment: Vec<f64>,
        outcome: Vec<f64>,
        names: Vec<String>,
    ) -> Result<Self> {
        let kind = OutcomeKind::detect(&outcome);
        let base = Dataset::with_names(features, outcome, kind, names)?;
        if treatment.len() != base.n() {
            return Err(VimError::Data("treatment length differs from n".into()));
        }
        if OutcomeKind::detect(&treatment) != OutcomeKind::Binary {
            return Err(VimError::Data("treatment must contain only 0 and 1".into()));
        }
        Ok(TreatmentDataset { base, treatment })
    }

    pub fn n(&self) -> usize {
        self.base.n()
    }

    pub fn features(&self) -> &DMatrix<f64> {
        self.base.features()
    }

    pub fn treatment(&self) -> &[f64] {
        &self.treatment
    }

    pub fn outcome(&self) -> &[f64] {
        self.base.outcome()
    }

    pub fn base(&self) -> &Dataset {
        &self.base
    }
}

/// Covariates, an observation indicator `Δ` and the masked outcome `U = ΔY`.
#[derive(Debug, Clone)]
pub struct MissingnessDataset {
    base: Dataset,
    observed: Vec<f64>,
}

impl MissingnessDataset {
    pub fn new(features: DMatrix<f64>, observed: Vec<f64>, masked_outcome: Vec<f64>) -> Result<Self> {
        let names = (1..=features.ncols()).map(|j| format!("x{j}")).collect();
        Self::with_names(features, observed, masked_outcome, names)
    }

    pub fn with_names(
        features: DMatrix<f64>,
        observed: Vec<f64>,
        masked_outcome: Vec<f64>,
        names: Vec<String>,
    ) -> Result<Self> {
        let base = Dataset::with_names(features, masked_outcome, OutcomeKind::Binary, names)?;
        if observed.len() != base.n() {
            return Err(VimError::Data("observation indicator length differs from n".into()));
        }
        if OutcomeKind::detect(&observed) != OutcomeKind::Binary {
            return Err(VimError::Data("observation indicator must contain only 0 and 1".into()));
        }
        if let Some(i) = (0..base.n()).find(|&i| observed[i] == 0.0 && base.outcome()[i] != 0.0) {
            return Err(VimError::Data(format!(
                "masked outcome must be 0 where unobserved (row {})",
                i + 1
            )));
        }
        if observed.iter().all(|&o| o == 0.0) {
            return Err(VimError::Data("every outcome is missing".into()));
        }
        Ok(MissingnessDataset { base, observed })
    }

    pub fn n(&self) -> usize {
        self.base.n()
    }

    pub fn features(&self) -> &DMatrix<f64> {
        self.base.features()
    }

    pub fn observed(&self) -> &[f64] {
        &self.observed
    }

    pub fn masked_outcome(&self) -> &[f64] {
        self.base.outcome()
    }

    pub fn base(&self) -> &Dataset {
        &self.base
    }
}

/// Outcome regressions `Q(0, x)`, `Q(1, x)` and propensity `g(1, x)` on the
/// evaluation rows.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleNuisance {
    pub q0: Vec<f64>,
    pub q1: Vec<f64>,
    pub g1: Vec<f64>,
    pub truncation: f64,
}

/// Scores defining a rule `x ↦ I{q1 > q0}`; ties go to 0.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleScores {
    pub q0: Vec<f64>,
    pub q1: Vec<f64>,
}

/// Outcome probability `π(x)` among the observed and observation
/// probability `g(x)` on the evaluation rows.
#[derive(Debug, Clone, PartialEq)]
pub struct MissingNuisance {
    pub pi: Vec<f64>,
    pub g: Vec<f64>,
    pub truncation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Diagnostics {
    /// Share of evaluation rows whose propensity was raised to the bound.
    pub truncated_share: f64,
    /// Share of rows with `|Q(1,x) − Q(0,x)| < NEAR_TIE_GAP` (rule value only).
    pub near_tie_share: f64,
}

impl Diagnostics {
    fn warn(&self) {
        if self.truncated_share > POSITIVITY_WARN_SHARE {
            log::warn!(
                "positivity: {:.1}% of propensities at the truncation bound",
                100.0 * self.truncated_share
            );
        }
        if self.near_tie_share > POSITIVITY_WARN_SHARE {
            log::warn!(
                "{:.1}% of observations have a near-zero treatment effect; the rule value may not be smooth",
                100.0 * self.near_tie_share
            );
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoarsenedEstimate {
    pub estimate: PredictivenessEstimate,
    pub diagnostics: Diagnostics,
    /// Per-fold values when cross-fit; empty otherwise.
    pub fold_values: Vec<f64>,
}

fn check_truncation(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(VimError::Config(format!(
            "propensity truncation must lie in (0, 0.5), got {eps}"
        )));
    }
    Ok(())
}

fn check_len(what: &str, len: usize, n: usize) -> Result<()> {
    if len != n {
        return Err(VimError::Data(format!("{what} has {len} values for {n} observations")));
    }
    Ok(())
}

/// Estimate and influence values from uncentered per-observation terms.
fn from_terms(terms: Vec<f64>) -> PredictivenessEstimate {
    let value = terms.iter().sum::<f64>() / terms.len() as f64;
    let eif = terms.iter().map(|t| t - value).collect();
    PredictivenessEstimate::from_eif(value, eif)
}

/// One-step estimate of `E Y(f(X))` for the rule `f` given by `rule`, or by
/// `I{Q(1,x) > Q(0,x)}` when `rule` is `None`.
///
/// Each term is `Q(f, X) + I{A = f}/g(f, X)·(Y − Q(f, X))`, where the
/// probability of the rule's arm is raised to at least the truncation level.
pub fn onestep_rule_value(
    treatment: &[f64],
    outcome: &[f64],
    nuis: &RuleNuisance,
    rule: Option<&RuleScores>,
) -> Result<CoarsenedEstimate> {
    let n = outcome.len();
    check_truncation(nuis.truncation)?;
    if n == 0 {
        return Err(VimError::Data("no observations".into()));
    }
    check_len("treatment", treatment.len(), n)?;
    check_len("Q(0, x)", nuis.q0.len(), n)?;
    check_len("Q(1, x)", nuis.q1.len(), n)?;
    check_len("g(1, x)", nuis.g1.len(), n)?;
    let (r0, r1) = match rule {
        Some(r) => {
            check_len("rule scores", r.q0.len(), n)?;
            check_len("rule scores", r.q1.len(), n)?;
            (&r.q0, &r.q1)
        }
        None => (&nuis.q0, &nuis.q1),
    };
    let mut truncated = 0usize;
    let mut near_tie = 0usize;
    let terms: Vec<f64> = (0..n)
        .map(|i| {
            let f = r1[i] > r0[i];
            if (r1[i] - r0[i]).abs() < NEAR_TIE_GAP {
                near_tie += 1;
            }
            let (q, g) = if f {
                (nuis.q1[i], nuis.g1[i])
            } else {
                (nuis.q0[i], 1.0 - nuis.g1[i])
            };
            if g < nuis.truncation {
                truncated += 1;
            }
            let g = g.max(nuis.truncation);
            let hit = treatment[i] == f64::from(u8::from(f));
            if hit {
                q + (outcome[i] - q) / g
            } else {
                q
            }
        })
        .collect();
    let diagnostics = Diagnostics {
        truncated_share: truncated as f64 / n as f64,
        near_tie_share: near_tie as f64 / n as f64,
    };
    Ok(CoarsenedEstimate {
        estimate: from_terms(terms),
        diagnostics,
        fold_values: Vec::new(),
    })
}

/// One-step estimate of `P(Y = f(X))` under outcome missingness, with
/// `f = I{π_rule > 1/2}` and `π_rule = rule` or `nuis.pi` when `rule` is `None`.
///
/// Each term is `Q + Δ/g·(I{U = f} − Q)` with `Q = P(Y = f(X) | X)` from the
/// full `π`, and `g` raised to at least the truncation level.
pub fn onestep_accuracy_missing(
    observed: &[f64],
    masked_outcome: &[f64],
    nuis: &MissingNuisance,
    rule: Option<&[f64]>,
) -> Result<CoarsenedEstimate> {
    let n = masked_outcome.len();
    check_truncation(nuis.truncation)?;
    if n == 0 {
        return Err(VimError::Data("no observations".into()));
    }
    check_len("observation indicator", observed.len(), n)?;
    check_len("pi(x)", nuis.pi.len(), n)?;
    check_len("g(x)", nuis.g.len(), n)?;
    let rule = rule.unwrap_or(&nuis.pi);
    check_len("rule scores", rule.len(), n)?;
    if observed.iter().all(|&o| o == 0.0) {
        return Err(VimError::Data("every outcome is missing".into()));
    }
    let mut truncated = 0usize;
    let terms: Vec<f64> = (0..n)
        .map(|i| {
            let f = if rule[i] > 0.5 { 1.0 } else { 0.0 };
            let q = if f == 1.0 { nuis.pi[i] } else { 1.0 - nuis.pi[i] };
            if observed[i] == 0.0 {
                return q;
            }
            if nuis.g[i] < nuis.truncation {
                truncated += 1;
            }
            let g = nuis.g[i].max(nuis.truncation);
            let hit = if masked_outcome[i] == f { 1.0 } else { 0.0 };
            q + (hit - q) / g
        })
        .collect();
    Ok(CoarsenedEstimate {
        estimate: from_terms(terms),
        diagnostics: Diagnostics {
            truncated_share: truncated as f64 / n as f64,
            near_tie_share: 0.0,
        },
        fold_values: Vec::new(),
    })
}

/// Contrast of two coarsened-data estimates computed on disjoint halves.
/// Refuses when both supports are known and overlap.
pub fn coarsened_vim(
    full: &PredictivenessEstimate,
    reduced: &PredictivenessEstimate,
    beta: f64,
    alpha: f64,
) -> Result<VimResult> {
    if let (Some(a), Some(b)) = (&full.support, &reduced.support) {
        let mut seen = vec![false; a.iter().chain(b).max().map_or(0, |m| m + 1)];
        for &i in a {
            seen[i] = true;
        }
        if b.iter().any(|&i| seen[i]) {
            return Err(VimError::Config(
                "testing requires full and reduced estimates on disjoint samples".into(),
            ));
        }
    }
    split_contrast(full, reduced, beta, alpha)
}

/// Learners and fold settings for cross-fitting coarsened-data nuisances.
#[derive(Debug, Clone)]
pub struct CoarsenedConfig {
    pub folds: usize,
    pub seed: u64,
    /// Fits `Q(a, ·)` within each arm, or `π` on complete cases.
    pub outcome_learner: Arc<dyn Learner>,
    /// Fits the treatment or observation propensity.
    pub propensity_learner: Arc<dyn Learner>,
    /// Regresses nuisance predictions onto the kept columns.
    pub reduced_learner: Arc<dyn Learner>,
    pub truncation: f64,
    pub beta: f64,
    pub alpha: f64,
    pub fold_options: FoldOptions,
}

impl CoarsenedConfig {
    /// Five folds, logistic propensities, boosted stumps for the reduced
    /// regression, truncation 0.025, `β = 0`, `α = 0.05`.
    pub fn new(outcome_learner: Arc<dyn Learner>) -> Self {
        CoarsenedConfig {
            folds: 5,
            seed: 0,
            outcome_learner,
            propensity_learner: Arc::new(LogisticLearner::default()),
            reduced_learner: Arc::new(BoostedStumps::default()),
            truncation: DEFAULT_TRUNCATION,
            beta: 0.0,
            alpha: 0.05,
            fold_options: FoldOptions::default(),
        }
    }

    fn seed_for(&self, fold: usize, role: u64) -> u64 {
        derive_seed(self.seed, (1 << 40) + 8 * fold as u64 + role)
    }
}

/// Fits on `train` and predicts on `test_x`, with a constant prediction when
/// the training outcome is constant.
fn fit_predict(
    learner: &dyn Learner,
    train: &Dataset,
    test_x: &DMatrix<f64>,
    seed: u64,
) -> Result<Vec<f64>> {
    let y = train.outcome();
    if y.iter().all(|&v| v == y[0]) {
        return Ok(vec![y[0]; test_x.nrows()]);
    }
    Ok(learner.fit(train, seed)?.predict(test_x))
}

/// Regresses `pseudo` (indexed like `train`) onto the columns outside `s`
/// and predicts on `test_x`.
fn reduced_regression(
    learner: &dyn Learner,
    train: &Dataset,
    pseudo: Vec<f64>,
    s: &FeatureSet,
    test_x: &DMatrix<f64>,
    seed: u64,
) -> Result<Vec<f64>> {
    let first = pseudo[0];
    if pseudo.iter().all(|&v| v == first) {
        return Ok(vec![first; test_x.nrows()]);
    }
    let d = train.with_outcome(pseudo, OutcomeKind::Continuous)?;
    Ok(fit_reduced(learner, &d, s, seed)?.predict(test_x))
}

fn arm_rows(treatment: &[f64], rows: &[usize], arm: f64) -> Vec<usize> {
    rows.iter().copied().filter(|&i| treatment[i] == arm).collect()
}

fn fold_split(rows: &[usize], labels: &[u32], k: usize) -> (Vec<usize>, Vec<usize>) {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (&i, &l) in rows.iter().zip(labels) {
        if l as usize == k {
            test.push(i);
        } else {
            train.push(i);
        }
    }
    (train, test)
}

/// Pools per-fold estimates in fold order.
fn pool(per_fold: Vec<Result<(CoarsenedEstimate, Vec<usize>)>>) -> Result<CoarsenedEstimate> {
    let k = per_fold.len();
    let mut fold_values = Vec::with_capacity(k);
    let mut eif = Vec::new();
    let mut support = Vec::new();
    let mut truncated = 0.0;
    let mut near_tie = 0.0;
    for r in per_fold {
        let (est, rows) = r?;
        let m = rows.len() as f64;
        truncated += est.diagnostics.truncated_share * m;
        near_tie += est.diagnostics.near_tie_share * m;
        fold_values.push(est.estimate.value);
        eif.extend(est.estimate.eif_values);
        support.extend(rows);
    }
    let n = support.len() as f64;
    let value = fold_values.iter().sum::<f64>() / k as f64;
    let out = CoarsenedEstimate {
        estimate: PredictivenessEstimate::from_eif(value, eif).with_support(support),
        diagnostics: Diagnostics {
            truncated_share: truncated / n,
            near_tie_share: near_tie / n,
        },
        fold_values,
    };
    out.diagnostics.warn();
    Ok(out)
}

/// Cross-fitted rule value over `rows` with fold `labels`. With `s` given,
/// the rule uses only the columns outside `s`.
pub fn crossfit_rule_value(
    d: &TreatmentDataset,
    rows: &[usize],
    labels: &[u32],
    s: Option<&FeatureSet>,
    cfg: &CoarsenedConfig,
) -> Result<CoarsenedEstimate> {
    check_truncation(cfg.truncation)?;
    let a = d.treatment();
    let per_fold = (0..cfg.folds)
        .into_par_iter()
        .map(|k| {
            let (train, test) = fold_split(rows, labels, k);
            let test_x = d.features().select_rows(test.iter());
            let train_x = d.features().select_rows(train.iter());
            let mut q = Vec::with_capacity(2);
            let mut q_train = Vec::with_capacity(2);
            for arm in [0.0, 1.0] {
                let arm_train = arm_rows(a, &train, arm);
                if arm_train.is_empty() {
                    return Err(VimError::FoldDegenerate {
                        fold: k,
                        reason: format!("no training rows with treatment {arm}"),
                    });
                }
                let arm_d = d.base().subset_rows(&arm_train);
                let seed = cfg.seed_for(k, arm as u64);
                let y = arm_d.outcome();
                if y.iter().all(|&v| v == y[0]) {
                    q.push(vec![y[0]; test.len()]);
                    q_train.push(vec![y[0]; train.len()]);
                } else {
                    let model = cfg.outcome_learner.fit(&arm_d, seed)?;
                    q.push(model.predict(&test_x));
                    q_train.push(model.predict(&train_x));
                }
            }
            let train_a = d
                .base()
                .subset_rows(&train)
                .with_outcome(train.iter().map(|&i| a[i]).collect(), OutcomeKind::Binary)?;
            let g1 = fit_predict(
                cfg.propensity_learner.as_ref(),
                &train_a,
                &test_x,
                cfg.seed_for(k, 2),
            )?;
            let (q1, q0) = (q.pop().unwrap(), q.pop().unwrap());
            let nuis = RuleNuisance {
                q0,
                q1,
                g1,
                truncation: cfg.truncation,
            };
            let rule = match s {
                None => None,
                Some(s) => {
                    let train_d = d.base().subset_rows(&train);
                    let (qt1, qt0) = (q_train.pop().unwrap(), q_train.pop().unwrap());
                    let r0 = reduced_regression(
                        cfg.reduced_learner.as_ref(),
                        &train_d,
                        qt0,
                        s,
                        &test_x,
                        cfg.seed_for(k, 3),
                    )?;
                    let r1 = reduced_regression(
                        cfg.reduced_learner.as_ref(),
                        &train_d,
                        qt1,
                        s,
                        &test_x,
                        cfg.seed_for(k, 4),
                    )?;
                    Some(RuleScores { q0: r0, q1: r1 })
                }
            };
            let ta: Vec<f64> = test.iter().map(|&i| a[i]).collect();
            let ty: Vec<f64> = test.iter().map(|&i| d.outcome()[i]).collect();
            let est = onestep_rule_value(&ta, &ty, &nuis, rule.as_ref())?;
            Ok((est, test))
        })
        .collect();
    pool(per_fold)
}

/// Cross-fitted accuracy under missingness over `rows` with fold `labels`.
/// With `s` given, the classifier uses only the columns outside `s`.
pub fn crossfit_accuracy_missing(
    d: &MissingnessDataset,
    rows: &[usize],
    labels: &[u32],
    s: Option<&FeatureSet>,
    cfg: &CoarsenedConfig,
) -> Result<CoarsenedEstimate> {
    check_truncation(cfg.truncation)?;
    let delta = d.observed();
    let per_fold = (0..cfg.folds)
        .into_par_iter()
        .map(|k| {
            let (train, test) = fold_split(rows, labels, k);
            let test_x = d.features().select_rows(test.iter());
            let complete = arm_rows(delta, &train, 1.0);
            if complete.is_empty() {
                return Err(VimError::FoldDegenerate {
                    fold: k,
                    reason: "no observed outcomes in the training folds".into(),
                });
            }
            let cc = d.base().subset_rows(&complete);
            let pi_model = {
                let y = cc.outcome();
                if y.iter().all(|&v| v == y[0]) {
                    None
                } else {
                    Some(cfg.outcome_learner.fit(&cc, cfg.seed_for(k, 0))?)
                }
            };
            let first = cc.outcome()[0];
            let predict_pi = |x: &DMatrix<f64>| match &pi_model {
                Some(m) => m.predict(x),
                None => vec![first; x.nrows()],
            };
            let pi = predict_pi(&test_x);
            let train_delta = d
                .base()
                .subset_rows(&train)
                .with_outcome(train.iter().map(|&i| delta[i]).collect(), OutcomeKind::Binary)?;
            let g = fit_predict(
                cfg.propensity_learner.as_ref(),
                &train_delta,
                &test_x,
                cfg.seed_for(k, 2),
            )?;
            let rule = match s {
                None => None,
                Some(s) => {
                    let train_d = d.base().subset_rows(&train);
                    let pseudo = predict_pi(train_d.features());
                    let r = reduced_regression(
                        cfg.reduced_learner.as_ref(),
                        &train_d,
                        pseudo,
                        s,
                        &test_x,
                        cfg.seed_for(k, 3),
                    )?;
                    Some(r.into_iter().map(|v| v.clamp(0.0, 1.0)).collect::<Vec<_>>())
                }
            };
            let nuis = MissingNuisance {
                pi,
                g,
                truncation: cfg.truncation,
            };
            let to: Vec<f64> = test.iter().map(|&i| delta[i]).collect();
            let tu: Vec<f64> = test.iter().map(|&i| d.masked_outcome()[i]).collect();
            let est = onestep_accuracy_missing(&to, &tu, &nuis, rule.as_deref())?;
            Ok((est, test))
        })
        .collect();
    pool(per_fold)
}

fn plan_layout(n: usize, split: bool, cfg: &CoarsenedConfig) -> Result<Vec<(Vec<usize>, Vec<u32>)>> {
    let plan = make_fold_plan_with(n, cfg.folds, split, cfg.seed, &cfg.fold_options, None)?;
    Ok(if split {
        vec![plan.half_layout(0), plan.half_layout(1)]
    } else {
        vec![plan.half_layout(0)]
    })
}

/// Cross-fitted value of the estimated optimal rule on all of `d`.
pub fn rule_value(d: &TreatmentDataset, cfg: &CoarsenedConfig) -> Result<CoarsenedEstimate> {
    let layout = plan_layout(d.n(), false, cfg)?;
    crossfit_rule_value(d, &layout[0].0, &layout[0].1, None, cfg)
}

/// Importance of `s` for the rule value with the sample-split test: the full
/// rule is estimated on half 0 and the reduced rule on half 1.
pub fn rule_value_vim(d: &TreatmentDataset, s: &FeatureSet, cfg: &CoarsenedConfig) -> Result<VimResult> {
    s.check(d.base().p())?;
    let layout = plan_layout(d.n(), true, cfg)?;
    let full = crossfit_rule_value(d, &layout[0].0, &layout[0].1, None, cfg)?;
    let reduced = crossfit_rule_value(d, &layout[1].0, &layout[1].1, Some(s), cfg)?;
    coarsened_vim(&full.estimate, &reduced.estimate, cfg.beta, cfg.alpha)
}

/// Cross-fitted accuracy of the estimated Bayes classifier on all of `d`.
pub fn accuracy_missing(d: &MissingnessDataset, cfg: &CoarsenedConfig) -> Result<CoarsenedEstimate> {
    let layout = plan_layout(d.n(), false, cfg)?;
    crossfit_accuracy_missing(d, &layout[0].0, &layout[0].1, None, cfg)
}

/// Importance of `s` for accuracy under missingness with the sample-split test.
pub fn accuracy_missing_vim(
    d: &MissingnessDataset,
    s: &FeatureSet,
    cfg: &CoarsenedConfig,
) -> Result<VimResult> {
    s.check(d.base().p())?;
    let layout = plan_layout(d.n(), true, cfg)?;
    let full = crossfit_accuracy_missing(d, &layout[0].0, &layout[0].1, None, cfg)?;
    let reduced = crossfit_accuracy_missing(d, &layout[1].0, &layout[1].1, Some(s), cfg)?;
    coarsened_vim(&full.estimate, &reduced.estimate, cfg.beta, cfg.alpha)
}
