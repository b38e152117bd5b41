//! Plug-in, cross-fitted and sample-split estimators of variable importance.
//!
//! All fold work runs on the ambient rayon pool and is reduced in fold order,
//! so results do not depend on the number of threads. Use [`with_threads`] to
//! bound parallelism.

use std::sync::Arc;

use rayon::prelude::*;

use crate::data::{Dataset, FeatureSet};
use crate::error::{ErrorClass, Result, VimError};
use crate::folds::{make_fold_plan_with, FoldOptions, FoldPlan};
use crate::inference::{check_levels, paired_contrast, split_contrast};
use crate::learners::{fit_reduced, FittedModel, Learner, LogisticLearner};
use crate::measures::{Measure, MeasureKind};
use crate::result::{PredictivenessEstimate, VimResult};
use crate::rng::derive_seed;

/// Stream offset for learner seeds, so they never coincide with the plan seed.
const FIT_STREAM: u64 = 1 << 32;

#[derive(Debug, Clone)]
pub struct EstimationConfig {
    pub measure: Measure,
    pub folds: usize,
    pub cross_fit: bool,
    pub sample_split: bool,
    pub beta: f64,
    pub alpha: f64,
    pub seed: u64,
    pub learner: Arc<dyn Learner>,
    pub fold_options: FoldOptions,
    /// Preserve outcome proportions across folds.
    pub stratify: bool,
}

impl EstimationConfig {
    /// Five folds, cross-fitting and sample splitting on, `β = 0`, `α = 0.05`.
    pub fn new(measure: impl Into<Measure>, learner: Arc<dyn Learner>) -> Self {
        EstimationConfig {
            measure: measure.into(),
            folds: 5,
            cross_fit: true,
            sample_split: true,
            beta: 0.0,
            alpha: 0.05,
            seed: 0,
            learner,
            fold_options: FoldOptions::default(),
            stratify: false,
        }
    }

    /// Same as [`EstimationConfig::new`] with a logistic regression learner.
    pub fn logistic(measure: MeasureKind) -> Self {
        EstimationConfig::new(measure, Arc::new(LogisticLearner::default()))
    }

    pub fn validate(&self) -> Result<()> {
        check_levels(self.beta, self.alpha)?;
        if self.folds < 2 {
            return Err(VimError::Config(format!(
                "need at least 2 folds, got {}",
                self.folds
            )));
        }
        Ok(())
    }

    pub fn fold_plan(&self, d: &Dataset, split: bool) -> Result<FoldPlan> {
        let strata = self.stratify.then(|| d.outcome());
        make_fold_plan_with(d.n(), self.folds, split, self.seed, &self.fold_options, strata)
    }

    fn check(&self, d: &Dataset, s: Option<&FeatureSet>) -> Result<()> {
        self.validate()?;
        self.measure.check_outcome_kind(d.kind())?;
        if let Some(s) = s {
            s.check(d.p())?;
            if s.complement(d.p()).is_empty() {
                return Err(VimError::EmptyReduced { p: d.p() });
            }
        }
        Ok(())
    }
}

/// Which columns a predictiveness estimate uses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Columns {
    All,
    Without(FeatureSet),
}

impl Columns {
    fn fit(
        &self,
        learner: &dyn Learner,
        d: &Dataset,
        seed: u64,
    ) -> Result<Box<dyn FittedModel>> {
        match self {
            Columns::All => learner.fit(d, seed),
            Columns::Without(s) => Ok(Box::new(fit_reduced(learner, d, s, seed)?)),
        }
    }
}

/// Cross-fitted predictiveness with the per-fold values behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossFit {
    /// `value` is the mean of `fold_values`; influence values are pooled in
    /// fold order and `support` lists the matching rows of the dataset.
    pub estimate: PredictivenessEstimate,
    pub fold_values: Vec<f64>,
    pub fold_sizes: Vec<usize>,
}

/// Cross-fits `columns` over the observations `rows`, whose fold labels are
/// `labels`. Fold `k`'s model is fit on the other folds of `rows`.
pub fn crossfit_rows(
    d: &Dataset,
    columns: &Columns,
    rows: &[usize],
    labels: &[u32],
    folds: usize,
    cfg: &EstimationConfig,
) -> Result<CrossFit> {
    if rows.len() != labels.len() {
        return Err(VimError::Data("rows and fold labels differ in length".into()));
    }
    let per_fold: Vec<Result<(PredictivenessEstimate, Vec<usize>)>> = (0..folds)
        .into_par_iter()
        .map(|k| {
            let mut train = Vec::new();
            let mut test = Vec::new();
            for (&i, &l) in rows.iter().zip(labels) {
                if l as usize == k {
                    test.push(i);
                } else {
                    train.push(i);
                }
            }
            let seed = derive_seed(cfg.seed, FIT_STREAM + k as u64);
            let model = columns.fit(cfg.learner.as_ref(), &d.subset_rows(&train), seed)?;
            let x_test = d.features().select_rows(test.iter());
            let y_test: Vec<f64> = test.iter().map(|&i| d.outcome()[i]).collect();
            let mu = model.predict(&x_test);
            let est = cfg.measure.predictiveness(&mu, &y_test).map_err(|e| {
                match e.class() {
                    ErrorClass::Degenerate => VimError::FoldDegenerate {
                        fold: k,
                        reason: e.to_string(),
                    },
                    _ => e,
                }
            })?;
            Ok((est, test))
        })
        .collect();

    let mut fold_values = Vec::with_capacity(folds);
    let mut fold_sizes = Vec::with_capacity(folds);
    let mut eif = Vec::with_capacity(rows.len());
    let mut support = Vec::with_capacity(rows.len());
    for r in per_fold {
        let (est, test) = r?;
        fold_values.push(est.value);
        fold_sizes.push(test.len());
        eif.extend(est.eif_values);
        support.extend(test);
    }
    let value = fold_values.iter().sum::<f64>() / folds as f64;
    Ok(CrossFit {
        estimate: PredictivenessEstimate::from_eif(value, eif).with_support(support),
        fold_values,
        fold_sizes,
    })
}

/// K-fold cross-fitted predictiveness of `columns` on all of `d`.
pub fn crossfit_predictiveness(
    d: &Dataset,
    columns: &Columns,
    cfg: &EstimationConfig,
) -> Result<CrossFit> {
    cfg.check(d, match columns {
        Columns::All => None,
        Columns::Without(s) => Some(s),
    })?;
    let plan = cfg.fold_plan(d, false)?;
    let (rows, labels) = plan.half_layout(0);
    crossfit_rows(d, columns, &rows, &labels, cfg.folds, cfg)
}

/// Predictiveness of a model fit and evaluated on the same `rows`.
fn plugin_predictiveness(
    d: &Dataset,
    columns: &Columns,
    rows: &[usize],
    cfg: &EstimationConfig,
) -> Result<PredictivenessEstimate> {
    let sub = d.subset_rows(rows);
    let model = columns.fit(cfg.learner.as_ref(), &sub, derive_seed(cfg.seed, FIT_STREAM))?;
    let mu = model.predict(sub.features());
    Ok(cfg
        .measure
        .predictiveness(&mu, sub.outcome())?
        .with_support(rows.to_vec()))
}

/// Plug-in estimator: both models fit and evaluated on the full sample.
///
/// With `cfg.sample_split` on, the full model instead uses half 0 and the
/// reduced model half 1 of the split, and the result carries a valid test.
pub fn plugin_vim(d: &Dataset, s: &FeatureSet, cfg: &EstimationConfig) -> Result<VimResult> {
    cfg.check(d, Some(s))?;
    let reduced_cols = Columns::Without(s.clone());
    if cfg.sample_split {
        let plan = cfg.fold_plan(d, true)?;
        let full = plugin_predictiveness(d, &Columns::All, &plan.half_rows(0), cfg)?;
        let reduced = plugin_predictiveness(d, &reduced_cols, &plan.half_rows(1), cfg)?;
        return split_contrast(&full, &reduced, cfg.beta, cfg.alpha);
    }
    let rows: Vec<usize> = (0..d.n()).collect();
    let full = plugin_predictiveness(d, &Columns::All, &rows, cfg)?;
    let reduced = plugin_predictiveness(d, &reduced_cols, &rows, cfg)?;
    paired_contrast(&full, &reduced, full.value - reduced.value, cfg.beta, cfg.alpha)
}

/// Cross-fitted estimator with both models on the same folds of the full
/// sample. The test fields are marked invalid since the contrast is
/// degenerate when the importance is zero.
pub fn crossfit_vim(d: &Dataset, s: &FeatureSet, cfg: &EstimationConfig) -> Result<VimResult> {
    cfg.check(d, Some(s))?;
    let plan = cfg.fold_plan(d, false)?;
    let (rows, labels) = plan.half_layout(0);
    let full = crossfit_rows(d, &Columns::All, &rows, &labels, cfg.folds, cfg)?;
    let reduced = crossfit_rows(
        d,
        &Columns::Without(s.clone()),
        &rows,
        &labels,
        cfg.folds,
        cfg,
    )?;
    let psi = full
        .fold_values
        .iter()
        .zip(&reduced.fold_values)
        .map(|(a, b)| a - b)
        .sum::<f64>()
        / cfg.folds as f64;
    paired_contrast(&full.estimate, &reduced.estimate, psi, cfg.beta, cfg.alpha)
}

/// Sample-split cross-fitted estimator and test of `ψ ≤ β`: the full model is
/// cross-fit on half 0 and the reduced model on half 1.
pub fn split_test_vim(d: &Dataset, s: &FeatureSet, cfg: &EstimationConfig) -> Result<VimResult> {
    cfg.check(d, Some(s))?;
    let plan = cfg.fold_plan(d, true)?;
    let (rows0, labels0) = plan.half_layout(0);
    let (rows1, labels1) = plan.half_layout(1);
    let full = crossfit_rows(d, &Columns::All, &rows0, &labels0, cfg.folds, cfg)?;
    let reduced = crossfit_rows(
        d,
        &Columns::Without(s.clone()),
        &rows1,
        &labels1,
        cfg.folds,
        cfg,
    )?;
    split_contrast(&full.estimate, &reduced.estimate, cfg.beta, cfg.alpha)
}

/// Dispatches on `cfg.cross_fit` and `cfg.sample_split`.
pub fn estimate_vim(d: &Dataset, s: &FeatureSet, cfg: &EstimationConfig) -> Result<VimResult> {
    if !cfg.sample_split {
        log::warn!(
            "sample splitting is off: the test of psi <= beta is not valid when the importance may be zero"
        );
    }
    match (cfg.cross_fit, cfg.sample_split) {
        (true, true) => split_test_vim(d, s, cfg),
        (true, false) => crossfit_vim(d, s, cfg),
        (false, _) => plugin_vim(d, s, cfg),
    }
}

/// Runs `f` on a dedicated pool of `threads` workers (0 picks the default).
pub fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| VimError::Config(format!("cannot start thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Thread count from `VIMKIT_THREADS`; unset, empty or 0 means automatic.
pub fn threads_from_env() -> Result<usize> {
    match std::env::var("VIMKIT_THREADS") {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .map_err(|_| VimError::Config(format!("VIMKIT_THREADS must be a count, got '{v}'"))),
        _ => Ok(0),
    }
}
