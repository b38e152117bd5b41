//! Cross-validated convex combination of base learners.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{FittedModel, Learner};
use crate::data::{Dataset, OutcomeKind};
use crate::error::{Result, VimError};
use crate::folds::make_fold_plan;
use crate::rng::derive_seed;

pub(crate) const DEFAULT_INNER_FOLDS: usize = 5;
/// Projected-gradient iteration budget for the weight search.
pub const WEIGHT_ITERATIONS: usize = 200;
const PROB_FLOOR: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StackLoss {
    /// Negative Bernoulli log-likelihood of the combined probability.
    LogLikelihood,
    SquaredError,
}

impl StackLoss {
    pub fn default_for(kind: OutcomeKind) -> StackLoss {
        match kind {
            OutcomeKind::Binary => StackLoss::LogLikelihood,
            OutcomeKind::Continuous => StackLoss::SquaredError,
        }
    }

    fn loss(self, y: &[f64], pred: &[f64]) -> f64 {
        let n = y.len() as f64;
        match self {
            StackLoss::LogLikelihood => {
                -y.iter()
                    .zip(pred)
                    .map(|(&y, &p)| {
                        let p = p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
                        y * p.ln() + (1.0 - y) * (1.0 - p).ln()
                    })
                    .sum::<f64>()
                    / n
            }
            StackLoss::SquaredError => {
                y.iter().zip(pred).map(|(y, p)| (y - p).powi(2)).sum::<f64>() / n
            }
        }
    }

    /// d loss / d prediction, per observation.
    fn dloss(self, y: f64, p: f64, n: f64) -> f64 {
        match self {
            StackLoss::LogLikelihood => {
                let p = p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
                -(y / p - (1.0 - y) / (1.0 - p)) / n
            }
            StackLoss::SquaredError => -2.0 * (y - p) / n,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StackSpec {
    pub learners: Vec<Arc<dyn Learner>>,
    pub inner_folds: usize,
    /// Defaults to [`StackLoss::default_for`] the outcome kind.
    pub loss: Option<StackLoss>,
}

#[derive(Debug, Clone)]
pub struct StackLearner {
    pub spec: StackSpec,
}

impl StackLearner {
    pub fn new(spec: StackSpec) -> Self {
        StackLearner { spec }
    }
}

#[derive(Debug)]
pub struct StackModel {
    pub names: Vec<String>,
    /// Non-negative, summing to one; zero for learners that failed.
    pub weights: Vec<f64>,
    /// Inner cross-validated loss of the combination.
    pub cv_loss: f64,
    /// Inner cross-validated loss of each base learner alone (`None` on failure).
    pub learner_cv_loss: Vec<Option<f64>>,
    models: Vec<(f64, Box<dyn FittedModel>)>,
}

impl FittedModel for StackModel {
    fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        let mut out = vec![0.0; x.nrows()];
        for (w, m) in &self.models {
            for (o, p) in out.iter_mut().zip(m.predict(x)) {
                *o += w * p;
            }
        }
        out
    }
}

/// Fits every base learner with inner K-fold cross-validation, finds convex
/// weights minimizing the cross-validated loss, then refits the learners with
/// positive weight on all of `d`.
///
/// The weight search starts at the best single learner and runs projected
/// gradient descent with backtracking for at most [`WEIGHT_ITERATIONS`]
/// steps, so the combination is never worse than any single learner on the
/// inner folds. A learner that fails to fit gets weight zero.
pub fn fit_stack(spec: &StackSpec, d: &Dataset, seed: u64) -> Result<StackModel> {
    if spec.learners.is_empty() {
        return Err(VimError::Config("stack needs at least one learner".into()));
    }
    let loss = spec.loss.unwrap_or_else(|| StackLoss::default_for(d.kind()));
    let n = d.n();
    let y = d.outcome();
    let names: Vec<String> = spec.learners.iter().map(|l| l.name()).collect();
    let plan = make_fold_plan(n, spec.inner_folds, false, seed)?;

    let mut cv_pred: Vec<Option<Vec<f64>>> = Vec::with_capacity(spec.learners.len());
    for (l, learner) in spec.learners.iter().enumerate() {
        let mut pred = vec![0.0; n];
        let mut ok = true;
        for k in 0..spec.inner_folds as u32 {
            let train: Vec<usize> = (0..n).filter(|&i| plan.fold[i] != k).collect();
            let test: Vec<usize> = (0..n).filter(|&i| plan.fold[i] == k).collect();
            let fit_seed = derive_seed(seed, (l * spec.inner_folds) as u64 + k as u64 + 1);
            match learner.fit(&d.subset_rows(&train), fit_seed) {
                Ok(model) => {
                    let x_test = d.features().select_rows(test.iter());
                    for (&i, p) in test.iter().zip(model.predict(&x_test)) {
                        pred[i] = p;
                    }
                }
                Err(e) => {
                    log::warn!("stack: learner {} failed on inner fold {k}: {e}", names[l]);
                    ok = false;
                    break;
                }
            }
        }
        cv_pred.push(ok.then_some(pred));
    }

    let learner_cv_loss: Vec<Option<f64>> = cv_pred
        .iter()
        .map(|p| p.as_ref().map(|p| loss.loss(y, p)))
        .collect();
    let alive: Vec<usize> = (0..cv_pred.len()).filter(|&l| cv_pred[l].is_some()).collect();
    if alive.is_empty() {
        return Err(VimError::Learner {
            learner: "stack".into(),
            reason: "every base learner failed".into(),
        });
    }
    let columns: Vec<&[f64]> = alive
        .iter()
        .map(|&l| cv_pred[l].as_deref().unwrap())
        .collect();
    let (w_alive, cv_loss) = optimize_weights(&columns, y, loss);

    let mut weights = vec![0.0; spec.learners.len()];
    for (&l, &w) in alive.iter().zip(&w_alive) {
        weights[l] = w;
    }
    let mut models = Vec::new();
    for (l, learner) in spec.learners.iter().enumerate() {
        if weights[l] <= 0.0 {
            continue;
        }
        match learner.fit(d, derive_seed(seed, 0)) {
            Ok(m) => models.push((weights[l], m)),
            Err(e) => {
                log::warn!("stack: learner {} failed on the full sample: {e}", names[l]);
                weights[l] = 0.0;
            }
        }
    }
    let total: f64 = models.iter().map(|(w, _)| w).sum();
    if models.is_empty() || total <= 0.0 {
        return Err(VimError::Learner {
            learner: "stack".into(),
            reason: "no learner with positive weight could be refit".into(),
        });
    }
    if total != 1.0 {
        for (w, _) in &mut models {
            *w /= total;
        }
        for w in &mut weights {
            *w /= total;
        }
    }
    Ok(StackModel {
        names,
        weights,
        cv_loss,
        learner_cv_loss,
        models,
    })
}

fn combine(columns: &[&[f64]], w: &[f64]) -> Vec<f64> {
    let n = columns[0].len();
    (0..n)
        .map(|i| columns.iter().zip(w).map(|(c, w)| w * c[i]).sum())
        .collect()
}

fn optimize_weights(columns: &[&[f64]], y: &[f64], loss: StackLoss) -> (Vec<f64>, f64) {
    let m = columns.len();
    let vertex_loss: Vec<f64> = columns.iter().map(|c| loss.loss(y, c)).collect();
    let best = (0..m)
        .min_by(|&a, &b| vertex_loss[a].total_cmp(&vertex_loss[b]))
        .unwrap();
    let mut w = vec![0.0; m];
    w[best] = 1.0;
    let mut current = vertex_loss[best];
    if m == 1 {
        return (w, current);
    }
    let n = y.len() as f64;
    let mut step = 1.0;
    for _ in 0..WEIGHT_ITERATIONS {
        let pred = combine(columns, &w);
        let dl: Vec<f64> = y.iter().zip(&pred).map(|(&y, &p)| loss.dloss(y, p, n)).collect();
        let grad: Vec<f64> = columns
            .iter()
            .map(|c| c.iter().zip(&dl).map(|(a, b)| a * b).sum())
            .collect();
        let mut moved = false;
        for _ in 0..60 {
            let cand: Vec<f64> = w.iter().zip(&grad).map(|(w, g)| w - step * g).collect();
            let cand = project_to_simplex(&cand);
            let delta: Vec<f64> = cand.iter().zip(&w).map(|(a, b)| a - b).collect();
            let lin: f64 = grad.iter().zip(&delta).map(|(g, d)| g * d).sum();
            let quad: f64 = delta.iter().map(|d| d * d).sum::<f64>() / (2.0 * step);
            let cand_loss = loss.loss(y, &combine(columns, &cand));
            if cand_loss <= current + lin + quad && cand_loss <= current {
                moved = delta.iter().any(|d| d.abs() > 1e-14);
                w = cand;
                current = cand_loss;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
        step *= 2.0;
    }
    (w, current)
}

/// Euclidean projection onto the probability simplex.
pub fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumulative += uj;
        let t = (cumulative - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

impl Learner for StackLearner {
    fn name(&self) -> String {
        let inner: Vec<String> = self.spec.learners.iter().map(|l| l.name()).collect();
        format!("stack[{}]", inner.join(","))
    }

    fn fit(&self, d: &Dataset, seed: u64) -> Result<Box<dyn FittedModel>> {
        Ok(Box::new(fit_stack(&self.spec, d, seed)?))
    }
}
