//! Gradient boosting with depth-one trees.

use nalgebra::DMatrix;

use super::glm::{fit_intercept_only, MeanModel};
use super::{expit, logit, FittedModel, Learner};
use crate::data::{Dataset, OutcomeKind};
use crate::error::{Result, VimError};

pub(crate) const DEFAULT_ROUNDS: usize = 200;
pub(crate) const DEFAULT_SHRINKAGE: f64 = 0.1;

#[derive(Debug, Clone, Copy)]
pub struct BoostedStumps {
    pub rounds: usize,
    pub shrinkage: f64,
}

impl Default for BoostedStumps {
    fn default() -> Self {
        BoostedStumps {
            rounds: DEFAULT_ROUNDS,
            shrinkage: DEFAULT_SHRINKAGE,
        }
    }
}

/// `x[feature] <= threshold ? left : right`, already scaled by the shrinkage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stump {
    pub feature: usize,
    pub threshold: f64,
    pub left: f64,
    pub right: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StumpModel {
    pub base: f64,
    pub stumps: Vec<Stump>,
    /// Scores are log-odds and predictions are squashed with the logistic.
    pub logistic: bool,
}

impl FittedModel for StumpModel {
    fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        (0..x.nrows())
            .map(|i| {
                let score = self.base
                    + self
                        .stumps
                        .iter()
                        .map(|s| {
                            if x[(i, s.feature)] <= s.threshold {
                                s.left
                            } else {
                                s.right
                            }
                        })
                        .sum::<f64>();
                if self.logistic {
                    expit(score)
                } else {
                    score
                }
            })
            .collect()
    }
}

/// Boosted depth-one trees on squared-error gradients (continuous outcomes) or
/// logistic gradients with Newton leaf values (binary outcomes).
/// Zero rounds yields the sample mean model.
pub fn fit_boosted_stumps(
    d: &Dataset,
    rounds: usize,
    shrinkage: f64,
) -> Result<Box<dyn FittedModel>> {
    if rounds == 0 {
        return Ok(Box::new(fit_intercept_only(d)));
    }
    if d.n() < 10 {
        return Err(VimError::Learner {
            learner: "boosted_stumps".into(),
            reason: format!("need at least 10 observations, got {}", d.n()),
        });
    }
    if !(shrinkage > 0.0 && shrinkage <= 1.0) {
        return Err(VimError::Config(format!(
            "shrinkage must lie in (0, 1], got {shrinkage}"
        )));
    }
    let x = d.features();
    let y = d.outcome();
    let (n, p) = x.shape();
    let logistic = d.kind() == OutcomeKind::Binary;
    let y_mean = y.iter().sum::<f64>() / n as f64;
    if logistic && (y_mean == 0.0 || y_mean == 1.0) {
        return Ok(Box::new(MeanModel { mean: y_mean }));
    }
    let base = if logistic { logit(y_mean) } else { y_mean };

    let orders: Vec<Vec<usize>> = (0..p)
        .map(|j| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| x[(a, j)].total_cmp(&x[(b, j)]));
            idx
        })
        .collect();

    let mut score = vec![base; n];
    let mut stumps = Vec::with_capacity(rounds);
    let mut grad = vec![0.0; n];
    let mut hess = vec![1.0; n];
    for _ in 0..rounds {
        for i in 0..n {
            if logistic {
                let pr = expit(score[i]);
                grad[i] = y[i] - pr;
                hess[i] = pr * (1.0 - pr);
            } else {
                grad[i] = y[i] - score[i];
            }
        }
        let Some(split) = best_split(x, &orders, &grad) else {
            break;
        };
        let (mut gl, mut hl, mut gr, mut hr) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            if x[(i, split.0)] <= split.1 {
                gl += grad[i];
                hl += hess[i];
            } else {
                gr += grad[i];
                hr += hess[i];
            }
        }
        let stump = Stump {
            feature: split.0,
            threshold: split.1,
            left: shrinkage * gl / hl.max(1e-12),
            right: shrinkage * gr / hr.max(1e-12),
        };
        for i in 0..n {
            score[i] += if x[(i, stump.feature)] <= stump.threshold {
                stump.left
            } else {
                stump.right
            };
        }
        stumps.push(stump);
    }
    Ok(Box::new(StumpModel {
        base,
        stumps,
        logistic,
    }))
}

/// Feature and threshold maximizing `G_L²/n_L + G_R²/n_R`. Earlier features
/// and smaller thresholds win ties.
fn best_split(x: &DMatrix<f64>, orders: &[Vec<usize>], grad: &[f64]) -> Option<(usize, f64)> {
    let n = grad.len();
    let total: f64 = grad.iter().sum();
    let baseline = total * total / n as f64;
    let mut best: Option<(f64, usize, f64)> = None;
    for (j, order) in orders.iter().enumerate() {
        let mut left = 0.0;
        for pos in 0..n - 1 {
            let i = order[pos];
            left += grad[i];
            let here = x[(i, j)];
            let next = x[(order[pos + 1], j)];
            if next <= here {
                continue;
            }
            let nl = (pos + 1) as f64;
            let nr = (n - pos - 1) as f64;
            let right = total - left;
            let gain = left * left / nl + right * right / nr - baseline;
            if best.is_none_or(|(g, _, _)| gain > g) {
                best = Some((gain, j, 0.5 * (here + next)));
            }
        }
    }
    best.filter(|(g, _, _)| *g > 1e-14).map(|(_, j, t)| (j, t))
}

impl Learner for BoostedStumps {
    fn name(&self) -> String {
        "boosted_stumps".into()
    }

    fn fit(&self, d: &Dataset, _seed: u64) -> Result<Box<dyn FittedModel>> {
        fit_boosted_stumps(d, self.rounds, self.shrinkage)
    }
}
