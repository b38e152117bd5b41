//! Sample mean, ridge-stabilized least squares and logistic regression.

use nalgebra::{DMatrix, DVector};

use super::{expit, logit, FittedModel, Learner};
use crate::data::{Dataset, OutcomeKind};
use crate::error::{Result, VimError};

pub(crate) const DEFAULT_MAX_ITER: usize = 100;
pub(crate) const DEFAULT_TOL: f64 = 1e-8;
/// Per-observation ridge penalty on slopes.
const RIDGE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, Default)]
pub struct MeanLearner;

#[derive(Debug, Clone, PartialEq)]
pub struct MeanModel {
    pub mean: f64,
}

impl FittedModel for MeanModel {
    fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        vec![self.mean; x.nrows()]
    }
}

pub fn fit_intercept_only(d: &Dataset) -> MeanModel {
    let y = d.outcome();
    MeanModel {
        mean: y.iter().sum::<f64>() / y.len() as f64,
    }
}

impl Learner for MeanLearner {
    fn name(&self) -> String {
        "mean".into()
    }

    fn fit(&self, d: &Dataset, _seed: u64) -> Result<Box<dyn FittedModel>> {
        Ok(Box::new(fit_intercept_only(d)))
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LinearLearner;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub intercept: f64,
    pub slopes: Vec<f64>,
    /// Clip predictions to `[0, 1]` (binary outcomes).
    pub clip_unit: bool,
}

impl FittedModel for LinearModel {
    fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        (0..x.nrows())
            .map(|i| {
                let v = self.intercept
                    + self
                        .slopes
                        .iter()
                        .enumerate()
                        .map(|(j, b)| b * x[(i, j)])
                        .sum::<f64>();
                if self.clip_unit {
                    v.clamp(0.0, 1.0)
                } else {
                    v
                }
            })
            .collect()
    }
}

/// Least squares on centered columns with a tiny ridge on the slopes, so the
/// normal equations are always solvable.
pub fn fit_linear(d: &Dataset) -> Result<LinearModel> {
    let x = d.features();
    let y = d.outcome();
    let (n, p) = x.shape();
    let nf = n as f64;
    let x_mean: Vec<f64> = (0..p).map(|j| x.column(j).sum() / nf).collect();
    let y_mean = y.iter().sum::<f64>() / nf;
    let xc = DMatrix::from_fn(n, p, |i, j| x[(i, j)] - x_mean[j]);
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
    let mut gram = xc.transpose() * &xc;
    for j in 0..p {
        gram[(j, j)] += RIDGE * nf;
    }
    let rhs = xc.transpose() * yc;
    let beta = solve_spd(gram, &rhs).ok_or_else(|| VimError::Learner {
        learner: "linear".into(),
        reason: "normal equations are not positive definite".into(),
    })?;
    let slopes: Vec<f64> = beta.iter().copied().collect();
    let intercept = y_mean - slopes.iter().zip(&x_mean).map(|(b, m)| b * m).sum::<f64>();
    Ok(LinearModel {
        intercept,
        slopes,
        clip_unit: d.kind() == OutcomeKind::Binary,
    })
}

impl Learner for LinearLearner {
    fn name(&self) -> String {
        "linear".into()
    }

    fn fit(&self, d: &Dataset, _seed: u64) -> Result<Box<dyn FittedModel>> {
        Ok(Box::new(fit_linear(d)?))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LogisticLearner {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for LogisticLearner {
    fn default() -> Self {
        LogisticLearner {
            max_iter: DEFAULT_MAX_ITER,
            tol: DEFAULT_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    pub intercept: f64,
    pub slopes: Vec<f64>,
    pub iterations: usize,
    /// Largest absolute mean score at termination was below tolerance.
    pub converged: bool,
    /// Training labels were (nearly) perfectly separated; the coefficients are
    /// the ridge-regularized solution.
    pub separated: bool,
}

impl LogisticModel {
    fn linear_predictor(&self, x: &DMatrix<f64>, i: usize) -> f64 {
        self.intercept
            + self
                .slopes
                .iter()
                .enumerate()
                .map(|(j, b)| b * x[(i, j)])
                .sum::<f64>()
    }
}

impl FittedModel for LogisticModel {
    fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        (0..x.nrows())
            .map(|i| expit(self.linear_predictor(x, i)))
            .collect()
    }
}

/// Logistic regression by Newton–Raphson (IRLS) with step halving.
///
/// Maximizes `n⁻¹ Σ ℓᵢ(β) − (λ/2)‖slopes‖²` with `λ = 1e-8`. Iteration stops
/// once the largest absolute component of the penalized mean score falls below
/// `tol`, or after `max_iter` Newton steps. Outcomes may be any values in
/// `[0, 1]`; non-binary values give the quasi-binomial fit.
pub fn fit_logistic(d: &Dataset, max_iter: usize, tol: f64) -> Result<LogisticModel> {
    let y = d.outcome();
    if y.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(VimError::Learner {
            learner: "logistic".into(),
            reason: "outcomes must lie in [0, 1]".into(),
        });
    }
    let x = d.features();
    let (n, p) = x.shape();
    let nf = n as f64;
    let dim = p + 1;
    let design = |i: usize, j: usize| if j == 0 { 1.0 } else { x[(i, j - 1)] };

    let y_mean = y.iter().sum::<f64>() / nf;
    let mut beta = DVector::zeros(dim);
    beta[0] = logit(y_mean.clamp(1e-6, 1.0 - 1e-6));

    let eta_of = |b: &DVector<f64>| -> Vec<f64> {
        (0..n)
            .map(|i| (0..dim).map(|j| design(i, j) * b[j]).sum())
            .collect()
    };
    let objective = |b: &DVector<f64>, eta: &[f64]| -> f64 {
        let ll: f64 = eta
            .iter()
            .zip(y)
            .map(|(&e, &yi)| yi * e - softplus(e))
            .sum::<f64>()
            / nf;
        ll - 0.5 * RIDGE * b.rows(1, p).norm_squared()
    };

    let mut eta = eta_of(&beta);
    let mut obj = objective(&beta, &eta);
    let mut converged = false;
    let mut iterations = 0;
    loop {
        let prob: Vec<f64> = eta.iter().map(|&e| expit(e)).collect();
        let mut grad = DVector::zeros(dim);
        let mut hess = DMatrix::zeros(dim, dim);
        for i in 0..n {
            let r = y[i] - prob[i];
            let w = prob[i] * (1.0 - prob[i]);
            for a in 0..dim {
                let xa = design(i, a);
                grad[a] += xa * r;
                for b in a..dim {
                    hess[(a, b)] += w * xa * design(i, b);
                }
            }
        }
        grad /= nf;
        hess /= nf;
        for a in 0..dim {
            for b in 0..a {
                hess[(a, b)] = hess[(b, a)];
            }
        }
        for j in 1..dim {
            grad[j] -= RIDGE * beta[j];
            hess[(j, j)] += RIDGE;
        }
        if grad.amax() < tol {
            converged = true;
            break;
        }
        if iterations == max_iter {
            break;
        }
        iterations += 1;
        hess[(0, 0)] += 1e-12;
        let step = match solve_spd(hess.clone(), &grad) {
            Some(s) => s,
            None => {
                // Weights underflowed; fall back to a gradient step.
                grad.clone()
            }
        };
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let cand = &beta + &step * t;
            let cand_eta = eta_of(&cand);
            let cand_obj = objective(&cand, &cand_eta);
            if cand_obj >= obj - 1e-15 * obj.abs() {
                beta = cand;
                eta = cand_eta;
                obj = cand_obj;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let separated = (0..n).all(|i| (y[i] - expit(eta[i])).abs() < 1e-3);
    Ok(LogisticModel {
        intercept: beta[0],
        slopes: beta.iter().skip(1).copied().collect(),
        iterations,
        converged,
        separated,
    })
}

impl Learner for LogisticLearner {
    fn name(&self) -> String {
        "logistic".into()
    }

    fn fit(&self, d: &Dataset, _seed: u64) -> Result<Box<dyn FittedModel>> {
        let model = fit_logistic(d, self.max_iter, self.tol)?;
        if !model.converged {
            log::debug!(
                "logistic regression stopped after {} iterations without converging",
                model.iterations
            );
        }
        Ok(Box::new(model))
    }
}

#[inline]
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub(crate) fn solve_spd(a: DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let sol = a.cholesky()?.solve(b);
    sol.iter().all(|v| v.is_finite()).then_some(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SimRng;

    fn column_data(x: &[f64], y: &[f64]) -> Dataset {
        let rows: Vec<Vec<f64>> = x.iter().map(|&v| vec![v]).collect();
        Dataset::from_rows(&rows, y.to_vec()).unwrap()
    }

    #[test]
    fn intercept_only_predicts_mean() {
        let d = column_data(&[5.0, 6.0, 7.0], &[0.0, 1.0, 1.0]);
        let m = fit_intercept_only(&d);
        assert_eq!(m.predict(&DMatrix::from_element(2, 1, 4.0)), vec![2.0 / 3.0; 2]);
        let d1 = column_data(&[1.0, 2.0], &[1.0, 1.0]);
        assert_eq!(fit_intercept_only(&d1).mean, 1.0);
        let dc = column_data(&[1.0, 2.0], &[0.2, 0.8]);
        assert_eq!(fit_intercept_only(&dc).mean, 0.5);
    }

    #[test]
    fn logistic_symmetric_case() {
        let d = column_data(&[1.0, 1.0, 2.0, 2.0], &[0.0, 1.0, 0.0, 1.0]);
        let m = fit_logistic(&d, 100, 1e-8).unwrap();
        assert!(m.slopes[0].abs() < 1e-6);
        assert!(m.intercept.abs() < 1e-6);
        assert!(m.converged);
    }

    #[test]
    fn logistic_constant_feature_predicts_prevalence() {
        let d = column_data(&[3.0; 5], &[0.0, 1.0, 1.0, 0.0, 1.0]);
        let m = fit_logistic(&d, 100, 1e-8).unwrap();
        for p in m.predict(d.features()) {
            assert!((p - 0.6).abs() < 1e-8);
        }
    }

    #[test]
    fn logistic_separation_is_flagged_not_fatal() {
        let d = column_data(&[-2.0, -1.0, 1.0, 2.0], &[0.0, 0.0, 1.0, 1.0]);
        let m = fit_logistic(&d, 100, 1e-8).unwrap();
        assert!(m.separated);
        assert!(m.slopes[0] > 0.0);
        let p = m.predict(d.features());
        assert!(p[0] < 0.01 && p[3] > 0.99);
    }

    #[test]
    fn linear_exact_slope() {
        let x = [0.5, 1.0, -2.0, 3.0, 4.5];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let m = fit_linear(&column_data(&x, &y)).unwrap();
        assert!((m.slopes[0] - 2.0).abs() < 1e-6);
        assert!(m.intercept.abs() < 1e-6);
    }

    #[test]
    fn linear_constant_outcome() {
        let m = fit_linear(&column_data(&[1.0, 2.0, 4.0], &[3.5, 3.5, 3.5])).unwrap();
        assert!(m.slopes[0].abs() < 1e-12);
        assert!((m.intercept - 3.5).abs() < 1e-12);
    }

    #[test]
    fn linear_residuals_orthogonal_to_columns() {
        let mut rng = SimRng::new(8);
        let n = 50;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..3).map(|_| rng.normal_pair().0).collect())
            .collect();
        let y: Vec<f64> = rows
            .iter()
            .map(|r| 1.0 + r[0] - 0.5 * r[2] + rng.normal_pair().0)
            .collect();
        let d = Dataset::from_rows(&rows, y.clone()).unwrap();
        let pred = fit_linear(&d).unwrap().predict(d.features());
        let r: Vec<f64> = y.iter().zip(&pred).map(|(a, b)| a - b).collect();
        // Intercept column and each feature column.
        assert!(r.iter().sum::<f64>().abs() <= 1e-6 * n as f64);
        for j in 0..3 {
            let dot: f64 = (0..n).map(|i| rows[i][j] * r[i]).sum();
            assert!(dot.abs() <= 1e-6 * n as f64, "column {j}: {dot}");
        }
    }

    #[test]
    fn linear_clips_binary_predictions() {
        let d = column_data(&[0.0, 1.0, 2.0, 3.0], &[0.0, 0.0, 1.0, 1.0]);
        let m = fit_linear(&d).unwrap();
        let p = m.predict(&DMatrix::from_column_slice(2, 1, &[-10.0, 10.0]));
        assert_eq!(p, vec![0.0, 1.0]);
    }
}
