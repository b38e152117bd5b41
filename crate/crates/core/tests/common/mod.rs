//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use vimkit::rng::SimRng;
use vimkit::{Dataset, MeasureKind};

/// Random binary outcomes with at least one of each class, and real features.
pub fn random_binary(rng: &mut SimRng, n: usize, p: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    loop {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..p).map(|_| rng.normal_pair().0).collect())
            .collect();
        let y: Vec<f64> = rows
            .iter()
            .map(|r| f64::from(u8::from(rng.uniform() < 1.0 / (1.0 + (-r[0]).exp()))))
            .collect();
        let ones = y.iter().filter(|&&v| v == 1.0).count();
        if ones > 0 && ones < n {
            return (rows, y);
        }
    }
}

pub fn dataset(rows: &[Vec<f64>], y: Vec<f64>) -> Dataset {
    Dataset::from_rows(rows, y).unwrap()
}

/// Exhaustive pairwise AUC with half-ties, as a single quotient.
pub fn brute_force_auc(f: &[f64], y: &[f64]) -> f64 {
    let mut sum = 0.0;
    let (mut n0, mut n1) = (0usize, 0usize);
    for &yi in y {
        if yi == 1.0 {
            n1 += 1;
        } else {
            n0 += 1;
        }
    }
    for i in 0..f.len() {
        for j in 0..f.len() {
            if y[i] == 0.0 && y[j] == 1.0 {
                if f[i] < f[j] {
                    sum += 1.0;
                } else if f[i] == f[j] {
                    sum += 0.5;
                }
            }
        }
    }
    sum / (n0 as f64 * n1 as f64)
}

/// Predictiveness under the weighted empirical distribution `Σ wᵢ δ_{zᵢ}`
/// (weights summing to 1), with `mu` the fixed conditional-mean predictions.
pub fn weighted_value(kind: MeasureKind, mu: &[f64], y: &[f64], w: &[f64], clip: f64) -> f64 {
    let total: f64 = w.iter().sum();
    let mean = |g: &dyn Fn(usize) -> f64| (0..y.len()).map(|i| w[i] * g(i)).sum::<f64>() / total;
    match kind {
        MeasureKind::RSquared => {
            let ybar = mean(&|i| y[i]);
            let mse = mean(&|i| (y[i] - mu[i]).powi(2));
            let var = mean(&|i| (y[i] - ybar).powi(2));
            1.0 - mse / var
        }
        MeasureKind::Deviance => {
            let pi = mean(&|i| y[i]);
            let ll = mean(&|i| {
                let f = mu[i].clamp(clip, 1.0 - clip);
                y[i] * f.ln() + (1.0 - y[i]) * (1.0 - f).ln()
            });
            1.0 - ll / (pi * pi.ln() + (1.0 - pi) * (1.0 - pi).ln())
        }
        MeasureKind::Accuracy => mean(&|i| {
            let f = if mu[i] > 0.5 { 1.0 } else { 0.0 };
            if f == y[i] {
                1.0
            } else {
                0.0
            }
        }),
        MeasureKind::Auc => {
            let mut num = 0.0;
            for i in 0..y.len() {
                for j in 0..y.len() {
                    if y[i] == 0.0 && y[j] == 1.0 {
                        let k = if mu[i] < mu[j] {
                            1.0
                        } else if mu[i] == mu[j] {
                            0.5
                        } else {
                            0.0
                        };
                        num += w[i] * w[j] * k;
                    }
                }
            }
            let p1 = mean(&|i| y[i]);
            num / (total * total) / (p1 * (1.0 - p1))
        }
    }
}

/// Central-difference Gâteaux derivative of [`weighted_value`] at the
/// empirical distribution in the direction `δ_{z_i} − P_n`.
pub fn gateaux(kind: MeasureKind, mu: &[f64], y: &[f64], i: usize, eps: f64, clip: f64) -> f64 {
    let n = y.len() as f64;
    let weights = |e: f64| -> Vec<f64> {
        (0..y.len())
            .map(|j| (1.0 - e) / n + if j == i { e } else { 0.0 })
            .collect()
    };
    (weighted_value(kind, mu, y, &weights(eps), clip)
        - weighted_value(kind, mu, y, &weights(-eps), clip))
        / (2.0 * eps)
}

/// Standard normal CDF from the Maclaurin series of erf for small |x| and a
/// Lentz continued fraction for erfc in the tails.
pub fn reference_normal_cdf(x: f64) -> f64 {
    let z = x / std::f64::consts::SQRT_2;
    if z.abs() < 3.0 {
        // erf z = 2/√π Σ (-1)^k z^{2k+1} / (k! (2k+1))
        let mut term = z;
        let mut sum = z;
        let z2 = z * z;
        for k in 1..200 {
            term *= -z2 / k as f64;
            let add = term / (2 * k + 1) as f64;
            sum += add;
            if add.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        0.5 * (1.0 + 2.0 / std::f64::consts::PI.sqrt() * sum)
    } else {
        // erfc |z| = exp(-z²)/√π · 1/(|z| + (1/2)/(|z| + 1/(|z| + (3/2)/(|z| + ...))))
        let a = z.abs();
        let tiny = 1e-300;
        let mut f = a;
        let mut c = a;
        let mut d = 0.0;
        for k in 1..500 {
            let ak = k as f64 / 2.0;
            d = a + ak * d;
            d = if d.abs() < tiny { tiny } else { d };
            c = a + ak / c;
            c = if c.abs() < tiny { tiny } else { c };
            d = 1.0 / d;
            let delta = c * d;
            f *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        let erfc = (-a * a).exp() / std::f64::consts::PI.sqrt() / f;
        if z > 0.0 {
            1.0 - 0.5 * erfc
        } else {
            0.5 * erfc
        }
    }
}
