mod common;

use common::*;
use vimkit::inference::{normal_cdf, normal_quantile, upper_tail};
use vimkit::measures::{EmpiricalMoments, DEFAULT_DEVIANCE_CLIP};
use vimkit::rng::SimRng;
use vimkit::{Measure, MeasureKind};

const KINDS: [MeasureKind; 4] = [
    MeasureKind::RSquared,
    MeasureKind::Deviance,
    MeasureKind::Accuracy,
    MeasureKind::Auc,
];

fn eif_of(kind: MeasureKind, mu: &[f64], y: &[f64]) -> Vec<f64> {
    let m = Measure::new(kind);
    m.predictiveness(mu, y).unwrap().eif_values
}

fn sample(rng: &mut SimRng, kind: MeasureKind, n: usize) -> (Vec<f64>, Vec<f64>) {
    loop {
        let mu: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
        let y: Vec<f64> = if kind == MeasureKind::RSquared && rng.uniform() < 0.5 {
            (0..n).map(|i| mu[i] + rng.normal_pair().0).collect()
        } else {
            mu.iter().map(|&m| f64::from(u8::from(rng.uniform() < m))).collect()
        };
        let ones = y.iter().filter(|&&v| v == 1.0).count();
        if kind == MeasureKind::RSquared || (ones > 0 && ones < n) {
            return (mu, y);
        }
    }
}

#[test]
fn gateaux_derivatives_match_influence_values() {
    let mut rng = SimRng::new(2024);
    for kind in KINDS {
        for _ in 0..50 {
            let n = 5 + rng.below(16);
            let (mu, y) = sample(&mut rng, kind, n);
            let eif = eif_of(kind, &mu, &y);
            for eps in [1e-4, 1e-6] {
                for i in 0..n {
                    let fd = gateaux(kind, &mu, &y, i, eps, DEFAULT_DEVIANCE_CLIP);
                    let tol = 1e-3 * eif[i].abs() + 1e-7;
                    assert!(
                        (fd - eif[i]).abs() <= tol,
                        "{kind:?} n={n} i={i} eps={eps}: fd {fd} eif {}",
                        eif[i]
                    );
                }
            }
        }
    }
}

#[test]
fn influence_values_are_centered() {
    let mut rng = SimRng::new(7);
    for kind in KINDS {
        for _ in 0..40 {
            let n = 5 + rng.below(496);
            let (mu, y) = sample(&mut rng, kind, n);
            let eif = eif_of(kind, &mu, &y);
            let mean = eif.iter().sum::<f64>() / n as f64;
            assert!(mean.abs() < 1e-8, "{kind:?} n={n}: {mean}");
        }
    }
}

#[test]
fn accuracy_derivative_is_exact() {
    let mut rng = SimRng::new(3);
    let (mu, y) = sample(&mut rng, MeasureKind::Accuracy, 10);
    let m = Measure::new(MeasureKind::Accuracy);
    let f: Vec<f64> = mu.iter().map(|&v| m.to_prediction(v)).collect();
    let v = m.evaluate(&f, &y).unwrap();
    let eif = m
        .eif(&mu, &y, &EmpiricalMoments::from_outcomes(&y), v)
        .unwrap();
    for i in 0..10 {
        let hit = f64::from(u8::from(f[i] == y[i]));
        assert!((eif[i] - (hit - v)).abs() < 1e-15);
    }
}

#[test]
fn r_squared_small_sample_gateaux() {
    let mut rng = SimRng::new(11);
    let mu: Vec<f64> = (0..10).map(|_| rng.normal_pair().0).collect();
    let y: Vec<f64> = mu.iter().map(|m| m + rng.normal_pair().0).collect();
    let eif = eif_of(MeasureKind::RSquared, &mu, &y);
    for i in 0..10 {
        let fd = gateaux(MeasureKind::RSquared, &mu, &y, i, 1e-6, DEFAULT_DEVIANCE_CLIP);
        assert!((fd - eif[i]).abs() <= 1e-4);
    }
}

#[test]
fn auc_matches_exhaustive_pairs() {
    let mut rng = SimRng::new(99);
    let m = Measure::new(MeasureKind::Auc);
    for t in 0..100 {
        let n = 2 + rng.below(199);
        let levels = if t % 2 == 0 { 5 } else { 1000 };
        let f: Vec<f64> = (0..n).map(|_| rng.below(levels) as f64 / levels as f64).collect();
        let mut y: Vec<f64> = (0..n).map(|_| f64::from(u8::from(rng.uniform() < 0.4))).collect();
        y[0] = 0.0;
        y[1] = 1.0;
        assert_eq!(m.evaluate(&f, &y).unwrap(), brute_force_auc(&f, &y), "n={n}");
    }
}

#[test]
fn evaluate_examples() {
    let acc = Measure::new(MeasureKind::Accuracy);
    assert_eq!(acc.evaluate(&[1.0, 0.0, 1.0], &[1.0, 1.0, 1.0]).unwrap(), 2.0 / 3.0);
    let auc = Measure::new(MeasureKind::Auc);
    assert_eq!(auc.evaluate(&[0.1, 0.4, 0.35, 0.8], &[0.0, 0.0, 1.0, 1.0]).unwrap(), 0.75);
    assert_eq!(auc.evaluate(&[0.3, 0.3], &[0.0, 1.0]).unwrap(), 0.5);
    let r2 = Measure::new(MeasureKind::RSquared);
    let y = [0.5, 1.5, 2.0, 4.0];
    assert_eq!(r2.evaluate(&y, &y).unwrap(), 1.0);
    assert_eq!(r2.evaluate(&[2.0; 4], &y).unwrap(), 0.0);
}

#[test]
fn normal_cdf_against_series_oracle() {
    let mut x = -9.0;
    while x <= 9.0 {
        let a = normal_cdf(x);
        let b = reference_normal_cdf(x);
        assert!((a - b).abs() <= 1e-12, "x={x}: {a} vs {b}");
        x += 0.01;
    }
    assert_eq!(normal_cdf(0.0), 0.5);
    assert!((normal_cdf(1.959963985) - 0.975).abs() < 1e-9);
    assert!((reference_normal_cdf(-2.5) - 0.006209665325776132).abs() < 1e-15);
    assert!((upper_tail(2.5) - reference_normal_cdf(-2.5)).abs() < 1e-15);
}

#[test]
fn quantile_bisection_check() {
    let (mut lo, mut hi) = (0.0f64, 5.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if reference_normal_cdf(mid) < 0.975 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    assert!((normal_quantile(0.975) - lo).abs() < 1e-9);
}
