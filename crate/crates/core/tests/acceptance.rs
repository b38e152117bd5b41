mod common;

use std::io::Write;
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use common::{brute_force_auc, gateaux};
use rayon::prelude::*;
use vimkit::coarsened::{onestep_accuracy_missing, rule_value, CoarsenedConfig, MissingNuisance};
use vimkit::estimators::{crossfit_predictiveness, Columns, EstimationConfig};
use vimkit::learners::{Learner, LearnerSpec, LinearLearner, LogisticLearner};
use vimkit::measures::DEFAULT_DEVIANCE_CLIP;
use vimkit::rng::{derive_seed, SimRng};
use vimkit::simulation::{
    generate, randomized_trial, Experiment, OperatingCharacteristics, SimScenario,
    RULE_VALUE_TRUTH,
};
use vimkit::{FeatureSet, Measure, MeasureKind, OutcomeKind};

const REPS: usize = 300;
const STUDY_SEED: u64 = 1;

struct Report {
    failed: Vec<usize>,
}

impl Report {
    fn line(&mut self, id: usize, ok: bool, detail: String) {
        let status = if ok { "PASS" } else { "FAIL" };
        let mut out = std::io::stdout().lock();
        writeln!(out, "acceptance criterion {id:>2}: {status}  {detail}").unwrap();
        out.flush().unwrap();
        if !ok {
            self.failed.push(id);
        }
    }
}

fn study(
    scenario: SimScenario,
    feature: usize,
    kind: MeasureKind,
    grid: &[usize],
) -> Vec<OperatingCharacteristics> {
    let learner = LearnerSpec::default_stack(OutcomeKind::Binary).build();
    let config = EstimationConfig::new(kind, learner);
    Experiment {
        scenario,
        s: FeatureSet::single(feature),
        n_grid: grid.to_vec(),
        n_reps: REPS,
        config,
        seed: STUDY_SEED,
    }
    .run()
    .unwrap()
}

fn at(rows: &[OperatingCharacteristics], n: usize) -> &OperatingCharacteristics {
    rows.iter().find(|r| r.n == n).unwrap()
}

fn small_case(rng: &mut SimRng, kind: MeasureKind, n: usize) -> (Vec<f64>, Vec<f64>) {
    loop {
        let mu: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
        let y: Vec<f64> = if kind == MeasureKind::RSquared {
            mu.iter().map(|m| m + rng.normal_pair().0).collect()
        } else {
            mu.iter().map(|&m| f64::from(u8::from(rng.uniform() < m))).collect()
        };
        let ones = y.iter().filter(|&&v| v == 1.0).count();
        if kind == MeasureKind::RSquared || (ones > 0 && ones < n) {
            return (mu, y);
        }
    }
}

fn criterion_7(report: &mut Report) {
    let mut worst_rel = 0.0f64;
    let mut worst_mean = 0.0f64;
    let mut ok = true;
    let mut rng = SimRng::new(700);
    for kind in [
        MeasureKind::RSquared,
        MeasureKind::Deviance,
        MeasureKind::Accuracy,
        MeasureKind::Auc,
    ] {
        for _ in 0..50 {
            let n = 6 + rng.below(25);
            let (mu, y) = small_case(&mut rng, kind, n);
            let est = Measure::new(kind).predictiveness(&mu, &y).unwrap();
            let mean = est.eif_values.iter().sum::<f64>() / n as f64;
            worst_mean = worst_mean.max(mean.abs());
            ok &= mean.abs() <= 1e-8;
            for i in 0..n {
                let fd = gateaux(kind, &mu, &y, i, 1e-6, DEFAULT_DEVIANCE_CLIP);
                let e = est.eif_values[i];
                let err = (fd - e).abs();
                ok &= err <= 1e-3 * e.abs() + 1e-7;
                if e.abs() > 1e-4 {
                    worst_rel = worst_rel.max(err / e.abs());
                }
            }
        }
    }
    report.line(
        7,
        ok,
        format!("Gateaux max rel err {worst_rel:.2e} (tol 1e-3), max |mean EIF| {worst_mean:.1e}"),
    );
}

fn criterion_8(report: &mut Report) {
    let auc = Measure::new(MeasureKind::Auc);
    let mut rng = SimRng::new(800);
    let mut exact = 0;
    for t in 0..100 {
        let n = 2 + rng.below(199);
        let levels = if t % 2 == 0 { 7 } else { 10_000 };
        let f: Vec<f64> = (0..n).map(|_| rng.below(levels) as f64 / levels as f64).collect();
        let mut y: Vec<f64> = (0..n).map(|_| f64::from(u8::from(rng.uniform() < 0.5))).collect();
        y[0] = 0.0;
        y[1] = 1.0;
        if auc.evaluate(&f, &y).unwrap() == brute_force_auc(&f, &y) {
            exact += 1;
        }
    }

    let d = generate(&SimScenario::scenario1(), 1_000, 801);
    let mut worst = 0.0f64;
    for kind in [MeasureKind::Deviance, MeasureKind::Accuracy, MeasureKind::Auc, MeasureKind::RSquared] {
        let mut cfg = EstimationConfig::logistic(kind);
        cfg.seed = 802;
        let cf = crossfit_predictiveness(&d, &Columns::All, &cfg).unwrap();
        let plan = cfg.fold_plan(&d, false).unwrap();
        let measure = Measure::new(kind);
        let mut total = 0.0;
        for k in 0..cfg.folds as u32 {
            let train: Vec<usize> = (0..d.n()).filter(|&i| plan.fold[i] != k).collect();
            let test: Vec<usize> = (0..d.n()).filter(|&i| plan.fold[i] == k).collect();
            let model = LogisticLearner::default().fit(&d.subset_rows(&train), 0).unwrap();
            let sub = d.subset_rows(&test);
            let f: Vec<f64> = model
                .predict(sub.features())
                .into_iter()
                .map(|m| measure.to_prediction(m))
                .collect();
            total += measure.evaluate(&f, sub.outcome()).unwrap();
        }
        worst = worst.max((cf.estimate.value - total / cfg.folds as f64).abs());
    }
    report.line(
        8,
        exact == 100 && worst <= 1e-12,
        format!("AUC exact on {exact}/100 datasets; cross-fit vs two-pass max diff {worst:.1e}"),
    );
}

fn criterion_9(report: &mut Report) {
    let acc = Measure::new(MeasureKind::Accuracy);
    let mut rng = SimRng::new(900);
    let mut bitwise = 0;
    for _ in 0..100 {
        let n = 5 + rng.below(300);
        let pi: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
        let y: Vec<f64> = (0..n).map(|_| f64::from(u8::from(rng.uniform() < 0.5))).collect();
        let nuis = MissingNuisance {
            pi: pi.clone(),
            g: vec![1.0; n],
            truncation: 0.025,
        };
        let one = onestep_accuracy_missing(&vec![1.0; n], &y, &nuis, None).unwrap();
        let f: Vec<f64> = pi.iter().map(|&p| acc.to_prediction(p)).collect();
        if one.estimate.value.to_bits() == acc.evaluate(&f, &y).unwrap().to_bits() {
            bitwise += 1;
        }
    }

    let hits: usize = (0..REPS as u64)
        .into_par_iter()
        .map(|rep| {
            let d = randomized_trial(1_000, derive_seed(901, rep));
            let mut cfg = CoarsenedConfig::new(Arc::new(LinearLearner));
            cfg.seed = rep;
            let e = rule_value(&d, &cfg).unwrap().estimate;
            let se = (e.eif_second_moment / e.n() as f64).sqrt();
            usize::from((e.value - RULE_VALUE_TRUTH).abs() <= 2.0 * se)
        })
        .sum();
    let inclusion = hits as f64 / REPS as f64;
    report.line(
        9,
        bitwise == 100 && inclusion >= 0.93,
        format!("missing-outcome reduction bitwise on {bitwise}/100; rule-value ±2SE inclusion {inclusion:.3} (need >= 0.93)"),
    );
}

fn criterion_10(report: &mut Report) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.csv");
    {
        let d = generate(&SimScenario::scenario1(), 600, 1000);
        let mut w = csv::Writer::from_path(&path).unwrap();
        w.write_record(["x1", "x2", "y"]).unwrap();
        for i in 0..d.n() {
            let x = d.features();
            w.write_record([x[(i, 0)], x[(i, 1)], d.outcome()[i]].map(|v| v.to_string()))
                .unwrap();
        }
        w.flush().unwrap();
    }
    let input = path.to_str().unwrap();
    let commands: [Vec<&str>; 3] = [
        vec!["estimate", "--input", input, "--outcome", "y", "--seed", "42"],
        vec!["test", "--input", input, "--outcome", "y", "--seed", "42", "--measure", "accuracy"],
        vec!["simulate", "--scenario", "1", "--feature", "x2", "--n", "300,600", "--reps", "20", "--seed", "42"],
    ];
    let mut identical = 0;
    for args in &commands {
        let outputs: Vec<Vec<u8>> = ["1", "2", "8"]
            .iter()
            .map(|threads| {
                let out = Command::new(env!("CARGO_BIN_EXE_vimkit"))
                    .args(args)
                    .env("VIMKIT_THREADS", threads)
                    .output()
                    .unwrap();
                assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
                out.stdout
            })
            .collect();
        if outputs.windows(2).all(|w| w[0] == w[1]) && !outputs[0].is_empty() {
            identical += 1;
        }
    }
    report.line(
        10,
        identical == commands.len(),
        format!("{identical}/{} subcommands byte-identical across 1, 2, 8 threads", commands.len()),
    );
}

#[test]
fn acceptance_criteria() {
    let mut report = Report { failed: Vec::new() };
    let s2 = SimScenario::scenario2();
    let s1 = SimScenario::scenario1();
    let grid = [500, 1000, 2000, 4000];

    let start = Instant::now();
    let acc = study(s2, 0, MeasureKind::Accuracy, &grid);
    let acc_secs = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let auc = study(s2, 0, MeasureKind::Auc, &grid);
    let auc_secs = start.elapsed().as_secs_f64();

    let a4 = at(&acc, 4000);
    report.line(
        1,
        (a4.mean_psi - 0.181).abs() <= 0.02,
        format!("mean psi {:.4} vs 0.181 ± 0.02 ({acc_secs:.0} s for the grid)", a4.mean_psi),
    );
    let u4 = at(&auc, 4000);
    report.line(
        2,
        (u4.mean_psi - 0.356).abs() <= 0.02,
        format!("mean psi {:.4} vs 0.356 ± 0.02 ({auc_secs:.0} s for the grid)", u4.mean_psi),
    );

    let cov_acc = at(&study(s1, 1, MeasureKind::Accuracy, &[4000]), 4000).coverage;
    let cov_auc = at(&study(s1, 1, MeasureKind::Auc, &[4000]), 4000).coverage;
    let in_band = |c: f64| (0.91..=0.99).contains(&c);
    report.line(
        3,
        in_band(cov_acc) && in_band(cov_auc),
        format!("coverage accuracy {cov_acc:.3}, AUC {cov_auc:.3} (need [0.91, 0.99])"),
    );

    let null_acc = study(s2, 1, MeasureKind::Accuracy, &[2000, 4000]);
    let null_auc = study(s2, 1, MeasureKind::Auc, &[2000, 4000]);
    let rates: Vec<f64> = null_acc
        .iter()
        .chain(&null_auc)
        .map(|r| r.rejection_rate)
        .collect();
    report.line(
        4,
        rates.iter().all(|&r| r <= 0.08),
        format!(
            "rejection at n=2000/4000: accuracy {:.3}/{:.3}, AUC {:.3}/{:.3} (need <= 0.08)",
            rates[0], rates[1], rates[2], rates[3]
        ),
    );

    let (p500, p4000) = (at(&acc, 500).rejection_rate, a4.rejection_rate);
    report.line(
        5,
        p4000 >= 0.9 && p4000 > p500,
        format!(
            "accuracy power n=500 {p500:.4}, n=4000 {p4000:.4}; AUC power {:.4} -> {:.4}",
            at(&auc, 500).rejection_rate,
            u4.rejection_rate
        ),
    );

    let ratio = |rows: &[OperatingCharacteristics]| at(rows, 4000).scaled_mse / at(rows, 1000).scaled_mse;
    let (ra, ru) = (ratio(&acc), ratio(&auc));
    let flat = |r: f64| (1.0 / 3.0..=3.0).contains(&r);
    report.line(
        6,
        flat(ra) && flat(ru),
        format!("n*MSE ratio 4000/1000: accuracy {ra:.3}, AUC {ru:.3} (need within factor 3)"),
    );

    criterion_7(&mut report);
    criterion_8(&mut report);
    criterion_9(&mut report);
    criterion_10(&mut report);

    assert!(report.failed.is_empty(), "failed criteria: {:?}", report.failed);
}
