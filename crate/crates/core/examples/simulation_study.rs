//! Replication study: bias, scaled MSE, coverage and rejection across sample sizes.

use vimkit::estimators::EstimationConfig;
use vimkit::learners::LearnerSpec;
use vimkit::simulation::{Experiment, SimScenario};
use vimkit::{FeatureSet, MeasureKind, OutcomeKind};

fn main() -> vimkit::Result<()> {
    let reps = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(50);
    let learner = LearnerSpec::default_stack(OutcomeKind::Binary).build();
    for (label, scenario, j) in [
        ("signal", SimScenario::scenario2(), 0),
        ("null", SimScenario::scenario2(), 1),
    ] {
        let exp = Experiment {
            scenario,
            s: FeatureSet::single(j),
            n_grid: vec![500, 1000, 2000],
            n_reps: reps,
            config: EstimationConfig::new(MeasureKind::Accuracy, learner.clone()),
            seed: 1,
        };
        println!("{label}: accuracy importance of x{}", j + 1);
        println!("{:>6} {:>8} {:>8} {:>8} {:>8} {:>8}", "n", "truth", "mean", "n*mse", "cover", "reject");
        for r in exp.run()? {
            println!(
                "{:>6} {:>8.4} {:>8.4} {:>8.3} {:>8.3} {:>8.3}",
                r.n, r.truth, r.mean_psi, r.scaled_mse, r.coverage, r.rejection_rate
            );
        }
    }
    Ok(())
}
