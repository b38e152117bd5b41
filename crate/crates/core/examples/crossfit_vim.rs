//! Cross-fitted importance of each feature, with the closed-form truth.

use vimkit::estimators::{crossfit_vim, EstimationConfig};
use vimkit::learners::LearnerSpec;
use vimkit::simulation::{generate, SimScenario};
use vimkit::{FeatureSet, MeasureKind, OutcomeKind};

fn main() -> vimkit::Result<()> {
    let scenario = SimScenario::scenario1();
    let d = generate(&scenario, 4_000, 11);
    let learner = LearnerSpec::default_stack(OutcomeKind::Binary).build();

    for kind in [MeasureKind::Accuracy, MeasureKind::Auc, MeasureKind::Deviance] {
        let mut cfg = EstimationConfig::new(kind, learner.clone());
        cfg.sample_split = false;
        cfg.seed = 5;
        for j in 0..2 {
            let s = FeatureSet::single(j);
            let r = crossfit_vim(&d, &s, &cfg)?;
            let truth = scenario.oracle_truth(kind, &s)?;
            println!(
                "{:<9} x{}: psi {:.4} (se {:.4}, 95% CI [{:.4}, {:.4}])  truth {:.4}",
                kind.name(),
                j + 1,
                r.psi,
                r.std_error,
                r.ci_two_sided.0,
                r.ci_two_sided.1,
                truth
            );
        }
    }
    Ok(())
}
