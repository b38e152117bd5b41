//! Base learners and a cross-validated convex stack.

use std::sync::Arc;

use vimkit::learners::{
    fit_stack, BoostedStumps, FittedModel, Learner, LogisticLearner, MeanLearner, StackSpec,
};
use vimkit::simulation::{generate, SimScenario};
use vimkit::{Measure, MeasureKind};

fn main() -> vimkit::Result<()> {
    let train = generate(&SimScenario::scenario1(), 2_000, 1);
    let test = generate(&SimScenario::scenario1(), 2_000, 2);
    let auc = Measure::new(MeasureKind::Auc);

    let learners: Vec<Arc<dyn Learner>> = vec![
        Arc::new(MeanLearner),
        Arc::new(LogisticLearner::default()),
        Arc::new(BoostedStumps::default()),
    ];
    for l in &learners {
        let model = l.fit(&train, 0)?;
        let v = auc.evaluate(&model.predict(test.features()), test.outcome())?;
        println!("{:<16} test AUC {v:.4}", l.name());
    }

    let spec = StackSpec {
        learners,
        inner_folds: 5,
        loss: None,
    };
    let stack = fit_stack(&spec, &train, 3)?;
    for ((name, w), loss) in stack.names.iter().zip(&stack.weights).zip(&stack.learner_cv_loss) {
        println!("weight {w:.3}  {name:<16} cv loss {}", loss.map_or("failed".into(), |l| format!("{l:.4}")));
    }
    println!("stack cv loss {:.4}", stack.cv_loss);
    let v = auc.evaluate(&stack.predict(test.features()), test.outcome())?;
    println!("stack test AUC {v:.4}");
    Ok(())
}
