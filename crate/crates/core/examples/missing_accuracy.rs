//! Classification accuracy when outcomes are missing at random.

use std::sync::Arc;

use vimkit::coarsened::{accuracy_missing, accuracy_missing_vim, CoarsenedConfig};
use vimkit::learners::LogisticLearner;
use vimkit::simulation::{mar_accuracy_truth, missing_at_random};
use vimkit::FeatureSet;

fn main() -> vimkit::Result<()> {
    let d = missing_at_random(5_000, 9);
    let seen = d.observed().iter().filter(|&&o| o == 1.0).count();
    println!("{seen} of {} outcomes observed", d.n());

    let cfg = CoarsenedConfig::new(Arc::new(LogisticLearner::default()));
    let e = accuracy_missing(&d, &cfg)?;
    let se = (e.estimate.eif_second_moment / e.estimate.n() as f64).sqrt();
    println!(
        "accuracy {:.4} ± {:.4}  (truth {:.4})",
        e.estimate.value,
        1.96 * se,
        mar_accuracy_truth()
    );

    for j in 0..2 {
        let r = accuracy_missing_vim(&d, &FeatureSet::single(j), &cfg)?;
        println!("x{}: psi {:+.4}  se {:.4}  reject {}", j + 1, r.psi, r.std_error, r.reject);
    }
    Ok(())
}
