//! Value of an estimated treatment rule and the importance of a covariate for it.

use std::sync::Arc;

use nalgebra::DMatrix;
use vimkit::coarsened::{rule_value, rule_value_vim, CoarsenedConfig, TreatmentDataset};
use vimkit::learners::LinearLearner;
use vimkit::rng::SimRng;
use vimkit::simulation::{randomized_trial, RULE_VALUE_TRUTH};
use vimkit::FeatureSet;

fn main() -> vimkit::Result<()> {
    let cfg = CoarsenedConfig::new(Arc::new(LinearLearner));

    let d = randomized_trial(5_000, 3);
    let e = rule_value(&d, &cfg)?;
    let se = (e.estimate.eif_second_moment / e.estimate.n() as f64).sqrt();
    println!(
        "rule value {:.4} ± {:.4} (truth {RULE_VALUE_TRUTH:.4}); truncated {:.1}%, near ties {:.1}%",
        e.estimate.value,
        1.96 * se,
        100.0 * e.diagnostics.truncated_share,
        100.0 * e.diagnostics.near_tie_share
    );

    // A second covariate that plays no role in the treatment effect.
    let n = 5_000;
    let mut rng = SimRng::new(4);
    let mut x = DMatrix::zeros(n, 2);
    let mut a = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let (x1, x2) = rng.normal_pair();
        let ai = f64::from(u8::from(rng.uniform() < 0.5));
        x[(i, 0)] = x1;
        x[(i, 1)] = x2;
        a.push(ai);
        y.push(ai * x1 + 0.5 * x2 + rng.normal_pair().0);
    }
    let d = TreatmentDataset::new(x, a, y)?;
    for j in 0..2 {
        let r = rule_value_vim(&d, &FeatureSet::single(j), &cfg)?;
        println!("x{}: psi {:+.4}  se {:.4}  p {:.4}", j + 1, r.psi, r.std_error, r.p_value);
    }
    Ok(())
}
