//! Predictiveness measures and their influence values on a toy sample.

use vimkit::{Measure, MeasureKind};

fn main() -> vimkit::Result<()> {
    let mu = [0.1, 0.35, 0.4, 0.8, 0.55, 0.9, 0.2, 0.65];
    let y = [0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0];

    for kind in [
        MeasureKind::RSquared,
        MeasureKind::Deviance,
        MeasureKind::Accuracy,
        MeasureKind::Auc,
    ] {
        let m = Measure::new(kind);
        let est = m.predictiveness(&mu, &y)?;
        let se = (est.eif_second_moment / est.n() as f64).sqrt();
        println!("{:<10} value {:.4}  se {:.4}", m.name(), est.value, se);
        let shown: Vec<String> = est.eif_values.iter().map(|v| format!("{v:+.3}")).collect();
        println!("           eif [{}]", shown.join(", "));
    }
    Ok(())
}
