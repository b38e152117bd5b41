//! Normal distribution helpers, Wald intervals and the β-null test.

use statrs::function::erf;

use crate::error::{Result, VimError};
use crate::result::{PredictivenessEstimate, VimResult};

/// Standard normal distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal quantile, `normal_cdf(normal_quantile(p)) == p`.
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let x = -std::f64::consts::SQRT_2 * erf::erfc_inv(2.0 * p);
    let density = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    if density > 0.0 {
        x - (normal_cdf(x) - p) / density
    } else {
        x
    }
}

/// One-sided p-value `1 - Φ(t)`, computed through the upper tail.
pub fn upper_tail(t: f64) -> f64 {
    normal_cdf(-t)
}

pub(crate) fn check_levels(beta: f64, alpha: f64) -> Result<()> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(VimError::Config(format!("beta must be >= 0, got {beta}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(VimError::Config(format!("alpha must be in (0, 1), got {alpha}")));
    }
    Ok(())
}

/// Contrast assembled from an estimate `psi` and its standard error.
pub(crate) fn assemble(
    psi: f64,
    se: f64,
    beta: f64,
    alpha: f64,
    v: (f64, f64),
    sizes: (usize, usize),
    test_valid: bool,
) -> VimResult {
    let z2 = normal_quantile(1.0 - alpha / 2.0);
    let z1 = normal_quantile(1.0 - alpha);
    let diff = psi - beta;
    let test_stat = if se > 0.0 {
        diff / se
    } else if diff > 0.0 {
        f64::INFINITY
    } else if diff < 0.0 {
        f64::NEG_INFINITY
    } else {
        0.0
    };
    let p_value = upper_tail(test_stat);
    VimResult {
        psi,
        std_error: se,
        ci_two_sided: (psi - z2 * se, psi + z2 * se),
        ci_one_sided_lower: psi - z1 * se,
        test_stat,
        p_value,
        reject: p_value < alpha,
        beta,
        alpha,
        n_full: sizes.0,
        n_reduced: sizes.1,
        v_full: v.0,
        v_reduced: v.1,
        test_valid,
    }
}

/// Sample-split contrast: `full` and `reduced` come from disjoint samples of
/// sizes `n - n_s` and `n_s`, and `ω = η²/(n - n_s) + η²_s/n_s`.
pub fn split_contrast(
    full: &PredictivenessEstimate,
    reduced: &PredictivenessEstimate,
    beta: f64,
    alpha: f64,
) -> Result<VimResult> {
    check_levels(beta, alpha)?;
    let (n_full, n_red) = (full.n(), reduced.n());
    if n_full == 0 || n_red == 0 {
        return Err(VimError::Data("empty predictiveness estimate".into()));
    }
    let omega = full.eif_second_moment / n_full as f64 + reduced.eif_second_moment / n_red as f64;
    Ok(assemble(
        full.value - reduced.value,
        omega.sqrt(),
        beta,
        alpha,
        (full.value, reduced.value),
        (n_full, n_red),
        true,
    ))
}

/// Same-sample contrast: influence values are aligned observation by
/// observation and the variance is the mean of squared differences over `n`.
pub fn paired_contrast(
    full: &PredictivenessEstimate,
    reduced: &PredictivenessEstimate,
    psi: f64,
    beta: f64,
    alpha: f64,
) -> Result<VimResult> {
    check_levels(beta, alpha)?;
    let n = full.n();
    if n == 0 || reduced.n() != n {
        return Err(VimError::Data(
            "paired contrast needs aligned, non-empty influence values".into(),
        ));
    }
    let tau2 = full
        .eif_values
        .iter()
        .zip(&reduced.eif_values)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / n as f64;
    Ok(assemble(
        psi,
        (tau2 / n as f64).sqrt(),
        beta,
        alpha,
        (full.value, reduced.value),
        (n, n),
        false,
    ))
}
