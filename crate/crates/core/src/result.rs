//! Result containers shared by the estimators.

use serde::{Deserialize, Serialize};

/// Estimated predictiveness on one evaluation sample with influence values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictivenessEstimate {
    pub value: f64,
    pub eif_values: Vec<f64>,
    /// Mean of squared influence values.
    pub eif_second_moment: f64,
    /// Observation indices the influence values belong to, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support: Option<Vec<usize>>,
}

impl PredictivenessEstimate {
    pub fn from_eif(value: f64, eif_values: Vec<f64>) -> Self {
        let eif_second_moment =
            eif_values.iter().map(|v| v * v).sum::<f64>() / eif_values.len().max(1) as f64;
        PredictivenessEstimate {
            value,
            eif_values,
            eif_second_moment,
            support: None,
        }
    }

    pub fn with_support(mut self, support: Vec<usize>) -> Self {
        debug_assert_eq!(support.len(), self.eif_values.len());
        self.support = Some(support);
        self
    }

    /// Number of observations behind the estimate.
    pub fn n(&self) -> usize {
        self.eif_values.len()
    }
}

/// Variable importance estimate with intervals and the β-null test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VimResult {
    pub psi: f64,
    pub std_error: f64,
    pub ci_two_sided: (f64, f64),
    pub ci_one_sided_lower: f64,
    pub test_stat: f64,
    pub p_value: f64,
    pub reject: bool,
    pub beta: f64,
    pub alpha: f64,
    /// Observations behind the full-model predictiveness.
    pub n_full: usize,
    /// Observations behind the reduced-model predictiveness.
    pub n_reduced: usize,
    pub v_full: f64,
    pub v_reduced: f64,
    /// False when both predictiveness values share data, in which case the
    /// test is not valid if the true importance is zero.
    pub test_valid: bool,
}

impl VimResult {
    /// Point estimate floored at zero, for display only.
    pub fn psi_clamped(&self) -> f64 {
        self.psi.max(0.0)
    }
}
