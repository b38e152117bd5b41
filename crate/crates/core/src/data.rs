//! Observed samples and feature-group indexing.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeKind {
    Continuous,
    Binary,
}

impl OutcomeKind {
    /// `Binary` when every value is exactly 0 or 1.
    pub fn detect(outcome: &[f64]) -> OutcomeKind {
        if outcome.iter().all(|&y| y == 0.0 || y == 1.0) {
            OutcomeKind::Binary
        } else {
            OutcomeKind::Continuous
        }
    }
}

/// An `n x p` feature matrix paired with an outcome vector.
#[derive(Debug, Clone)]
pub struct Dataset {
    features: DMatrix<f64>,
    outcome: Vec<f64>,
    kind: OutcomeKind,
    names: Vec<String>,
}

impl Dataset {
    pub fn new(features: DMatrix<f64>, outcome: Vec<f64>, kind: OutcomeKind) -> Result<Self> {
        let names = (1..=features.ncols()).map(|j| format!("x{j}")).collect();
        Self::with_names(features, outcome, kind, names)
    }

    pub fn with_names(
        features: DMatrix<f64>,
        outcome: Vec<f64>,
        kind: OutcomeKind,
        names: Vec<String>,
    ) -> Result<Self> {
        let (n, p) = features.shape();
        if n == 0 || p == 0 {
            return Err(VimError::Data(format!(
                "dataset must have n >= 1 and p >= 1, got {n} x {p}"
            )));
        }
        if outcome.len() != n {
            return Err(VimError::Data(format!(
                "outcome has length {} but features have {n} rows",
                outcome.len()
            )));
        }
        if names.len() != p {
            return Err(VimError::Data(format!(
                "{} column names for {p} columns",
                names.len()
            )));
        }
        if features.iter().chain(outcome.iter()).any(|v| !v.is_finite()) {
            return Err(VimError::Data("non-finite value in dataset".into()));
        }
        if kind == OutcomeKind::Binary && OutcomeKind::detect(&outcome) != OutcomeKind::Binary {
            return Err(VimError::Data(
                "binary outcome must contain only 0 and 1".into(),
            ));
        }
        Ok(Dataset {
            features,
            outcome,
            kind,
            names,
        })
    }

    /// Builds from row-major feature rows, detecting the outcome kind.
    pub fn from_rows(rows: &[Vec<f64>], outcome: Vec<f64>) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(VimError::Data("ragged feature rows".into()));
        }
        let features = DMatrix::from_fn(n, p, |i, j| rows[i][j]);
        let kind = OutcomeKind::detect(&outcome);
        Dataset::new(features, outcome, kind)
    }

    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    pub fn p(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn outcome(&self) -> &[f64] {
        &self.outcome
    }

    pub fn kind(&self) -> OutcomeKind {
        self.kind
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Copy of the listed rows, in the order given.
    pub fn subset_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(rows.iter()),
            outcome: rows.iter().map(|&i| self.outcome[i]).collect(),
            kind: self.kind,
            names: self.names.clone(),
        }
    }

    /// Same features with a replacement outcome (e.g. pseudo-outcomes).
    pub fn with_outcome(&self, outcome: Vec<f64>, kind: OutcomeKind) -> Result<Dataset> {
        Dataset::with_names(self.features.clone(), outcome, kind, self.names.clone())
    }

    /// Drops the columns in `s`, keeping the remaining ones in original order.
    pub fn complement_columns(&self, s: &FeatureSet) -> Result<Dataset> {
        s.check(self.p())?;
        let keep = s.complement(self.p());
        if keep.is_empty() {
            return Err(VimError::EmptyReduced { p: self.p() });
        }
        Ok(Dataset {
            features: self.features.select_columns(keep.iter()),
            outcome: self.outcome.clone(),
            kind: self.kind,
            names: keep.iter().map(|&j| self.names[j].clone()).collect(),
        })
    }
}

/// A non-empty, sorted set of zero-based column indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureSet(Vec<usize>);

impl FeatureSet {
    pub fn new(indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut v: Vec<usize> = indices.into_iter().collect();
        let len = v.len();
        v.sort_unstable();
        v.dedup();
        if v.is_empty() {
            return Err(VimError::Config("feature group must be non-empty".into()));
        }
        if v.len() != len {
            return Err(VimError::Config(
                "feature group contains duplicate columns".into(),
            ));
        }
        Ok(FeatureSet(v))
    }

    pub fn single(index: usize) -> Self {
        FeatureSet(vec![index])
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn contains(&self, j: usize) -> bool {
        self.0.binary_search(&j).is_ok()
    }

    pub fn check(&self, p: usize) -> Result<()> {
        match self.0.last() {
            Some(&j) if j >= p => Err(VimError::Config(format!(
                "column index {j} out of range for p = {p}"
            ))),
            _ => Ok(()),
        }
    }

    /// Indices in `0..p` not in the set, ascending.
    pub fn complement(&self, p: usize) -> Vec<usize> {
        (0..p).filter(|j| !self.contains(*j)).collect()
    }
}
