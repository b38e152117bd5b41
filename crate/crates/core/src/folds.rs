//! Sample-split and cross-fitting partitions.
//!
//! Balanced plans are built as follows, using [`SimRng`] seeded with the plan
//! seed:
//!
//! 1. Shuffle `0..n` with [`SimRng::shuffle`].
//! 2. With splitting on, the first `round(n * split_fraction)` shuffled
//!    positions form half 0 and the rest form half 1. Without splitting every
//!    observation is in half 0.
//! 3. Within each half, observations keep their shuffled order (stable-sorted
//!    by stratum when stratifying) and are dealt round-robin: the `j`-th one
//!    goes to fold `j % K`.
//!
//! The with-replacement mode draws every label independently, `below(2)` (or a
//! `uniform() < split_fraction` Bernoulli) for the half and `below(K)` for the
//! fold, and redraws the whole vector until no fold is empty.

use serde::{Deserialize, Serialize};

use crate::error::{Result, VimError};
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FoldMode {
    /// Shuffle then deal round-robin; fold sizes differ by at most one.
    #[default]
    Balanced,
    /// I.i.d. uniform labels, resampled until every fold is non-empty.
    WithReplacement,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldOptions {
    pub mode: FoldMode,
    /// Share of observations assigned to half 0 when splitting.
    pub split_fraction: f64,
}

impl Default for FoldOptions {
    fn default() -> Self {
        FoldOptions {
            mode: FoldMode::Balanced,
            split_fraction: 0.5,
        }
    }
}

const MAX_REDRAWS: usize = 10_000;

/// Assignment of every observation to a split half and a fold within it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    /// Half label per observation, 0 or 1 (always 0 without splitting).
    pub half: Vec<u8>,
    /// Fold label per observation, `0..folds`.
    pub fold: Vec<u32>,
    pub folds: usize,
    pub split: bool,
    pub seed: u64,
}

/// Balanced plan with an even split.
pub fn make_fold_plan(n: usize, folds: usize, split: bool, seed: u64) -> Result<FoldPlan> {
    make_fold_plan_with(n, folds, split, seed, &FoldOptions::default(), None)
}

/// Full-control constructor. `strata`, when given, holds one label per
/// observation (typically the binary outcome) and makes balanced folds
/// preserve its proportions.
pub fn make_fold_plan_with(
    n: usize,
    folds: usize,
    split: bool,
    seed: u64,
    opts: &FoldOptions,
    strata: Option<&[f64]>,
) -> Result<FoldPlan> {
    if folds < 2 {
        return Err(VimError::Config(format!("need at least 2 folds, got {folds}")));
    }
    if !(opts.split_fraction > 0.0 && opts.split_fraction < 1.0) {
        return Err(VimError::Config(format!(
            "split fraction must lie in (0, 1), got {}",
            opts.split_fraction
        )));
    }
    if let Some(s) = strata {
        if s.len() != n {
            return Err(VimError::Data("strata length differs from n".into()));
        }
    }
    let min_n = if split { 4 * folds } else { 2 * folds };
    let sizing = || VimError::Sizing {
        n,
        folds,
        split,
        min_n,
    };
    if n < min_n {
        return Err(sizing());
    }
    let n_first = if split {
        (n as f64 * opts.split_fraction).round() as usize
    } else {
        n
    };
    if split && (n_first < 2 * folds || n - n_first < 2 * folds) {
        return Err(sizing());
    }

    let mut rng = SimRng::new(seed);
    let (half, fold) = match opts.mode {
        FoldMode::Balanced => balanced(&mut rng, n, n_first, folds, strata),
        FoldMode::WithReplacement => {
            with_replacement(&mut rng, n, folds, split, opts.split_fraction).ok_or_else(sizing)?
        }
    };
    Ok(FoldPlan {
        half,
        fold,
        folds,
        split,
        seed,
    })
}

fn balanced(
    rng: &mut SimRng,
    n: usize,
    n_first: usize,
    folds: usize,
    strata: Option<&[f64]>,
) -> (Vec<u8>, Vec<u32>) {
    let mut perm: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut perm);
    let mut half = vec![0u8; n];
    let mut fold = vec![0u32; n];
    for (h, part) in [&perm[..n_first], &perm[n_first..]].into_iter().enumerate() {
        let mut order = part.to_vec();
        if let Some(s) = strata {
            order.sort_by(|&a, &b| s[a].total_cmp(&s[b]));
        }
        for (j, &i) in order.iter().enumerate() {
            half[i] = h as u8;
            fold[i] = (j % folds) as u32;
        }
    }
    (half, fold)
}

fn with_replacement(
    rng: &mut SimRng,
    n: usize,
    folds: usize,
    split: bool,
    split_fraction: f64,
) -> Option<(Vec<u8>, Vec<u32>)> {
    let halves = if split { 2 } else { 1 };
    for _ in 0..MAX_REDRAWS {
        let half: Vec<u8> = (0..n)
            .map(|_| {
                if split {
                    u8::from(rng.uniform() >= split_fraction)
                } else {
                    0
                }
            })
            .collect();
        let fold: Vec<u32> = (0..n).map(|_| rng.below(folds) as u32).collect();
        let mut counts = vec![0usize; halves * folds];
        for i in 0..n {
            counts[half[i] as usize * folds + fold[i] as usize] += 1;
        }
        if counts.iter().all(|&c| c > 0) {
            return Some((half, fold));
        }
    }
    None
}

impl FoldPlan {
    pub fn n(&self) -> usize {
        self.half.len()
    }

    /// Observations in half `h`, ascending.
    pub fn half_rows(&self, h: u8) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.half[i] == h).collect()
    }

    /// Rows of half `h` with their fold labels, aligned.
    pub fn half_layout(&self, h: u8) -> (Vec<usize>, Vec<u32>) {
        let rows = self.half_rows(h);
        let folds = rows.iter().map(|&i| self.fold[i]).collect();
        (rows, folds)
    }

    pub fn fold_sizes(&self, h: u8) -> Vec<usize> {
        let mut sizes = vec![0; self.folds];
        for i in 0..self.n() {
            if self.half[i] == h {
                sizes[self.fold[i] as usize] += 1;
            }
        }
        sizes
    }
}
