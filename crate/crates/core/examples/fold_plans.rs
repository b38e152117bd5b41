//! Balanced, stratified and resampled fold plans.

use vimkit::folds::{make_fold_plan, make_fold_plan_with, FoldMode, FoldOptions};

fn main() -> vimkit::Result<()> {
    let plan = make_fold_plan(40, 5, true, 1)?;
    println!("half 0 fold sizes {:?}", plan.fold_sizes(0));
    println!("half 1 fold sizes {:?}", plan.fold_sizes(1));
    println!("first ten (half, fold): {:?}", plan.half.iter().zip(&plan.fold).take(10).collect::<Vec<_>>());

    let y: Vec<f64> = (0..30).map(|i| f64::from(u8::from(i % 3 == 0))).collect();
    let strat = make_fold_plan_with(30, 5, false, 7, &FoldOptions::default(), Some(&y))?;
    for k in 0..5u32 {
        let ones = (0..30).filter(|&i| strat.fold[i] == k && y[i] == 1.0).count();
        println!("stratified fold {k}: {} rows, {ones} positives", strat.fold_sizes(0)[k as usize]);
    }

    let opts = FoldOptions {
        mode: FoldMode::WithReplacement,
        split_fraction: 0.6,
    };
    let drawn = make_fold_plan_with(60, 3, true, 2, &opts, None)?;
    println!("resampled split: {} / {} rows", drawn.half_rows(0).len(), drawn.half_rows(1).len());

    match make_fold_plan(10, 5, true, 0) {
        Err(e) => println!("too small: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
