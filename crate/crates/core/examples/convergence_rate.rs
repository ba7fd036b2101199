//! Replicated runs from a plan file and a log-log fit of mean squared error
//! against elapsed periods.

use std::path::Path;

use switchback_cv::harness::{fit_rate, run_replications};
use switchback_cv::plan::Plan;

fn main() -> switchback_cv::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("plans/rate.toml");
    let (plan, _) = Plan::load(&path)?;
    let exp = plan.experiment()?;
    let stats = run_replications(&exp)?;

    println!("target {:?}, {} replications", stats.target, stats.replications);
    println!("{:>5} {:>9} {:>11} {:>11}", "batch", "T", "mean_err", "mean_sq_err");
    for b in &stats.batches {
        println!(
            "{:>5} {:>9} {:>11.5} {:>11.3e}",
            b.batch, b.horizon, b.mean_err, b.mean_sq_err
        );
    }
    let fit = fit_rate(&stats, plan.tail_fraction(), plan.bootstrap_resamples(), plan.seed())?;
    println!(
        "slope {:.3} over batches {}..{}, 95% interval {:.3}..{:.3}",
        fit.slope, fit.window.0, fit.window.1, fit.slope_ci.0, fit.slope_ci.1
    );
    Ok(())
}
