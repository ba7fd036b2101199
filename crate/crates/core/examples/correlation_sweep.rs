//! How correlation in the experiment design moves the learned prices.

use std::path::Path;

use switchback_cv::harness::correlation_sweep;
use switchback_cv::plan::Plan;

fn main() -> switchback_cv::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("plans/mixture_sweep.toml");
    let (plan, _) = Plan::load(&path)?;
    let mut exp = plan.experiment()?;
    exp.replications = 20;

    let sweep = correlation_sweep(&exp, &[0.0, 0.2, 0.4, 0.6, 0.8, 0.95], 0.5, true)?;
    println!(
        "{:>5} {:>8} {:>10} {:>10} {:>8}",
        "rho", "A*", "limit", "simulated", "gap"
    );
    for row in &sweep.rows {
        if let Some(f) = &row.failure {
            println!("{:>5.2} failed: {f}", row.rho);
            continue;
        }
        let limit = row.limit.as_ref().map_or(f64::NAN, |p| p[0]);
        let sim = row.simulated_mean.as_ref().map_or(f64::NAN, |p| p[0]);
        println!(
            "{:>5.2} {:>8.4} {:>10.5} {:>10.5} {:>8.4}",
            row.rho,
            row.a_star[1],
            limit,
            sim,
            row.gap.unwrap_or(f64::NAN)
        );
    }
    println!("limits nondecreasing in rho: {}", sweep.limits_nondecreasing);
    Ok(())
}
