//! One run of the switchback learning dynamics, batch by batch.

use nalgebra::DMatrix;
use switchback_cv::demand::{DemandSystem, NoiseKind, NoiseSpec, PriceBox};
use switchback_cv::design::{DesignSchedule, ExperimentDesign};
use switchback_cv::sldl::{run_sldl, BatchSchedule, DeltaSchedule, SldlConfig};

fn main() -> switchback_cv::Result<()> {
    let bx = PriceBox::new(vec![1.0, 1.0], vec![9.0, 9.0])?;
    let b = DMatrix::from_row_slice(2, 2, &[10.0, 4.0, 4.0, 10.0]);
    let d = DemandSystem::linear(vec![100.0, 100.0], b, bx)?;
    let noise = NoiseSpec::new(NoiseKind::BoundedUniform, vec![1.0, 1.0], None)?;

    // Correlated experimentation: the learned prices drift above Nash (6.25)
    // toward the conjectural-variations price 25 / (4 - 0.8).
    let designs = DesignSchedule::constant(ExperimentDesign::mixture(2, 0.8, 0.5)?);
    let cfg = SldlConfig::new(
        vec![0.3, 0.3],
        vec![1.5, 1.5],
        BatchSchedule::Geometric {
            first: 1024,
            growth: 1.35,
            batches: 20,
        },
        DeltaSchedule::LogRatio,
        42,
    );
    let trace = run_sldl(&cfg, &d, Some(&noise), &designs)?;

    println!(
        "{:>5} {:>8} {:>7} {:>9} {:>9} {:>8}",
        "batch", "length", "delta", "beta_hat", "A_emp", "price"
    );
    for rec in &trace.batches {
        println!(
            "{:>5} {:>8} {:>7.4} {:>9.4} {:>9.4} {:>8.4}",
            rec.batch,
            rec.length,
            rec.delta[0],
            rec.beta_hat[0].unwrap_or(f64::NAN),
            rec.empirical_conjecture[1],
            rec.next_price[0]
        );
    }
    println!("final {:?}, target {:.4}", trace.final_price, 25.0 / 3.2);
    Ok(())
}
