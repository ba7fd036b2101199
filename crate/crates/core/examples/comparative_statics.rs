//! Prices along a rising conjecture path, and the joint revenue optimum the
//! path approaches when sellers are symmetric.

use nalgebra::DMatrix;
use switchback_cv::demand::{DemandSystem, PriceBox};
use switchback_cv::design::ConjectureMatrix;
use switchback_cv::equilibrium::{gmv_optimize, sweep_conjecture, SolverOptions};

fn main() -> switchback_cv::Result<()> {
    let bx = PriceBox::new(vec![1.0, 1.0], vec![9.0, 9.0])?;
    let b = DMatrix::from_row_slice(2, 2, &[10.0, 4.0, 4.0, 10.0]);
    let d = DemandSystem::linear(vec![100.0, 100.0], b, bx)?;

    let path: Vec<ConjectureMatrix> = (0..=8).map(|k| ConjectureMatrix::uniform(2, k as f64 / 8.0)).collect();
    let sweep = sweep_conjecture(&d, &[0.5, 0.5], &path, &SolverOptions::default())?;
    println!("{:>6} {:>10} {:>10}", "A", "price", "25/(4-A)");
    for (pt, a) in sweep.points.iter().zip(&path) {
        let level = a.get(0, 1);
        let price = pt.result.as_ref().map_or(f64::NAN, |r| r.price[0]);
        println!("{level:>6.3} {price:>10.6} {:>10.6}", 25.0 / (4.0 - level));
    }
    println!("prices nondecreasing: {}", sweep.prices_nondecreasing);

    let gmv = gmv_optimize(&d, 65, 200)?;
    println!("joint revenue optimum {:?}, revenue {:.4}", gmv.price, gmv.value);
    Ok(())
}
