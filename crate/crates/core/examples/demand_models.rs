//! Linear and logit demand: mean demand, slopes and the regularity scan.

use nalgebra::DMatrix;
use switchback_cv::demand::{DemandSystem, NoiseSpec, PriceBox};

fn main() -> switchback_cv::Result<()> {
    let bx = PriceBox::new(vec![1.0, 1.0], vec![9.0, 9.0])?;
    let b = DMatrix::from_row_slice(2, 2, &[10.0, 4.0, 4.0, 10.0]);
    let linear = DemandSystem::linear(vec![100.0, 100.0], b, bx)?;

    let logit_box = PriceBox::new(vec![0.5, 0.5], vec![5.0, 5.0])?;
    let logit = DemandSystem::mnl(vec![0.5, 0.2], vec![1.0, 1.0], logit_box)?;

    for d in [&linear, &logit] {
        let p = d.price_box().midpoint();
        println!("{} demand at {p:?}", d.model().kind_name());
        println!("  mean      {:?}", d.mean_demand(&p)?);
        println!("  gradient  {:?}", d.demand_gradient(&p)?.as_slice());
        let bounds = d.scan_bounds(64)?;
        println!(
            "  scan: m0 {:.4}, m1 {:.4}, M2 {:.4}, regular {}",
            bounds.m0,
            bounds.m1,
            bounds.max_curvature,
            bounds.regular()
        );
        let noise = NoiseSpec::default_for(&bounds, d.n())?;
        println!("  default noise sigma {:?}", noise.sigma());
    }
    Ok(())
}
