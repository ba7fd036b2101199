//! Nash and conjectural-variations equilibria by damped fixed-point
//! iteration, checked against the linear closed form.

use nalgebra::DMatrix;
use switchback_cv::demand::{DemandSystem, PriceBox};
use switchback_cv::design::ConjectureMatrix;
use switchback_cv::equilibrium::{
    contraction_report, decompose_jacobian, linear_cv_closed_form, solve_fixed_point, SolverOptions,
};

fn main() -> switchback_cv::Result<()> {
    let bx = PriceBox::new(vec![0.5, 1.0], vec![3.0, 10.0])?;
    let b = DMatrix::from_row_slice(2, 2, &[25.0, 1.0, 2.5, 12.0]);
    let d = DemandSystem::linear(vec![80.0, 150.0], b, bx)?;
    let u = [0.5, 0.5];
    let opts = SolverOptions::default();

    for level in [0.0, 0.5, 1.0] {
        let a = ConjectureMatrix::uniform(2, level);
        let report = contraction_report(&d, &a, &u, opts.grid_resolution)?;
        let fp = solve_fixed_point(&d, &a, &u, &d.price_box().midpoint(), &opts)?;
        let closed = linear_cv_closed_form(&d, &a)?;
        println!(
            "A = {level:.1}: price {:?} after {} iterations, closed form {:?}, {} (gamma {:.3})",
            fp.price,
            fp.iterations,
            closed.price,
            report.verdict(),
            report.gamma
        );
    }

    let p = d.price_box().midpoint();
    let (comp, curv) = decompose_jacobian(&d, &ConjectureMatrix::zeros(2), &p)?;
    println!("competition part {:?}", comp.as_slice());
    println!("curvature part   {:?}", curv.as_slice());
    Ok(())
}
