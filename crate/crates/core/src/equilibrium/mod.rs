//! Conjectural-variations equilibria.
//!
//! For a conjecture matrix `A`, seller i's CV slope and intercept at `p` are
//!
//! ```text
//! beta_i(p)  = -(d_i lambda_i + sum_{j != i} A_ij d_j lambda_i)
//! alpha_i(p) = lambda_i(p) + beta_i(p) p_i
//! ```
//!
//! and the target map `z_i(p) = alpha_i / (2 beta_i)` is what a seller who
//! fits a one-variable linear demand model would charge. The damped,
//! projected update `F(p) = proj((I - U) p + U z(p))` is the noiseless limit
//! of the learning dynamics; its interior fixed points are exactly the
//! prices satisfying the CV first-order condition
//! `lambda_i + p_i (d_i lambda_i + sum_j A_ij d_j lambda_i) = 0`.

mod gmv;
mod jacobian;
mod solver;
mod statics;

pub use gmv::{gmv_optimize, GmvResult};
pub use jacobian::{contraction_report, decompose_jacobian, jacobian_z, ContractionReport, JacobianMethod, FD_STEP};
pub use solver::{linear_cv_closed_form, solve_fixed_point, ClosedFormSolution, FixedPointResult, SolverOptions};
pub use statics::{sweep_conjecture, ConjectureSweep, SweepPoint, MONOTONE_TOL};

use serde::Serialize;

use crate::demand::DemandSystem;
use crate::design::ConjectureMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvCoefficients {
    pub beta: Vec<f64>,
    pub alpha: Vec<f64>,
}

fn check_conjecture(d: &DemandSystem, a: &ConjectureMatrix) -> Result<()> {
    if a.n() != d.n() {
        return Err(Error::validation(
            "conjecture",
            format!("expected {n}x{n}, got {m}x{m}", n = d.n(), m = a.n()),
        ));
    }
    Ok(())
}

pub(crate) fn check_rates(u: &[f64], n: usize) -> Result<()> {
    if u.len() != n {
        return Err(Error::validation(
            "u",
            format!("expected {n} learning rates, got {}", u.len()),
        ));
    }
    for (i, &ui) in u.iter().enumerate() {
        if !(ui > 0.0 && ui < 1.0) {
            return Err(Error::validation(
                format!("u[{i}]"),
                format!("learning rate must lie in the open interval (0, 1), got {ui}"),
            ));
        }
    }
    Ok(())
}

/// CV slopes without the positivity check or domain check.
pub(crate) fn cv_slopes_at(d: &DemandSystem, a: &ConjectureMatrix, p: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let lam = d.lambda_at(p);
    let g = d.gradient_at(p);
    let n = d.n();
    let beta = (0..n)
        .map(|i| {
            let cross: f64 = (0..n).filter(|&j| j != i).map(|j| a.get(i, j) * g[(i, j)]).sum();
            -(g[(i, i)] + cross)
        })
        .collect();
    (lam, beta)
}

fn positive_slopes(beta: &[f64], p: &[f64]) -> Result<()> {
    match beta.iter().position(|&b| !(b > 0.0)) {
        None => Ok(()),
        Some(seller) => Err(Error::NonPositiveSlope {
            seller,
            beta: beta[seller],
            price: p.to_vec(),
        }),
    }
}

pub fn cv_coefficients(d: &DemandSystem, a: &ConjectureMatrix, p: &[f64]) -> Result<CvCoefficients> {
    check_conjecture(d, a)?;
    d.mean_demand(p)?;
    let (lam, beta) = cv_slopes_at(d, a, p);
    positive_slopes(&beta, p)?;
    let alpha = lam.iter().zip(&beta).zip(p).map(|((l, b), x)| l + b * x).collect();
    Ok(CvCoefficients { beta, alpha })
}

pub fn z_map(d: &DemandSystem, a: &ConjectureMatrix, p: &[f64]) -> Result<Vec<f64>> {
    let c = cv_coefficients(d, a, p)?;
    Ok(c.alpha.iter().zip(&c.beta).map(|(al, be)| al / (2.0 * be)).collect())
}

/// `z` without checks, for finite differences near the box edge.
pub(crate) fn z_at(d: &DemandSystem, a: &ConjectureMatrix, p: &[f64]) -> Vec<f64> {
    let (lam, beta) = cv_slopes_at(d, a, p);
    (0..d.n()).map(|i| 0.5 * p[i] + 0.5 * lam[i] / beta[i]).collect()
}

pub fn f_map(d: &DemandSystem, a: &ConjectureMatrix, p: &[f64], u: &[f64]) -> Result<Vec<f64>> {
    check_rates(u, d.n())?;
    let z = z_map(d, a, p)?;
    let bx = d.price_box();
    Ok((0..d.n())
        .map(|i| bx.clamp_coord(i, (1.0 - u[i]) * p[i] + u[i] * z[i]))
        .collect())
}

/// CV first-order condition residuals `lambda_i - p_i beta_i`.
pub fn foc_residuals(d: &DemandSystem, a: &ConjectureMatrix, p: &[f64]) -> Result<Vec<f64>> {
    check_conjecture(d, a)?;
    d.mean_demand(p)?;
    let (lam, beta) = cv_slopes_at(d, a, p);
    Ok(lam.iter().zip(&beta).zip(p).map(|((l, b), x)| l - x * b).collect())
}
