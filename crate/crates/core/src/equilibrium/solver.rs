use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{check_conjecture, check_rates, contraction_report, cv_slopes_at, foc_residuals};
use crate::demand::{DemandModel, DemandSystem};
use crate::design::ConjectureMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverOptions {
    /// Stop once `||F(p) - p||_inf` falls below this.
    pub tol: f64,
    /// Interior solutions must also bring every FOC residual below this.
    pub foc_tol: f64,
    pub max_iter: usize,
    /// Refuse to iterate unless the contraction report certifies the map.
    pub require_contraction: bool,
    pub grid_resolution: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-13,
            foc_tol: 1e-8,
            max_iter: 100_000,
            require_contraction: true,
            grid_resolution: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPointResult {
    pub price: Vec<f64>,
    pub iterations: usize,
    pub residual_map: f64,
    pub residual_foc: Vec<f64>,
    pub boundary_flags: Vec<bool>,
    pub certified_interior: bool,
}

impl FixedPointResult {
    pub fn max_foc_residual(&self) -> f64 {
        self.residual_foc.iter().fold(0.0, |m, r| m.max(r.abs()))
    }
}

fn boundary_flags(d: &DemandSystem, p: &[f64]) -> Vec<bool> {
    let bx = d.price_box();
    (0..p.len())
        .map(|i| {
            let eps = 1e-10 * (1.0 + bx.upper()[i].abs());
            p[i] - bx.lower()[i] <= eps || bx.upper()[i] - p[i] <= eps
        })
        .collect()
}

/// Damped iteration of `F(p) = proj((I - U) p + U z(p))` from `init`.
///
/// A fixed point on the box boundary is returned with
/// `certified_interior = false`; its FOC residuals are reported but carry no
/// optimality certificate.
pub fn solve_fixed_point(
    d: &DemandSystem,
    a: &ConjectureMatrix,
    u: &[f64],
    init: &[f64],
    opts: &SolverOptions,
) -> Result<FixedPointResult> {
    check_conjecture(d, a)?;
    check_rates(u, d.n())?;
    d.mean_demand(init)?;
    if opts.require_contraction {
        let report = contraction_report(d, a, u, opts.grid_resolution)?;
        if !report.satisfied {
            return Err(Error::NotContraction {
                norm_sup: report.norm_sup,
            });
        }
    }
    let n = d.n();
    let bx = d.price_box();
    let mut p = init.to_vec();
    let mut next = vec![0.0; n];
    let mut step = f64::INFINITY;
    for iteration in 1..=opts.max_iter {
        let (lam, beta) = cv_slopes_at(d, a, &p);
        if let Some(seller) = beta.iter().position(|&b| !(b > 0.0)) {
            return Err(Error::NonPositiveSlope {
                seller,
                beta: beta[seller],
                price: p,
            });
        }
        step = 0.0;
        for i in 0..n {
            let z = 0.5 * p[i] + 0.5 * lam[i] / beta[i];
            next[i] = bx.clamp_coord(i, (1.0 - u[i]) * p[i] + u[i] * z);
            step = step.max((next[i] - p[i]).abs());
        }
        std::mem::swap(&mut p, &mut next);
        if step <= opts.tol {
            let flags = boundary_flags(d, &p);
            let foc = foc_residuals(d, a, &p)?;
            let max_foc = foc.iter().fold(0.0_f64, |m, r| m.max(r.abs()));
            let interior = !flags.iter().any(|&f| f);
            if !interior || max_foc <= opts.foc_tol {
                return Ok(FixedPointResult {
                    price: p,
                    iterations: iteration,
                    residual_map: step,
                    residual_foc: foc,
                    certified_interior: interior && max_foc <= opts.foc_tol,
                    boundary_flags: flags,
                });
            }
        }
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iter,
        residual: step,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosedFormSolution {
    pub price: Vec<f64>,
    /// `false` means the interior solution lies outside the box (boundary regime).
    pub inside_box: bool,
}

/// Solves the linear-demand CV first-order system
/// `a_i + sum_{j != i} b_ij p_j - p_i (2 b_ii - sum_{j != i} A_ij b_ij) = 0`
/// directly.
pub fn linear_cv_closed_form(d: &DemandSystem, a: &ConjectureMatrix) -> Result<ClosedFormSolution> {
    check_conjecture(d, a)?;
    let DemandModel::Linear { a: intercept, b } = d.model() else {
        return Err(Error::Unsupported("closed-form CV solve requires linear demand".into()));
    };
    let n = d.n();
    let m = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            let conj: f64 = (0..n).filter(|&k| k != i).map(|k| a.get(i, k) * b[(i, k)]).sum();
            2.0 * b[(i, i)] - conj
        } else {
            -b[(i, j)]
        }
    });
    let rhs = DVector::from_column_slice(intercept);
    let lu = m.lu();
    let sol = lu
        .solve(&rhs)
        .filter(|s| s.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::Singular("linear CV first-order system".into()))?;
    let price: Vec<f64> = sol.iter().cloned().collect();
    let inside_box = d.price_box().contains(&price);
    Ok(ClosedFormSolution { price, inside_box })
}
