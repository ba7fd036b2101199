use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use super::{check_conjecture, check_rates, cv_slopes_at, z_at};
use crate::demand::{DemandModel, DemandSystem};
use crate::design::ConjectureMatrix;
use crate::error::{Error, Result};
use crate::grid::scan_points;
use crate::io::ser_matrix;

/// Central-difference step for numerical Jacobians.
pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JacobianMethod {
    Analytic,
    FiniteDifference,
}

/// `Dz(p)`, entry `(i, j) = d z_i / d p_j`.
///
/// The analytic route differentiates `z_i = p_i / 2 + lambda_i / (2 beta_i)`
/// using the demand Hessian, so it covers every conjecture matrix, not only
/// the Nash case.
pub fn jacobian_z(d: &DemandSystem, a: &ConjectureMatrix, p: &[f64], method: JacobianMethod) -> Result<DMatrix<f64>> {
    check_conjecture(d, a)?;
    d.mean_demand(p)?;
    let (_, beta) = cv_slopes_at(d, a, p);
    if let Some(seller) = beta.iter().position(|&b| !(b > 0.0)) {
        return Err(Error::NonPositiveSlope {
            seller,
            beta: beta[seller],
            price: p.to_vec(),
        });
    }
    Ok(match method {
        JacobianMethod::Analytic => analytic_jacobian(d, a, p),
        JacobianMethod::FiniteDifference => fd_jacobian(d, a, p),
    })
}

/// `d beta_i / d p_j` for all `i, j`.
fn slope_gradient(d: &DemandSystem, a: &ConjectureMatrix, p: &[f64]) -> DMatrix<f64> {
    let n = d.n();
    let mut out = DMatrix::zeros(n, n);
    if d.is_linear() {
        return out;
    }
    for i in 0..n {
        let h = d.hessian_row_at(p, i);
        for j in 0..n {
            let mut v = h[(i, j)];
            for l in 0..n {
                if l != i {
                    v += a.get(i, l) * h[(l, j)];
                }
            }
            out[(i, j)] = -v;
        }
    }
    out
}

fn analytic_jacobian(d: &DemandSystem, a: &ConjectureMatrix, p: &[f64]) -> DMatrix<f64> {
    let n = d.n();
    let (lam, beta) = cv_slopes_at(d, a, p);
    let g = d.gradient_at(p);
    let db = slope_gradient(d, a, p);
    DMatrix::from_fn(n, n, |i, j| {
        let own = if i == j { 0.5 } else { 0.0 };
        own + 0.5 * (beta[i] * g[(i, j)] - lam[i] * db[(i, j)]) / (beta[i] * beta[i])
    })
}

fn fd_jacobian(d: &DemandSystem, a: &ConjectureMatrix, p: &[f64]) -> DMatrix<f64> {
    let n = d.n();
    let mut out = DMatrix::zeros(n, n);
    let mut x = p.to_vec();
    for j in 0..n {
        x[j] = p[j] + FD_STEP;
        let up = z_at(d, a, &x);
        x[j] = p[j] - FD_STEP;
        let down = z_at(d, a, &x);
        x[j] = p[j];
        for i in 0..n {
            out[(i, j)] = (up[i] - down[i]) / (2.0 * FD_STEP);
        }
    }
    out
}

/// Nash-case split `Dz = L_comp + L_curv` into the cross-price (competition)
/// and slope-variation (curvature) parts.
pub fn decompose_jacobian(d: &DemandSystem, a: &ConjectureMatrix, p: &[f64]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    check_conjecture(d, a)?;
    if !a.is_zero() {
        return Err(Error::Unsupported(
            "Jacobian decomposition is defined for the zero conjecture only; use jacobian_z".into(),
        ));
    }
    jacobian_z(d, a, p, JacobianMethod::Analytic)?;
    Ok(decompose_at(d, a, p))
}

fn decompose_at(d: &DemandSystem, a: &ConjectureMatrix, p: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = d.n();
    let (lam, beta) = cv_slopes_at(d, a, p);
    let g = d.gradient_at(p);
    let db = slope_gradient(d, a, p);
    let comp = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { g[(i, j)] / (2.0 * beta[i]) });
    let curv = DMatrix::from_fn(n, n, |i, j| 0.0 - lam[i] * db[(i, j)] / (2.0 * beta[i] * beta[i]));
    (comp, curv)
}

fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Serialize)]
pub struct ContractionReport {
    /// Grid estimate of `sup_p ||Dz(p)||_inf`.
    pub norm_sup: f64,
    pub argmax: Vec<f64>,
    /// `max_i (1 - u_i + u_i norm_sup)`.
    pub gamma: f64,
    pub satisfied: bool,
    pub points_evaluated: usize,
    /// Smallest CV slope seen on the grid; must stay positive.
    pub min_beta: f64,
    pub query_point: Vec<f64>,
    #[serde(serialize_with = "ser_opt_matrix")]
    pub l_comp: Option<DMatrix<f64>>,
    #[serde(serialize_with = "ser_opt_matrix")]
    pub l_curv: Option<DMatrix<f64>>,
    /// Linear demand, nonnegative conjecture:
    /// `sum_{j != i} (1 + 3 A_ij) b_ij < 2 b_ii` for every i.
    pub sufficient_linear: Option<bool>,
    /// Logit demand, common price sensitivity, zero conjecture: every grid
    /// share below 3/5.
    pub sufficient_mnl: Option<bool>,
    pub max_share: Option<f64>,
}

fn ser_opt_matrix<S: serde::Serializer>(m: &Option<DMatrix<f64>>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match m {
        Some(m) => ser_matrix(m, s),
        None => s.serialize_none(),
    }
}

impl ContractionReport {
    /// Human-readable verdict line, e.g. `||Dz||_inf = 0.4 < 1`.
    pub fn verdict(&self) -> String {
        format!(
            "‖Dz‖∞ = {} {} 1",
            format_compact(self.norm_sup),
            if self.satisfied { "<" } else { ">=" }
        )
    }
}

fn format_compact(x: f64) -> String {
    let s = format!("{x:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

pub fn contraction_report(
    d: &DemandSystem,
    a: &ConjectureMatrix,
    u: &[f64],
    grid_resolution: usize,
) -> Result<ContractionReport> {
    check_conjecture(d, a)?;
    check_rates(u, d.n())?;
    if grid_resolution < 2 {
        return Err(Error::validation("grid_resolution", "must be at least 2"));
    }
    let n = d.n();
    // Linear demand has a constant Jacobian; one point is exact.
    let points = if d.is_linear() {
        vec![d.price_box().midpoint()]
    } else {
        scan_points(d.price_box(), grid_resolution)
    };
    let evals: Vec<(f64, f64, f64)> = points
        .par_iter()
        .map(|p| {
            let (lam, beta) = cv_slopes_at(d, a, p);
            let min_beta = beta.iter().cloned().fold(f64::INFINITY, f64::min);
            let norm = if min_beta > 0.0 {
                inf_norm(&analytic_jacobian(d, a, p))
            } else {
                f64::INFINITY
            };
            let share = lam.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            (norm, min_beta, share)
        })
        .collect();
    let mut norm_sup = f64::NEG_INFINITY;
    let mut argmax = points[0].clone();
    let mut min_beta = f64::INFINITY;
    let mut max_share = f64::NEG_INFINITY;
    // Sequential reduction keeps ties and argmax deterministic.
    for (p, &(norm, b, share)) in points.iter().zip(&evals) {
        if norm > norm_sup {
            norm_sup = norm;
            argmax = p.clone();
        }
        min_beta = min_beta.min(b);
        max_share = max_share.max(share);
    }
    let satisfied = norm_sup < 1.0 && min_beta > 0.0;
    let gamma = u
        .iter()
        .map(|ui| 1.0 - ui + ui * norm_sup)
        .fold(f64::NEG_INFINITY, f64::max);

    let query_point = d.price_box().midpoint();
    let (l_comp, l_curv) = if a.is_zero() && min_beta > 0.0 {
        let (c, v) = decompose_at(d, a, &query_point);
        (Some(c), Some(v))
    } else {
        (None, None)
    };

    let (sufficient_linear, sufficient_mnl, share_report) = match d.model() {
        DemandModel::Linear { b, .. } if a.is_nonnegative() => {
            let ok = (0..n).all(|i| {
                let lhs: f64 = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| (1.0 + 3.0 * a.get(i, j)) * b[(i, j)])
                    .sum();
                lhs < 2.0 * b[(i, i)]
            });
            (Some(ok), None, None)
        }
        DemandModel::Mnl { b, .. } if a.is_zero() && b.iter().all(|&x| x == b[0]) => {
            (None, Some(max_share < 0.6), Some(max_share))
        }
        DemandModel::Mnl { .. } => (None, None, Some(max_share)),
        _ => (None, None, None),
    };

    Ok(ContractionReport {
        norm_sup,
        argmax,
        gamma,
        satisfied,
        points_evaluated: points.len(),
        min_beta,
        query_point,
        l_comp,
        l_curv,
        sufficient_linear,
        sufficient_mnl,
        max_share: share_report,
    })
}
