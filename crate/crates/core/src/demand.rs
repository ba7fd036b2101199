//! Mean-demand systems, their derivatives, regularity bounds and noise.
//!
//! Two parametric families are supported:
//!
//! * linear: `lambda_i(p) = a_i - b_ii p_i + sum_{j != i} b_ij p_j`
//! * multinomial logit: `lambda_i(p) = exp(a_i - b_i p_i) / (1 + sum_j exp(a_j - b_j p_j))`
//!
//! Every system carries the price box it is defined on. The checked
//! evaluators (`mean_demand`, `demand_gradient`, `demand_hessian_row`) reject
//! prices outside that box; the `*_at` variants skip the check and are used
//! by finite-difference oracles and inner simulation loops.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::TensorGrid;

/// Slack allowed when testing box membership, absorbing round-off from
/// projections and grid construction.
const BOX_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriceBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl PriceBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::validation(
                "box",
                format!(
                    "lower/upper must be nonempty and of equal length (got {} and {})",
                    lower.len(),
                    upper.len()
                ),
            ));
        }
        for (i, (&lo, &hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && lo > 0.0) {
                return Err(Error::validation(
                    format!("box.lower[{i}]"),
                    format!("must be a positive finite price, got {lo}"),
                ));
            }
            if !(hi.is_finite() && hi > lo) {
                return Err(Error::validation(
                    format!("box.upper[{i}]"),
                    format!("must exceed lower bound {lo}, got {hi}"),
                ));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn n(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn width(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, h)| 0.5 * (l + h)).collect()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.n()
            && p.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(&x, (&lo, &hi))| x >= lo - BOX_SLACK && x <= hi + BOX_SLACK)
    }

    /// Index of the first coordinate outside the box, if any.
    fn first_violation(&self, p: &[f64]) -> Option<usize> {
        if p.len() != self.n() {
            return Some(0);
        }
        p.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .position(|(&x, (&lo, &hi))| !(x >= lo - BOX_SLACK && x <= hi + BOX_SLACK))
    }

    pub fn clamp_coord(&self, i: usize, x: f64) -> f64 {
        x.clamp(self.lower[i], self.upper[i])
    }

    /// Componentwise projection; exact for a product of intervals.
    pub fn project(&self, p: &[f64]) -> Vec<f64> {
        p.iter().enumerate().map(|(i, &x)| self.clamp_coord(i, x)).collect()
    }

    /// `[lower_i + delta_i, upper_i - delta_i]`; requires width > 2 delta.
    pub fn shrink(&self, delta: &[f64]) -> Result<PriceBox> {
        if delta.len() != self.n() {
            return Err(Error::validation("delta", "length must match the box dimension"));
        }
        for (i, &d) in delta.iter().enumerate() {
            if !(d >= 0.0) || self.width(i) <= 2.0 * d {
                return Err(Error::validation(
                    format!("delta[{i}]"),
                    format!("box width {} must exceed twice the perturbation {d}", self.width(i)),
                ));
            }
        }
        Ok(PriceBox {
            lower: self.lower.iter().zip(delta).map(|(l, d)| l + d).collect(),
            upper: self.upper.iter().zip(delta).map(|(h, d)| h - d).collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DemandModel {
    /// `b` holds own-price slopes on the diagonal (positive) and cross-price
    /// slopes off the diagonal (nonnegative); the sign convention is applied
    /// in the demand formula.
    Linear {
        a: Vec<f64>,
        b: DMatrix<f64>,
    },
    Mnl {
        a: Vec<f64>,
        b: Vec<f64>,
    },
}

impl DemandModel {
    pub fn kind_name(&self) -> &'static str {
        match self {
            DemandModel::Linear { .. } => "linear",
            DemandModel::Mnl { .. } => "mnl",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemandSystem {
    model: DemandModel,
    price_box: PriceBox,
}

impl DemandSystem {
    pub fn linear(a: Vec<f64>, b: DMatrix<f64>, price_box: PriceBox) -> Result<Self> {
        let n = price_box.n();
        if a.len() != n {
            return Err(Error::validation(
                "demand.a",
                format!("expected {n} entries, got {}", a.len()),
            ));
        }
        if b.nrows() != n || b.ncols() != n {
            return Err(Error::validation(
                "demand.b",
                format!("expected a {n}x{n} matrix, got {}x{}", b.nrows(), b.ncols()),
            ));
        }
        for i in 0..n {
            if !a[i].is_finite() {
                return Err(Error::validation(format!("demand.a[{i}]"), "must be finite"));
            }
            for j in 0..n {
                let v = b[(i, j)];
                let ok = if i == j { v > 0.0 } else { v >= 0.0 };
                if !(ok && v.is_finite()) {
                    return Err(Error::validation(
                        format!("demand.b[{i}][{j}]"),
                        if i == j {
                            format!("own-price slope must be positive, got {v}")
                        } else {
                            format!("cross-price slope must be nonnegative, got {v}")
                        },
                    ));
                }
            }
        }
        // Linear demand is smallest at the corner (own price high, rivals low).
        for i in 0..n {
            let mut worst = a[i];
            for j in 0..n {
                if i == j {
                    worst -= b[(i, i)] * price_box.upper()[i];
                } else {
                    worst += b[(i, j)] * price_box.lower()[j];
                }
            }
            if worst <= 0.0 {
                return Err(Error::validation(
                    format!("demand.a[{i}]"),
                    format!("mean demand reaches {worst} <= 0 inside the price box"),
                ));
            }
        }
        Ok(Self {
            model: DemandModel::Linear { a, b },
            price_box,
        })
    }

    pub fn mnl(a: Vec<f64>, b: Vec<f64>, price_box: PriceBox) -> Result<Self> {
        let n = price_box.n();
        if a.len() != n || b.len() != n {
            return Err(Error::validation(
                "demand",
                format!("a and b must have {n} entries (got {} and {})", a.len(), b.len()),
            ));
        }
        for i in 0..n {
            if !a[i].is_finite() {
                return Err(Error::validation(format!("demand.a[{i}]"), "must be finite"));
            }
            if !(b[i].is_finite() && b[i] > 0.0) {
                return Err(Error::validation(
                    format!("demand.b[{i}]"),
                    format!("price sensitivity must be positive, got {}", b[i]),
                ));
            }
        }
        Ok(Self {
            model: DemandModel::Mnl { a, b },
            price_box,
        })
    }

    /// Same model on a different box (re-runs the construction checks).
    pub fn with_box(&self, price_box: PriceBox) -> Result<Self> {
        match &self.model {
            DemandModel::Linear { a, b } => Self::linear(a.clone(), b.clone(), price_box),
            DemandModel::Mnl { a, b } => Self::mnl(a.clone(), b.clone(), price_box),
        }
    }

    pub fn n(&self) -> usize {
        self.price_box.n()
    }

    pub fn model(&self) -> &DemandModel {
        &self.model
    }

    pub fn price_box(&self) -> &PriceBox {
        &self.price_box
    }

    pub fn is_linear(&self) -> bool {
        matches!(self.model, DemandModel::Linear { .. })
    }

    fn check_domain(&self, p: &[f64]) -> Result<()> {
        match self.price_box.first_violation(p) {
            None => Ok(()),
            Some(seller) => Err(Error::Domain {
                seller,
                price: p.to_vec(),
            }),
        }
    }

    pub fn mean_demand(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.check_domain(p)?;
        Ok(self.lambda_at(p))
    }

    /// Entry `(i, j)` is `d lambda_i / d p_j`.
    pub fn demand_gradient(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        self.check_domain(p)?;
        Ok(self.gradient_at(p))
    }

    /// Entry `(j, l)` is `d^2 lambda_i / d p_j d p_l`.
    pub fn demand_hessian_row(&self, p: &[f64], i: usize) -> Result<DMatrix<f64>> {
        self.check_domain(p)?;
        if i >= self.n() {
            return Err(Error::validation("seller", format!("index {i} out of range")));
        }
        Ok(self.hessian_row_at(p, i))
    }

    pub fn lambda_at(&self, p: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n()];
        self.lambda_into(p, &mut out);
        out
    }

    pub fn lambda_into(&self, p: &[f64], out: &mut [f64]) {
        match &self.model {
            DemandModel::Linear { a, b } => {
                for i in 0..a.len() {
                    let mut v = a[i] - b[(i, i)] * p[i];
                    for j in 0..a.len() {
                        if j != i {
                            v += b[(i, j)] * p[j];
                        }
                    }
                    out[i] = v;
                }
            }
            DemandModel::Mnl { a, b } => {
                // Shift by the largest utility (including the outside option's
                // zero) so the exponentials cannot overflow.
                let shift = a
                    .iter()
                    .zip(b)
                    .zip(p)
                    .map(|((a, b), p)| a - b * p)
                    .fold(0.0_f64, f64::max);
                let mut denom = (-shift).exp();
                for i in 0..a.len() {
                    out[i] = (a[i] - b[i] * p[i] - shift).exp();
                    denom += out[i];
                }
                for v in out.iter_mut() {
                    *v /= denom;
                }
            }
        }
    }

    pub fn gradient_at(&self, p: &[f64]) -> DMatrix<f64> {
        let n = self.n();
        match &self.model {
            DemandModel::Linear { b, .. } => DMatrix::from_fn(n, n, |i, j| if i == j { -b[(i, i)] } else { b[(i, j)] }),
            DemandModel::Mnl { b, .. } => {
                let lam = self.lambda_at(p);
                DMatrix::from_fn(n, n, |i, j| {
                    if i == j {
                        -b[i] * lam[i] * (1.0 - lam[i])
                    } else {
                        b[j] * lam[i] * lam[j]
                    }
                })
            }
        }
    }

    pub fn hessian_row_at(&self, p: &[f64], i: usize) -> DMatrix<f64> {
        let n = self.n();
        match &self.model {
            DemandModel::Linear { .. } => DMatrix::zeros(n, n),
            DemandModel::Mnl { b, .. } => {
                // With utilities v_k = a_k - b_k p_k and s = lambda:
                //   d lambda_i / d v_j = s_i (e_ij - s_j)
                //   d^2 lambda_i / d v_j d v_l
                //     = s_i (e_il - s_l)(e_ij - s_j) - s_i s_j (e_jl - s_l)
                // and each price derivative contributes a factor -b.
                let s = self.lambda_at(p);
                let kd = |x: usize, y: usize| if x == y { 1.0 } else { 0.0 };
                DMatrix::from_fn(n, n, |j, l| {
                    let dv = s[i] * (kd(i, l) - s[l]) * (kd(i, j) - s[j]) - s[i] * s[j] * (kd(j, l) - s[l]);
                    b[j] * b[l] * dv
                })
            }
        }
    }

    /// Grid scan of the regularity constants and sign conditions.
    pub fn scan_bounds(&self, grid_resolution: usize) -> Result<DemandBounds> {
        if grid_resolution < 2 {
            return Err(Error::validation(
                "grid_resolution",
                format!("must be at least 2, got {grid_resolution}"),
            ));
        }
        let n = self.n();
        let mut bounds = DemandBounds {
            m0: f64::INFINITY,
            m1: f64::INFINITY,
            max_gradient: 0.0,
            max_curvature: 0.0,
            max_demand: f64::NEG_INFINITY,
            max_share_total: f64::NEG_INFINITY,
            grid_resolution,
            violations: Vec::new(),
        };
        let mut lam = vec![0.0; n];
        for p in TensorGrid::new(&self.price_box, grid_resolution) {
            self.lambda_into(&p, &mut lam);
            let grad = self.gradient_at(&p);
            for i in 0..n {
                bounds.m0 = bounds.m0.min(lam[i].abs());
                bounds.max_demand = bounds.max_demand.max(lam[i]);
                bounds.m1 = bounds.m1.min(grad[(i, i)].abs());
                for j in 0..n {
                    bounds.max_gradient = bounds.max_gradient.max(grad[(i, j)].abs());
                    let bad = if i == j {
                        !(grad[(i, j)] < 0.0)
                    } else {
                        !(grad[(i, j)] > 0.0)
                    };
                    if bad && bounds.violations.len() < MAX_REPORTED_VIOLATIONS {
                        bounds.violations.push(RegularityViolation {
                            price: p.clone(),
                            seller: i,
                            wrt: j,
                            derivative: grad[(i, j)],
                        });
                    }
                }
                if !self.is_linear() {
                    let h = self.hessian_row_at(&p, i);
                    bounds.max_curvature = h.iter().fold(bounds.max_curvature, |m, v| m.max(v.abs()));
                }
            }
            bounds.max_share_total = bounds.max_share_total.max(lam.iter().sum());
        }
        Ok(bounds)
    }
}

const MAX_REPORTED_VIOLATIONS: usize = 32;

/// Default points per dimension for regularity scans.
pub fn default_grid_resolution(n: usize) -> usize {
    if n <= 3 {
        64
    } else {
        16
    }
}

/// Grid estimates of the regularity constants; not certified global extrema.
#[derive(Debug, Clone, Serialize)]
pub struct DemandBounds {
    /// min |lambda_i|
    pub m0: f64,
    /// min |d lambda_i / d p_i|
    pub m1: f64,
    /// max |d lambda_i / d p_j| over all i, j (own-price terms included)
    pub max_gradient: f64,
    /// max |d^2 lambda_i / d p_j d p_l|
    pub max_curvature: f64,
    pub max_demand: f64,
    pub max_share_total: f64,
    pub grid_resolution: usize,
    pub violations: Vec<RegularityViolation>,
}

impl DemandBounds {
    pub fn regular(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RegularityViolation {
    pub price: Vec<f64>,
    pub seller: usize,
    pub wrt: usize,
    pub derivative: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// Uniform on `[-sigma sqrt(3), sigma sqrt(3)]` per seller.
    BoundedUniform,
    Gaussian,
}

/// Zero-mean demand shocks with per-seller scale and optional cross-seller
/// correlation (applied through the Cholesky factor of `correlation`).
#[derive(Debug, Clone)]
pub struct NoiseSpec {
    kind: NoiseKind,
    sigma: Vec<f64>,
    correlation: DMatrix<f64>,
    cholesky: Option<DMatrix<f64>>,
}

impl NoiseSpec {
    pub fn new(kind: NoiseKind, sigma: Vec<f64>, correlation: Option<DMatrix<f64>>) -> Result<Self> {
        let n = sigma.len();
        if n == 0 {
            return Err(Error::validation("noise.sigma", "must be nonempty"));
        }
        for (i, &s) in sigma.iter().enumerate() {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::validation(
                    format!("noise.sigma[{i}]"),
                    format!("shocks must be non-degenerate (sigma > 0), got {s}"),
                ));
            }
        }
        let (correlation, cholesky) = match correlation {
            None => (DMatrix::identity(n, n), None),
            Some(c) => {
                if c.nrows() != n || c.ncols() != n {
                    return Err(Error::validation(
                        "noise.correlation",
                        format!("expected a {n}x{n} matrix"),
                    ));
                }
                for i in 0..n {
                    if (c[(i, i)] - 1.0).abs() > 1e-12 {
                        return Err(Error::validation(
                            format!("noise.correlation[{i}][{i}]"),
                            "diagonal must be 1",
                        ));
                    }
                    for j in 0..n {
                        if (c[(i, j)] - c[(j, i)]).abs() > 1e-12 || c[(i, j)].abs() > 1.0 {
                            return Err(Error::validation(
                                format!("noise.correlation[{i}][{j}]"),
                                "must be symmetric with entries in [-1, 1]",
                            ));
                        }
                    }
                }
                if c == DMatrix::identity(n, n) {
                    (c, None)
                } else {
                    let chol = nalgebra::Cholesky::new(c.clone())
                        .ok_or_else(|| Error::validation("noise.correlation", "must be positive definite"))?;
                    (c, Some(chol.l()))
                }
            }
        };
        Ok(Self {
            kind,
            sigma,
            correlation,
            cholesky,
        })
    }

    /// Independent bounded-uniform shocks with support no wider than `m0`, so
    /// realized demand stays nonnegative.
    pub fn default_for(bounds: &DemandBounds, n: usize) -> Result<Self> {
        let sigma = (bounds.m0 / 3f64.sqrt()).min(1.0);
        Self::new(NoiseKind::BoundedUniform, vec![sigma; n], None)
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn correlation(&self) -> &DMatrix<f64> {
        &self.correlation
    }

    pub fn n(&self) -> usize {
        self.sigma.len()
    }

    /// Largest possible |shock| per seller; infinite for Gaussian noise.
    pub fn support_radius(&self) -> Vec<f64> {
        match self.kind {
            NoiseKind::Gaussian => vec![f64::INFINITY; self.n()],
            NoiseKind::BoundedUniform => {
                let r = 3f64.sqrt();
                match &self.cholesky {
                    None => self.sigma.iter().map(|s| s * r).collect(),
                    Some(l) => (0..self.n())
                        .map(|i| self.sigma[i] * r * l.row(i).iter().map(|v| v.abs()).sum::<f64>())
                        .collect(),
                }
            }
        }
    }

    /// Fills `out` with one draw of the shock vector.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let r = 3f64.sqrt();
        for v in out.iter_mut() {
            *v = match self.kind {
                NoiseKind::BoundedUniform => rng.random_range(-r..r),
                NoiseKind::Gaussian => StandardNormal.sample(rng),
            };
        }
        if let Some(l) = &self.cholesky {
            let n = self.n();
            // In-place lower-triangular multiply, last row first.
            for i in (0..n).rev() {
                let mut acc = 0.0;
                for j in 0..=i {
                    acc += l[(i, j)] * out[j];
                }
                out[i] = acc;
            }
        }
        for (v, s) in out.iter_mut().zip(&self.sigma) {
            *v *= s;
        }
    }
}

/// One period's realized demand `lambda(p) + eps`.
pub fn sample_realized_demand<R: Rng + ?Sized>(
    d: &DemandSystem,
    noise: &NoiseSpec,
    p: &[f64],
    rng: &mut R,
) -> Result<Vec<f64>> {
    let mut out = d.mean_demand(p)?;
    let mut eps = vec![0.0; out.len()];
    noise.sample_into(rng, &mut eps);
    for (o, e) in out.iter_mut().zip(&eps) {
        *o += e;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::SimRng;
    use rand::SeedableRng;

    fn sym_linear() -> DemandSystem {
        let b = DMatrix::from_row_slice(2, 2, &[10.0, 4.0, 4.0, 10.0]);
        DemandSystem::linear(
            vec![100.0, 100.0],
            b,
            PriceBox::new(vec![1.0, 1.0], vec![9.0, 9.0]).unwrap(),
        )
        .unwrap()
    }

    fn mnl1() -> DemandSystem {
        DemandSystem::mnl(vec![0.0], vec![1.0], PriceBox::new(vec![1e-3], vec![4.0]).unwrap()).unwrap()
    }

    #[test]
    fn linear_mean_demand_at_nash() {
        let d = sym_linear();
        let lam = d.mean_demand(&[6.25, 6.25]).unwrap();
        assert!((lam[0] - 62.5).abs() < 1e-12);
        assert!((lam[1] - 62.5).abs() < 1e-12);
        // Nash FOC: lambda_i = b_ii p_i
        assert!((lam[0] - 10.0 * 6.25).abs() < 1e-12);
    }

    #[test]
    fn mnl_half_share_at_zero_utility() {
        // p = 0 is outside a positive box, so evaluate unchecked.
        let d = mnl1();
        assert!((d.lambda_at(&[0.0])[0] - 0.5).abs() < 1e-15);
        assert!((d.gradient_at(&[0.0])[(0, 0)] + 0.25).abs() < 1e-15);
        assert!(d.hessian_row_at(&[0.0], 0)[(0, 0)].abs() < 1e-15);
    }

    #[test]
    fn linear_gradient_is_constant() {
        let d = sym_linear();
        let g = d.demand_gradient(&[2.0, 7.0]).unwrap();
        assert_eq!(g, DMatrix::from_row_slice(2, 2, &[-10.0, 4.0, 4.0, -10.0]));
        assert_eq!(d.demand_hessian_row(&[3.0, 3.0], 1).unwrap(), DMatrix::zeros(2, 2));
    }

    #[test]
    fn outside_box_is_a_domain_error() {
        let d = sym_linear();
        assert!(matches!(
            d.mean_demand(&[0.5, 5.0]),
            Err(Error::Domain { seller: 0, .. })
        ));
        assert!(matches!(
            d.demand_gradient(&[5.0, 9.5]),
            Err(Error::Domain { seller: 1, .. })
        ));
    }

    #[test]
    fn linear_negative_demand_rejected_at_construction() {
        let b = DMatrix::from_row_slice(2, 2, &[25.0, 1.0, 2.5, 12.0]);
        let wide = PriceBox::new(vec![0.5, 0.5], vec![10.0, 10.0]).unwrap();
        let err = DemandSystem::linear(vec![80.0, 150.0], b, wide).unwrap_err();
        assert!(matches!(err, Error::Validation { ref field, .. } if field == "demand.a[0]"));
    }

    #[test]
    fn scan_bounds_linear_constants() {
        let bounds = sym_linear().scan_bounds(8).unwrap();
        assert_eq!(bounds.m1, 10.0);
        assert_eq!(bounds.max_gradient, 10.0);
        assert_eq!(bounds.max_curvature, 0.0);
        // min demand at corner (9, 1): 100 - 90 + 4
        assert!((bounds.m0 - 14.0).abs() < 1e-12);
        assert!(bounds.regular());
    }

    #[test]
    fn scan_bounds_zero_cross_effects() {
        let b = DMatrix::from_row_slice(2, 2, &[10.0, 0.0, 0.0, 7.0]);
        let d = DemandSystem::linear(
            vec![100.0, 100.0],
            b,
            PriceBox::new(vec![1.0, 1.0], vec![9.0, 9.0]).unwrap(),
        )
        .unwrap();
        let bounds = d.scan_bounds(4).unwrap();
        assert_eq!(bounds.max_gradient, 10.0);
        // Zero cross-price effects break strict substitutability.
        assert!(!bounds.regular());
        assert!(bounds.violations.iter().all(|v| v.seller != v.wrt));
    }

    #[test]
    fn scan_bounds_mnl_single_seller() {
        let bounds = mnl1().scan_bounds(64).unwrap();
        assert!(bounds.max_curvature > 0.0);
        assert!(bounds.m1 > 0.0);
        assert!(bounds.regular());
        assert!(mnl1().scan_bounds(1).is_err());
    }

    #[test]
    fn degenerate_noise_rejected() {
        assert!(NoiseSpec::new(NoiseKind::BoundedUniform, vec![0.0], None).is_err());
        assert!(NoiseSpec::new(NoiseKind::Gaussian, vec![1.0, -1.0], None).is_err());
    }

    #[test]
    fn bounded_uniform_support() {
        let d = sym_linear();
        let noise = NoiseSpec::new(NoiseKind::BoundedUniform, vec![1.0, 1.0], None).unwrap();
        let mut rng = SimRng::seed_from_u64(1);
        let r = 3f64.sqrt();
        for _ in 0..10_000 {
            let x = sample_realized_demand(&d, &noise, &[6.25, 6.25], &mut rng).unwrap();
            for v in x {
                assert!(v >= 62.5 - r && v <= 62.5 + r);
            }
        }
    }

    #[test]
    fn realized_demand_mean_converges() {
        let d = sym_linear();
        let noise = NoiseSpec::new(NoiseKind::BoundedUniform, vec![1.0, 1.0], None).unwrap();
        let mut rng = SimRng::seed_from_u64(99);
        let p = [4.0, 7.0];
        let lam = d.mean_demand(&p).unwrap();
        let draws = 1_000_000;
        let mut sum = [0.0; 2];
        for _ in 0..draws {
            let x = sample_realized_demand(&d, &noise, &p, &mut rng).unwrap();
            sum[0] += x[0];
            sum[1] += x[1];
        }
        for i in 0..2 {
            assert!((sum[i] / draws as f64 - lam[i]).abs() < 4.0 * 1.0 / 1000.0);
        }
    }

    #[test]
    fn correlated_noise_has_requested_correlation() {
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 0.6, 0.6, 1.0]);
        for kind in [NoiseKind::Gaussian, NoiseKind::BoundedUniform] {
            let noise = NoiseSpec::new(kind, vec![2.0, 0.5], Some(c.clone())).unwrap();
            let mut rng = SimRng::seed_from_u64(5);
            let mut e = [0.0; 2];
            let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
            let m = 200_000;
            for _ in 0..m {
                noise.sample_into(&mut rng, &mut e);
                sxx += e[0] * e[0];
                syy += e[1] * e[1];
                sxy += e[0] * e[1];
            }
            let corr = sxy / (sxx * syy).sqrt();
            assert!((corr - 0.6).abs() < 0.01, "{kind:?}: {corr}");
            assert!(((sxx / m as f64).sqrt() - 2.0).abs() < 0.02);
        }
    }

    #[test]
    fn default_noise_keeps_demand_nonnegative() {
        let d = sym_linear();
        let bounds = d.scan_bounds(16).unwrap();
        let noise = NoiseSpec::default_for(&bounds, 2).unwrap();
        assert_eq!(noise.kind(), NoiseKind::BoundedUniform);
        assert!(noise.support_radius().iter().all(|&r| r <= bounds.m0));
    }

    #[test]
    fn shrink_requires_room() {
        let b = PriceBox::new(vec![1.0], vec![2.0]).unwrap();
        let s = b.shrink(&[0.25]).unwrap();
        assert_eq!(s.lower(), &[1.25]);
        assert_eq!(s.upper(), &[1.75]);
        assert!(b.shrink(&[0.5]).is_err());
    }
}
