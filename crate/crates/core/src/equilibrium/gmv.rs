use serde::Serialize;

use crate::demand::DemandSystem;
use crate::error::{Error, Result};
use crate::grid::TensorGrid;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GmvResult {
    pub price: Vec<f64>,
    /// `sum_i p_i lambda_i(p)` at `price`.
    pub value: f64,
    pub sweeps: usize,
}

fn gmv(d: &DemandSystem, p: &[f64]) -> f64 {
    d.lambda_at(p).iter().zip(p).map(|(l, x)| l * x).sum()
}

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section maximization of `f` on `[lo, hi]`.
fn golden_max(mut lo: f64, mut hi: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > 1e-13 * (1.0 + lo.abs().max(hi.abs())) {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
    }
    0.5 * (lo + hi)
}

/// Joint maximizer of gross merchandise value `sum_i p_i lambda_i(p)` over the
/// price box: tensor-grid search, then coordinate-wise golden-section sweeps
/// within two grid cells of the incumbent. Deterministic.
pub fn gmv_optimize(d: &DemandSystem, grid_resolution: usize, refine_iters: usize) -> Result<GmvResult> {
    if grid_resolution < 2 {
        return Err(Error::validation("grid_resolution", "must be at least 2"));
    }
    let bx = d.price_box();
    let mut best = bx.midpoint();
    let mut best_val = f64::NEG_INFINITY;
    for p in TensorGrid::new(bx, grid_resolution) {
        let v = gmv(d, &p);
        if v > best_val {
            best_val = v;
            best = p;
        }
    }
    let cell: Vec<f64> = (0..d.n()).map(|i| bx.width(i) / (grid_resolution - 1) as f64).collect();
    let mut sweeps = 0;
    for _ in 0..refine_iters {
        sweeps += 1;
        let mut moved = 0.0_f64;
        for i in 0..d.n() {
            let lo = (best[i] - 2.0 * cell[i]).max(bx.lower()[i]);
            let hi = (best[i] + 2.0 * cell[i]).min(bx.upper()[i]);
            let mut trial = best.clone();
            let x = golden_max(lo, hi, |x| {
                trial[i] = x;
                gmv(d, &trial)
            });
            let mut cand = best.clone();
            cand[i] = x;
            let v = gmv(d, &cand);
            if v >= best_val {
                moved = moved.max((x - best[i]).abs());
                best = cand;
                best_val = v;
            }
        }
        if moved < 1e-12 {
            break;
        }
    }
    Ok(GmvResult {
        price: best,
        value: best_val,
        sweeps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demand::PriceBox;
    use nalgebra::DMatrix;

    #[test]
    fn symmetric_linear_gmv() {
        let d = DemandSystem::linear(
            vec![100.0, 100.0],
            DMatrix::from_row_slice(2, 2, &[10.0, 4.0, 4.0, 10.0]),
            PriceBox::new(vec![1.0, 1.0], vec![9.0, 9.0]).unwrap(),
        )
        .unwrap();
        let r = gmv_optimize(&d, 33, 200).unwrap();
        assert!((r.price[0] - 25.0 / 3.0).abs() < 1e-6);
        assert!((r.price[1] - 25.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn single_seller_is_monopoly_price() {
        let d = DemandSystem::linear(
            vec![30.0],
            DMatrix::from_element(1, 1, 4.0),
            PriceBox::new(vec![0.5], vec![7.0]).unwrap(),
        )
        .unwrap();
        let r = gmv_optimize(&d, 16, 10).unwrap();
        // Golden section on a flat peak resolves x to about sqrt(eps).
        assert!((r.price[0] - 30.0 / 8.0).abs() < 1e-6, "{r:?}");
    }
}
