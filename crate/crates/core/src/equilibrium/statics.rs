use serde::Serialize;

use super::{solve_fixed_point, FixedPointResult, SolverOptions};
use crate::demand::DemandSystem;
use crate::design::ConjectureMatrix;
use crate::error::Result;

/// Tolerance for ties in monotonicity verdicts.
pub const MONOTONE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub index: usize,
    pub conjecture: Vec<f64>,
    pub result: Option<FixedPointResult>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConjectureSweep {
    pub points: Vec<SweepPoint>,
    /// Path itself is coordinatewise nondecreasing.
    pub path_nondecreasing: bool,
    /// Solved prices are coordinatewise nondecreasing between consecutive
    /// solved points (within `MONOTONE_TOL`).
    pub prices_nondecreasing: bool,
    pub all_solved: bool,
}

/// Solves CV(A) at every conjecture on `path`, continuing past failures.
pub fn sweep_conjecture(
    d: &DemandSystem,
    u: &[f64],
    path: &[ConjectureMatrix],
    opts: &SolverOptions,
) -> Result<ConjectureSweep> {
    let init = d.price_box().midpoint();
    let points: Vec<SweepPoint> = path
        .iter()
        .enumerate()
        .map(|(index, a)| {
            let conjecture = a.flattened();
            match solve_fixed_point(d, a, u, &init, opts) {
                Ok(r) => SweepPoint {
                    index,
                    conjecture,
                    result: Some(r),
                    failure: None,
                },
                Err(e) => SweepPoint {
                    index,
                    conjecture,
                    result: None,
                    failure: Some(e.to_string()),
                },
            }
        })
        .collect();
    let path_nondecreasing = path.windows(2).all(|w| w[0].le(&w[1]));
    let solved: Vec<&FixedPointResult> = points.iter().filter_map(|p| p.result.as_ref()).collect();
    let prices_nondecreasing = solved
        .windows(2)
        .all(|w| w[0].price.iter().zip(&w[1].price).all(|(a, b)| *b >= *a - MONOTONE_TOL));
    Ok(ConjectureSweep {
        all_solved: solved.len() == points.len(),
        points,
        path_nondecreasing,
        prices_nondecreasing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demand::PriceBox;
    use nalgebra::DMatrix;

    #[test]
    fn symmetric_path_follows_closed_curve() {
        let d = DemandSystem::linear(
            vec![100.0, 100.0],
            DMatrix::from_row_slice(2, 2, &[10.0, 4.0, 4.0, 10.0]),
            PriceBox::new(vec![1.0, 1.0], vec![9.0, 9.0]).unwrap(),
        )
        .unwrap();
        let levels = [0.0, 0.25, 0.5, 0.75, 1.0];
        let path: Vec<_> = levels.iter().map(|&a| ConjectureMatrix::uniform(2, a)).collect();
        let s = sweep_conjecture(&d, &[0.5, 0.5], &path, &SolverOptions::default()).unwrap();
        assert!(s.all_solved && s.path_nondecreasing && s.prices_nondecreasing);
        for (pt, a) in s.points.iter().zip(levels) {
            let p = &pt.result.as_ref().unwrap().price;
            assert!((p[0] - 25.0 / (4.0 - a)).abs() < 1e-9);
        }
        let flat = vec![ConjectureMatrix::uniform(2, 0.3); 3];
        let s = sweep_conjecture(&d, &[0.5, 0.5], &flat, &SolverOptions::default()).unwrap();
        let p0 = &s.points[0].result.as_ref().unwrap().price;
        assert!(s.points.iter().all(|pt| &pt.result.as_ref().unwrap().price == p0));
    }

    #[test]
    fn failures_are_recorded_and_sweep_continues() {
        let d = DemandSystem::linear(
            vec![100.0, 100.0],
            DMatrix::from_row_slice(2, 2, &[10.0, 4.0, 4.0, 10.0]),
            PriceBox::new(vec![1.0, 1.0], vec![9.0, 9.0]).unwrap(),
        )
        .unwrap();
        let bad = ConjectureMatrix::new(DMatrix::from_row_slice(2, 2, &[0.0, 3.0, 3.0, 0.0])).unwrap();
        let path = vec![ConjectureMatrix::zeros(2), bad, ConjectureMatrix::uniform(2, 0.5)];
        let s = sweep_conjecture(&d, &[0.5, 0.5], &path, &SolverOptions::default()).unwrap();
        assert!(!s.all_solved);
        assert!(s.points[1].failure.is_some());
        assert!(s.points[2].result.is_some());
    }
}
