//! Point sets over a price box: tensor grids and Latin-hypercube samples.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

use crate::demand::PriceBox;
use crate::SimRng;

/// Tensor grid with `resolution` equally spaced points per coordinate,
/// endpoints included. Visits points in lexicographic order, first
/// coordinate slowest.
#[derive(Debug, Clone)]
pub struct TensorGrid<'a> {
    price_box: &'a PriceBox,
    resolution: usize,
    index: Vec<usize>,
    done: bool,
}

impl<'a> TensorGrid<'a> {
    pub fn new(price_box: &'a PriceBox, resolution: usize) -> Self {
        assert!(resolution >= 2, "grid resolution must be at least 2");
        Self {
            price_box,
            resolution,
            index: vec![0; price_box.n()],
            done: price_box.n() == 0,
        }
    }

    pub fn len(&self) -> usize {
        self.resolution.pow(self.price_box.n() as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn point(&self) -> Vec<f64> {
        let step = (self.resolution - 1) as f64;
        self.index
            .iter()
            .enumerate()
            .map(|(i, &k)| {
                let lo = self.price_box.lower()[i];
                let hi = self.price_box.upper()[i];
                if k + 1 == self.resolution {
                    hi
                } else {
                    lo + (hi - lo) * k as f64 / step
                }
            })
            .collect()
    }
}

impl Iterator for TensorGrid<'_> {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        if self.done {
            return None;
        }
        let p = self.point();
        let mut d = self.index.len();
        loop {
            if d == 0 {
                self.done = true;
                break;
            }
            d -= 1;
            self.index[d] += 1;
            if self.index[d] < self.resolution {
                break;
            }
            self.index[d] = 0;
        }
        Some(p)
    }
}

/// Latin-hypercube sample of `samples` points, one per stratum in every
/// coordinate. Deterministic for a given seed.
pub fn latin_hypercube(price_box: &PriceBox, samples: usize, seed: u64) -> Vec<Vec<f64>> {
    let n = price_box.n();
    let mut rng = SimRng::seed_from_u64(seed);
    let mut points = vec![vec![0.0; n]; samples];
    let mut strata: Vec<usize> = (0..samples).collect();
    for i in 0..n {
        strata.shuffle(&mut rng);
        let lo = price_box.lower()[i];
        let width = price_box.upper()[i] - lo;
        for (point, &s) in points.iter_mut().zip(&strata) {
            let offset: f64 = rng.random();
            point[i] = lo + width * (s as f64 + offset) / samples as f64;
        }
    }
    points
}

/// Points used for sup-norm estimates: the full tensor grid for `n <= 2`,
/// otherwise a 4096-point Latin hypercube.
pub fn scan_points(price_box: &PriceBox, resolution: usize) -> Vec<Vec<f64>> {
    if price_box.n() <= 2 {
        TensorGrid::new(price_box, resolution).collect()
    } else {
        latin_hypercube(price_box, 4096, 0x5eed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tensor_grid_covers_corners_in_order() {
        let b = PriceBox::new(vec![1.0, 2.0], vec![3.0, 4.0]).unwrap();
        let pts: Vec<_> = TensorGrid::new(&b, 3).collect();
        assert_eq!(pts.len(), 9);
        assert_eq!(pts[0], vec![1.0, 2.0]);
        assert_eq!(pts[1], vec![1.0, 3.0]);
        assert_eq!(pts[8], vec![3.0, 4.0]);
    }

    #[test]
    fn latin_hypercube_hits_every_stratum() {
        let b = PriceBox::new(vec![0.5, 0.5, 0.5], vec![1.5, 1.5, 1.5]).unwrap();
        let pts = latin_hypercube(&b, 50, 3);
        for i in 0..3 {
            let mut seen = [false; 50];
            for p in &pts {
                assert!(b.contains(p));
                seen[((p[i] - 0.5) * 50.0).floor() as usize] = true;
            }
            assert!(seen.iter().all(|&s| s));
        }
    }
}
