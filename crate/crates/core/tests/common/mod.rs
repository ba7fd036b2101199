//! Shared fixtures and independent oracles for the integration tests.
//!
//! The oracles here recompute quantities from first principles (hand-written
//! formulas, plain Gaussian elimination, raw outcome counts) so they do not
//! share code paths with the library.

#![allow(dead_code)]

use std::path::PathBuf;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use switchback_cv::demand::{DemandSystem, PriceBox};
use switchback_cv::design::{outcome_bit, ConjectureMatrix};

pub fn plan_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("plans").join(name)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn symmetric_linear() -> DemandSystem {
    let b = DMatrix::from_row_slice(2, 2, &[10.0, 4.0, 4.0, 10.0]);
    let bx = PriceBox::new(vec![1.0, 1.0], vec![9.0, 9.0]).unwrap();
    DemandSystem::linear(vec![100.0, 100.0], b, bx).unwrap()
}

pub fn asymmetric_linear() -> DemandSystem {
    let b = DMatrix::from_row_slice(2, 2, &[25.0, 1.0, 2.5, 12.0]);
    let bx = PriceBox::new(vec![0.5, 1.0], vec![3.0, 10.0]).unwrap();
    DemandSystem::linear(vec![80.0, 150.0], b, bx).unwrap()
}

/// Random linear market with its own conjecture, drawn so that
/// `sum_j (1 + 3 A_ij) b_ij < 2 b_ii` holds for every row and mean demand
/// stays positive on the box `[1, 6]^n`.
pub struct LinearCase {
    pub demand: DemandSystem,
    pub a: ConjectureMatrix,
    pub b: DMatrix<f64>,
    pub intercept: Vec<f64>,
}

pub fn random_linear_case<R: Rng>(rng: &mut R, n: usize, max_conj: f64) -> LinearCase {
    loop {
        let mut b = DMatrix::zeros(n, n);
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            b[(i, i)] = rng.random_range(5.0..15.0);
            for j in 0..n {
                if i != j {
                    b[(i, j)] = rng.random_range(0.0..b[(i, i)] / n as f64);
                    a[(i, j)] = rng.random_range(0.0..max_conj);
                }
            }
        }
        if !sufficient_linear(&b, &a) {
            continue;
        }
        let (lo, hi) = (1.0, 6.0);
        // Big enough that the revenue maximizer sits inside the box most of the time.
        let intercept: Vec<f64> = (0..n).map(|i| b[(i, i)] * rng.random_range(7.0..10.0)).collect();
        let bx = PriceBox::new(vec![lo; n], vec![hi; n]).unwrap();
        let Ok(demand) = DemandSystem::linear(intercept.clone(), b.clone(), bx) else {
            continue;
        };
        return LinearCase {
            demand,
            a: ConjectureMatrix::new(a).unwrap(),
            b,
            intercept,
        };
    }
}

pub fn sufficient_linear(b: &DMatrix<f64>, a: &DMatrix<f64>) -> bool {
    let n = b.nrows();
    (0..n).all(|i| {
        let s: f64 = (0..n)
            .filter(|&j| j != i)
            .map(|j| (1.0 + 3.0 * a[(i, j)]) * b[(i, j)])
            .sum();
        s < 2.0 * b[(i, i)]
    })
}

/// `||Dz||_inf` for linear demand, written out entrywise:
/// `Dz_ii = 1/2 - b_ii / (2 beta_i)`, `Dz_ij = b_ij / (2 beta_i)`,
/// `beta_i = b_ii - sum_j A_ij b_ij`.
pub fn linear_dz_norm(b: &DMatrix<f64>, a: &DMatrix<f64>) -> f64 {
    let n = b.nrows();
    (0..n)
        .map(|i| {
            let beta = b[(i, i)] - (0..n).filter(|&j| j != i).map(|j| a[(i, j)] * b[(i, j)]).sum::<f64>();
            let own = (0.5 - b[(i, i)] / (2.0 * beta)).abs();
            let cross: f64 = (0..n).filter(|&j| j != i).map(|j| b[(i, j)] / (2.0 * beta)).sum();
            own + cross
        })
        .fold(0.0, f64::max)
}

/// Solves the linear CV first-order conditions
/// `a_i - b_ii p_i + sum_j b_ij p_j = p_i (b_ii - sum_j A_ij b_ij)`
/// by Gaussian elimination with partial pivoting.
pub fn linear_cv_oracle(intercept: &[f64], b: &DMatrix<f64>, a: &DMatrix<f64>) -> Vec<f64> {
    let n = intercept.len();
    let mut m = vec![vec![0.0; n + 1]; n];
    for i in 0..n {
        let beta = b[(i, i)] - (0..n).filter(|&j| j != i).map(|j| a[(i, j)] * b[(i, j)]).sum::<f64>();
        for j in 0..n {
            m[i][j] = if i == j { b[(i, i)] + beta } else { -b[(i, j)] };
        }
        m[i][n] = intercept[i];
    }
    for c in 0..n {
        let piv = (c..n).max_by(|&x, &y| m[x][c].abs().total_cmp(&m[y][c].abs())).unwrap();
        m.swap(c, piv);
        let pivot = m[c].clone();
        for (r, row) in m.iter_mut().enumerate() {
            if r != c {
                let f = row[c] / pivot[c];
                for (x, p) in row[c..].iter_mut().zip(&pivot[c..]) {
                    *x -= f * p;
                }
            }
        }
    }
    (0..n).map(|i| m[i][n] / m[i][i]).collect()
}

/// `P(j on | i on) - P(j on | i off)` from a table of outcome masses or counts.
pub fn conditional_difference(weights: &[f64], n: usize, i: usize, j: usize) -> Option<f64> {
    let (mut on, mut off, mut both, mut j_only) = (0.0, 0.0, 0.0, 0.0);
    for (k, &w) in weights.iter().enumerate() {
        let (bi, bj) = (outcome_bit(k, i, n), outcome_bit(k, j, n));
        if bi {
            on += w;
            if bj {
                both += w;
            }
        } else {
            off += w;
            if bj {
                j_only += w;
            }
        }
    }
    (on > 0.0 && off > 0.0).then(|| both / on - j_only / off)
}

pub fn inf_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// Uniform point in the box shrunk by `margin` of its width on each side.
pub fn interior_point<R: Rng>(rng: &mut R, bx: &PriceBox, margin: f64) -> Vec<f64> {
    (0..bx.n())
        .map(|i| {
            let w = bx.width(i);
            rng.random_range(bx.lower()[i] + margin * w..bx.upper()[i] - margin * w)
        })
        .collect()
}
