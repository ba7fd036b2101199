//! Monte Carlo orchestration: replications of the learning dynamics against
//! a solved equilibrium target, convergence-rate fits, and sweeps over the
//! correlation of the experiment design.

use log::{info, warn};
use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::demand::{DemandSystem, NoiseSpec};
use crate::design::{ConjectureMatrix, DesignSchedule, ExperimentDesign};
use crate::equilibrium::{contraction_report, solve_fixed_point, SolverOptions};
use crate::error::{Error, Result};
use crate::sldl::{inf_dist, run_sldl_stream, stream_rng, BatchSchedule, SimulationTrace, SldlConfig};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Target {
    /// Fixed point with a zero conjecture.
    Nash,
    /// Fixed point under the conjecture induced by the design's limit law.
    CvFromDesign,
    Explicit {
        price: Vec<f64>,
    },
}

#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    pub demand: DemandSystem,
    /// `None` runs noiseless.
    pub noise: Option<NoiseSpec>,
    pub designs: DesignSchedule,
    pub sldl: SldlConfig,
    pub replications: usize,
    pub target: Target,
    pub solver: SolverOptions,
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::validation("harness.replications", "must be at least 1"));
        }
        self.sldl.validate(self.demand.price_box())
    }

    /// Limit of `delta_j / delta_i` used to scale the induced conjecture,
    /// read off the last declared batch. `None` when perturbations are equal.
    pub fn delta_ratio(&self) -> Option<DMatrix<f64>> {
        let n = self.demand.n();
        let k = self.sldl.batches.batches();
        let delta = self.sldl.delta.delta(k, self.sldl.batches.length(k), n);
        if delta.iter().all(|&d| d == delta[0]) {
            return None;
        }
        Some(DMatrix::from_fn(n, n, |i, j| delta[j] / delta[i]))
    }

    /// Conjecture the dynamics are expected to select.
    pub fn target_conjecture(&self) -> Result<ConjectureMatrix> {
        match &self.target {
            Target::Nash | Target::Explicit { .. } => Ok(ConjectureMatrix::zeros(self.demand.n())),
            Target::CvFromDesign => self.designs.target().conjecture_matrix(self.delta_ratio().as_ref()),
        }
    }

    /// Solves for the target price; fails if the solver does.
    pub fn resolve_target(&self) -> Result<Vec<f64>> {
        if let Target::Explicit { price } = &self.target {
            if price.len() != self.demand.n() {
                return Err(Error::validation(
                    "harness.target.price",
                    "length must match the seller count",
                ));
            }
            return Ok(price.clone());
        }
        let a = self.target_conjecture()?;
        let init = self.demand.price_box().midpoint();
        Ok(solve_fixed_point(&self.demand, &a, &self.sldl.u, &init, &self.solver)?.price)
    }

    /// Largest admissible geometric growth `gamma^(-4)` for the target map, or
    /// `None` when the map is not certified.
    pub fn growth_bound(&self) -> Result<Option<f64>> {
        let a = self.target_conjecture()?;
        let r = contraction_report(&self.demand, &a, &self.sldl.u, self.solver.grid_resolution)?;
        Ok(r.satisfied.then(|| r.gamma.powi(-4)))
    }

    /// Warns when the declared batch growth exceeds the estimated bound.
    pub fn check_growth(&self) -> Result<()> {
        if let BatchSchedule::Geometric { growth, .. } = self.sldl.batches {
            if let Some(bound) = self.growth_bound()? {
                if growth > bound {
                    warn!("batch growth {growth} exceeds the grid-estimated bound {bound:.4}");
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchStats {
    pub batch: usize,
    /// Cumulative periods at the end of the batch.
    pub horizon: u64,
    pub mean_err: f64,
    pub var_err: f64,
    pub q10: f64,
    pub q90: f64,
    pub mean_sq_err: f64,
    pub var_sq_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationStats {
    pub target: Vec<f64>,
    pub replications: usize,
    pub batches: Vec<BatchStats>,
    /// `errors[r][k]` is `||p_hat^{k+1} - target||_inf` for replication `r`.
    pub errors: Vec<Vec<f64>>,
    /// Mean over replications of the final price.
    pub final_mean_price: Vec<f64>,
}

impl ReplicationStats {
    pub fn final_mean_err(&self) -> f64 {
        self.batches.last().map_or(f64::NAN, |b| b.mean_err)
    }
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let m = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / m;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (m - 1.0)
    } else {
        0.0
    };
    (mean, var)
}

/// Linear-interpolated sample quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Runs every replication and returns their traces in replication order.
pub fn run_traces(plan: &ExperimentPlan) -> Result<Vec<SimulationTrace>> {
    plan.validate()?;
    (0..plan.replications as u64)
        .into_par_iter()
        .map(|r| run_sldl_stream(&plan.sldl, &plan.demand, plan.noise.as_ref(), &plan.designs, r))
        .collect()
}

/// Error statistics at each batch boundary, against the solved target.
pub fn run_replications(plan: &ExperimentPlan) -> Result<ReplicationStats> {
    let target = plan.resolve_target()?;
    plan.check_growth()?;
    info!("target {target:?}; running {} replications", plan.replications);
    let traces = run_traces(plan)?;
    Ok(summarize(&traces, target))
}

/// Aggregates traces (in replication order) against `target`.
pub fn summarize(traces: &[SimulationTrace], target: Vec<f64>) -> ReplicationStats {
    let errors: Vec<Vec<f64>> = traces.iter().map(|t| t.errors_vs(&target)).collect();
    let horizons = traces[0].horizons();
    let batches = (0..horizons.len())
        .map(|k| {
            let errs: Vec<f64> = errors.iter().map(|e| e[k]).collect();
            let sq: Vec<f64> = errs.iter().map(|e| e * e).collect();
            let (mean_err, var_err) = mean_var(&errs);
            let (mean_sq_err, var_sq_err) = mean_var(&sq);
            let mut sorted = errs;
            sorted.sort_by(f64::total_cmp);
            BatchStats {
                batch: k + 1,
                horizon: horizons[k],
                mean_err,
                var_err,
                q10: quantile(&sorted, 0.1),
                q90: quantile(&sorted, 0.9),
                mean_sq_err,
                var_sq_err,
            }
        })
        .collect();
    let n = target.len();
    let reps = traces.len() as f64;
    let final_mean_price = (0..n)
        .map(|i| traces.iter().map(|t| t.final_price[i]).sum::<f64>() / reps)
        .collect();
    ReplicationStats {
        target,
        replications: traces.len(),
        batches,
        errors,
        final_mean_price,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    /// `(T, mse)` for every batch.
    pub points: Vec<(f64, f64)>,
    /// First and last batch (1-based) in the fitted window.
    pub window: (usize, usize),
    pub slope: f64,
    pub intercept: f64,
    /// Percentile bootstrap interval over replications.
    pub slope_ci: (f64, f64),
    pub resamples: usize,
}

pub const DEFAULT_TAIL_FRACTION: f64 = 0.5;
pub const DEFAULT_RESAMPLES: usize = 1000;

/// Least-squares `(slope, intercept)` of `ln y` on `ln x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    if points.len() < 4 {
        return Err(Error::validation(
            "harness.tail_fraction",
            "rate fit needs at least 4 points",
        ));
    }
    if points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(Error::validation("points", "log-log fit needs positive coordinates"));
    }
    let m = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let xb = xs.iter().sum::<f64>() / m;
    let yb = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xb) * (y - yb)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - xb) * (x - xb)).sum();
    let slope = sxy / sxx;
    Ok((slope, yb - slope * xb))
}

/// Fits `ln mse ~ ln T` over the last `tail_fraction` of batches.
pub fn fit_rate(stats: &ReplicationStats, tail_fraction: f64, resamples: usize, seed: u64) -> Result<RateFit> {
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(Error::validation("harness.tail_fraction", "must lie in (0, 1]"));
    }
    let k = stats.batches.len();
    let len = ((k as f64) * tail_fraction).ceil() as usize;
    let start = k - len.min(k);
    let points: Vec<(f64, f64)> = stats
        .batches
        .iter()
        .map(|b| (b.horizon as f64, b.mean_sq_err))
        .collect();
    let (slope, intercept) = log_log_slope(&points[start..])?;

    let reps = stats.errors.len();
    let mut rng = stream_rng(seed, u64::MAX);
    let mut slopes = Vec::with_capacity(resamples);
    let mut picks = vec![0usize; reps];
    for _ in 0..resamples {
        for p in picks.iter_mut() {
            *p = rng.random_range(0..reps);
        }
        let boot: Vec<(f64, f64)> = (start..k)
            .map(|b| {
                let mse = picks.iter().map(|&r| stats.errors[r][b].powi(2)).sum::<f64>() / reps as f64;
                (points[b].0, mse)
            })
            .collect();
        if let Ok((s, _)) = log_log_slope(&boot) {
            slopes.push(s);
        }
    }
    slopes.sort_by(f64::total_cmp);
    let slope_ci = if slopes.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        (quantile(&slopes, 0.025), quantile(&slopes, 0.975))
    };
    Ok(RateFit {
        points,
        window: (start + 1, k),
        slope,
        intercept,
        slope_ci,
        resamples,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationRow {
    pub rho: f64,
    /// Induced conjecture, row-major.
    pub a_star: Vec<f64>,
    pub limit: Option<Vec<f64>>,
    pub simulated_mean: Option<Vec<f64>>,
    /// `||simulated_mean - limit||_inf`.
    pub gap: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationSweep {
    pub rows: Vec<CorrelationRow>,
    /// Solved limit prices are coordinatewise nondecreasing in `rho`.
    pub limits_nondecreasing: bool,
}

/// For each `rho`, swaps in a common-shock mixture design with experiment
/// probability `q`, solves the induced CV equilibrium and, when
/// `simulate` is set, runs the replications against it.
pub fn correlation_sweep(base: &ExperimentPlan, rhos: &[f64], q: f64, simulate: bool) -> Result<CorrelationSweep> {
    let n = base.demand.n();
    let mut rows = Vec::with_capacity(rhos.len());
    for &rho in rhos {
        let row = (|| -> Result<CorrelationRow> {
            let design = ExperimentDesign::mixture(n, rho, q)?;
            let plan = ExperimentPlan {
                designs: DesignSchedule::constant(design),
                target: Target::CvFromDesign,
                ..base.clone()
            };
            let a = plan.target_conjecture()?;
            let mut row = CorrelationRow {
                rho,
                a_star: a.flattened(),
                limit: None,
                simulated_mean: None,
                gap: None,
                failure: None,
            };
            match plan.resolve_target() {
                Ok(limit) => {
                    if simulate {
                        let stats = summarize(&run_traces(&plan)?, limit.clone());
                        row.gap = Some(inf_dist(&stats.final_mean_price, &limit));
                        row.simulated_mean = Some(stats.final_mean_price);
                    }
                    row.limit = Some(limit);
                }
                Err(e) => row.failure = Some(e.to_string()),
            }
            Ok(row)
        })();
        rows.push(row.unwrap_or_else(|e| CorrelationRow {
            rho,
            a_star: Vec::new(),
            limit: None,
            simulated_mean: None,
            gap: None,
            failure: Some(e.to_string()),
        }));
    }
    let mut order: Vec<&CorrelationRow> = rows.iter().filter(|r| r.limit.is_some()).collect();
    order.sort_by(|a, b| a.rho.total_cmp(&b.rho));
    let limits_nondecreasing = order.windows(2).all(|w| {
        let (a, b) = (w[0].limit.as_ref().unwrap(), w[1].limit.as_ref().unwrap());
        a.iter()
            .zip(b)
            .all(|(x, y)| *y >= *x - crate::equilibrium::MONOTONE_TOL)
    });
    Ok(CorrelationSweep {
        rows,
        limits_nondecreasing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demand::{NoiseKind, PriceBox};
    use crate::sldl::DeltaSchedule;

    fn plan(reps: usize, batches: usize) -> ExperimentPlan {
        let demand = DemandSystem::linear(
            vec![100.0, 100.0],
            DMatrix::from_row_slice(2, 2, &[10.0, 4.0, 4.0, 10.0]),
            PriceBox::new(vec![1.0, 1.0], vec![9.0, 9.0]).unwrap(),
        )
        .unwrap();
        ExperimentPlan {
            demand,
            noise: Some(NoiseSpec::new(NoiseKind::BoundedUniform, vec![1.0, 1.0], None).unwrap()),
            designs: DesignSchedule::constant(ExperimentDesign::independent(vec![0.5, 0.5]).unwrap()),
            sldl: SldlConfig::new(
                vec![0.5, 0.5],
                vec![3.0, 3.0],
                BatchSchedule::Geometric {
                    first: 32,
                    growth: 1.5,
                    batches,
                },
                DeltaSchedule::LogRatio,
                5,
            ),
            replications: reps,
            target: Target::Nash,
            solver: SolverOptions::default(),
        }
    }

    #[test]
    fn synthetic_slopes_are_exact() {
        let half: Vec<(f64, f64)> = (1..10)
            .map(|k| (10f64.powi(k), 3.0 * 10f64.powf(-0.5 * k as f64)))
            .collect();
        assert!((log_log_slope(&half).unwrap().0 + 0.5).abs() < 1e-10);
        let one: Vec<(f64, f64)> = (1..10).map(|k| (2f64.powi(k), 7.0 / 2f64.powi(k))).collect();
        assert!((log_log_slope(&one).unwrap().0 + 1.0).abs() < 1e-10);
        assert!(log_log_slope(&one[..3]).is_err());
    }

    #[test]
    fn single_replication_matches_trace() {
        let p = plan(1, 1);
        let stats = run_replications(&p).unwrap();
        let trace = crate::sldl::run_sldl(&p.sldl, &p.demand, p.noise.as_ref(), &p.designs).unwrap();
        let err = trace.errors_vs(&stats.target)[0];
        let b = &stats.batches[0];
        assert_eq!(b.mean_err, err);
        assert_eq!(b.q10, err);
        assert_eq!(b.q90, err);
        assert_eq!(b.var_err, 0.0);
        assert_eq!(b.mean_sq_err, err * err);
        assert_eq!(stats.final_mean_price, trace.final_price);
    }

    #[test]
    fn statistics_are_deterministic() {
        let p = plan(8, 8);
        let a = run_replications(&p).unwrap();
        let b = run_replications(&p).unwrap();
        assert_eq!(a, b);
        let f1 = fit_rate(&a, 0.5, 200, 1).unwrap();
        let f2 = fit_rate(&b, 0.5, 200, 1).unwrap();
        assert_eq!(f1, f2);
        assert_eq!(f1.window, (5, 8));
        assert!(f1.slope_ci.0 <= f1.slope_ci.1);
    }

    #[test]
    fn rate_fit_needs_four_points() {
        let stats = run_replications(&plan(2, 6)).unwrap();
        assert!(fit_rate(&stats, 0.5, 10, 0).is_err());
        assert!(fit_rate(&stats, 1.0, 10, 0).is_ok());
    }

    #[test]
    fn explicit_target_is_used_verbatim() {
        let mut p = plan(1, 2);
        p.target = Target::Explicit { price: vec![5.0, 5.0] };
        assert_eq!(p.resolve_target().unwrap(), vec![5.0, 5.0]);
        p.target = Target::Explicit { price: vec![5.0] };
        assert!(p.resolve_target().is_err());
    }

    #[test]
    fn correlation_sweep_limits_follow_curve() {
        let sweep = correlation_sweep(&plan(1, 2), &[0.0, 0.5, 0.999], 0.5, false).unwrap();
        assert!(sweep.limits_nondecreasing);
        for row in &sweep.rows {
            let want = 25.0 / (4.0 - row.rho);
            let limit = row.limit.as_ref().unwrap();
            assert!((limit[0] - want).abs() < 1e-8, "{row:?}");
            assert!((row.a_star[1] - row.rho).abs() < 1e-12);
        }
        let bad = correlation_sweep(&plan(1, 2), &[1.5], 0.5, false).unwrap();
        assert!(bad.rows[0].failure.is_some());
    }
}
