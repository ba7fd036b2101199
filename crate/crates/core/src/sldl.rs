//! Batched switchback experimentation with two-point least-squares
//! recalibration and damped reoptimization.
//!
//! In batch `k` every seller posts `p_hat_i + delta_i Y_i` where `Y` is drawn
//! from the batch's experiment design. Each seller then fits
//! `D = alpha - beta p` to its own (price, demand) pairs only, moves a
//! fraction `u_i` of the way toward the fitted revenue maximizer
//! `alpha / (2 beta)`, and projects onto the next shrunken box.

use log::warn;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::demand::{DemandSystem, NoiseSpec, PriceBox};
use crate::design::{outcome_bit, DesignSchedule, EmpiricalDesign};
use crate::equilibrium::check_rates;
use crate::error::{Error, Result};
use crate::SimRng;

pub const DEFAULT_SLOPE_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BatchSchedule {
    /// `I_k = ceil(first * growth^(k-1))` for `k = 1..=batches`.
    Geometric {
        first: usize,
        growth: f64,
        batches: usize,
    },
    Explicit {
        lengths: Vec<usize>,
    },
}

impl BatchSchedule {
    pub fn validate(&self) -> Result<()> {
        match self {
            BatchSchedule::Geometric { first, growth, batches } => {
                if *first < 2 {
                    return Err(Error::validation(
                        "sldl.batches.first",
                        "batch length must be at least 2",
                    ));
                }
                if !(growth.is_finite() && *growth > 1.0) {
                    return Err(Error::validation("sldl.batches.growth", "growth must exceed 1"));
                }
                if *batches == 0 {
                    return Err(Error::validation("sldl.batches.batches", "need at least one batch"));
                }
            }
            BatchSchedule::Explicit { lengths } => {
                if lengths.is_empty() {
                    return Err(Error::validation("sldl.batches.lengths", "need at least one batch"));
                }
                if let Some(k) = lengths.iter().position(|&l| l < 2) {
                    return Err(Error::validation(
                        format!("sldl.batches.lengths[{k}]"),
                        "batch length must be at least 2",
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn batches(&self) -> usize {
        match self {
            BatchSchedule::Geometric { batches, .. } => *batches,
            BatchSchedule::Explicit { lengths } => lengths.len(),
        }
    }

    /// Length of batch `k` (1-based). Past the declared horizon an explicit
    /// schedule repeats its last entry; a geometric one keeps growing.
    pub fn length(&self, k: usize) -> usize {
        match self {
            BatchSchedule::Geometric { first, growth, .. } => {
                let raw = *first as f64 * growth.powi(k as i32 - 1);
                // Guard against 64.0000000001 rounding up to 65.
                (raw - 1e-9 * raw).ceil() as usize
            }
            BatchSchedule::Explicit { lengths } => lengths[(k - 1).min(lengths.len() - 1)],
        }
    }

    pub fn lengths(&self) -> Vec<usize> {
        (1..=self.batches()).map(|k| self.length(k)).collect()
    }

    pub fn total_periods(&self) -> u64 {
        self.lengths().iter().map(|&l| l as u64).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DeltaSchedule {
    /// `delta^k = (ln(e I_k) / I_k)^(1/4)` for every seller.
    LogRatio,
    /// `delta^k = scale * k^(-exponent)` for every seller.
    PowerLaw { scale: f64, exponent: f64 },
    /// `per_seller[i][k-1]`; the last entry repeats past the list.
    Explicit { per_seller: Vec<Vec<f64>> },
}

impl DeltaSchedule {
    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            DeltaSchedule::LogRatio => {}
            DeltaSchedule::PowerLaw { scale, exponent } => {
                if !(scale.is_finite() && *scale > 0.0) {
                    return Err(Error::validation("sldl.delta.scale", "must be positive"));
                }
                if !(exponent.is_finite() && *exponent > 0.0) {
                    return Err(Error::validation(
                        "sldl.delta.exponent",
                        "must be positive so perturbations shrink",
                    ));
                }
            }
            DeltaSchedule::Explicit { per_seller } => {
                if per_seller.len() != n {
                    return Err(Error::validation(
                        "sldl.delta.per_seller",
                        format!("expected {n} lists, got {}", per_seller.len()),
                    ));
                }
                for (i, list) in per_seller.iter().enumerate() {
                    if list.is_empty() {
                        return Err(Error::validation(
                            format!("sldl.delta.per_seller[{i}]"),
                            "must be nonempty",
                        ));
                    }
                    for (k, &d) in list.iter().enumerate() {
                        if !(d.is_finite() && d > 0.0) {
                            return Err(Error::validation(
                                format!("sldl.delta.per_seller[{i}][{k}]"),
                                "perturbation must be positive",
                            ));
                        }
                        if k > 0 && d > list[k - 1] {
                            return Err(Error::validation(
                                format!("sldl.delta.per_seller[{i}][{k}]"),
                                "perturbations must be nonincreasing",
                            ));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Perturbation sizes for batch `k` (1-based) of length `len`.
    pub fn delta(&self, k: usize, len: usize, n: usize) -> Vec<f64> {
        match self {
            DeltaSchedule::LogRatio => {
                let i = len as f64;
                vec![((1.0 + i.ln()) / i).powf(0.25); n]
            }
            DeltaSchedule::PowerLaw { scale, exponent } => vec![scale * (k as f64).powf(-exponent); n],
            DeltaSchedule::Explicit { per_seller } => per_seller.iter().map(|l| l[(k - 1).min(l.len() - 1)]).collect(),
        }
    }
}

/// Whether `delta_i^k sqrt(I_k) / ln(I_k)` is increasing over the last half
/// of the horizon for every seller, a finite-horizon proxy for divergence.
pub fn information_grows(batches: &BatchSchedule, delta: &DeltaSchedule, n: usize) -> bool {
    let k_max = batches.batches();
    let series: Vec<Vec<f64>> = (1..=k_max)
        .map(|k| {
            let len = batches.length(k);
            let li = (len as f64).ln().max(f64::MIN_POSITIVE);
            delta
                .delta(k, len, n)
                .iter()
                .map(|d| d * (len as f64).sqrt() / li)
                .collect()
        })
        .collect();
    let start = k_max / 2;
    (0..n).all(|i| {
        let tail: Vec<f64> = series[start..].iter().map(|s| s[i]).collect();
        tail.len() < 2 || tail.windows(2).all(|w| w[1] > w[0])
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SldlConfig {
    pub u: Vec<f64>,
    pub initial_price: Vec<f64>,
    pub batches: BatchSchedule,
    pub delta: DeltaSchedule,
    pub slope_tolerance: f64,
    pub seed: u64,
    /// Keep the per-period log in each batch record.
    pub record_periods: bool,
}

impl SldlConfig {
    pub fn new(u: Vec<f64>, initial_price: Vec<f64>, batches: BatchSchedule, delta: DeltaSchedule, seed: u64) -> Self {
        Self {
            u,
            initial_price,
            batches,
            delta,
            slope_tolerance: DEFAULT_SLOPE_TOLERANCE,
            seed,
            record_periods: false,
        }
    }

    /// Checks rates, schedules, and that every shrunken box through
    /// `P^{K+1}` is nonempty with `p_hat^1` inside `P^1`.
    pub fn validate(&self, price_box: &PriceBox) -> Result<()> {
        let n = price_box.n();
        check_rates(&self.u, n).map_err(|e| e.under("sldl"))?;
        self.batches.validate()?;
        self.delta.validate(n)?;
        if !(self.slope_tolerance.is_finite() && self.slope_tolerance > 0.0) {
            return Err(Error::validation("sldl.slope_tolerance", "must be positive"));
        }
        if self.initial_price.len() != n {
            return Err(Error::validation(
                "sldl.initial_price",
                format!("expected {n} prices, got {}", self.initial_price.len()),
            ));
        }
        for k in 1..=self.batches.batches() + 1 {
            let delta = self.delta.delta(k, self.batches.length(k), n);
            for (i, &d) in delta.iter().enumerate() {
                if price_box.width(i) <= 2.0 * d {
                    return Err(Error::validation(
                        "sldl.delta",
                        format!(
                            "batch {k}: perturbation {:.6} for seller {i} leaves no room in a box of width {:.6}",
                            d,
                            price_box.width(i)
                        ),
                    ));
                }
            }
        }
        let first = price_box.shrink(&self.delta.delta(1, self.batches.length(1), n))?;
        if !first.contains(&self.initial_price) {
            return Err(Error::validation(
                "sldl.initial_price",
                format!("{:?} lies outside the first shrunken box", self.initial_price),
            ));
        }
        if !information_grows(&self.batches, &self.delta, n) {
            warn!("delta_k sqrt(I_k) / ln(I_k) is not increasing over the tail of the horizon");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OlsFit {
    pub alpha_hat: f64,
    pub beta_hat: f64,
    /// Number of observations at the higher and lower posted price.
    pub arms_high: usize,
    pub arms_low: usize,
    /// Prices took a single value; the fit is undefined.
    pub no_variation: bool,
}

/// Least-squares fit of `D = alpha - beta p`.
///
/// With exactly two distinct prices this is the line through the two
/// conditional demand means. Arm counts are only meaningful when prices take
/// at most two values.
pub fn ols_two_point(prices: &[f64], demands: &[f64]) -> Result<OlsFit> {
    if prices.len() != demands.len() {
        return Err(Error::validation("demands", "length must match prices"));
    }
    if prices.len() < 2 {
        return Err(Error::validation("prices", "need at least two observations"));
    }
    let m = prices.len() as f64;
    let p_bar = prices.iter().sum::<f64>() / m;
    let d_bar = demands.iter().sum::<f64>() / m;
    let hi = prices.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = prices.iter().cloned().fold(f64::INFINITY, f64::min);
    let arms_high = prices.iter().filter(|&&p| p == hi).count();
    if hi == lo {
        return Ok(OlsFit {
            alpha_hat: f64::NAN,
            beta_hat: f64::NAN,
            arms_high,
            arms_low: 0,
            no_variation: true,
        });
    }
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (p, d) in prices.iter().zip(demands) {
        sxy += (p - p_bar) * (d - d_bar);
        sxx += (p - p_bar) * (p - p_bar);
    }
    let beta_hat = -sxy / sxx;
    Ok(OlsFit {
        alpha_hat: d_bar + beta_hat * p_bar,
        beta_hat,
        arms_high,
        arms_low: prices.len() - arms_high,
        no_variation: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodRecord {
    pub t: u64,
    pub outcome: Vec<bool>,
    pub price: Vec<f64>,
    pub demand: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchRecord {
    pub batch: usize,
    pub length: usize,
    pub delta: Vec<f64>,
    /// Baseline `p_hat^k`.
    pub p_hat: Vec<f64>,
    /// `None` where the seller was held.
    pub alpha_hat: Vec<Option<f64>>,
    pub beta_hat: Vec<Option<f64>>,
    /// Mean demand per seller under the high and low arm.
    pub mean_high: Vec<Option<f64>>,
    pub mean_low: Vec<Option<f64>>,
    pub arms_high: Vec<u64>,
    pub arms_low: Vec<u64>,
    /// Only one arm occurred; the price was held.
    pub held: Vec<bool>,
    /// `|beta_hat|` under tolerance; target defaulted to the box ceiling.
    pub flat_slope: Vec<bool>,
    /// Fitted slope was negative (upward-sloping demand fit).
    pub negative_slope: Vec<bool>,
    pub clamped_low: Vec<bool>,
    pub clamped_high: Vec<bool>,
    pub empirical: EmpiricalDesign,
    /// Empirical conjecture `A^k`, row-major; undefined entries are 0.
    pub empirical_conjecture: Vec<f64>,
    pub conjecture_defined: Vec<bool>,
    /// Post-update `p_hat^{k+1}`.
    pub next_price: Vec<f64>,
    pub periods: Option<Vec<PeriodRecord>>,
}

/// Mutable state carried between batches.
#[derive(Debug, Clone)]
pub struct SldlState {
    pub p_hat: Vec<f64>,
    pub batch: usize,
    pub periods_elapsed: u64,
}

/// Runs batch `state.batch` and advances the state.
///
/// `noise = None` gives noiseless demand. `next_box` is `P^{k+1}`.
#[allow(clippy::too_many_arguments)]
pub fn run_batch(
    state: &mut SldlState,
    d: &DemandSystem,
    noise: Option<&NoiseSpec>,
    design: &crate::design::ExperimentDesign,
    length: usize,
    delta: &[f64],
    next_box: &PriceBox,
    u: &[f64],
    slope_tolerance: f64,
    record_periods: bool,
    rng: &mut SimRng,
) -> BatchRecord {
    let n = d.n();
    let outcomes = 1usize << n;
    let p_hat = state.p_hat.clone();
    // Posted prices and mean demand depend only on the outcome within a batch.
    let mut posted = vec![0.0; outcomes * n];
    let mut mean = vec![0.0; outcomes * n];
    for k in 0..outcomes {
        let row = &mut posted[k * n..(k + 1) * n];
        for i in 0..n {
            row[i] = p_hat[i] + if outcome_bit(k, i, n) { delta[i] } else { 0.0 };
        }
        d.lambda_into(&posted[k * n..(k + 1) * n], &mut mean[k * n..(k + 1) * n]);
    }

    let mut emp = EmpiricalDesign::new(n);
    let mut sum_high = vec![0.0; n];
    let mut sum_low = vec![0.0; n];
    let mut eps = vec![0.0; n];
    let mut periods = record_periods.then(|| Vec::with_capacity(length));
    for t in 0..length {
        let k = design.sample_index(rng);
        emp.record(k);
        if let Some(nz) = noise {
            nz.sample_into(rng, &mut eps);
        }
        let lam = &mean[k * n..(k + 1) * n];
        for i in 0..n {
            let demand = lam[i] + eps[i];
            if outcome_bit(k, i, n) {
                sum_high[i] += demand;
            } else {
                sum_low[i] += demand;
            }
        }
        if let Some(log) = periods.as_mut() {
            log.push(PeriodRecord {
                t: state.periods_elapsed + t as u64 + 1,
                outcome: (0..n).map(|i| outcome_bit(k, i, n)).collect(),
                price: posted[k * n..(k + 1) * n].to_vec(),
                demand: (0..n).map(|i| lam[i] + eps[i]).collect(),
            });
        }
    }

    let mut rec = BatchRecord {
        batch: state.batch,
        length,
        delta: delta.to_vec(),
        p_hat: p_hat.clone(),
        alpha_hat: vec![None; n],
        beta_hat: vec![None; n],
        mean_high: vec![None; n],
        mean_low: vec![None; n],
        arms_high: vec![0; n],
        arms_low: vec![0; n],
        held: vec![false; n],
        flat_slope: vec![false; n],
        negative_slope: vec![false; n],
        clamped_low: vec![false; n],
        clamped_high: vec![false; n],
        empirical_conjecture: Vec::new(),
        conjecture_defined: Vec::new(),
        next_price: vec![0.0; n],
        empirical: EmpiricalDesign::new(n),
        periods,
    };
    for i in 0..n {
        let (high, low) = emp.arm_counts(i);
        rec.arms_high[i] = high;
        rec.arms_low[i] = low;
        let raw = if high == 0 || low == 0 {
            rec.held[i] = true;
            p_hat[i]
        } else {
            let d_high = sum_high[i] / high as f64;
            let d_low = sum_low[i] / low as f64;
            // Two-point least squares is the secant through the arm means.
            let beta = -(d_high - d_low) / delta[i];
            let alpha = d_low + beta * p_hat[i];
            rec.mean_high[i] = Some(d_high);
            rec.mean_low[i] = Some(d_low);
            rec.alpha_hat[i] = Some(alpha);
            rec.beta_hat[i] = Some(beta);
            rec.negative_slope[i] = beta < 0.0;
            let target = if beta.abs() < slope_tolerance {
                rec.flat_slope[i] = true;
                d.price_box().upper()[i]
            } else {
                alpha / (2.0 * beta)
            };
            (1.0 - u[i]) * p_hat[i] + u[i] * target
        };
        let next = next_box.clamp_coord(i, raw);
        rec.clamped_low[i] = raw < next_box.lower()[i];
        rec.clamped_high[i] = raw > next_box.upper()[i];
        rec.next_price[i] = next;
    }
    let conj = emp
        .conjecture(None)
        .expect("no ratio supplied, so the conjecture cannot fail validation");
    rec.empirical_conjecture = conj.matrix.flattened();
    rec.conjecture_defined = (0..n * n).map(|k| conj.defined[(k / n, k % n)]).collect();
    rec.empirical = emp;

    state.p_hat = rec.next_price.clone();
    state.batch += 1;
    state.periods_elapsed += length as u64;
    rec
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationTrace {
    pub seed: u64,
    pub stream: u64,
    pub initial_price: Vec<f64>,
    pub batches: Vec<BatchRecord>,
    pub final_price: Vec<f64>,
}

impl SimulationTrace {
    /// Cumulative periods at the end of each batch.
    pub fn horizons(&self) -> Vec<u64> {
        self.batches
            .iter()
            .scan(0u64, |t, b| {
                *t += b.length as u64;
                Some(*t)
            })
            .collect()
    }

    /// `||p_hat^{k+1} - target||_inf` after each batch.
    pub fn errors_vs(&self, target: &[f64]) -> Vec<f64> {
        self.batches.iter().map(|b| inf_dist(&b.next_price, target)).collect()
    }
}

pub(crate) fn inf_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Random stream `stream` under `seed`; stream 0 is what [`run_sldl`] uses.
pub fn stream_rng(seed: u64, stream: u64) -> SimRng {
    let mut rng = SimRng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Runs all batches of `cfg` on random stream 0.
pub fn run_sldl(
    cfg: &SldlConfig,
    d: &DemandSystem,
    noise: Option<&NoiseSpec>,
    designs: &DesignSchedule,
) -> Result<SimulationTrace> {
    run_sldl_stream(cfg, d, noise, designs, 0)
}

/// Runs all batches of `cfg` on an independent random stream.
pub fn run_sldl_stream(
    cfg: &SldlConfig,
    d: &DemandSystem,
    noise: Option<&NoiseSpec>,
    designs: &DesignSchedule,
    stream: u64,
) -> Result<SimulationTrace> {
    let n = d.n();
    cfg.validate(d.price_box())?;
    if designs.n() != n {
        return Err(Error::validation(
            "design",
            format!("design covers {} sellers, demand has {n}", designs.n()),
        ));
    }
    if let Some(nz) = noise {
        if nz.n() != n {
            return Err(Error::validation(
                "noise.sigma",
                format!("expected {n} entries, got {}", nz.n()),
            ));
        }
    }
    let mut rng = stream_rng(cfg.seed, stream);
    let mut state = SldlState {
        p_hat: cfg.initial_price.clone(),
        batch: 1,
        periods_elapsed: 0,
    };
    let mut records = Vec::with_capacity(cfg.batches.batches());
    for k in 1..=cfg.batches.batches() {
        let len = cfg.batches.length(k);
        let delta = cfg.delta.delta(k, len, n);
        let next_delta = cfg.delta.delta(k + 1, cfg.batches.length(k + 1), n);
        let next_box = d.price_box().shrink(&next_delta)?;
        records.push(run_batch(
            &mut state,
            d,
            noise,
            designs.for_batch(k),
            len,
            &delta,
            &next_box,
            &cfg.u,
            cfg.slope_tolerance,
            cfg.record_periods,
            &mut rng,
        ));
    }
    Ok(SimulationTrace {
        seed: cfg.seed,
        stream,
        initial_price: cfg.initial_price.clone(),
        final_price: state.p_hat,
        batches: records,
    })
}
