//! Joint experimentation laws over `{0,1}^n` and the conjecture matrices
//! they induce.
//!
//! Outcomes are indexed lexicographically with seller 0 as the most
//! significant bit, so the bitstring `"01"` (seller 0 off, seller 1 on) is
//! index 1. This ordering fixes both serialization and inverse-CDF sampling.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// Dense tables over `2^n` outcomes stay exact but grow fast.
pub const MAX_SELLERS: usize = 16;

const MASS_TOLERANCE: f64 = 1e-12;

/// Whether seller `i` experiments in outcome `index` of an `n`-seller table.
#[inline]
pub fn outcome_bit(index: usize, i: usize, n: usize) -> bool {
    (index >> (n - 1 - i)) & 1 == 1
}

pub fn outcome_to_bits(index: usize, n: usize) -> String {
    (0..n)
        .map(|i| if outcome_bit(index, i, n) { '1' } else { '0' })
        .collect()
}

pub fn bits_to_outcome(bits: &str) -> Result<usize> {
    let n = bits.len();
    if n == 0 || n > MAX_SELLERS {
        return Err(Error::validation(
            "",
            format!("outcome key {bits:?} must have 1..={MAX_SELLERS} digits"),
        ));
    }
    let mut index = 0usize;
    for c in bits.chars() {
        index <<= 1;
        match c {
            '0' => {}
            '1' => index |= 1,
            _ => {
                return Err(Error::validation(
                    "",
                    format!("outcome key {bits:?} must contain only '0' and '1'"),
                ))
            }
        }
    }
    Ok(index)
}

/// Parameterized families of designs.
#[derive(Debug, Clone, PartialEq)]
pub enum DesignSpec {
    /// Independent Bernoulli(q_i) experimentation.
    Independent { q: Vec<f64> },
    /// With probability `rho` every seller copies one shared Bernoulli(q) bit,
    /// otherwise bits are independent Bernoulli(q).
    CommonShockMixture { n: usize, rho: f64, q: f64 },
    /// Outcome masses in canonical order.
    ExplicitTable { n: usize, masses: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentDesign {
    n: usize,
    table: Vec<f64>,
    #[serde(skip)]
    cdf: Vec<f64>,
}

impl ExperimentDesign {
    pub fn build(spec: &DesignSpec) -> Result<Self> {
        match spec {
            DesignSpec::Independent { q } => {
                check_n(q.len())?;
                for (i, &qi) in q.iter().enumerate() {
                    if !(qi > 0.0 && qi < 1.0) {
                        return Err(Error::validation(
                            format!("q[{i}]"),
                            format!("marginal must lie in (0, 1), got {qi}"),
                        ));
                    }
                }
                Self::from_table(q.len(), product_table(q))
            }
            &DesignSpec::CommonShockMixture { n, rho, q } => {
                check_n(n)?;
                if !(0.0..1.0).contains(&rho) {
                    return Err(Error::validation("rho", format!("must lie in [0, 1), got {rho}")));
                }
                if !(q > 0.0 && q < 1.0) {
                    return Err(Error::validation("q", format!("must lie in (0, 1), got {q}")));
                }
                let mut table: Vec<f64> = product_table(&vec![q; n])
                    .into_iter()
                    .map(|m| (1.0 - rho) * m)
                    .collect();
                let all_on = (1usize << n) - 1;
                table[0] += rho * (1.0 - q);
                table[all_on] += rho * q;
                Self::from_table(n, table)
            }
            DesignSpec::ExplicitTable { n, masses } => Self::from_table(*n, masses.clone()),
        }
    }

    pub fn independent(q: Vec<f64>) -> Result<Self> {
        Self::build(&DesignSpec::Independent { q })
    }

    pub fn mixture(n: usize, rho: f64, q: f64) -> Result<Self> {
        Self::build(&DesignSpec::CommonShockMixture { n, rho, q })
    }

    /// Builds from `(bitstring, mass)` pairs; missing outcomes get zero mass.
    pub fn from_bitstrings<'a, I>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, f64)>,
    {
        let mut n = None;
        let mut pairs = Vec::new();
        for (bits, mass) in entries {
            let idx = bits_to_outcome(bits).map_err(|e| e.under("table"))?;
            match n {
                None => n = Some(bits.len()),
                Some(m) if m != bits.len() => {
                    return Err(Error::validation(
                        "table",
                        format!("outcome key {bits:?} has {} digits, expected {m}", bits.len()),
                    ))
                }
                _ => {}
            }
            pairs.push((idx, mass));
        }
        let n = n.ok_or_else(|| Error::validation("table", "must list at least one outcome"))?;
        let mut table = vec![0.0; 1 << n];
        for (idx, mass) in pairs {
            table[idx] += mass;
        }
        Self::from_table(n, table)
    }

    /// Validates a dense table. Requires nondegenerate marginals.
    pub fn from_table(n: usize, table: Vec<f64>) -> Result<Self> {
        let design = Self::from_table_allow_degenerate(n, table)?;
        for i in 0..n {
            let m = design.marginal(i);
            if !(m > 0.0 && m < 1.0) {
                return Err(Error::validation(
                    "table",
                    format!("seller {i} experiments with probability {m}; marginals must lie in (0, 1)"),
                ));
            }
        }
        Ok(design)
    }

    /// Like [`from_table`](Self::from_table) but permits marginals of 0 or 1
    /// (e.g. an all-experiment law used to exercise the hold rule).
    pub fn from_table_allow_degenerate(n: usize, table: Vec<f64>) -> Result<Self> {
        check_n(n)?;
        if table.len() != 1 << n {
            return Err(Error::validation(
                "table",
                format!("expected {} outcome masses, got {}", 1usize << n, table.len()),
            ));
        }
        if let Some(k) = table.iter().position(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(Error::validation(
                "table",
                format!("mass of outcome {} must be nonnegative", outcome_to_bits(k, n)),
            ));
        }
        let total: f64 = table.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::validation("table", format!("masses sum to {total}, expected 1")));
        }
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = table
            .iter()
            .map(|m| {
                acc += m;
                acc
            })
            .collect();
        // Round-off can leave the running sum just below 1; the last outcome
        // with positive mass must absorb every draw above it.
        let last_positive = table.iter().rposition(|&m| m > 0.0).unwrap_or(0);
        for c in cdf.iter_mut().skip(last_positive) {
            *c = f64::INFINITY;
        }
        Ok(Self { n, table, cdf })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn mass(&self, index: usize) -> f64 {
        self.table[index]
    }

    /// `P(Y_i = 1)`.
    pub fn marginal(&self, i: usize) -> f64 {
        self.table
            .iter()
            .enumerate()
            .filter(|(k, _)| outcome_bit(*k, i, self.n))
            .map(|(_, m)| m)
            .sum()
    }

    /// `P(Y_j = 1 | Y_i = arm)`.
    pub fn conditional(&self, j: usize, i: usize, arm: bool) -> Result<f64> {
        let (mut joint, mut given) = (0.0, 0.0);
        for (k, &m) in self.table.iter().enumerate() {
            if outcome_bit(k, i, self.n) == arm {
                given += m;
                if outcome_bit(k, j, self.n) {
                    joint += m;
                }
            }
        }
        if given <= 0.0 {
            return Err(Error::UndefinedConditional {
                seller: i,
                arm: arm as u8,
            });
        }
        Ok(joint / given)
    }

    /// Draws one outcome index by inverse CDF over the canonical ordering.
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let r: f64 = rng.random();
        self.cdf.partition_point(|&c| c <= r)
    }

    pub fn sample_period<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<bool> {
        let k = self.sample_index(rng);
        (0..self.n).map(|i| outcome_bit(k, i, self.n)).collect()
    }

    /// `A*_ij = ratio_ij (P(Y_j=1 | Y_i=1) - P(Y_j=1 | Y_i=0))`, zero diagonal.
    pub fn conjecture_matrix(&self, ratio: Option<&DMatrix<f64>>) -> Result<ConjectureMatrix> {
        let n = self.n;
        check_ratio(ratio, n)?;
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let diff = self.conditional(j, i, true)? - self.conditional(j, i, false)?;
                a[(i, j)] = ratio.map_or(1.0, |r| r[(i, j)]) * diff;
            }
        }
        ConjectureMatrix::new(a)
    }

    pub fn bitstring_table(&self) -> BTreeMap<String, f64> {
        self.table
            .iter()
            .enumerate()
            .map(|(k, &m)| (outcome_to_bits(k, self.n), m))
            .collect()
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 || n > MAX_SELLERS {
        return Err(Error::validation(
            "n",
            format!("seller count must be in 1..={MAX_SELLERS}, got {n}"),
        ));
    }
    Ok(())
}

fn check_ratio(ratio: Option<&DMatrix<f64>>, n: usize) -> Result<()> {
    if let Some(r) = ratio {
        if r.nrows() != n || r.ncols() != n {
            return Err(Error::validation("ratio", format!("expected a {n}x{n} matrix")));
        }
    }
    Ok(())
}

fn product_table(q: &[f64]) -> Vec<f64> {
    let n = q.len();
    (0..1usize << n)
        .map(|k| {
            (0..n)
                .map(|i| if outcome_bit(k, i, n) { q[i] } else { 1.0 - q[i] })
                .product()
        })
        .collect()
}

/// Conjecture matrix: zero diagonal, finite entries. Entry `(i, j)` is seller
/// i's conjectured co-movement `dp_j / dp_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConjectureMatrix {
    entries: DMatrix<f64>,
}

impl ConjectureMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() || entries.nrows() == 0 {
            return Err(Error::validation("conjecture", "must be a nonempty square matrix"));
        }
        for i in 0..entries.nrows() {
            if entries[(i, i)] != 0.0 {
                return Err(Error::validation(
                    format!("conjecture[{i}][{i}]"),
                    "diagonal entries must be exactly 0",
                ));
            }
        }
        if let Some(v) = entries.iter().find(|v| !v.is_finite()) {
            return Err(Error::validation("conjecture", format!("non-finite entry {v}")));
        }
        Ok(Self { entries })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            entries: DMatrix::zeros(n, n),
        }
    }

    /// Every off-diagonal entry equal to `value`.
    pub fn uniform(n: usize, value: f64) -> Self {
        Self {
            entries: DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { value }),
        }
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|&v| v == 0.0)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.entries.iter().all(|&v| v >= 0.0)
    }

    pub fn within_unit_bounds(&self) -> bool {
        self.entries.iter().all(|&v| (-1.0..=1.0).contains(&v))
    }

    /// Coordinatewise `self <= other`.
    pub fn le(&self, other: &Self) -> bool {
        self.entries.iter().zip(other.entries.iter()).all(|(a, b)| a <= b)
    }

    /// Row-major flattening, used in CSV exports.
    pub fn flattened(&self) -> Vec<f64> {
        let n = self.n();
        (0..n * n).map(|k| self.entries[(k / n, k % n)]).collect()
    }
}

/// Outcome counts over one batch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalDesign {
    n: usize,
    counts: Vec<u64>,
    total: u64,
}

impl EmpiricalDesign {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            counts: vec![0; 1 << n],
            total: 0,
        }
    }

    pub fn from_counts(n: usize, counts: Vec<u64>) -> Self {
        assert_eq!(counts.len(), 1 << n);
        let total = counts.iter().sum();
        Self { n, counts, total }
    }

    #[inline]
    pub fn record(&mut self, index: usize) {
        self.counts[index] += 1;
        self.total += 1;
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn frequencies(&self) -> Vec<f64> {
        let t = self.total.max(1) as f64;
        self.counts.iter().map(|&c| c as f64 / t).collect()
    }

    /// `(periods with Y_i = 1, periods with Y_i = 0)`.
    pub fn arm_counts(&self, i: usize) -> (u64, u64) {
        let high: u64 = self
            .counts
            .iter()
            .enumerate()
            .filter(|(k, _)| outcome_bit(*k, i, self.n))
            .map(|(_, c)| c)
            .sum();
        (high, self.total - high)
    }

    /// Both arms of seller `i` occurred.
    pub fn has_variation(&self, i: usize) -> bool {
        let (h, l) = self.arm_counts(i);
        h > 0 && l > 0
    }

    pub fn total_variation(&self, design: &ExperimentDesign) -> f64 {
        0.5 * self
            .frequencies()
            .iter()
            .zip(design.table())
            .map(|(f, q)| (f - q).abs())
            .sum::<f64>()
    }

    /// Empirical `A^k`; entries whose conditioning events have no mass are
    /// set to 0 and flagged `false`.
    pub fn conjecture(&self, ratio: Option<&DMatrix<f64>>) -> Result<EmpiricalConjecture> {
        let n = self.n;
        check_ratio(ratio, n)?;
        let mut a = DMatrix::zeros(n, n);
        let mut defined = DMatrix::from_element(n, n, true);
        for i in 0..n {
            let (n_high, n_low) = self.arm_counts(i);
            for j in 0..n {
                if i == j {
                    continue;
                }
                if n_high == 0 || n_low == 0 {
                    defined[(i, j)] = false;
                    continue;
                }
                let (mut both, mut j_only) = (0u64, 0u64);
                for (k, &c) in self.counts.iter().enumerate() {
                    if outcome_bit(k, j, n) {
                        if outcome_bit(k, i, n) {
                            both += c;
                        } else {
                            j_only += c;
                        }
                    }
                }
                let diff = both as f64 / n_high as f64 - j_only as f64 / n_low as f64;
                a[(i, j)] = ratio.map_or(1.0, |r| r[(i, j)]) * diff;
            }
        }
        Ok(EmpiricalConjecture {
            matrix: ConjectureMatrix::new(a)?,
            defined,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalConjecture {
    pub matrix: ConjectureMatrix,
    pub defined: DMatrix<bool>,
}

/// Exact frequency table of a sample sequence.
pub fn empirical_joint(samples: &[Vec<bool>]) -> Result<EmpiricalDesign> {
    let n = samples
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::validation("samples", "must be nonempty"))?;
    check_n(n)?;
    let mut emp = EmpiricalDesign::new(n);
    for s in samples {
        if s.len() != n {
            return Err(Error::validation(
                "samples",
                "all outcome vectors must have equal length",
            ));
        }
        let idx = s.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
        emp.record(idx);
    }
    Ok(emp)
}

/// Per-batch laws, constant within a batch, plus the declared limit law.
#[derive(Debug, Clone)]
pub struct DesignSchedule {
    per_batch: Vec<ExperimentDesign>,
    target: ExperimentDesign,
}

impl DesignSchedule {
    pub fn constant(design: ExperimentDesign) -> Self {
        Self {
            per_batch: vec![design.clone()],
            target: design,
        }
    }

    /// Batch `k` (1-based) uses `per_batch[k-1]`; the last entry repeats.
    pub fn per_batch(per_batch: Vec<ExperimentDesign>, target: ExperimentDesign) -> Result<Self> {
        if per_batch.is_empty() {
            return Err(Error::validation("design", "schedule must contain at least one design"));
        }
        if per_batch.iter().any(|d| d.n() != target.n()) {
            return Err(Error::validation(
                "design",
                "all designs must have the same seller count",
            ));
        }
        Ok(Self { per_batch, target })
    }

    pub fn for_batch(&self, k: usize) -> &ExperimentDesign {
        let idx = k.saturating_sub(1).min(self.per_batch.len() - 1);
        &self.per_batch[idx]
    }

    pub fn target(&self) -> &ExperimentDesign {
        &self.target
    }

    pub fn n(&self) -> usize {
        self.target.n()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::SimRng;
    use rand::SeedableRng;

    fn bits(s: &str) -> Vec<bool> {
        s.chars().map(|c| c == '1').collect()
    }

    #[test]
    fn independent_half_is_uniform() {
        let d = ExperimentDesign::independent(vec![0.5, 0.5]).unwrap();
        assert_eq!(d.table(), &[0.25, 0.25, 0.25, 0.25]);
    }

    #[test]
    fn mixture_at_zero_rho_is_independent() {
        let m = ExperimentDesign::mixture(2, 0.0, 0.3).unwrap();
        let i = ExperimentDesign::independent(vec![0.3, 0.3]).unwrap();
        for (a, b) in m.table().iter().zip(i.table()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn mixture_half_half_table() {
        let m = ExperimentDesign::mixture(2, 0.5, 0.5).unwrap();
        let t = m.bitstring_table();
        assert!((t["00"] - 0.375).abs() < 1e-15);
        assert!((t["11"] - 0.375).abs() < 1e-15);
        assert!((t["01"] - 0.125).abs() < 1e-15);
        assert!((t["10"] - 0.125).abs() < 1e-15);
    }

    #[test]
    fn invalid_designs_rejected() {
        assert!(ExperimentDesign::independent(vec![0.0, 0.5]).is_err());
        assert!(ExperimentDesign::mixture(2, 1.0, 0.5).is_err());
        assert!(ExperimentDesign::from_table(2, vec![0.3, 0.3, 0.3, 0.0]).is_err());
        assert!(ExperimentDesign::from_table(2, vec![0.5, 0.5, 0.0, 0.0]).is_err());
        assert!(ExperimentDesign::from_table(17, vec![]).is_err());
        let err = ExperimentDesign::from_bitstrings([("00", 0.4), ("11", 0.5)]).unwrap_err();
        assert!(matches!(err, Error::Validation { ref field, .. } if field == "table"));
    }

    #[test]
    fn independent_conjecture_vanishes() {
        let d = ExperimentDesign::independent(vec![0.2, 0.7, 0.5]).unwrap();
        let a = d.conjecture_matrix(None).unwrap();
        assert!(a.entries().iter().all(|v| v.abs() < 1e-15));
        let half = ExperimentDesign::independent(vec![0.5, 0.5]).unwrap();
        assert!(half.conjecture_matrix(None).unwrap().is_zero());
    }

    #[test]
    fn coupled_design_gives_unit_conjecture() {
        let d = ExperimentDesign::from_bitstrings([("11", 0.3), ("00", 0.7)]).unwrap();
        let a = d.conjecture_matrix(None).unwrap();
        assert_eq!(a.get(0, 1), 1.0);
        assert_eq!(a.get(1, 0), 1.0);
        assert_eq!(a.get(0, 0), 0.0);
    }

    #[test]
    fn undefined_conditional_errors() {
        let d = ExperimentDesign::from_table_allow_degenerate(2, vec![0.0, 0.0, 0.5, 0.5]).unwrap();
        assert!(matches!(
            d.conjecture_matrix(None),
            Err(Error::UndefinedConditional { seller: 0, arm: 0 })
        ));
    }

    #[test]
    fn mixture_conjecture_equals_rho_on_grid() {
        // Oracle: enumerate the 2-seller table and compute both conditionals
        // from raw masses.
        for &rho in &[0.0, 0.1, 0.3, 0.5, 0.8, 0.95] {
            for &q in &[0.1, 0.25, 0.5, 0.9] {
                let d = ExperimentDesign::mixture(2, rho, q).unwrap();
                let t = d.table();
                let p11_given_1 = t[3] / (t[2] + t[3]);
                let p11_given_0 = t[1] / (t[0] + t[1]);
                let oracle = p11_given_1 - p11_given_0;
                let a = d.conjecture_matrix(None).unwrap();
                assert!((oracle - rho).abs() < 1e-12);
                assert!((a.get(0, 1) - oracle).abs() < 1e-12);
                assert!((a.get(1, 0) - oracle).abs() < 1e-12);
            }
        }
        let d = ExperimentDesign::mixture(4, 0.4, 0.3).unwrap();
        let a = d.conjecture_matrix(None).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 0.0 } else { 0.4 };
                assert!((a.get(i, j) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ratio_scales_entries() {
        let d = ExperimentDesign::mixture(2, 0.5, 0.5).unwrap();
        let r = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.5, 1.0]);
        let a = d.conjecture_matrix(Some(&r)).unwrap();
        assert!((a.get(0, 1) - 1.0).abs() < 1e-12);
        assert!((a.get(1, 0) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn empirical_joint_frequencies() {
        let s: Vec<_> = ["00", "11", "00", "11"].iter().map(|b| bits(b)).collect();
        let e = empirical_joint(&s).unwrap();
        assert_eq!(e.frequencies(), vec![0.5, 0.0, 0.0, 0.5]);
        assert_eq!(e.arm_counts(0), (2, 2));
        assert!(empirical_joint(&[]).is_err());
    }

    #[test]
    fn single_sample_flags_missing_arm() {
        let e = empirical_joint(&[bits("10")]).unwrap();
        assert_eq!(e.frequencies(), vec![0.0, 0.0, 1.0, 0.0]);
        assert_eq!(e.arm_counts(1), (0, 1));
        assert!(!e.has_variation(1));
        let c = e.conjecture(None).unwrap();
        assert!(!c.defined[(1, 0)]);
        assert_eq!(c.matrix.get(1, 0), 0.0);
    }

    #[test]
    fn empirical_conjecture_extremes() {
        let pos: Vec<_> = ["11", "00", "11", "00"].iter().map(|b| bits(b)).collect();
        let c = empirical_joint(&pos).unwrap().conjecture(None).unwrap();
        assert_eq!(c.matrix.get(0, 1), 1.0);
        let neg: Vec<_> = ["10", "01", "10", "01"].iter().map(|b| bits(b)).collect();
        let c = empirical_joint(&neg).unwrap().conjecture(None).unwrap();
        assert_eq!(c.matrix.get(0, 1), -1.0);
    }

    #[test]
    fn empirical_conjecture_of_exact_table_matches_population() {
        // Mixture(0.5, 0.5) masses in eighths: reproduce as 8 samples.
        let d = ExperimentDesign::mixture(2, 0.5, 0.5).unwrap();
        let counts: Vec<u64> = d.table().iter().map(|m| (m * 8.0).round() as u64).collect();
        let e = EmpiricalDesign::from_counts(2, counts);
        let emp = e.conjecture(None).unwrap().matrix;
        let pop = d.conjecture_matrix(None).unwrap();
        assert!((emp.entries() - pop.entries()).abs().max() < 1e-15);
    }

    #[test]
    fn empirical_design_converges_in_total_variation() {
        let d = ExperimentDesign::mixture(2, 0.5, 0.5).unwrap();
        let mut rng = SimRng::seed_from_u64(11);
        let mut e = EmpiricalDesign::new(2);
        for _ in 0..100_000 {
            e.record(d.sample_index(&mut rng));
        }
        assert!(e.total_variation(&d) < 0.01);
    }

    #[test]
    fn empirical_conjecture_tracks_rho() {
        let d = ExperimentDesign::mixture(2, 0.3, 0.5).unwrap();
        let oracle = d.conjecture_matrix(None).unwrap().get(0, 1);
        let mut rng = SimRng::seed_from_u64(2024);
        let mut e = EmpiricalDesign::new(2);
        for _ in 0..200_000 {
            e.record(d.sample_index(&mut rng));
        }
        let c = e.conjecture(None).unwrap();
        assert!((c.matrix.get(0, 1) - oracle).abs() < 0.02);
        assert!(c.defined[(0, 1)]);
    }

    #[test]
    fn deterministic_table_always_samples_its_outcome() {
        let d = ExperimentDesign::from_table_allow_degenerate(2, vec![0.0, 0.0, 0.0, 1.0]).unwrap();
        let mut rng = SimRng::seed_from_u64(0);
        for _ in 0..1000 {
            assert_eq!(d.sample_period(&mut rng), vec![true, true]);
        }
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let d = ExperimentDesign::mixture(3, 0.2, 0.4).unwrap();
        let draw = |seed| {
            let mut rng = SimRng::seed_from_u64(seed);
            (0..500).map(|_| d.sample_index(&mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(7), draw(7));
        assert_ne!(draw(7), draw(8));
    }

    #[test]
    fn uniform_table_passes_chi_square() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let d = ExperimentDesign::independent(vec![0.5, 0.5]).unwrap();
        let mut rng = SimRng::seed_from_u64(31337);
        let draws = 100_000;
        let mut counts = [0u64; 4];
        for _ in 0..draws {
            counts[d.sample_index(&mut rng)] += 1;
        }
        let expected = draws as f64 / 4.0;
        let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        let critical = ChiSquared::new(3.0).unwrap().inverse_cdf(1.0 - 1e-3);
        assert!(stat < critical, "chi2 = {stat}, critical = {critical}");
    }

    #[test]
    fn bitstring_round_trip_ordering() {
        assert_eq!(bits_to_outcome("01").unwrap(), 1);
        assert_eq!(bits_to_outcome("10").unwrap(), 2);
        assert_eq!(outcome_to_bits(6, 3), "110");
        assert!(bits_to_outcome("0a").is_err());
    }
}
