//! CSV and JSON writers for run artifacts, plus the run manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::ser::{SerializeSeq, Serializer};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::equilibrium::ConjectureSweep;
use crate::error::Result;
use crate::harness::{CorrelationSweep, ReplicationStats};
use crate::sldl::SimulationTrace;

/// Serializes a matrix as a list of rows.
pub fn ser_matrix<S: Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(m.nrows()))?;
    for i in 0..m.nrows() {
        let row: Vec<f64> = m.row(i).iter().copied().collect();
        seq.serialize_element(&row)?;
    }
    seq.end()
}

/// Shortest representation that parses back to the same `f64`.
fn num(x: f64) -> String {
    format!("{x:?}")
}

fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|&x| num(x)).collect::<Vec<_>>().join(";")
}

/// One row per (batch, seller). `target` fills `err_inf_vs_target`.
pub fn write_trace_csv<W: Write>(w: W, run_id: u64, trace: &SimulationTrace, target: Option<&[f64]>) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "run_id",
        "batch",
        "seller",
        "p_hat",
        "alpha_hat",
        "beta_hat",
        "arms_high",
        "arms_low",
        "skipped",
        "clamped_low",
        "clamped_high",
        "err_inf_vs_target",
    ])?;
    for b in &trace.batches {
        let err = target
            .map(|t| num(crate::sldl::inf_dist(&b.next_price, t)))
            .unwrap_or_default();
        for i in 0..b.next_price.len() {
            out.write_record([
                run_id.to_string(),
                b.batch.to_string(),
                i.to_string(),
                num(b.next_price[i]),
                opt_num(b.alpha_hat[i]),
                opt_num(b.beta_hat[i]),
                b.arms_high[i].to_string(),
                b.arms_low[i].to_string(),
                b.held[i].to_string(),
                b.clamped_low[i].to_string(),
                b.clamped_high[i].to_string(),
                err.clone(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_stats_csv<W: Write>(w: W, stats: &ReplicationStats) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["batch", "T", "mean_err", "mean_sq_err", "q10", "q90"])?;
    for b in &stats.batches {
        out.write_record([
            b.batch.to_string(),
            b.horizon.to_string(),
            num(b.mean_err),
            num(b.mean_sq_err),
            num(b.q10),
            num(b.q90),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Conjecture sweep: one row per path point; vectors are `;`-joined.
pub fn write_conjecture_sweep_csv<W: Write>(w: W, sweep: &ConjectureSweep) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "index",
        "conjecture",
        "price",
        "iterations",
        "certified_interior",
        "max_foc_residual",
        "failure",
    ])?;
    for p in &sweep.points {
        let (price, iters, cert, foc) = match &p.result {
            Some(r) => (
                join(&r.price),
                r.iterations.to_string(),
                r.certified_interior.to_string(),
                num(r.max_foc_residual()),
            ),
            None => Default::default(),
        };
        out.write_record([
            p.index.to_string(),
            join(&p.conjecture),
            price,
            iters,
            cert,
            foc,
            p.failure.clone().unwrap_or_default(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_correlation_sweep_csv<W: Write>(w: W, sweep: &CorrelationSweep) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["rho", "a_star", "limit", "simulated_mean", "gap", "failure"])?;
    for r in &sweep.rows {
        out.write_record([
            num(r.rho),
            join(&r.a_star),
            r.limit.as_deref().map(join).unwrap_or_default(),
            r.simulated_mean.as_deref().map(join).unwrap_or_default(),
            opt_num(r.gap),
            r.failure.clone().unwrap_or_default(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut f = fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Written next to every set of outputs. Contains nothing time-dependent, so
/// identical inputs give an identical manifest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: String,
    pub plan_sha256: String,
    pub seed: u64,
    pub replications: Option<usize>,
    pub artifacts: Vec<String>,
}

impl Manifest {
    pub fn new(subcommand: &str, plan_bytes: &[u8], seed: u64) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            subcommand: subcommand.to_string(),
            plan_sha256: sha256_hex(plan_bytes),
            seed,
            replications: None,
            artifacts: Vec::new(),
        }
    }
}

/// Output directory that records the files written into it.
pub struct ArtifactDir {
    dir: PathBuf,
    written: Vec<String>,
}

impl ArtifactDir {
    pub fn create(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            written: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        write_json(&self.dir.join(name), value)?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn csv(&mut self, name: &str, write: impl FnOnce(fs::File) -> Result<()>) -> Result<()> {
        write(fs::File::create(self.dir.join(name))?)?;
        self.written.push(name.to_string());
        Ok(())
    }

    /// Writes `manifest.json` listing every artifact so far.
    pub fn finish(mut self, mut manifest: Manifest) -> Result<PathBuf> {
        manifest.artifacts = std::mem::take(&mut self.written);
        let path = self.dir.join("manifest.json");
        write_json(&path, &manifest)?;
        Ok(path)
    }
}
